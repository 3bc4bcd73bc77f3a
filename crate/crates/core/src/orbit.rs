//! Long forward orbits on a Julia set.
//!
//! A Julia set of a hyperbolic map is repelling in every direction, so a
//! plain floating-point orbit started on it drifts off after a few dozen
//! steps. [`ForwardOrbit`] keeps the orbit on the set:
//!
//! * `UnitCircle` — for `a z^d` with `|a| = 1`, renormalize to `|z| = 1`
//!   after each step.
//! * `Shadow` — iterate a few dozen steps forward, snap the last point onto
//!   a reference sample of the Julia set, then pull it back along the inverse
//!   branches the float orbit followed and keep the first few points. The snap error shrinks by the expansion factor at every
//!   pulled-back step, so the block is an exact orbit segment to rounding.
//! * `Raw` — plain iteration, with escape detection only.

use std::collections::VecDeque;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridIndex;
use crate::rational_map::{RationalMap, DEFAULT_ESCAPE_RADIUS};

/// Reference points used to snap shadowed blocks back onto the Julia set.
#[derive(Debug, Clone)]
pub struct ShadowReference {
    index: GridIndex,
    /// Raw forward steps before each snap.
    pub horizon: usize,
    /// Pulled-back points kept per snap, at most `horizon`.
    pub block: usize,
    /// Snaps farther than this are reported as an escape.
    pub snap_radius: f64,
}

impl ShadowReference {
    pub fn new(points: Vec<Complex64>, horizon: usize, block: usize, snap_radius: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty shadow reference".into()));
        }
        if block == 0 || block > horizon || !(snap_radius > 0.0) {
            return Err(Error::InvalidArgument(
                "need 0 < block <= horizon and a positive snap radius".into(),
            ));
        }
        let cell = (snap_radius / 4.0).max(1e-9);
        Ok(Self {
            index: GridIndex::new(points, cell),
            horizon,
            block,
            snap_radius,
        })
    }

    pub fn from_sample(points: Vec<Complex64>) -> Result<Self> {
        Self::new(points, 24, 4, 0.05)
    }

    /// Projection of `z` onto the line through its two nearest reference
    /// points. Unlike the nearest point itself, this moves continuously with
    /// `z`, so tracked orbits are not confined to a finite set of states.
    fn snap(&self, z: Complex64) -> Option<Complex64> {
        let (p1, d1) = self.index.nearest(z)?;
        if d1 > self.snap_radius {
            return None;
        }
        let mut r = (2.0 * d1).max(f64::MIN_POSITIVE);
        loop {
            let mut second: Option<(Complex64, f64)> = None;
            self.index.for_each_in_ball(z, r, |p| {
                let d = (p - z).norm();
                if p != p1 && second.map_or(true, |(_, best)| d < best) {
                    second = Some((p, d));
                }
            });
            if let Some((p2, _)) = second {
                let u = p2 - p1;
                let t = ((z - p1) * u.conj()).re / u.norm_sqr();
                return Some(p1 + u * t);
            }
            if r > self.snap_radius {
                return Some(p1);
            }
            r *= 2.0;
        }
    }
}

#[derive(Debug, Clone)]
pub enum Tracking {
    Raw,
    UnitCircle,
    Shadow(Arc<ShadowReference>),
}

impl Tracking {
    /// `UnitCircle` when the map allows it, otherwise `Raw`.
    pub fn for_map(map: &RationalMap) -> Self {
        if map.has_unit_circle_julia_set() {
            Tracking::UnitCircle
        } else {
            Tracking::Raw
        }
    }

    /// `UnitCircle` when possible, otherwise shadowing against `reference`.
    pub fn with_reference(map: &RationalMap, reference: Arc<ShadowReference>) -> Self {
        if map.has_unit_circle_julia_set() {
            Tracking::UnitCircle
        } else {
            Tracking::Shadow(reference)
        }
    }
}

/// Iterator-like forward orbit `T(z0), T^2(z0), ...`.
pub struct ForwardOrbit<'a> {
    map: &'a RationalMap,
    tracking: Tracking,
    current: Complex64,
    step: u64,
    escape_radius: f64,
    pending: VecDeque<Complex64>,
}

impl<'a> ForwardOrbit<'a> {
    pub fn new(map: &'a RationalMap, z0: Complex64, tracking: Tracking) -> Self {
        Self {
            map,
            tracking,
            current: z0,
            step: 0,
            escape_radius: DEFAULT_ESCAPE_RADIUS,
            pending: VecDeque::new(),
        }
    }

    pub fn escape_radius(mut self, radius: f64) -> Self {
        self.escape_radius = radius;
        self
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn current(&self) -> Complex64 {
        self.current
    }

    #[inline]
    fn raw_step(&self, z: Complex64, step: u64) -> Result<Complex64> {
        match self.map.eval_finite(z) {
            Some(w) if w.norm() <= self.escape_radius => Ok(w),
            _ => Err(Error::OrbitEscaped { step }),
        }
    }

    /// Advances one step and returns the new point.
    #[inline]
    pub fn advance(&mut self) -> Result<Complex64> {
        let next_step = self.step + 1;
        let next = match &self.tracking {
            Tracking::Raw => self.raw_step(self.current, next_step)?,
            Tracking::UnitCircle => {
                let w = self.raw_step(self.current, next_step)?;
                let m = w.norm();
                if m == 0.0 {
                    return Err(Error::OrbitEscaped { step: next_step });
                }
                w / m
            }
            Tracking::Shadow(reference) => {
                if self.pending.is_empty() {
                    let reference = Arc::clone(reference);
                    self.refill(&reference)?;
                }
                self.pending.pop_front().expect("refilled block is non-empty")
            }
        };
        self.current = next;
        self.step = next_step;
        Ok(next)
    }

    /// Runs `horizon` raw steps, snaps the far end onto the reference and
    /// pulls it back along the raw path. Only the first `block` points are
    /// kept: there the snap error has been contracted by at least
    /// `lambda^-(horizon - block)`, and the next block starts from a
    /// pulled-back point rather than a reference point, so the tracked orbit
    /// does not collapse onto the finite reference.
    fn refill(&mut self, reference: &ShadowReference) -> Result<()> {
        let len = reference.block;
        let horizon = reference.horizon;
        let mut forward = Vec::with_capacity(horizon + 1);
        forward.push(self.current);
        let mut z = self.current;
        for k in 1..=horizon {
            z = self.raw_step(z, self.step + k as u64)?;
            forward.push(z);
        }
        let mut x = reference
            .snap(forward[horizon])
            .ok_or(Error::OrbitEscaped { step: self.step + horizon as u64 })?;
        for k in (len..horizon).rev() {
            x = self.map.preimage_near(x, forward[k])?;
        }
        let mut block = vec![x; len];
        for k in (1..len).rev() {
            x = self.map.preimage_near(x, forward[k])?;
            block[k - 1] = x;
        }
        self.pending.extend(block);
        Ok(())
    }
}

impl Iterator for ForwardOrbit<'_> {
    type Item = Result<Complex64>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.advance())
    }
}

/// Smallest `p <= max_period` with `|T^p z - z| <= tol * max(1, |z|)`.
pub fn exact_period(map: &RationalMap, z: Complex64, max_period: usize, tol: f64) -> Option<usize> {
    let mut w = z;
    for p in 1..=max_period {
        w = map.eval_finite(w)?;
        if (w - z).norm() <= tol * z.norm().max(1.0) {
            return Some(p);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::julia_sampler::inverse_iteration_sample;

    #[test]
    fn unit_circle_orbit_stays_on_circle() {
        let map = RationalMap::power(2).unwrap();
        let mut orbit = ForwardOrbit::new(&map, Complex64::from_polar(1.0, 0.123), Tracking::for_map(&map));
        for _ in 0..100_000 {
            let z = orbit.advance().unwrap();
            assert!((z.norm() - 1.0).abs() < 1e-14);
        }
        // Without renormalization the same orbit leaves the circle.
        let mut raw = ForwardOrbit::new(&map, Complex64::from_polar(1.0, 0.123), Tracking::Raw);
        let left = (0..200).any(|_| match raw.advance() {
            Ok(z) => (z.norm() - 1.0).abs() > 1e-3,
            Err(_) => true,
        });
        assert!(left);
    }

    #[test]
    fn shadowed_orbit_is_a_true_orbit_on_the_julia_set() {
        let map = RationalMap::quadratic(Complex64::new(0.1, 0.05)).unwrap();
        let sample = inverse_iteration_sample(&map, 20_000, 60, 5).unwrap();
        let reference = Arc::new(ShadowReference::from_sample(sample.points.clone()).unwrap());
        let z0 = sample.points[0];
        let mut orbit = ForwardOrbit::new(&map, z0, Tracking::Shadow(Arc::clone(&reference)));
        let mut prev = z0;
        let mut max_jump: f64 = 0.0;
        for _ in 0..20_000 {
            let z = orbit.advance().unwrap();
            // Each point is (to rounding) the image of the previous one,
            // except for tiny jumps at block boundaries.
            max_jump = max_jump.max((map.eval_finite(prev).unwrap() - z).norm());
            // And it stays on the Julia set: the nearest sample point is close.
            assert!(reference.index.nearest(z).unwrap().1 < 0.02);
            prev = z;
        }
        assert!(max_jump < 1e-8, "max jump {max_jump}");
        // Raw iteration of the same start leaves the set.
        let mut raw = ForwardOrbit::new(&map, z0, Tracking::Raw);
        let drifted = (0..400).any(|_| match raw.advance() {
            Ok(z) => reference.index.nearest(z).unwrap().1 > 0.05,
            Err(_) => true,
        });
        assert!(drifted);
    }

    #[test]
    fn shadowed_orbit_does_not_cycle_through_the_reference() {
        // A small reference makes any collapse onto it show up quickly as
        // repeated points.
        let map = RationalMap::quadratic(Complex64::new(0.05, 0.0)).unwrap();
        let sample = inverse_iteration_sample(&map, 2_000, 60, 3).unwrap();
        let reference = Arc::new(ShadowReference::from_sample(sample.points.clone()).unwrap());
        let orbit = ForwardOrbit::new(&map, sample.points[0], Tracking::Shadow(reference));
        let points: Vec<Complex64> = orbit.take(100_000).collect::<Result<_>>().unwrap();
        let mut keys: Vec<(u64, u64)> = points.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), points.len());
    }

    #[test]
    fn exact_period_detection() {
        let map = RationalMap::power(2).unwrap();
        let w = Complex64::from_polar(1.0, std::f64::consts::TAU / 3.0);
        assert_eq!(exact_period(&map, w, 10, 1e-9), Some(2));
        assert_eq!(exact_period(&map, Complex64::new(1.0, 0.0), 10, 1e-9), Some(1));
        assert_eq!(exact_period(&map, Complex64::from_polar(1.0, 0.3), 10, 1e-9), None);
    }
}
