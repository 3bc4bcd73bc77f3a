//! Equal-weight point-cloud measures, ball measures and pointwise dimension.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridIndex;
use crate::orbit::{ForwardOrbit, Tracking};
use crate::rational_map::RationalMap;
use crate::stats::linear_fit;

/// Smallest ball count used in any regression or ratio.
pub const MIN_BALL_COUNT: usize = 30;
pub const MIN_USABLE_RADII: usize = 4;
/// Number of trailing cutoffs scanned for the lower/upper estimates.
pub const CUTOFF_WINDOW: usize = 3;

const ATOM_RADIUS: f64 = 1e-9;
const ATOM_SCAN: usize = 1024;

/// Dyadic radii `r_k = r0 * 2^-k`, `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusSchedule {
    pub r0: f64,
    pub k_max: usize,
    radii: Vec<f64>,
}

impl RadiusSchedule {
    pub fn new(r0: f64, k_max: usize) -> Result<Self> {
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::InvalidArgument(format!("r0 must be positive, got {r0}")));
        }
        if k_max > 60 {
            return Err(Error::InvalidArgument(format!("k_max must be <= 60, got {k_max}")));
        }
        let radii = (0..=k_max).map(|k| r0 * 0.5f64.powi(k as i32)).collect();
        Ok(Self { r0, k_max, radii })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn r_min(&self) -> f64 {
        self.radii[self.k_max]
    }
}

impl Default for RadiusSchedule {
    fn default() -> Self {
        Self::new(0.5, 14).expect("default schedule is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimensionEstimate {
    /// Least-squares slope over the usable radii.
    pub dimension: f64,
    pub d_lower: f64,
    pub d_upper: f64,
    pub slope_stderr: f64,
    /// Inclusive range of schedule indices used.
    pub k_range: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    index: GridIndex,
    degenerate: bool,
}

impl EmpiricalMeasure {
    /// Builds the measure with grid cells of side `cell` (normally the
    /// smallest radius that will be queried).
    pub fn new(points: Vec<Complex64>, cell: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("empirical measure needs at least one point".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("empirical measure points must be finite".into()));
        }
        if !(cell.is_finite() && cell > 0.0) {
            return Err(Error::InvalidArgument("grid cell must be positive".into()));
        }
        let index = GridIndex::new(points, cell);
        let degenerate = has_atom(&index);
        Ok(Self { index, degenerate })
    }

    pub fn for_schedule(points: Vec<Complex64>, sched: &RadiusSchedule) -> Result<Self> {
        Self::new(points, sched.r_min())
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Sample points in index order.
    pub fn points(&self) -> &[Complex64] {
        self.index.points()
    }

    /// Whether a sizeable share of the mass sits on a single point.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn index(&self) -> &GridIndex {
        &self.index
    }

    /// Number of sample points with `|p - z| < r`.
    pub fn ball_count(&self, z: Complex64, r: f64) -> usize {
        self.index.count_in_ball(z, r)
    }

    /// `mu(N_r(z))`.
    pub fn ball_measure(&self, z: Complex64, r: f64) -> f64 {
        self.ball_count(z, r) as f64 / self.len() as f64
    }
}

fn has_atom(index: &GridIndex) -> bool {
    let n = index.len();
    let threshold = (n / ATOM_SCAN).max(2);
    index
        .points()
        .iter()
        .step_by((n / ATOM_SCAN).max(1))
        .take(ATOM_SCAN)
        .any(|&p| index.count_in_ball(p, ATOM_RADIUS) >= threshold)
}

/// Empirical measure of the orbit `z0, T z0, ..., T^{n-1} z0`.
pub fn birkhoff_measure(map: &RationalMap, z0: Complex64, n: usize, sched: &RadiusSchedule) -> Result<EmpiricalMeasure> {
    birkhoff_measure_with(map, z0, n, sched, Tracking::for_map(map))
}

pub fn birkhoff_measure_with(
    map: &RationalMap,
    z0: Complex64,
    n: usize,
    sched: &RadiusSchedule,
    tracking: Tracking,
) -> Result<EmpiricalMeasure> {
    if n < 1000 {
        return Err(Error::InvalidArgument(format!("Birkhoff measure needs n >= 1000, got {n}")));
    }
    let mut orbit = ForwardOrbit::new(map, z0, tracking);
    let mut points = Vec::with_capacity(n);
    points.push(z0);
    for _ in 1..n {
        points.push(orbit.advance()?);
    }
    EmpiricalMeasure::for_schedule(points, sched)
}

/// Indices `k` of the schedule whose ball counts are regression grade:
/// at least [`MIN_BALL_COUNT`] points and not the whole sample.
fn usable_range(counts: &[usize], total: usize) -> Vec<usize> {
    let ok: Vec<usize> = (0..counts.len())
        .filter(|&k| counts[k] >= MIN_BALL_COUNT && counts[k] < total)
        .collect();
    // Counts are monotone in k, so `ok` is contiguous; keep the first run anyway.
    match ok.first() {
        Some(&first) => ok.iter().copied().enumerate().take_while(|&(i, k)| k == first + i).map(|(_, k)| k).collect(),
        None => ok,
    }
}

/// Slope of `log y` against `log x` for prefixes of the usable rows ending
/// at each of the last [`CUTOFF_WINDOW`] cutoffs (prefixes of at least three rows).
pub(crate) fn cutoff_slopes<F: Fn(&[usize]) -> f64>(rows: &[usize], fit: F) -> Vec<f64> {
    let len = rows.len();
    ((len + 1).saturating_sub(CUTOFF_WINDOW).max(3)..=len)
        .map(|end| fit(&rows[..end]))
        .collect()
}

pub fn local_dimension(mu: &EmpiricalMeasure, z: Complex64, sched: &RadiusSchedule) -> Result<DimensionEstimate> {
    let radii = sched.radii();
    let counts: Vec<usize> = radii.iter().map(|&r| mu.ball_count(z, r)).collect();
    let rows = usable_range(&counts, mu.len());
    if rows.len() < MIN_USABLE_RADII {
        return Err(Error::InsufficientResolution {
            usable: rows.len(),
            required: MIN_USABLE_RADII,
        });
    }
    let total = mu.len() as f64;
    let fit_rows = |sel: &[usize]| {
        let x: Vec<f64> = sel.iter().map(|&k| radii[k].ln()).collect();
        let y: Vec<f64> = sel.iter().map(|&k| (counts[k] as f64 / total).ln()).collect();
        linear_fit(&x, &y)
    };
    let full = fit_rows(&rows);
    let slopes = cutoff_slopes(&rows, |sel| fit_rows(sel).slope.max(0.0));
    let dimension = full.slope.max(0.0);
    Ok(DimensionEstimate {
        dimension,
        d_lower: slopes.iter().copied().fold(dimension, f64::min),
        d_upper: slopes.iter().copied().fold(dimension, f64::max),
        slope_stderr: full.slope_stderr,
        k_range: (rows[0], rows[rows.len() - 1]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityEntry {
    pub probe: usize,
    pub n: u32,
    /// `mu(N_{2^-n}) / mu(N_{2^-(n+1)})`; NaN when the inner ball is empty.
    pub value: f64,
    /// `None` when the inner ball holds fewer than [`MIN_BALL_COUNT`] points.
    pub pass: Option<bool>,
    pub outer_count: usize,
    pub inner_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularitySummary {
    pub n: u32,
    pub checked: usize,
    pub insufficient: usize,
    pub violations: usize,
    pub violation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub entries: Vec<RegularityEntry>,
    pub per_n: Vec<RegularitySummary>,
    pub degenerate: bool,
}

impl RegularityReport {
    pub fn violations(&self) -> usize {
        self.per_n.iter().map(|s| s.violations).sum()
    }

    pub fn checked(&self) -> usize {
        self.per_n.iter().map(|s| s.checked).sum()
    }
}

/// Tests `mu(N_{2^-n}(z)) <= n^2 mu(N_{2^-(n+1)}(z))` for every probe and
/// every `n` in `n_lo..=n_hi`.
pub fn check_weak_diametric_regularity(
    mu: &EmpiricalMeasure,
    probes: &[Complex64],
    n_lo: u32,
    n_hi: u32,
) -> Result<RegularityReport> {
    if n_lo < 1 || n_lo > n_hi || n_hi > 60 {
        return Err(Error::InvalidArgument(format!("bad regularity range [{n_lo}, {n_hi}]")));
    }
    let mut entries = Vec::new();
    let mut per_n = Vec::new();
    for n in n_lo..=n_hi {
        let outer_r = 0.5f64.powi(n as i32);
        let mut summary = RegularitySummary {
            n,
            checked: 0,
            insufficient: 0,
            violations: 0,
            violation_fraction: 0.0,
        };
        for (probe, &z) in probes.iter().enumerate() {
            let outer = mu.ball_count(z, outer_r);
            let inner = mu.ball_count(z, outer_r / 2.0);
            let pass = if inner < MIN_BALL_COUNT {
                summary.insufficient += 1;
                None
            } else {
                summary.checked += 1;
                let ok = outer as u128 <= (n as u128) * (n as u128) * inner as u128;
                if !ok {
                    summary.violations += 1;
                }
                Some(ok)
            };
            entries.push(RegularityEntry {
                probe,
                n,
                value: if inner == 0 { f64::NAN } else { outer as f64 / inner as f64 },
                pass,
                outer_count: outer,
                inner_count: inner,
            });
        }
        if summary.checked > 0 {
            summary.violation_fraction = summary.violations as f64 / summary.checked as f64;
        }
        per_n.push(summary);
    }
    Ok(RegularityReport {
        entries,
        per_n,
        degenerate: mu.is_degenerate(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularRadius {
    pub rho: f64,
    /// Final interval `[lo, hi)` of radii containing `rho`.
    pub interval: (f64, f64),
    /// Sample count in `[rho - h, rho + h)`, `h = r / 4^(depth+1)`.
    pub annulus_count: usize,
    /// `2^-depth * #N_{2r}(z)`; `annulus_count` never exceeds it.
    pub bound: f64,
}

/// Quadrisection search for a radius `rho` in `(r, 2r)` whose thin annulus
/// carries little mass.
///
/// Starting from `I_0 = [r, 2r)`, each level keeps the first quarter whose
/// annulus mass is at most half that of its parent.
pub fn find_regular_radius(mu: &EmpiricalMeasure, z: Complex64, r: f64, depth: u32) -> Result<RegularRadius> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if depth == 0 || depth > 24 {
        return Err(Error::InvalidArgument(format!("depth must be in [1, 24], got {depth}")));
    }
    // Interval endpoints in units of r; dyadic fractions, so exact.
    let radius = |t: f64| r * t;
    let mass = |a: f64, b: f64| mu.ball_count(z, radius(b)) - mu.ball_count(z, radius(a));
    let (mut lo, mut width) = (1.0f64, 1.0f64);
    let mut m = mass(lo, lo + width);
    for _ in 0..depth {
        let quarter = width / 4.0;
        let (q, mq) = (0..4)
            .map(|j| {
                let a = lo + j as f64 * quarter;
                (a, mass(a, a + quarter))
            })
            .find(|&(_, mq)| 2 * mq <= m)
            .ok_or_else(|| Error::Internal("no quarter halves the annulus mass".into()))?;
        lo = q;
        width = quarter;
        m = mq;
    }
    let mid = lo + width / 2.0;
    let half = width / 4.0;
    Ok(RegularRadius {
        rho: radius(mid),
        interval: (radius(lo), radius(lo + width)),
        annulus_count: mass(mid - half, mid + half),
        bound: mu.ball_count(z, 2.0 * r) as f64 * 0.5f64.powi(depth as i32),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn haar(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..TAU))).collect()
    }

    fn disk(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::from_polar(rng.gen::<f64>().sqrt(), rng.gen_range(0.0..TAU)))
            .collect()
    }

    #[test]
    fn schedule_is_dyadic() {
        let s = RadiusSchedule::default();
        assert_eq!(s.radii().len(), 15);
        assert!(s.radii().windows(2).all(|w| w[1] / w[0] == 0.5));
        assert!(RadiusSchedule::new(-0.5, 4).is_err());
    }

    #[test]
    fn trivial_ball_measures() {
        let mu = EmpiricalMeasure::new(haar(1000, 1), 0.01).unwrap();
        assert_eq!(mu.ball_measure(Complex64::new(0.3, 0.0), 10.0), 1.0);
        assert_eq!(mu.ball_measure(mu.points()[0], 0.0), 0.0);
    }

    #[test]
    fn haar_arc_measure() {
        let n = 1_000_000;
        let mu = EmpiricalMeasure::new(haar(n, 2), 1e-3).unwrap();
        let expected = 2.0 / PI * (0.1f64).asin();
        let z = Complex64::from_polar(1.0, 0.7);
        let got = mu.ball_measure(z, 0.2);
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((got - expected).abs() < 3.0 * se, "{got} vs {expected}");
    }

    #[test]
    fn circle_and_disk_dimensions() {
        let sched = RadiusSchedule::default();
        let circle = EmpiricalMeasure::for_schedule(haar(200_000, 3), &sched).unwrap();
        let d = local_dimension(&circle, Complex64::from_polar(1.0, 2.0), &sched).unwrap();
        assert!((d.dimension - 1.0).abs() < 0.1, "{d:?}");
        assert!(d.d_lower <= d.dimension && d.dimension <= d.d_upper);

        let area = EmpiricalMeasure::for_schedule(disk(1_000_000, 4), &sched).unwrap();
        let d = local_dimension(&area, Complex64::new(0.1, -0.2), &sched).unwrap();
        assert!((d.dimension - 2.0).abs() < 0.1, "{d:?}");
    }

    #[test]
    fn atomic_sample_has_no_resolution() {
        let p = Complex64::new(0.5, 0.5);
        let mu = EmpiricalMeasure::new(vec![p; 5000], 1e-4).unwrap();
        assert!(mu.is_degenerate());
        let err = local_dimension(&mu, p, &RadiusSchedule::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientResolution { usable: 0, .. }));
    }

    #[test]
    fn birkhoff_measure_of_fixed_point_is_degenerate() {
        let map = RationalMap::power(2).unwrap();
        let sched = RadiusSchedule::default();
        let mu = birkhoff_measure(&map, Complex64::new(1.0, 0.0), 2000, &sched).unwrap();
        assert!(mu.is_degenerate());
        assert_eq!(mu.ball_measure(Complex64::new(1.0, 0.0), 1e-6), 1.0);
        let typical = birkhoff_measure(&map, Complex64::from_polar(1.0, 1.2345), 2000, &sched).unwrap();
        assert!(!typical.is_degenerate());
    }

    #[test]
    fn circle_regularity_has_no_violations() {
        let mu = EmpiricalMeasure::new(haar(200_000, 5), 1e-4).unwrap();
        let probes: Vec<Complex64> = haar(10, 6);
        let report = check_weak_diametric_regularity(&mu, &probes, 2, 10).unwrap();
        assert_eq!(report.violations(), 0);
        assert!(report.checked() > 50);
        assert!(!report.degenerate);
        let ratio = report.entries.iter().find(|e| e.n == 6).unwrap().value;
        assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
    }

    #[test]
    fn regular_radius_on_circle() {
        let mu = EmpiricalMeasure::new(haar(100_000, 7), 1e-4).unwrap();
        let z = Complex64::from_polar(1.0, 0.4);
        let rr = find_regular_radius(&mu, z, 0.1, 5).unwrap();
        assert!(rr.rho > 0.1 && rr.rho < 0.2);
        assert!(rr.annulus_count as f64 <= rr.bound);
    }

    #[test]
    fn regular_radius_away_from_support() {
        let mu = EmpiricalMeasure::new(vec![Complex64::new(5.0, 0.0); 10], 0.1).unwrap();
        let rr = find_regular_radius(&mu, Complex64::new(0.0, 0.0), 0.1, 3).unwrap();
        // Every quarter is empty, so the first one is kept each time.
        assert!((rr.rho - 0.1 * (1.0 + 0.5 / 64.0)).abs() < 1e-15);
    }

    #[test]
    fn regular_radius_avoids_ring() {
        let r = 0.1;
        let depth = 4;
        let ring: Vec<Complex64> = (0..400).map(|j| Complex64::from_polar(1.5 * r, TAU * j as f64 / 400.0)).collect();
        let mu = EmpiricalMeasure::new(ring, 1e-3).unwrap();
        let rr = find_regular_radius(&mu, Complex64::new(0.0, 0.0), r, depth).unwrap();
        assert!((rr.rho - 1.5 * r).abs() >= r / 4f64.powi(depth as i32 + 1));
        assert_eq!(rr.annulus_count, 0);
    }
}
