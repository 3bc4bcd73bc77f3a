//! Point clouds on the Julia set by random backward iteration.
//!
//! Every sample point is the endpoint of its own backward walk of
//! `burn_in` steps from a common start, choosing a uniformly random preimage
//! at each step. The branch choices for walk `i` come from a ChaCha stream
//! keyed by `(seed, i)`, so the sample does not depend on how the walks are
//! scheduled across threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::orbit::{ForwardOrbit, Tracking};
use crate::rational_map::RationalMap;
use crate::stats::linear_fit;

pub const DEFAULT_BURN_IN: usize = 60;
/// Hyperbolicity is only reported when `lambda_hat` exceeds this.
pub const HYPERBOLICITY_FLOOR: f64 = 1.01;

#[derive(Debug, Clone, PartialEq)]
pub struct JuliaSample {
    pub points: Vec<Complex64>,
    pub start: Complex64,
    pub burn_in: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionEstimate {
    pub c_hat: f64,
    pub lambda_hat: f64,
    /// Inclusive range of iterates used in the fit.
    pub n_range: (usize, usize),
}

fn same_point(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= 1e-12 * a.norm().max(b.norm()).max(1.0)
}

fn single_preimage(map: &RationalMap, w: Complex64) -> Result<Option<Complex64>> {
    let pre = map.preimages(w)?;
    let first = pre[0];
    Ok(pre.iter().all(|&p| same_point(p, first)).then_some(first))
}

/// Whether `w` has a finite backward orbit (a fixed point or 2-cycle whose
/// preimages collapse to a single point), e.g. 0 for `z^d`.
pub fn is_exceptional(map: &RationalMap, w: Complex64) -> Result<bool> {
    let Some(p) = single_preimage(map, w)? else {
        return Ok(false);
    };
    if same_point(p, w) {
        return Ok(true);
    }
    Ok(matches!(single_preimage(map, p)?, Some(q) if same_point(q, w)))
}

/// The most repelling finite fixed point; it lies on the Julia set.
pub fn default_start(map: &RationalMap) -> Result<Complex64> {
    let fixed = map.periodic_points(1)?;
    fixed
        .into_iter()
        .filter(|p| p.multiplier > 1.0)
        .max_by(|a, b| a.multiplier.total_cmp(&b.multiplier))
        .map(|p| p.point)
        .ok_or(Error::NoRepellingPoints { period: 1 })
}

pub fn inverse_iteration_sample(map: &RationalMap, count: usize, burn_in: usize, seed: u64) -> Result<JuliaSample> {
    let start = default_start(map)?;
    inverse_iteration_sample_from(map, start, count, burn_in, seed)
}

pub fn inverse_iteration_sample_from(
    map: &RationalMap,
    start: Complex64,
    count: usize,
    burn_in: usize,
    seed: u64,
) -> Result<JuliaSample> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    if !start.is_finite() {
        return Err(Error::InvalidArgument("start point must be finite".into()));
    }
    if is_exceptional(map, start)? {
        return Err(Error::ExceptionalStart);
    }
    let points = (0..count)
        .into_par_iter()
        .map(|walk| backward_walk(map, start, burn_in, seed, walk as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(JuliaSample {
        points,
        start,
        burn_in,
        seed,
    })
}

fn backward_walk(map: &RationalMap, start: Complex64, steps: usize, seed: u64, walk: u64) -> Result<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(walk);
    let mut z = start;
    for _ in 0..steps {
        let pre = map.preimages(z)?;
        z = pre[rng.gen_range(0..pre.len())];
    }
    Ok(z)
}

/// Fits `min_z log|(T^k)'(z)| = log C + k log(lambda)` over `k = 1..=n`.
pub fn hyperbolicity_estimate(map: &RationalMap, sample: &[Complex64], n: usize) -> Result<ExpansionEstimate> {
    if n < 8 {
        return Err(Error::InvalidArgument("hyperbolicity fit needs n >= 8".into()));
    }
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let tracking = Tracking::for_map(map);
    let minima = sample
        .par_iter()
        .filter_map(|&z| derivative_log_sums(map, z, n, tracking.clone()))
        .reduce_with(|a, b| a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect())
        .ok_or_else(|| Error::InvalidArgument("every sample orbit escaped".into()))?;
    let ks: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    let fit = linear_fit(&ks, &minima[1..=n]);
    let lambda_hat = fit.slope.exp();
    if !(lambda_hat > HYPERBOLICITY_FLOOR) {
        return Err(Error::NotHyperbolic { lambda_hat });
    }
    Ok(ExpansionEstimate {
        c_hat: fit.intercept.exp(),
        lambda_hat,
        n_range: (1, n),
    })
}

/// `log|(T^k)'(z)|` for `k = 0..=n` along a tracked orbit; `None` on escape.
fn derivative_log_sums(map: &RationalMap, z: Complex64, n: usize, tracking: Tracking) -> Option<Vec<f64>> {
    let mut orbit = ForwardOrbit::new(map, z, tracking);
    let mut sums = Vec::with_capacity(n + 1);
    sums.push(0.0);
    let mut acc = 0.0;
    let mut w = z;
    for _ in 0..n {
        acc += map.derivative_modulus(w).ok()?.ln();
        sums.push(acc);
        w = orbit.advance().ok()?;
    }
    Some(sums)
}

/// Greedy maximal `r`-separated subset, scanning in input order.
///
/// Output points are pairwise at distance `>= r`, and every input point is
/// within distance `< r` of some output point.
pub fn maximal_separated_set(points: &[Complex64], r: f64) -> Vec<Complex64> {
    if !(r > 0.0) {
        return points.to_vec();
    }
    let key = |z: Complex64| ((z.re / r).floor() as i64, (z.im / r).floor() as i64);
    let mut cells: FxHashMap<(i64, i64), Vec<Complex64>> = FxHashMap::default();
    let mut chosen = Vec::new();
    for &p in points {
        let (i, j) = key(p);
        let covered = (-1..=1).any(|di| {
            (-1..=1).any(|dj| {
                cells
                    .get(&(i + di, j + dj))
                    .map_or(false, |v| v.iter().any(|&q| (p - q).norm() < r))
            })
        });
        if !covered {
            cells.entry((i, j)).or_default().push(p);
            chosen.push(p);
        }
    }
    chosen
}
