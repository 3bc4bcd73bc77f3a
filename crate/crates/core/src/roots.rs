//! Simultaneous all-roots iteration (Aberth–Ehrlich).
//!
//! The solver never sees coefficients; it only needs the logarithmic
//! derivative `f'/f` at a point. That lets callers hand it functions that are
//! evaluated by iteration (e.g. `T^n(z) - z`) instead of expanded
//! high-degree polynomials.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Below this many roots the sweep runs on the calling thread.
const PARALLEL_THRESHOLD: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    pub max_iter: usize,
    /// A root is frozen once its Aberth correction is below
    /// `update_tol * max(1, |z|)`.
    pub update_tol: f64,
    /// Accepted backward-error residual for every root.
    pub residual_tol: f64,
    /// Perturbed restarts after a failed run.
    pub restarts: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            update_tol: 1e-12,
            residual_tol: 1e-10,
            restarts: 4,
        }
    }
}

/// Result of evaluating the target at a point.
#[derive(Debug, Clone, Copy)]
pub struct Probe {
    /// `f'(z) / f(z)`, or `None` when `f(z) == 0` exactly.
    pub log_derivative: Option<Complex64>,
    /// Scale-free residual used for the final acceptance check.
    pub residual: f64,
}

/// Finds all `degree` roots of the function described by `probe`.
///
/// Initial guesses lie on the circle `|z - center| = radius`. The sweep is a
/// Jacobi update (every correction uses the previous iterate), so the result
/// does not depend on how many threads execute it.
pub fn aberth<F>(
    degree: usize,
    center: Complex64,
    radius: f64,
    probe: F,
    opts: &RootOptions,
) -> Result<Vec<Complex64>>
where
    F: Fn(Complex64) -> Probe + Sync,
{
    if degree == 0 {
        return Ok(Vec::new());
    }
    let radius = if radius.is_finite() && radius > 0.0 { radius } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ab37);
    let mut worst = f64::INFINITY;
    let mut iterations = 0;

    for attempt in 0..=opts.restarts {
        let (phase, scale) = if attempt == 0 {
            (0.4, 1.0)
        } else {
            (rng.gen::<f64>(), 1.0 + 0.5 * rng.gen::<f64>())
        };
        let mut roots: Vec<Complex64> = (0..degree)
            .map(|k| {
                let angle = std::f64::consts::TAU * (k as f64 + phase) / degree as f64;
                center + Complex64::from_polar(radius * scale, angle)
            })
            .collect();
        let mut frozen = vec![false; degree];

        for _ in 0..opts.max_iter {
            iterations += 1;
            let updates = sweep(&roots, &frozen, &probe);
            let mut all_frozen = true;
            for (k, update) in updates.into_iter().enumerate() {
                match update {
                    Some(step) => {
                        roots[k] -= step;
                        if step.norm() <= opts.update_tol * roots[k].norm().max(1.0) {
                            frozen[k] = true;
                        } else {
                            all_frozen = false;
                        }
                    }
                    None => frozen[k] = true,
                }
            }
            if all_frozen {
                break;
            }
        }

        worst = roots
            .iter()
            .map(|&z| probe(z).residual)
            .fold(0.0_f64, |acc, r| if r.is_nan() { f64::INFINITY } else { acc.max(r) });
        if worst <= opts.residual_tol {
            return Ok(roots);
        }
    }
    Err(Error::RootFinding {
        iterations,
        residual: worst,
    })
}

fn sweep<F>(roots: &[Complex64], frozen: &[bool], probe: &F) -> Vec<Option<Complex64>>
where
    F: Fn(Complex64) -> Probe + Sync,
{
    let correction = |k: usize| -> Option<Complex64> {
        if frozen[k] {
            return Some(Complex64::new(0.0, 0.0));
        }
        let z = roots[k];
        let ld = probe(z).log_derivative?;
        let mut repulsion = Complex64::new(0.0, 0.0);
        for (j, &other) in roots.iter().enumerate() {
            if j != k {
                let diff = z - other;
                if diff.norm_sqr() > 0.0 {
                    repulsion += diff.inv();
                }
            }
        }
        let denom = ld - repulsion;
        if denom.norm_sqr() == 0.0 || !denom.is_finite() {
            // Flat spot: nudge instead of dividing by zero.
            return Some(Complex64::new(1e-3 * z.norm().max(1.0), 0.0));
        }
        Some(denom.inv())
    };
    if roots.len() >= PARALLEL_THRESHOLD {
        (0..roots.len()).into_par_iter().map(correction).collect()
    } else {
        (0..roots.len()).map(correction).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    fn solve(coeffs: Vec<Complex64>) -> Vec<Complex64> {
        let degree = coeffs.len() - 1;
        aberth(
            degree,
            Complex64::new(0.0, 0.0),
            2.0,
            |z| {
                let (p, dp) = horner(&coeffs, z);
                let scale: f64 = coeffs.iter().map(|c| c.norm()).sum::<f64>()
                    * z.norm().max(1.0).powi(degree as i32);
                Probe {
                    log_derivative: if p.norm_sqr() == 0.0 { None } else { Some(dp / p) },
                    residual: p.norm() / scale,
                }
            },
            &RootOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn cubic_with_known_roots() {
        // (z - 1)(z + 2)(z - i) = z^3 + (1 - i) z^2 + (-2 - i) z + 2i
        let c = |re, im| Complex64::new(re, im);
        let mut roots = solve(vec![c(0.0, 2.0), c(-2.0, -1.0), c(1.0, -1.0), c(1.0, 0.0)]);
        roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((roots[0] - c(-2.0, 0.0)).norm() < 1e-10);
        assert!((roots[1] - c(0.0, 1.0)).norm() < 1e-10);
        assert!((roots[2] - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn roots_of_unity_high_degree() {
        let n = 300;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
        coeffs[0] = Complex64::new(-1.0, 0.0);
        coeffs[n] = Complex64::new(1.0, 0.0);
        let roots = solve(coeffs);
        for z in &roots {
            assert!((z.norm() - 1.0).abs() < 1e-12);
            assert!((z.powu(n as u32) - 1.0).norm() < 1e-10);
        }
    }
}
