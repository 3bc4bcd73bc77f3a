//! Periodic-orbit pressure, the Bowen root, Lipschitz norms, orbit
//! covariances and decay classification.

use std::collections::VecDeque;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orbit::{ForwardOrbit, Tracking};
use crate::rational_map::RationalMap;
use crate::stats::{std_dev, weighted_linear_fit};

/// Periodic points with `|(T^n)'| <= 1 + REPELLING_MARGIN` are left out.
pub const REPELLING_MARGIN: f64 = 1e-9;
pub const COVARIANCE_BATCHES: usize = 8;
pub const MIN_COVARIANCE_LENGTH: usize = 10_000;

/// Log-multipliers `log|(T^n)'(z)|` of the repelling solutions of `T^n z = z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicSpectrum {
    pub n: usize,
    /// Sorted ascending.
    pub log_multipliers: Vec<f64>,
    /// Non-repelling solutions that were dropped.
    pub excluded: usize,
}

impl PeriodicSpectrum {
    /// `P_n(s) = (1/n) log sum exp(-s L_i)`.
    pub fn pressure(&self, s: f64) -> f64 {
        let terms = self.log_multipliers.iter().map(|l| -s * l);
        let top = terms.clone().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.map(|t| (t - top).exp()).sum();
        (top + sum.ln()) / self.n as f64
    }
}

pub fn periodic_spectrum(map: &RationalMap, n: usize) -> Result<PeriodicSpectrum> {
    let points = map.periodic_points(n)?;
    let floor = REPELLING_MARGIN.ln_1p();
    let total = points.len();
    let mut log_multipliers: Vec<f64> = points
        .into_iter()
        .map(|p| p.log_multiplier)
        .filter(|&l| l > floor)
        .collect();
    if log_multipliers.is_empty() {
        return Err(Error::NoRepellingPoints { period: n });
    }
    log_multipliers.sort_by(f64::total_cmp);
    Ok(PeriodicSpectrum {
        n,
        excluded: total - log_multipliers.len(),
        log_multipliers,
    })
}

pub fn pressure_estimate(map: &RationalMap, s: f64, n: usize) -> Result<f64> {
    Ok(periodic_spectrum(map, n)?.pressure(s))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureCurve {
    pub n: usize,
    /// `(s, P_n(s))` pairs.
    pub values: Vec<(f64, f64)>,
}

pub fn pressure_curve(spectrum: &PeriodicSpectrum, s_values: &[f64]) -> PressureCurve {
    PressureCurve {
        n: spectrum.n,
        values: s_values.iter().map(|&s| (s, spectrum.pressure(s))).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BowenRoot {
    pub s: f64,
    pub n: usize,
    /// Half-width of the final bracket.
    pub tol: f64,
    pub pressure_at_root: f64,
    pub iterations: usize,
}

/// Root of `s -> P_n(s)` on `[0, 2]` by bisection.
pub fn hausdorff_dimension(map: &RationalMap, n: usize, tol: f64) -> Result<BowenRoot> {
    bowen_root(&periodic_spectrum(map, n)?, (0.0, 2.0), tol)
}

pub fn bowen_root(spectrum: &PeriodicSpectrum, bracket: (f64, f64), tol: f64) -> Result<BowenRoot> {
    let (mut lo, mut hi) = bracket;
    if !(tol > 0.0) || !(lo < hi) {
        return Err(Error::InvalidArgument("need tol > 0 and lo < hi".into()));
    }
    let (p_lo, p_hi) = (spectrum.pressure(lo), spectrum.pressure(hi));
    if !(p_lo > 0.0 && p_hi < 0.0) {
        return Err(Error::Bracket { lo, hi, p_lo, p_hi });
    }
    let mut iterations = 0;
    while (hi - lo) / 2.0 > tol {
        let mid = 0.5 * (lo + hi);
        if spectrum.pressure(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let s = 0.5 * (lo + hi);
    Ok(BowenRoot {
        s,
        n: spectrum.n,
        tol: (hi - lo) / 2.0,
        pressure_at_root: spectrum.pressure(s),
        iterations,
    })
}

/// Real observables on the Julia set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// The constant 1.
    Constant,
    Re,
    Im,
    /// `arg(z) / 2 pi` taken in `[0, 1)`.
    Sawtooth,
}

impl Observable {
    #[inline]
    pub fn eval(self, z: Complex64) -> f64 {
        match self {
            Observable::Constant => 1.0,
            Observable::Re => z.re,
            Observable::Im => z.im,
            Observable::Sawtooth => {
                let t = z.im.atan2(z.re) / std::f64::consts::TAU;
                if t < 0.0 {
                    t + 1.0
                } else {
                    t
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    /// Largest observed difference quotient; a lower bound on the norm.
    pub value: f64,
    pub pairs: u64,
    /// Every pair of sample points was used.
    pub exhaustive: bool,
}

/// `max |f(a) - f(b)| / |a - b|` over all pairs of `sample`, or over
/// `max_pairs` seeded random pairs when there are more pairs than that.
pub fn lipschitz_norm<F>(f: F, sample: &[Complex64], max_pairs: u64, seed: u64) -> Result<LipschitzEstimate>
where
    F: Fn(Complex64) -> f64 + Sync,
{
    let n = sample.len();
    if n < 2 {
        return Err(Error::InvalidArgument("Lipschitz estimate needs >= 2 points".into()));
    }
    let values: Vec<f64> = sample.iter().map(|&z| f(z)).collect();
    let quotient = |i: usize, j: usize| {
        let d = (sample[i] - sample[j]).norm();
        if d > 0.0 {
            (values[i] - values[j]).abs() / d
        } else {
            0.0
        }
    };
    let all = (n as u64) * (n as u64 - 1) / 2;
    if all <= max_pairs {
        let value = (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| quotient(i, j)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max);
        return Ok(LipschitzEstimate {
            value,
            pairs: all,
            exhaustive: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut value: f64 = 0.0;
    let mut pairs = 0;
    while pairs < max_pairs {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i != j {
            value = value.max(quotient(i, j));
            pairs += 1;
        }
    }
    Ok(LipschitzEstimate {
        value,
        pairs,
        exhaustive: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceEstimate {
    pub n: usize,
    pub cov: f64,
    /// Batch-means standard error.
    pub stderr: f64,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    fg: f64,
    f: f64,
    g: f64,
    count: f64,
}

impl Moments {
    fn cov(&self) -> f64 {
        self.fg / self.count - (self.f / self.count) * (self.g / self.count)
    }
}

/// `Cov_n = (1/L) sum_j f(T^{n+j} z0) g(T^j z0) - mean f * mean g` for every
/// lag in `lags`, from one forward orbit of `L + max lag` steps.
pub fn covariance_curve(
    map: &RationalMap,
    z0: Complex64,
    f: Observable,
    g: Observable,
    lags: std::ops::RangeInclusive<usize>,
    length: usize,
    tracking: Tracking,
) -> Result<Vec<CovarianceEstimate>> {
    if length < MIN_COVARIANCE_LENGTH {
        return Err(Error::InvalidArgument(format!(
            "covariance length must be >= {MIN_COVARIANCE_LENGTH}, got {length}"
        )));
    }
    if lags.is_empty() {
        return Err(Error::InvalidArgument("empty lag range".into()));
    }
    let (lo, hi) = (*lags.start(), *lags.end());
    let width = hi - lo + 1;
    let batch = length / COVARIANCE_BATCHES;
    let mut acc = vec![Moments::default(); COVARIANCE_BATCHES * width];
    // g(T^j z0) for the last `hi + 1` values of j.
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(hi + 1);
    let mut orbit = ForwardOrbit::new(map, z0, tracking);
    let mut x = z0;
    for t in 0..length + hi {
        if t > 0 {
            x = orbit.advance()?;
        }
        let fx = f.eval(x);
        if recent.len() == hi + 1 {
            recent.pop_front();
        }
        recent.push_back(if f == g { fx } else { g.eval(x) });
        for n in lo..=hi.min(t) {
            let j = t - n;
            if j >= length {
                continue;
            }
            let gj = recent[recent.len() - 1 - n];
            let b = (j / batch).min(COVARIANCE_BATCHES - 1);
            let m = &mut acc[b * width + (n - lo)];
            m.fg += fx * gj;
            m.f += fx;
            m.g += gj;
            m.count += 1.0;
        }
    }
    Ok((lo..=hi)
        .map(|n| {
            let col: Vec<Moments> = (0..COVARIANCE_BATCHES).map(|b| acc[b * width + (n - lo)]).collect();
            let total = col.iter().fold(Moments::default(), |a, m| Moments {
                fg: a.fg + m.fg,
                f: a.f + m.f,
                g: a.g + m.g,
                count: a.count + m.count,
            });
            let batch_covs: Vec<f64> = col.iter().map(Moments::cov).collect();
            CovarianceEstimate {
                n,
                cov: total.cov(),
                stderr: std_dev(&batch_covs) / (COVARIANCE_BATCHES as f64).sqrt(),
            }
        })
        .collect())
}

pub fn covariance_estimate(
    map: &RationalMap,
    z0: Complex64,
    f: Observable,
    g: Observable,
    n: usize,
    length: usize,
    tracking: Tracking,
) -> Result<CovarianceEstimate> {
    Ok(covariance_curve(map, z0, f, g, n..=n, length, tracking)?[0])
}

/// Decay bounds `theta_n`, `n = n_offset + i`, optionally with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecaySequence {
    pub theta: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
    pub n_offset: usize,
}

impl DecaySequence {
    pub fn exact(theta: Vec<f64>, n_offset: usize) -> Self {
        Self {
            theta,
            stderr: None,
            n_offset,
        }
    }

    pub fn from_covariances(covs: &[CovarianceEstimate]) -> Self {
        Self {
            theta: covs.iter().map(|c| c.cov).collect(),
            stderr: Some(covs.iter().map(|c| c.stderr).collect()),
            n_offset: covs.first().map_or(1, |c| c.n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DecayClassification {
    Polynomial { p_hat: f64 },
    SuperPolynomialEvidence { geometric_rate: f64 },
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelFit {
    /// `p_hat` for the polynomial model, the geometric rate otherwise.
    pub parameter: f64,
    pub parameter_stderr: f64,
    pub chi2: f64,
    pub reduced_chi2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub classification: DecayClassification,
    pub polynomial: Option<ModelFit>,
    pub geometric: Option<ModelFit>,
    pub usable: usize,
    pub reason: String,
}

pub const MIN_DECAY_ENTRIES: usize = 8;
/// The winning model's chi-square must be below this share of the loser's.
pub const DECAY_MARGIN: f64 = 0.9;
/// Floor on the standard deviation of `log theta_n`, so exact data has a
/// finite model tolerance.
pub const LOG_MODEL_TOLERANCE: f64 = 0.01;
/// Largest reduced chi-square accepted as a fit at all.
pub const MAX_REDUCED_CHI2: f64 = 4.0;

/// Fits `log theta_n` against `log n` (polynomial decay) and against `n`
/// (geometric decay) by weighted least squares and picks the model whose
/// chi-square beats the other by [`DECAY_MARGIN`], provided it also fits the
/// data by itself.
pub fn decay_fit(seq: &DecaySequence) -> DecayFit {
    let mut ns = Vec::new();
    let mut logs = Vec::new();
    let mut weights = Vec::new();
    for (i, &theta) in seq.theta.iter().enumerate() {
        let n = seq.n_offset + i;
        let se = seq.stderr.as_ref().map_or(0.0, |s| s[i]);
        if n == 0 || !theta.is_finite() || !(theta > 2.0 * se) || !(theta > 0.0) {
            continue;
        }
        let sigma = (se / theta).max(LOG_MODEL_TOLERANCE);
        ns.push(n as f64);
        logs.push(theta.ln());
        weights.push(sigma.powi(-2));
    }
    let usable = ns.len();
    let inconclusive = |reason: String, polynomial, geometric| DecayFit {
        classification: DecayClassification::Inconclusive,
        polynomial,
        geometric,
        usable,
        reason,
    };
    if usable < MIN_DECAY_ENTRIES {
        return inconclusive(
            format!("{usable} entries above the noise floor, need {MIN_DECAY_ENTRIES}"),
            None,
            None,
        );
    }
    let dof = (usable - 2) as f64;
    let log_n: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let poly = weighted_linear_fit(&log_n, &logs, &weights).map(|w| ModelFit {
        parameter: -w.slope,
        parameter_stderr: w.slope_stderr,
        chi2: w.chi2,
        reduced_chi2: w.chi2 / dof,
    });
    let geo = weighted_linear_fit(&ns, &logs, &weights).map(|w| ModelFit {
        parameter: w.slope.exp(),
        parameter_stderr: w.slope.exp() * w.slope_stderr,
        chi2: w.chi2,
        reduced_chi2: w.chi2 / dof,
    });
    let (Some(p), Some(g)) = (poly, geo) else {
        return inconclusive("degenerate fit".into(), poly, geo);
    };
    let (classification, winner) = if p.chi2 <= DECAY_MARGIN * g.chi2 {
        (DecayClassification::Polynomial { p_hat: p.parameter }, p)
    } else if g.chi2 <= DECAY_MARGIN * p.chi2 {
        (
            DecayClassification::SuperPolynomialEvidence {
                geometric_rate: g.parameter,
            },
            g,
        )
    } else {
        return inconclusive("neither model wins by the margin".into(), poly, geo);
    };
    if winner.reduced_chi2 > MAX_REDUCED_CHI2 {
        return inconclusive(
            format!("best model has reduced chi-square {:.3}", winner.reduced_chi2),
            poly,
            geo,
        );
    }
    let sane = match classification {
        DecayClassification::Polynomial { p_hat } => p_hat > 0.0,
        DecayClassification::SuperPolynomialEvidence { geometric_rate } => geometric_rate > 0.0 && geometric_rate < 1.0,
        DecayClassification::Inconclusive => false,
    };
    if !sane {
        return inconclusive("fitted sequence does not decay".into(), poly, geo);
    }
    DecayFit {
        classification,
        polynomial: poly,
        geometric: geo,
        usable,
        reason: String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(d: f64, n: usize, s: f64) -> f64 {
        ((d.powi(n as i32) - 1.0).ln() - n as f64 * s * d.ln()) / n as f64
    }

    #[test]
    fn power_map_pressure_matches_closed_form() {
        let map = RationalMap::power(2).unwrap();
        let spec = periodic_spectrum(&map, 10).unwrap();
        assert_eq!(spec.log_multipliers.len(), 1023);
        assert_eq!(spec.excluded, 1);
        for s in [0.0, 0.5, 1.0, 1.7] {
            assert!((spec.pressure(s) - closed_form(2.0, 10, s)).abs() < 1e-9);
        }
        assert!((spec.pressure(0.0) - 0.69305).abs() < 1e-5);
    }

    #[test]
    fn pressure_is_strictly_decreasing() {
        let map = RationalMap::quadratic(Complex64::new(0.05, 0.0)).unwrap();
        let spec = periodic_spectrum(&map, 6).unwrap();
        let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let curve = pressure_curve(&spec, &grid);
        assert!(curve.values.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn bowen_root_of_power_maps() {
        for (d, n) in [(2usize, 10usize), (3, 7)] {
            let root = hausdorff_dimension(&RationalMap::power(d).unwrap(), n, 1e-4).unwrap();
            let dn = (d as f64).powi(n as i32);
            let exact = (dn - 1.0).ln() / dn.ln();
            assert!((root.s - exact).abs() <= 1e-4, "{root:?}");
            assert!((root.s - 1.0).abs() <= (1.0 - 1.0 / dn).ln().abs() / dn.ln() + 1e-4);
        }
    }

    #[test]
    fn bracket_failure_reports_endpoints() {
        let spec = periodic_spectrum(&RationalMap::power(2).unwrap(), 4).unwrap();
        match bowen_root(&spec, (1.5, 2.0), 1e-4) {
            Err(Error::Bracket { lo, hi, p_lo, .. }) => {
                assert_eq!((lo, hi), (1.5, 2.0));
                assert!(p_lo < 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lipschitz_examples() {
        let circle: Vec<Complex64> = (0..1400)
            .map(|j| Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / 1400.0))
            .collect();
        let zero = lipschitz_norm(|_| 4.0, &circle, 1_000_000, 1).unwrap();
        assert_eq!(zero.value, 0.0);
        let one = lipschitz_norm(|z| z.re, &circle, 1_000_000, 1).unwrap();
        assert!(one.exhaustive && (one.value - 1.0).abs() < 1e-3, "{one:?}");
        let three = lipschitz_norm(|z| 3.0 * z.re, &circle, 1_000_000, 1).unwrap();
        assert!((three.value - 3.0 * one.value).abs() < 1e-12);
        let sampled = lipschitz_norm(|z| z.re, &circle, 10_000, 1).unwrap();
        assert!(!sampled.exhaustive && sampled.pairs == 10_000 && sampled.value <= one.value);
        assert!(lipschitz_norm(|z| z.re, &circle[..1], 10, 1).is_err());
    }

    #[test]
    fn sawtooth_range() {
        assert_eq!(Observable::Sawtooth.eval(Complex64::new(1.0, 0.0)), 0.0);
        assert!((Observable::Sawtooth.eval(Complex64::new(0.0, -1.0)) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn covariance_with_constant_vanishes() {
        let map = RationalMap::power(2).unwrap();
        let z0 = Complex64::from_polar(1.0, 0.3);
        let covs = covariance_curve(&map, z0, Observable::Re, Observable::Constant, 1..=5, 100_000, Tracking::for_map(&map)).unwrap();
        for c in covs {
            assert!(c.cov.abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn covariance_of_real_part_is_zero() {
        let map = RationalMap::power(2).unwrap();
        let z0 = Complex64::from_polar(1.0, 0.3);
        let covs = covariance_curve(&map, z0, Observable::Re, Observable::Re, 1..=6, 400_000, Tracking::for_map(&map)).unwrap();
        for c in covs {
            assert!(c.cov.abs() < 4.0 * c.stderr.max(1e-4), "{c:?}");
        }
    }

    #[test]
    fn short_covariance_is_rejected() {
        let map = RationalMap::power(2).unwrap();
        let z0 = Complex64::from_polar(1.0, 0.3);
        assert!(covariance_estimate(&map, z0, Observable::Re, Observable::Re, 1, 100, Tracking::Raw).is_err());
    }

    #[test]
    fn synthetic_decay_classes() {
        for p in [1.0, 2.0, 3.0] {
            let seq = DecaySequence::exact((1..=12).map(|n| (n as f64).powf(-p)).collect(), 1);
            match decay_fit(&seq).classification {
                DecayClassification::Polynomial { p_hat } => assert!((p_hat - p).abs() < 0.1),
                other => panic!("p = {p}: {other:?}"),
            }
        }
        for rate in [0.3, 0.5, 0.7] {
            let seq = DecaySequence::exact((1..=12).map(|n| rate_pow(rate, n)).collect(), 1);
            match decay_fit(&seq).classification {
                DecayClassification::SuperPolynomialEvidence { geometric_rate } => {
                    assert!((geometric_rate - rate).abs() < 0.05)
                }
                other => panic!("rate = {rate}: {other:?}"),
            }
        }
    }

    fn rate_pow(rate: f64, n: usize) -> f64 {
        rate.powi(n as i32)
    }

    #[test]
    fn slowly_decaying_sequence_is_inconclusive() {
        for len in [12, 16, 20] {
            let seq = DecaySequence::exact((1..=len).map(|n| 1.0 / ((n + 1) as f64).ln()).collect(), 1);
            let fit = decay_fit(&seq);
            assert_eq!(fit.classification, DecayClassification::Inconclusive, "{fit:?}");
        }
    }

    #[test]
    fn too_few_entries_is_inconclusive() {
        let fit = decay_fit(&DecaySequence::exact(vec![0.5, 0.25, 0.125], 1));
        assert_eq!(fit.classification, DecayClassification::Inconclusive);
        assert_eq!(fit.usable, 3);
    }
}
