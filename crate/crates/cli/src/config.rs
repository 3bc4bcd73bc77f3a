//! TOML experiment configuration.
//!
//! Every section is optional and falls back to the defaults below; only
//! `[map]` is required. Unknown keys are rejected by the parser, and
//! [`ExperimentConfig::validate`] reports out-of-range values by their
//! dotted field path.

use std::path::{Path, PathBuf};

use jlab_core::rational_map::MapSpec;
use jlab_core::thermo::Observable;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub map: MapSpec,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub dimension: DimensionConfig,
    #[serde(default)]
    pub recurrence: RecurrenceConfig,
    #[serde(default)]
    pub thermo: ThermoConfig,
    #[serde(default)]
    pub covariance: CovarianceConfig,
    #[serde(default)]
    pub regularity: RegularityConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    /// Output directory; `--out` wins over it, and it wins over `JLAB_OUT`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub count: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            count: 1_000_000,
            burn_in: 60,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub r0: f64,
    pub k_max: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { r0: 0.5, k_max: 14 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensionConfig {
    /// Local dimension probes: the first `probes` sample points.
    pub probes: usize,
    /// Number of `s` values in the pressure table.
    pub pressure_points: usize,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        Self {
            probes: 20,
            pressure_points: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecurrenceConfig {
    pub n_max: u64,
    pub probes: usize,
    pub tol: f64,
    /// One extra probe per listed period: a repelling point of that exact period.
    pub periodic_probes: Vec<usize>,
    pub monotonicity_cases: usize,
    pub monotonicity_n_max: u64,
}

impl Default for RecurrenceConfig {
    fn default() -> Self {
        Self {
            n_max: 10_000_000,
            probes: 20,
            tol: 0.15,
            periodic_probes: vec![1, 2],
            monotonicity_cases: 10_000,
            monotonicity_n_max: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermoConfig {
    pub period_n: usize,
    pub s_bracket: [f64; 2],
    pub tol: f64,
    pub hyperbolicity_n: usize,
}

impl Default for ThermoConfig {
    fn default() -> Self {
        Self {
            period_n: 10,
            s_bracket: [0.0, 2.0],
            tol: 1e-6,
            hyperbolicity_n: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceConfig {
    pub observable: Observable,
    pub n_range: [usize; 2],
    pub length: usize,
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        Self {
            observable: Observable::Sawtooth,
            n_range: [1, 12],
            length: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityConfig {
    pub n_range: [u32; 2],
    pub probes: usize,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        Self {
            n_range: [2, 12],
            probes: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub trials: usize,
    pub arcs: usize,
    pub max_denominator: u64,
    pub n_max: u64,
    /// Float orbits are only expected to follow the exact orbit this long.
    /// Defaults to the largest `k` with `d^k * 2^-52 <= 1e-6`.
    pub float_horizon: Option<u64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            arcs: 100,
            max_denominator: 1_000_000,
            n_max: 100_000,
            float_horizon: None,
        }
    }
}

/// Acceptance thresholds. A check is skipped when its key is absent, and
/// checks that only make sense for `z^d` are skipped for other maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    /// Open interval for the Bowen root.
    pub bowen_interval: Option<[f64; 2]>,
    /// Bound on `|s* - mean local dimension|`.
    pub bowen_vs_local: Option<f64>,
    /// Closed interval for the mean local dimension.
    pub mean_local_dimension: Option<[f64; 2]>,
    /// Pressure vs `(1/n) log((d^n - 1) d^(-ns))`.
    pub pressure_closed_form: f64,
    /// Ball counts and arc counts vs exact Haar measure, in standard errors.
    pub haar_sigma: f64,
    pub min_lambda: f64,
    pub pass_fraction: f64,
    /// Expected decay model: `polynomial`, `super_polynomial_evidence` or `inconclusive`.
    pub decay: Option<String>,
    /// Largest mismatch fraction against the exact oracle.
    pub oracle_mismatch: f64,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            bowen_interval: None,
            bowen_vs_local: None,
            mean_local_dimension: None,
            pressure_closed_form: 1e-9,
            haar_sigma: 3.0,
            min_lambda: 1.01,
            pass_fraction: 0.9,
            decay: None,
            oracle_mismatch: 0.02,
        }
    }
}

const DECAY_MODELS: [&str; 3] = ["polynomial", "super_polynomial_evidence", "inconclusive"];

fn field(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

fn positive(path: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(field(path, format!("must be positive, got {x}")))
    }
}

fn in_range<T: PartialOrd + std::fmt::Display>(path: &str, x: T, lo: T, hi: T) -> Result<(), CliError> {
    if x >= lo && x <= hi {
        Ok(())
    } else {
        Err(field(path, format!("must be in [{lo}, {hi}], got {x}")))
    }
}

fn ordered<T: PartialOrd + std::fmt::Display>(path: &str, [lo, hi]: [T; 2]) -> Result<(), CliError> {
    if lo <= hi {
        Ok(())
    } else {
        Err(field(path, format!("lower end {lo} exceeds upper end {hi}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.map.build().map_err(|e| field("map", e))?;

        let s = &self.sampler;
        in_range("sampler.count", s.count, 2, 100_000_000)?;
        in_range("sampler.burn_in", s.burn_in, 0, 100_000)?;

        positive("schedule.r0", self.schedule.r0)?;
        in_range("schedule.r0", self.schedule.r0, 0.0, 4.0)?;
        in_range("schedule.k_max", self.schedule.k_max, 2, 40)?;

        in_range("dimension.probes", self.dimension.probes, 1, s.count)?;
        in_range("dimension.pressure_points", self.dimension.pressure_points, 2, 10_000)?;

        let r = &self.recurrence;
        in_range("recurrence.n_max", r.n_max, 1, 10_000_000_000)?;
        in_range("recurrence.probes", r.probes, 1, s.count)?;
        if !(r.tol.is_finite() && r.tol >= 0.0) {
            return Err(field("recurrence.tol", format!("must be non-negative, got {}", r.tol)));
        }
        for (i, &p) in r.periodic_probes.iter().enumerate() {
            in_range(&format!("recurrence.periodic_probes[{i}]"), p, 1, 12)?;
        }
        in_range("recurrence.monotonicity_cases", r.monotonicity_cases, 0, 10_000_000)?;
        in_range("recurrence.monotonicity_n_max", r.monotonicity_n_max, 1, 10_000_000_000)?;

        let t = &self.thermo;
        in_range("thermo.period_n", t.period_n, 1, 14)?;
        ordered("thermo.s_bracket", t.s_bracket)?;
        if !(t.s_bracket[0] >= 0.0 && t.s_bracket[0] < t.s_bracket[1] && t.s_bracket[1] <= 2.0) {
            return Err(field(
                "thermo.s_bracket",
                format!("must satisfy 0 <= lo < hi <= 2, got {:?}", t.s_bracket),
            ));
        }
        positive("thermo.tol", t.tol)?;
        in_range("thermo.tol", t.tol, 0.0, 0.1)?;
        in_range("thermo.hyperbolicity_n", t.hyperbolicity_n, 8, 200)?;

        let c = &self.covariance;
        ordered("covariance.n_range", c.n_range)?;
        in_range("covariance.n_range[0]", c.n_range[0], 1, 10_000)?;
        in_range("covariance.n_range[1]", c.n_range[1], 1, 10_000)?;
        in_range(
            "covariance.length",
            c.length,
            jlab_core::thermo::MIN_COVARIANCE_LENGTH,
            10_000_000_000,
        )?;

        ordered("regularity.n_range", self.regularity.n_range)?;
        in_range("regularity.n_range[0]", self.regularity.n_range[0], 1, 40)?;
        in_range("regularity.n_range[1]", self.regularity.n_range[1], 1, 40)?;
        in_range("regularity.probes", self.regularity.probes, 1, s.count)?;

        let o = &self.oracle;
        in_range("oracle.trials", o.trials, 1, 10_000_000)?;
        in_range("oracle.arcs", o.arcs, 0, 10_000_000)?;
        in_range("oracle.max_denominator", o.max_denominator, 3, 1 << 53)?;
        in_range("oracle.n_max", o.n_max, 1, 100_000_000)?;
        if let Some(h) = o.float_horizon {
            in_range("oracle.float_horizon", h, 1, 64)?;
        }

        let k = &self.checks;
        if let Some(b) = k.bowen_interval {
            ordered("checks.bowen_interval", b)?;
        }
        if let Some(b) = k.mean_local_dimension {
            ordered("checks.mean_local_dimension", b)?;
        }
        if let Some(t) = k.bowen_vs_local {
            positive("checks.bowen_vs_local", t)?;
        }
        positive("checks.pressure_closed_form", k.pressure_closed_form)?;
        positive("checks.haar_sigma", k.haar_sigma)?;
        positive("checks.min_lambda", k.min_lambda)?;
        in_range("checks.pass_fraction", k.pass_fraction, 0.0, 1.0)?;
        in_range("checks.oracle_mismatch", k.oracle_mismatch, 0.0, 1.0)?;
        if let Some(model) = &k.decay {
            if !DECAY_MODELS.contains(&model.as_str()) {
                return Err(field("checks.decay", format!("unknown model {model:?}, expected one of {DECAY_MODELS:?}")));
            }
        }
        Ok(())
    }
}
