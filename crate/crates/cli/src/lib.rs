//! `jlab` experiment runner: TOML config in, CSV/JSON artifacts out.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};

pub use config::ExperimentConfig;
pub use report::{ArtifactDir, Check};

pub const DEFAULT_OUT_DIR: &str = "jlab-out";
pub const OUT_ENV: &str = "JLAB_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Julia set sample (`sample.csv`).
    Sample,
    /// Bowen root, pressure curve, local dimensions, regularity.
    Dimension,
    /// Return-time tables, recurrence rates, monotonicity suite.
    Recurrence,
    /// Covariance decay curve and its classification.
    Covariance,
    /// Recurrence rate against local dimension, probe by probe.
    Verify,
    /// Exact rational cross-checks for `z^d`.
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Dimension => "dimension",
            Command::Recurrence => "recurrence",
            Command::Covariance => "covariance",
            Command::Verify => "verify",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "jlab", version, about = "Recurrence, dimension and decay experiments for rational maps")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Overrides `sampler.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory (default: config `output`, then `$JLAB_OUT`, then `jlab-out`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<jlab_core::Error> for CliError {
    fn from(e: jlab_core::Error) -> Self {
        use jlab_core::Error as E;
        match e {
            E::InvalidMap(_) | E::NotCoprime { .. } => CliError::Config(format!("map: {e}")),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub out_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub seconds: f64,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

/// `--out`, then the config's `output`, then `$JLAB_OUT`, then [`DEFAULT_OUT_DIR`].
pub fn output_dir(cli_out: Option<PathBuf>, cfg: &ExperimentConfig, env: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| cfg.output.clone())
        .or(env)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.sampler.seed = seed;
    }
    let env = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let mut out = ArtifactDir::create(output_dir(cli.out.clone(), &cfg, env))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Io(e.to_string()))?;

    let started = Instant::now();
    let checks = pool.install(|| experiments::execute(cli.command, &cfg, &mut out))?;
    let seconds = started.elapsed().as_secs_f64();
    out.timing(cli.command.name(), seconds)?;
    Ok(Outcome {
        checks,
        out_dir: out.root().to_path_buf(),
        artifacts: out.written().to_vec(),
        seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_precedence() {
        let mut cfg = ExperimentConfig::from_toml("[map]\nnumerator = [[0, 0], [0, 0], [1, 0]]\ndenominator = [[1, 0]]\n")
            .unwrap();
        let env = Some(PathBuf::from("env"));
        assert_eq!(output_dir(None, &cfg, None), PathBuf::from(DEFAULT_OUT_DIR));
        assert_eq!(output_dir(None, &cfg, env.clone()), PathBuf::from("env"));
        cfg.output = Some("cfg".into());
        assert_eq!(output_dir(None, &cfg, env.clone()), PathBuf::from("cfg"));
        assert_eq!(output_dir(Some("flag".into()), &cfg, env), PathBuf::from("flag"));
    }

    #[test]
    fn command_line_shape() {
        let cli = Cli::try_parse_from(["jlab", "verify", "--config", "a.toml", "--workers", "3", "--seed", "9"]).unwrap();
        assert_eq!(cli.command, Command::Verify);
        assert_eq!((cli.seed, cli.workers), (Some(9), Some(3)));
        assert!(Cli::try_parse_from(["jlab", "plot", "--config", "a.toml"]).is_err());
        assert!(Cli::try_parse_from(["jlab", "sample"]).is_err());
    }
}
