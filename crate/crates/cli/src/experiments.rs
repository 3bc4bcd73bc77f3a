//! The six subcommands. Each one writes its artifacts and returns its checks.

use std::sync::Arc;

use jlab_core::circle_oracle::{
    angle_map_degree, angle_orbit, chord_to_halfwidth, oracle_arc_measure, oracle_return_time, rational_from_f64,
    RationalAngle,
};
use jlab_core::empirical_measure::{
    check_weak_diametric_regularity, local_dimension, DimensionEstimate, EmpiricalMeasure, RadiusSchedule,
    RegularitySummary,
};
use jlab_core::julia_sampler::{hyperbolicity_estimate, inverse_iteration_sample, ExpansionEstimate, JuliaSample};
use jlab_core::orbit::{exact_period, ShadowReference, Tracking};
use jlab_core::rational_map::RationalMap;
use jlab_core::recurrence::{
    compare_rate_dimension, incidence_times_along, recurrence_rate_with, return_time_with, verify_monotonicity_with,
    ComparisonReport, MonotonicityCase, ProbeStatus, RateEstimate, RecurrenceRecord, ReturnTime, PERIOD_TOLERANCE,
};
use jlab_core::thermo::{
    bowen_root, covariance_curve, decay_fit, lipschitz_norm, periodic_spectrum, BowenRoot, CovarianceEstimate,
    DecayClassification, DecayFit, DecaySequence, LipschitzEstimate, ModelFit,
};
use jlab_core::{Complex64, Error};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::report::{ArtifactDir, Check, ExperimentReport};
use crate::{CliError, Command};

// Independent RNG families derived from the one configured seed.
const MONOTONICITY_STREAM: u64 = 0x6d6f_6e6f;
const ORACLE_STREAM: u64 = 0x6f72_6163;
const ARC_STREAM: u64 = 0x6172_6373;
const LIPSCHITZ_STREAM: u64 = 0x6c69_7073;
const LIPSCHITZ_POINTS: usize = 2000;
const LIPSCHITZ_PAIRS: u64 = 1_000_000;

struct Experiment<'a> {
    cfg: &'a ExperimentConfig,
    map: RationalMap,
    out: &'a mut ArtifactDir,
}

pub fn execute(command: Command, cfg: &ExperimentConfig, out: &mut ArtifactDir) -> Result<Vec<Check>, CliError> {
    let map = cfg.map.build().map_err(|e| CliError::Config(format!("map: {e}")))?;
    let mut ex = Experiment { cfg, map, out };
    match command {
        Command::Sample => ex.sample(),
        Command::Dimension => ex.dimension(),
        Command::Recurrence => ex.recurrence(),
        Command::Covariance => ex.covariance(),
        Command::Verify => ex.verify(),
        Command::Oracle => ex.oracle(),
    }
}

#[derive(Serialize)]
struct PointRow {
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct PressureRow {
    s: f64,
    #[serde(rename = "P_n")]
    p_n: f64,
}

#[derive(Serialize)]
struct LocalDimensionRow {
    probe: usize,
    probe_re: f64,
    probe_im: f64,
    dimension: Option<f64>,
    d_lower: Option<f64>,
    d_upper: Option<f64>,
    stderr: Option<f64>,
    k_lo: Option<usize>,
    k_hi: Option<usize>,
    error: String,
}

#[derive(Serialize)]
struct BallCountRow {
    probe: usize,
    probe_re: f64,
    probe_im: f64,
    r: f64,
    count: usize,
    measure: f64,
    exact: f64,
    z_score: f64,
}

#[derive(Serialize)]
struct RegularityRow {
    probe: usize,
    n: u32,
    value: f64,
    pass: Option<bool>,
    outer_count: usize,
    inner_count: usize,
}

#[derive(Serialize)]
struct RecurrenceRow {
    probe_re: f64,
    probe_im: f64,
    r: f64,
    tau: String,
    truncated: bool,
}

#[derive(Serialize)]
struct RateRow {
    probe: usize,
    probe_re: f64,
    probe_im: f64,
    periodic: Option<usize>,
    rate: Option<f64>,
    r_lower: Option<f64>,
    r_upper: Option<f64>,
    stderr: Option<f64>,
    truncated: Option<bool>,
    error: String,
}

#[derive(Serialize)]
struct MonotonicityCsvRow {
    case: usize,
    w_re: f64,
    w_im: f64,
    z_re: f64,
    z_im: f64,
    r: f64,
    k: f64,
    center_monotone: bool,
    incidence_monotone: bool,
    sandwich_left: Option<bool>,
    sandwich_right: Option<bool>,
}

#[derive(Serialize)]
struct VerifyRow {
    probe: usize,
    probe_re: f64,
    probe_im: f64,
    status: ProbeStatus,
    r_lower: Option<f64>,
    d_lower: Option<f64>,
    r_upper: Option<f64>,
    d_upper: Option<f64>,
    pass_lower: Option<bool>,
    pass_upper: Option<bool>,
    error: String,
}

#[derive(Serialize)]
struct OracleRecurrenceRow {
    probe_re: f64,
    probe_im: f64,
    r: f64,
    tau: String,
    truncated: bool,
    exact: String,
}

#[derive(Serialize)]
struct OracleMeasureRow {
    probe_re: f64,
    probe_im: f64,
    r: f64,
    measure: f64,
    exact: f64,
}

#[derive(Serialize)]
struct Probe {
    index: usize,
    point: Complex64,
    /// Exact period for the periodic probes.
    period: Option<usize>,
}

fn recurrence_rows(records: &[RecurrenceRecord]) -> Vec<RecurrenceRow> {
    records
        .iter()
        .flat_map(|rec| {
            rec.rows.iter().map(move |row| RecurrenceRow {
                probe_re: rec.center.re,
                probe_im: rec.center.im,
                r: row.r,
                tau: row.tau.to_string(),
                truncated: !row.tau.is_finite(),
            })
        })
        .collect()
}

/// Steps a float `z^d` orbit can take before a unit rounding error grows past 1e-6.
fn float_horizon(d: u32) -> u64 {
    ((1e-6 / f64::EPSILON).ln() / f64::from(d).ln()).floor() as u64
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

impl Experiment<'_> {
    fn seed(&self) -> u64 {
        self.cfg.sampler.seed
    }

    fn julia_sample(&self) -> Result<JuliaSample, CliError> {
        let s = &self.cfg.sampler;
        Ok(inverse_iteration_sample(&self.map, s.count, s.burn_in, s.seed)?)
    }

    fn schedule(&self) -> Result<RadiusSchedule, CliError> {
        RadiusSchedule::new(self.cfg.schedule.r0, self.cfg.schedule.k_max).map_err(|e| CliError::Config(format!("schedule: {e}")))
    }

    /// Unit-circle renormalization for `z^d`, shadowing against the sample otherwise.
    fn tracking(&self, points: &[Complex64]) -> Result<Tracking, CliError> {
        if self.map.has_unit_circle_julia_set() {
            return Ok(Tracking::UnitCircle);
        }
        let reference = ShadowReference::from_sample(points.to_vec())?;
        Ok(Tracking::with_reference(&self.map, Arc::new(reference)))
    }

    /// The first `count` sample points, then one repelling point of each
    /// configured exact period.
    fn probes(&self, points: &[Complex64], count: usize) -> Result<Vec<Probe>, CliError> {
        let mut probes: Vec<Probe> = points[..count]
            .iter()
            .enumerate()
            .map(|(index, &point)| Probe {
                index,
                point,
                period: None,
            })
            .collect();
        for &p in &self.cfg.recurrence.periodic_probes {
            probes.push(Probe {
                index: probes.len(),
                point: self.periodic_probe(p)?,
                period: Some(p),
            });
        }
        Ok(probes)
    }

    fn periodic_probe(&self, period: usize) -> Result<Complex64, CliError> {
        let mut candidates: Vec<Complex64> = self
            .map
            .periodic_points(period)?
            .into_iter()
            .filter(|p| p.log_multiplier > 0.0)
            .map(|p| p.point)
            .filter(|&z| exact_period(&self.map, z, period, PERIOD_TOLERANCE) == Some(period))
            .collect();
        candidates.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        candidates
            .first()
            .copied()
            .ok_or_else(|| CliError::Numeric(format!("no repelling point of exact period {period}")))
    }

    fn finish<R: Serialize>(
        &mut self,
        command: &'static str,
        results: R,
        checks: Vec<Check>,
    ) -> Result<Vec<Check>, CliError> {
        let report = ExperimentReport {
            command,
            name: self.cfg.name.clone(),
            jlab_version: env!("CARGO_PKG_VERSION"),
            seed: self.seed(),
            map: self.cfg.map.clone(),
            results,
            passed: checks.iter().all(|c| c.passed),
            checks,
        };
        self.out.json(&format!("{command}.json"), &report)?;
        Ok(report.checks)
    }

    /// `Ok(None)` carries a failed hyperbolicity check rather than an error.
    fn hyperbolicity(&self, points: &[Complex64]) -> Result<(Option<ExpansionEstimate>, Check), CliError> {
        let floor = self.cfg.checks.min_lambda;
        let condition = format!("lambda_hat > {floor}");
        match hyperbolicity_estimate(&self.map, points, self.cfg.thermo.hyperbolicity_n) {
            Ok(e) => Ok((Some(e), Check::new("hyperbolicity", e.lambda_hat > floor, e.lambda_hat, condition))),
            Err(Error::NotHyperbolic { lambda_hat }) => Ok((None, Check::new("hyperbolicity", false, lambda_hat, condition))),
            Err(e) => Err(e.into()),
        }
    }

    fn sample(&mut self) -> Result<Vec<Check>, CliError> {
        #[derive(Serialize)]
        struct Results {
            count: usize,
            burn_in: usize,
            start: Complex64,
            hyperbolicity: Option<ExpansionEstimate>,
        }
        let sample = self.julia_sample()?;
        self.out
            .csv("sample.csv", sample.points.iter().map(|z| PointRow { re: z.re, im: z.im }))?;
        let (hyperbolicity, check) = self.hyperbolicity(&sample.points)?;
        let results = Results {
            count: sample.points.len(),
            burn_in: sample.burn_in,
            start: sample.start,
            hyperbolicity,
        };
        self.finish("sample", results, vec![check])
    }

    fn dimension(&mut self) -> Result<Vec<Check>, CliError> {
        #[derive(Serialize)]
        struct LocalSummary {
            probes: usize,
            estimated: usize,
            mean: Option<f64>,
            mean_stderr: Option<f64>,
        }
        #[derive(Serialize)]
        struct Results {
            bowen: BowenRoot,
            repelling_points: usize,
            excluded_points: usize,
            pressure_closed_form_max_error: Option<f64>,
            hyperbolicity: Option<ExpansionEstimate>,
            local_dimension: LocalSummary,
            ball_count_max_abs_z: Option<f64>,
            ball_counts_compared: usize,
            regularity: Vec<RegularitySummary>,
        }

        let cfg = self.cfg;
        let t = &cfg.thermo;
        let mut checks = Vec::new();

        let spectrum = periodic_spectrum(&self.map, t.period_n)?;
        let bowen = bowen_root(&spectrum, (t.s_bracket[0], t.s_bracket[1]), t.tol)?;
        if let Some([lo, hi]) = cfg.checks.bowen_interval {
            checks.push(Check::new(
                "bowen_root",
                lo < bowen.s && bowen.s < hi,
                bowen.s,
                format!("in ({lo}, {hi}), bisection halfwidth {:e}", bowen.tol),
            ));
        }
        let steps = cfg.dimension.pressure_points - 1;
        let [s_lo, s_hi] = t.s_bracket;
        let curve: Vec<PressureRow> = (0..=steps)
            .map(|i| {
                let s = s_lo + (s_hi - s_lo) * i as f64 / steps as f64;
                PressureRow {
                    s,
                    p_n: spectrum.pressure(s),
                }
            })
            .collect();
        let closed_form_error = angle_map_degree(&self.map).map(|d| {
            let n = t.period_n as f64;
            let ln_d = f64::from(d).ln();
            let count = f64::from(d).powi(t.period_n as i32) - 1.0;
            curve
                .iter()
                .map(|row| (row.p_n - (count.ln() - n * row.s * ln_d) / n).abs())
                .fold(0.0, f64::max)
        });
        if let Some(err) = closed_form_error {
            checks.push(Check::at_most("pressure_closed_form", err, cfg.checks.pressure_closed_form));
        }
        self.out.csv("pressure.csv", curve)?;

        let sample = self.julia_sample()?;
        let (hyperbolicity, check) = self.hyperbolicity(&sample.points)?;
        checks.push(check);

        let sched = self.schedule()?;
        let n_points = sample.points.len();
        let local_probes = sample.points[..cfg.dimension.probes].to_vec();
        let regularity_probes = sample.points[..cfg.regularity.probes].to_vec();
        let mu = EmpiricalMeasure::for_schedule(sample.points, &sched)?;

        let estimates: Vec<Result<DimensionEstimate, Error>> =
            local_probes.par_iter().map(|&z| local_dimension(&mu, z, &sched)).collect();
        let rows: Vec<LocalDimensionRow> = local_probes
            .iter()
            .zip(&estimates)
            .enumerate()
            .map(|(probe, (z, est))| {
                let ok = est.as_ref().ok();
                LocalDimensionRow {
                    probe,
                    probe_re: z.re,
                    probe_im: z.im,
                    dimension: ok.map(|e| e.dimension),
                    d_lower: ok.map(|e| e.d_lower),
                    d_upper: ok.map(|e| e.d_upper),
                    stderr: ok.map(|e| e.slope_stderr),
                    k_lo: ok.map(|e| e.k_range.0),
                    k_hi: ok.map(|e| e.k_range.1),
                    error: est.as_ref().err().map(|e| e.to_string()).unwrap_or_default(),
                }
            })
            .collect();
        self.out.csv("local_dimension.csv", rows)?;
        let dims: Vec<f64> = estimates.iter().flatten().map(|e| e.dimension).collect();
        let failed = estimates.len() - dims.len();
        checks.push(Check::new(
            "local_dimension_failures",
            failed == 0,
            failed as f64,
            "== 0",
        ));
        let (mean, mean_stderr) = if dims.is_empty() {
            (None, None)
        } else {
            let (m, se) = mean_and_stderr(&dims);
            (Some(m), Some(se))
        };
        if let (Some([lo, hi]), Some(m)) = (cfg.checks.mean_local_dimension, mean) {
            checks.push(Check::new(
                "mean_local_dimension",
                lo <= m && m <= hi,
                m,
                format!("in [{lo}, {hi}]"),
            ));
        }
        if let (Some(tol), Some(m)) = (cfg.checks.bowen_vs_local, mean) {
            checks.push(Check::at_most("bowen_vs_local", (bowen.s - m).abs(), tol));
        }

        // Haar measure is exact for maps whose Julia set is the unit circle.
        // A probe taken from the sample sees itself plus N - 1 independent points.
        let mut ball_rows = Vec::new();
        if self.map.has_unit_circle_julia_set() {
            let others = (n_points - 1) as f64;
            for (probe, (z, est)) in local_probes.iter().zip(&estimates).enumerate() {
                let Ok(est) = est else { continue };
                for k in est.k_range.0..=est.k_range.1 {
                    let r = sched.radii()[k];
                    let h = rational_from_f64(chord_to_halfwidth(r))?;
                    let p = oracle_arc_measure(&h).to_f64().unwrap_or(f64::NAN);
                    let count = mu.ball_count(*z, r);
                    let se = (others * p * (1.0 - p)).sqrt();
                    ball_rows.push(BallCountRow {
                        probe,
                        probe_re: z.re,
                        probe_im: z.im,
                        r,
                        count,
                        measure: count as f64 / n_points as f64,
                        exact: p,
                        z_score: (count as f64 - 1.0 - others * p) / se,
                    });
                }
            }
        }
        let ball_max = ball_rows.iter().map(|r| r.z_score.abs()).reduce(f64::max);
        if let Some(worst) = ball_max {
            checks.push(Check::at_most("ball_counts_vs_haar", worst, cfg.checks.haar_sigma));
        }
        let ball_counts_compared = ball_rows.len();
        if !ball_rows.is_empty() {
            self.out.csv("ball_counts.csv", ball_rows)?;
        }

        let [n_lo, n_hi] = cfg.regularity.n_range;
        let regularity = check_weak_diametric_regularity(&mu, &regularity_probes, n_lo, n_hi)?;
        self.out.csv(
            "regularity.csv",
            regularity.entries.iter().map(|e| RegularityRow {
                probe: e.probe,
                n: e.n,
                value: e.value,
                pass: e.pass,
                outer_count: e.outer_count,
                inner_count: e.inner_count,
            }),
        )?;
        checks.push(Check::new(
            "regularity_violations",
            regularity.violations() == 0 && regularity.checked() > 0,
            regularity.violations() as f64,
            format!("== 0 over {} data-sufficient entries", regularity.checked()),
        ));

        let results = Results {
            bowen,
            repelling_points: spectrum.log_multipliers.len(),
            excluded_points: spectrum.excluded,
            pressure_closed_form_max_error: closed_form_error,
            hyperbolicity,
            local_dimension: LocalSummary {
                probes: local_probes.len(),
                estimated: dims.len(),
                mean,
                mean_stderr,
            },
            ball_count_max_abs_z: ball_max,
            ball_counts_compared,
            regularity: regularity.per_n,
        };
        self.finish("dimension", results, checks)
    }

    fn recurrence(&mut self) -> Result<Vec<Check>, CliError> {
        #[derive(Serialize)]
        struct MonotonicitySummary {
            cases: usize,
            n_max: u64,
            center_violations: usize,
            incidence_violations: usize,
            sandwich_failures: usize,
            sandwich_checked: usize,
        }
        #[derive(Serialize)]
        struct Results {
            n_max: u64,
            probes: Vec<Probe>,
            rates: Vec<Option<RateEstimate>>,
            mean_rate: Option<f64>,
            mean_rate_stderr: Option<f64>,
            monotonicity: MonotonicitySummary,
        }

        let cfg = self.cfg;
        let rc = &cfg.recurrence;
        let sample = self.julia_sample()?;
        let tracking = self.tracking(&sample.points)?;
        let sched = self.schedule()?;
        let probes = self.probes(&sample.points, rc.probes)?;
        let outcomes: Vec<_> = probes
            .par_iter()
            .map(|p| recurrence_rate_with(&self.map, p.point, &sched, rc.n_max, tracking.clone()))
            .collect();

        let mut records = Vec::new();
        let mut rate_rows = Vec::new();
        let mut rates = Vec::new();
        let mut checks = Vec::new();
        for (p, outcome) in probes.iter().zip(outcomes) {
            let (rate, error) = match outcome {
                Ok((record, rate)) => {
                    records.push(record);
                    (Some(rate), String::new())
                }
                Err(e) => (None, e.to_string()),
            };
            rate_rows.push(RateRow {
                probe: p.index,
                probe_re: p.point.re,
                probe_im: p.point.im,
                periodic: rate.and_then(|r| r.periodic),
                rate: rate.map(|r| r.rate),
                r_lower: rate.map(|r| r.r_lower),
                r_upper: rate.map(|r| r.r_upper),
                stderr: rate.map(|r| r.slope_stderr),
                truncated: rate.map(|r| r.truncated),
                error,
            });
            if let Some(period) = p.period {
                let flagged = rate.is_some_and(|r| r.periodic.is_some() && r.rate == 0.0);
                checks.push(Check::new(
                    &format!("periodic_probe_p{period}"),
                    flagged,
                    rate.map_or(f64::NAN, |r| r.rate),
                    "flagged periodic with rate == 0",
                ));
            }
            rates.push(rate);
        }
        self.out.csv("recurrence.csv", recurrence_rows(&records))?;
        self.out.csv("rates.csv", rate_rows)?;

        let typical: Vec<f64> = probes
            .iter()
            .zip(&rates)
            .filter(|(p, _)| p.period.is_none())
            .filter_map(|(_, r)| r.filter(|r| r.periodic.is_none()).map(|r| r.rate))
            .collect();
        let (mean_rate, mean_rate_stderr) = if typical.is_empty() {
            (None, None)
        } else {
            let (m, se) = mean_and_stderr(&typical);
            (Some(m), Some(se))
        };

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed() ^ MONOTONICITY_STREAM);
        let pts = &sample.points;
        let cases: Vec<MonotonicityCase> = (0..rc.monotonicity_cases)
            .map(|_| MonotonicityCase {
                w: pts[rng.gen_range(0..pts.len())],
                z: pts[rng.gen_range(0..pts.len())],
                r: 10f64.powf(rng.gen_range(-3.0..-0.5)),
                k: rng.gen_range(1.0..4.0),
            })
            .collect();
        let mono = verify_monotonicity_with(&self.map, &cases, rc.monotonicity_n_max, tracking)?;
        self.out.csv(
            "monotonicity.csv",
            cases.iter().zip(&mono.rows).map(|(c, row)| MonotonicityCsvRow {
                case: row.case,
                w_re: c.w.re,
                w_im: c.w.im,
                z_re: c.z.re,
                z_im: c.z.im,
                r: c.r,
                k: c.k,
                center_monotone: row.center_monotone,
                incidence_monotone: row.incidence_monotone,
                sandwich_left: row.sandwich_left,
                sandwich_right: row.sandwich_right,
            }),
        )?;
        checks.push(Check::at_most("center_monotonicity_violations", mono.center_violations as f64, 0.0));
        checks.push(Check::at_most(
            "incidence_monotonicity_violations",
            mono.incidence_violations as f64,
            0.0,
        ));

        let results = Results {
            n_max: rc.n_max,
            probes,
            rates,
            mean_rate,
            mean_rate_stderr,
            monotonicity: MonotonicitySummary {
                cases: cases.len(),
                n_max: rc.monotonicity_n_max,
                center_violations: mono.center_violations,
                incidence_violations: mono.incidence_violations,
                sandwich_failures: mono.sandwich_failures,
                sandwich_checked: mono.sandwich_checked,
            },
        };
        self.finish("recurrence", results, checks)
    }

    fn verify(&mut self) -> Result<Vec<Check>, CliError> {
        #[derive(Serialize)]
        struct Results {
            n_max: u64,
            periodic_periods: Vec<usize>,
            comparison: ComparisonReport,
        }

        let cfg = self.cfg;
        let rc = &cfg.recurrence;
        let sample = self.julia_sample()?;
        let tracking = self.tracking(&sample.points)?;
        let sched = self.schedule()?;
        let probes = self.probes(&sample.points, rc.probes)?;
        let points: Vec<Complex64> = probes.iter().map(|p| p.point).collect();
        let mu = EmpiricalMeasure::for_schedule(sample.points, &sched)?;
        let (report, records) = compare_rate_dimension(&self.map, &mu, &points, &sched, rc.n_max, rc.tol, tracking)?;

        self.out.csv("verify_recurrence.csv", recurrence_rows(&records))?;
        self.out.csv(
            "verify.csv",
            report.rows.iter().map(|row| VerifyRow {
                probe: row.probe,
                probe_re: row.re,
                probe_im: row.im,
                status: row.status,
                r_lower: row.rate.map(|r| r.r_lower),
                d_lower: row.dimension.map(|d| d.d_lower),
                r_upper: row.rate.map(|r| r.r_upper),
                d_upper: row.dimension.map(|d| d.d_upper),
                pass_lower: row.pass_lower,
                pass_upper: row.pass_upper,
                error: row.error.clone().unwrap_or_default(),
            }),
        )?;

        let mut checks = vec![Check::new(
            "pass_fraction",
            report.compared > 0 && report.pass_fraction >= cfg.checks.pass_fraction,
            report.pass_fraction,
            format!(
                ">= {} for |R_lower - d_lower| <= {} over {} compared probes",
                cfg.checks.pass_fraction, rc.tol, report.compared
            ),
        )];
        for (probe, row) in probes.iter().zip(&report.rows) {
            if let Some(period) = probe.period {
                let ok = row.status == ProbeStatus::MeasureZeroException && row.rate.is_some_and(|r| r.rate == 0.0);
                checks.push(Check::new(
                    &format!("periodic_probe_p{period}"),
                    ok,
                    row.rate.map_or(f64::NAN, |r| r.rate),
                    "measure-zero exception with rate == 0",
                ));
            }
        }
        let typical_exceptions = probes
            .iter()
            .zip(&report.rows)
            .filter(|(p, row)| p.period.is_none() && row.status == ProbeStatus::MeasureZeroException)
            .count();
        checks.push(Check::at_most(
            "typical_probes_flagged_periodic",
            typical_exceptions as f64,
            0.0,
        ));

        let results = Results {
            n_max: rc.n_max,
            periodic_periods: rc.periodic_probes.clone(),
            comparison: report,
        };
        self.finish("verify", results, checks)
    }

    fn covariance(&mut self) -> Result<Vec<Check>, CliError> {
        #[derive(Serialize)]
        struct Residuals {
            polynomial: Option<ModelFit>,
            geometric: Option<ModelFit>,
        }
        #[derive(Serialize)]
        struct Classification {
            model: &'static str,
            parameter: Option<f64>,
            parameter_stderr: Option<f64>,
            residuals: Residuals,
            usable: usize,
            reason: String,
        }
        #[derive(Serialize)]
        struct Results {
            start: Complex64,
            length: usize,
            observable_lipschitz_lower_bound: LipschitzEstimate,
            covariances: Vec<CovarianceEstimate>,
            fit: DecayFit,
        }

        let cfg = self.cfg;
        let cc = &cfg.covariance;
        let sample = self.julia_sample()?;
        let tracking = self.tracking(&sample.points)?;
        let f = cc.observable;
        let start = sample.points[0];
        let covs = covariance_curve(&self.map, start, f, f, cc.n_range[0]..=cc.n_range[1], cc.length, tracking)?;
        self.out.csv("covariance.csv", covs.iter().copied())?;

        let fit = decay_fit(&DecaySequence::from_covariances(&covs));
        let (model, chosen) = match fit.classification {
            DecayClassification::Polynomial { .. } => ("polynomial", fit.polynomial),
            DecayClassification::SuperPolynomialEvidence { .. } => ("super_polynomial_evidence", fit.geometric),
            DecayClassification::Inconclusive => ("inconclusive", None),
        };
        self.out.json(
            "classification.json",
            &Classification {
                model,
                parameter: chosen.map(|m| m.parameter),
                parameter_stderr: chosen.map(|m| m.parameter_stderr),
                residuals: Residuals {
                    polynomial: fit.polynomial,
                    geometric: fit.geometric,
                },
                usable: fit.usable,
                reason: fit.reason.clone(),
            },
        )?;

        let lip_points = &sample.points[..sample.points.len().min(LIPSCHITZ_POINTS)];
        let lipschitz = lipschitz_norm(|z| f.eval(z), lip_points, LIPSCHITZ_PAIRS, self.seed() ^ LIPSCHITZ_STREAM)?;

        let mut checks = Vec::new();
        if let Some(expected) = &cfg.checks.decay {
            checks.push(Check::new(
                "decay_model",
                expected == model,
                chosen.map_or(f64::NAN, |m| m.parameter),
                format!("model == {expected}"),
            ));
        }
        let results = Results {
            start,
            length: cc.length,
            observable_lipschitz_lower_bound: lipschitz,
            covariances: covs,
            fit,
        };
        self.finish("covariance", results, checks)
    }

    fn oracle(&mut self) -> Result<Vec<Check>, CliError> {
        #[derive(Serialize)]
        struct Agreement {
            trials: usize,
            exact_orbit_mismatches: usize,
            float_horizon: u64,
            float_within_horizon: usize,
            float_mismatches_within_horizon: usize,
            float_beyond_horizon: usize,
            float_mismatches_beyond_horizon: usize,
        }
        #[derive(Serialize)]
        struct Results {
            degree: u32,
            recurrence: Agreement,
            arcs: usize,
            arc_max_abs_z: Option<f64>,
        }
        struct Trial {
            theta: RationalAngle,
            r: f64,
            exact: ReturnTime,
            exact_orbit: ReturnTime,
            float: ReturnTime,
        }

        let cfg = self.cfg;
        let oc = &cfg.oracle;
        let d = angle_map_degree(&self.map)
            .ok_or_else(|| CliError::Config("map: the oracle subcommand needs a map of the form z^d".into()))?;
        let q_lo = 1000.min(oc.max_denominator - 1);
        let random_angle = |rng: &mut ChaCha8Rng| -> Result<RationalAngle, CliError> {
            let q = rng.gen_range(q_lo..oc.max_denominator);
            Ok(RationalAngle::new(rng.gen_range(0..q), q)?)
        };
        let map = &self.map;
        let trials: Vec<Trial> = (0..oc.trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed() ^ ORACLE_STREAM);
                rng.set_stream(i as u64);
                let theta = random_angle(&mut rng)?;
                let r: f64 = rng.gen_range(0.005..0.1);
                let h = rational_from_f64(chord_to_halfwidth(r))?;
                let z = theta.to_complex();
                let exact = oracle_return_time(&theta, d, &h, oc.n_max)?;
                let orbit = angle_orbit(&theta, d)?.map(|a| Ok(a.to_complex()));
                let exact_orbit = incidence_times_along(orbit, z, &[r], oc.n_max)?[0];
                let float = return_time_with(map, z, z, r, oc.n_max, Tracking::UnitCircle)?;
                Ok(Trial {
                    theta,
                    r,
                    exact,
                    exact_orbit,
                    float,
                })
            })
            .collect::<Result<_, CliError>>()?;
        self.out.csv(
            "oracle_recurrence.csv",
            trials.iter().map(|t| {
                let z = t.theta.to_complex();
                OracleRecurrenceRow {
                    probe_re: z.re,
                    probe_im: z.im,
                    r: t.r,
                    tau: t.float.to_string(),
                    truncated: !t.float.is_finite(),
                    exact: t.exact.to_string(),
                }
            }),
        )?;
        let horizon = oc.float_horizon.unwrap_or_else(|| float_horizon(d));
        let short = |t: &&Trial| matches!(t.exact, ReturnTime::Finite(n) if n <= horizon);
        let within: Vec<&Trial> = trials.iter().filter(short).collect();
        let agreement = Agreement {
            trials: trials.len(),
            exact_orbit_mismatches: trials.iter().filter(|t| t.exact != t.exact_orbit).count(),
            float_horizon: horizon,
            float_within_horizon: within.len(),
            float_mismatches_within_horizon: within.iter().filter(|t| t.exact != t.float).count(),
            float_beyond_horizon: trials.len() - within.len(),
            float_mismatches_beyond_horizon: trials
                .iter()
                .filter(|t| !short(t) && t.exact != t.float)
                .count(),
        };
        let bound = cfg.checks.oracle_mismatch;
        let exact_fraction = agreement.exact_orbit_mismatches as f64 / agreement.trials as f64;
        let mut checks = vec![Check::new(
            "euclidean_vs_arc_on_exact_orbits",
            exact_fraction < bound,
            exact_fraction,
            format!("mismatch fraction < {bound}"),
        )];
        let float_fraction = if within.is_empty() {
            f64::NAN
        } else {
            agreement.float_mismatches_within_horizon as f64 / within.len() as f64
        };
        checks.push(Check::new(
            "float_vs_exact_within_horizon",
            float_fraction < bound,
            float_fraction,
            format!("mismatch fraction < {bound} for exact tau <= {horizon}"),
        ));

        let mut arc_rows = Vec::new();
        if oc.arcs > 0 {
            let sample = self.julia_sample()?;
            let n = sample.points.len() as f64;
            let mu = EmpiricalMeasure::for_schedule(sample.points, &self.schedule()?)?;
            for i in 0..oc.arcs {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed() ^ ARC_STREAM);
                rng.set_stream(i as u64);
                let theta = random_angle(&mut rng)?;
                let r: f64 = rng.gen_range(0.01..0.5);
                let p = oracle_arc_measure(&rational_from_f64(chord_to_halfwidth(r))?)
                    .to_f64()
                    .unwrap_or(f64::NAN);
                let z = theta.to_complex();
                arc_rows.push(OracleMeasureRow {
                    probe_re: z.re,
                    probe_im: z.im,
                    r,
                    measure: mu.ball_measure(z, r),
                    exact: p,
                });
            }
            let worst = arc_rows
                .iter()
                .map(|row| (row.measure - row.exact).abs() / (row.exact * (1.0 - row.exact) / n).sqrt())
                .fold(0.0, f64::max);
            checks.push(Check::at_most("arc_measures_vs_haar", worst, cfg.checks.haar_sigma));
        }
        let arc_max_abs_z = checks
            .iter()
            .find(|c| c.name == "arc_measures_vs_haar")
            .map(|c| c.value);
        let arcs = arc_rows.len();
        self.out.csv("oracle_measure.csv", arc_rows)?;

        let results = Results {
            degree: d,
            recurrence: agreement,
            arcs,
            arc_max_abs_z,
        };
        self.finish("oracle", results, checks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_horizon_shrinks_with_degree() {
        assert_eq!(float_horizon(2), 32);
        assert_eq!(float_horizon(3), 20);
        assert!(3f64.powi(20) * f64::EPSILON <= 1e-6);
    }
}
