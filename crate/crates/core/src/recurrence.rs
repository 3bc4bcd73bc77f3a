//! Return and incidence times, recurrence rates, and their comparison with
//! pointwise dimension.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::empirical_measure::{cutoff_slopes, local_dimension, EmpiricalMeasure, RadiusSchedule};
use crate::error::{Error, Result};
use crate::grid::in_open_ball;
use crate::orbit::{exact_period, ForwardOrbit, Tracking};
use crate::rational_map::RationalMap;
use crate::stats::origin_fit;

pub const DEFAULT_N_MAX: u64 = 10_000_000;
/// Rows with smaller return times are left out of rate fits.
pub const MIN_RETURN_TIME: u64 = 10;
pub const MIN_RATE_ROWS: usize = 4;
/// Longest period checked when deciding whether a center is periodic.
pub const MAX_CENTER_PERIOD: usize = 64;
pub const PERIOD_TOLERANCE: f64 = 1e-9;

/// `tau_r(w, z)`; `NotFound` stands for infinity and sorts above every
/// finite value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnTime {
    Finite(u64),
    NotFound { n_max: u64, escaped: bool },
}

impl ReturnTime {
    pub fn finite(self) -> Option<u64> {
        match self {
            ReturnTime::Finite(n) => Some(n),
            ReturnTime::NotFound { .. } => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ReturnTime::Finite(_))
    }
}

impl Ord for ReturnTime {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.finite(), other.finite()) {
            (Some(a), Some(b)) => a.cmp(&b),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        }
    }
}

impl PartialOrd for ReturnTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ReturnTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReturnTime::Finite(n) => write!(f, "{n}"),
            ReturnTime::NotFound { .. } => f.write_str("inf"),
        }
    }
}

impl Serialize for ReturnTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ReturnTime::Finite(n) => s.serialize_u64(*n),
            ReturnTime::NotFound { .. } => s.serialize_none(),
        }
    }
}

/// Incidence times of the orbit of `w` into `N_r(z)` for several radii,
/// from a single orbit pass.
pub fn incidence_times(
    map: &RationalMap,
    w: Complex64,
    z: Complex64,
    radii: &[f64],
    n_max: u64,
    tracking: Tracking,
) -> Result<Vec<ReturnTime>> {
    incidence_times_along(ForwardOrbit::new(map, w, tracking), z, radii, n_max)
}

/// Incidence times into `N_r(z)` along any orbit source yielding
/// `T(w), T^2(w), ...`; an `OrbitEscaped` error ends the orbit.
pub fn incidence_times_along<I>(orbit: I, z: Complex64, radii: &[f64], n_max: u64) -> Result<Vec<ReturnTime>>
where
    I: IntoIterator<Item = Result<Complex64>>,
{
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let mut out = vec![None; radii.len()];
    let mut open: Vec<usize> = (0..radii.len()).collect();
    let mut widest = radii.iter().copied().fold(0.0, f64::max);
    let mut orbit = orbit.into_iter();
    let mut escaped = false;
    for n in 1..=n_max {
        let x = match orbit.next() {
            Some(Ok(x)) => x,
            Some(Err(Error::OrbitEscaped { .. })) | None => {
                escaped = true;
                break;
            }
            Some(Err(e)) => return Err(e),
        };
        if !in_open_ball(x, z, widest) {
            continue;
        }
        open.retain(|&i| {
            if in_open_ball(x, z, radii[i]) {
                out[i] = Some(ReturnTime::Finite(n));
                false
            } else {
                true
            }
        });
        if open.is_empty() {
            break;
        }
        widest = open.iter().map(|&i| radii[i]).fold(0.0, f64::max);
    }
    Ok(out
        .into_iter()
        .map(|t| t.unwrap_or(ReturnTime::NotFound { n_max, escaped }))
        .collect())
}

/// Least `n` in `1..=n_max` with `|T^n(w) - z| < r`.
pub fn return_time(map: &RationalMap, w: Complex64, z: Complex64, r: f64, n_max: u64) -> Result<ReturnTime> {
    return_time_with(map, w, z, r, n_max, Tracking::for_map(map))
}

pub fn return_time_with(
    map: &RationalMap,
    w: Complex64,
    z: Complex64,
    r: f64,
    n_max: u64,
    tracking: Tracking,
) -> Result<ReturnTime> {
    Ok(incidence_times(map, w, z, &[r], n_max, tracking)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceRow {
    pub r: f64,
    pub tau: ReturnTime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceRecord {
    pub center: Complex64,
    /// One row per schedule radius, in decreasing `r`.
    pub rows: Vec<RecurrenceRow>,
}

pub fn recurrence_record(
    map: &RationalMap,
    z: Complex64,
    sched: &RadiusSchedule,
    n_max: u64,
    tracking: Tracking,
) -> Result<RecurrenceRecord> {
    let taus = incidence_times(map, z, z, sched.radii(), n_max, tracking)?;
    Ok(RecurrenceRecord {
        center: z,
        rows: sched
            .radii()
            .iter()
            .zip(taus)
            .map(|(&r, tau)| RecurrenceRow { r, tau })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub r_lower: f64,
    pub r_upper: f64,
    pub slope_stderr: f64,
    /// Some rows hit `n_max` and were left out.
    pub truncated: bool,
    /// Exact period of the center, when it is periodic.
    pub periodic: Option<usize>,
}

/// Rate from a record: the least-squares slope through the origin of
/// `log tau_r` against `-log r` over rows with `tau >= MIN_RETURN_TIME`.
/// `r_lower`/`r_upper` are the extremes of the same fit cut off at each of
/// the last few usable radii.
pub fn rate_from_record(record: &RecurrenceRecord) -> Result<RateEstimate> {
    let truncated = record.rows.iter().any(|row| !row.tau.is_finite());
    let rows: Vec<usize> = (0..record.rows.len())
        .filter(|&i| matches!(record.rows[i].tau, ReturnTime::Finite(t) if t >= MIN_RETURN_TIME))
        .collect();
    if rows.len() < MIN_RATE_ROWS {
        return Err(Error::InsufficientRecurrence {
            finite: rows.len(),
            required: MIN_RATE_ROWS,
        });
    }
    let fit = |sel: &[usize]| {
        let x: Vec<f64> = sel.iter().map(|&i| -record.rows[i].r.ln()).collect();
        let y: Vec<f64> = sel
            .iter()
            .map(|&i| (record.rows[i].tau.finite().expect("finite row") as f64).ln())
            .collect();
        origin_fit(&x, &y)
    };
    let (rate, slope_stderr) = fit(&rows);
    let running = cutoff_slopes(&rows, |sel| fit(sel).0);
    Ok(RateEstimate {
        rate,
        r_lower: running.iter().copied().fold(rate, f64::min),
        r_upper: running.iter().copied().fold(rate, f64::max),
        slope_stderr,
        truncated,
        periodic: None,
    })
}

fn periodic_rate(period: usize) -> RateEstimate {
    RateEstimate {
        rate: 0.0,
        r_lower: 0.0,
        r_upper: 0.0,
        slope_stderr: 0.0,
        truncated: false,
        periodic: Some(period),
    }
}

pub fn recurrence_rate(map: &RationalMap, z: Complex64, sched: &RadiusSchedule, n_max: u64) -> Result<RateEstimate> {
    recurrence_rate_with(map, z, sched, n_max, Tracking::for_map(map)).map(|(_, rate)| rate)
}

/// Record and rate for the center `z`. A periodic center has return times
/// bounded by its period, so its rate is exactly 0.
pub fn recurrence_rate_with(
    map: &RationalMap,
    z: Complex64,
    sched: &RadiusSchedule,
    n_max: u64,
    tracking: Tracking,
) -> Result<(RecurrenceRecord, RateEstimate)> {
    if sched.radii().len() < MIN_RATE_ROWS {
        return Err(Error::InsufficientRecurrence {
            finite: sched.radii().len(),
            required: MIN_RATE_ROWS,
        });
    }
    let record = recurrence_record(map, z, sched, n_max, tracking)?;
    if let Some(p) = exact_period(map, z, MAX_CENTER_PERIOD, PERIOD_TOLERANCE) {
        return Ok((record, periodic_rate(p)));
    }
    let rate = rate_from_record(&record)?;
    Ok((record, rate))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityCase {
    pub w: Complex64,
    pub z: Complex64,
    pub r: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityRow {
    pub case: usize,
    /// `tau_{kr}(z) <= tau_r(z)`.
    pub center_monotone: bool,
    /// `tau_{kr}(w, z) <= tau_r(w, z)`.
    pub incidence_monotone: bool,
    /// `tau_{kr}(z) <= tau_r(w, z)`, only when `w` lies in `N_r(z)`.
    pub sandwich_left: Option<bool>,
    /// `tau_r(w, z) <= tau_{r/k}(z)`, only when `w` lies in `N_r(z)`.
    pub sandwich_right: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub rows: Vec<MonotonicityRow>,
    pub center_violations: usize,
    pub incidence_violations: usize,
    /// Logged only; the sandwich is not asserted.
    pub sandwich_failures: usize,
    pub sandwich_checked: usize,
}

fn check_case(
    map: &RationalMap,
    index: usize,
    case: &MonotonicityCase,
    n_max: u64,
    tracking: Tracking,
) -> Result<MonotonicityRow> {
    let MonotonicityCase { w, z, r, k } = *case;
    if !(k >= 1.0) || !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("case {index}: need r > 0 and k >= 1")));
    }
    let center = incidence_times(map, z, z, &[k * r, r, r / k], n_max, tracking.clone())?;
    let incidence = incidence_times(map, w, z, &[k * r, r], n_max, tracking)?;
    let inside = in_open_ball(w, z, r);
    Ok(MonotonicityRow {
        case: index,
        center_monotone: center[0] <= center[1],
        incidence_monotone: incidence[0] <= incidence[1],
        sandwich_left: inside.then(|| center[0] <= incidence[1]),
        sandwich_right: inside.then(|| incidence[1] <= center[2]),
    })
}

pub fn verify_monotonicity(map: &RationalMap, cases: &[MonotonicityCase], n_max: u64) -> Result<MonotonicityReport> {
    verify_monotonicity_with(map, cases, n_max, Tracking::for_map(map))
}

/// Checks `tau_{kr} <= tau_r` for centers and for incidence of `w`, treating
/// `NotFound` as infinity, and logs the sandwich chain for `w` in `N_r(z)`.
pub fn verify_monotonicity_with(
    map: &RationalMap,
    cases: &[MonotonicityCase],
    n_max: u64,
    tracking: Tracking,
) -> Result<MonotonicityReport> {
    let rows = cases
        .par_iter()
        .enumerate()
        .map(|(i, case)| check_case(map, i, case, n_max, tracking.clone()))
        .collect::<Result<Vec<_>>>()?;
    let sandwich: Vec<bool> = rows
        .iter()
        .flat_map(|row| [row.sandwich_left, row.sandwich_right])
        .flatten()
        .collect();
    Ok(MonotonicityReport {
        center_violations: rows.iter().filter(|row| !row.center_monotone).count(),
        incidence_violations: rows.iter().filter(|row| !row.incidence_monotone).count(),
        sandwich_failures: sandwich.iter().filter(|ok| !**ok).count(),
        sandwich_checked: sandwich.len(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeStatus {
    Compared,
    MeasureZeroException,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub probe: usize,
    pub re: f64,
    pub im: f64,
    pub status: ProbeStatus,
    pub rate: Option<RateEstimate>,
    pub dimension: Option<crate::empirical_measure::DimensionEstimate>,
    /// `|R_lower - d_lower| <= tol`.
    pub pass_lower: Option<bool>,
    /// `|R_upper - d_upper| <= tol`.
    pub pass_upper: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub tol: f64,
    pub rows: Vec<ComparisonRow>,
    pub compared: usize,
    pub passed: usize,
    pub exceptions: usize,
    pub errors: usize,
    /// `passed / compared`; 0 when nothing was compared.
    pub pass_fraction: f64,
}

/// Compares recurrence rates with pointwise dimensions probe by probe.
/// Periodic probes are reported as measure-zero exceptions and failed
/// estimators as errors; neither enters the pass fraction.
pub fn compare_rate_dimension(
    map: &RationalMap,
    mu: &EmpiricalMeasure,
    probes: &[Complex64],
    sched: &RadiusSchedule,
    n_max: u64,
    tol: f64,
    tracking: Tracking,
) -> Result<(ComparisonReport, Vec<RecurrenceRecord>)> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument("tolerance must be non-negative".into()));
    }
    let results: Vec<(ComparisonRow, Option<RecurrenceRecord>)> = probes
        .par_iter()
        .enumerate()
        .map(|(probe, &z)| {
            let mut row = ComparisonRow {
                probe,
                re: z.re,
                im: z.im,
                status: ProbeStatus::Error,
                rate: None,
                dimension: None,
                pass_lower: None,
                pass_upper: None,
                error: None,
            };
            let (record, rate) = match recurrence_rate_with(map, z, sched, n_max, tracking.clone()) {
                Ok(v) => v,
                Err(e) => {
                    row.error = Some(e.to_string());
                    return (row, None);
                }
            };
            row.rate = Some(rate);
            match local_dimension(mu, z, sched) {
                Ok(d) => row.dimension = Some(d),
                Err(e) => row.error = Some(e.to_string()),
            }
            if rate.periodic.is_some() {
                row.status = ProbeStatus::MeasureZeroException;
            } else if let Some(d) = row.dimension {
                row.status = ProbeStatus::Compared;
                row.pass_lower = Some((rate.r_lower - d.d_lower).abs() <= tol);
                row.pass_upper = Some((rate.r_upper - d.d_upper).abs() <= tol);
            }
            (row, Some(record))
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut records = Vec::new();
    for (row, record) in results {
        rows.push(row);
        records.extend(record);
    }
    let count = |s: ProbeStatus| rows.iter().filter(|r| r.status == s).count();
    let compared = count(ProbeStatus::Compared);
    let passed = rows.iter().filter(|r| r.pass_lower == Some(true)).count();
    Ok((
        ComparisonReport {
            tol,
            compared,
            passed,
            exceptions: count(ProbeStatus::MeasureZeroException),
            errors: count(ProbeStatus::Error),
            pass_fraction: if compared > 0 { passed as f64 / compared as f64 } else { 0.0 },
            rows,
        },
        records,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn z2() -> RationalMap {
        RationalMap::power(2).unwrap()
    }

    fn circle(t: f64) -> Complex64 {
        Complex64::from_polar(1.0, TAU * t)
    }

    #[test]
    fn return_time_examples() {
        let map = z2();
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(return_time(&map, one, one, 0.01, 10).unwrap(), ReturnTime::Finite(1));
        let w = circle(1.0 / 3.0);
        assert_eq!(return_time(&map, w, w, 0.1, 10).unwrap(), ReturnTime::Finite(2));
        let miss = return_time(&map, one, -one, 0.1, 1_000_000).unwrap();
        assert_eq!(miss, ReturnTime::NotFound { n_max: 1_000_000, escaped: false });
        assert!(return_time(&map, one, one, 0.0, 10).is_err());
    }

    #[test]
    fn not_found_is_infinite() {
        let inf = ReturnTime::NotFound { n_max: 5, escaped: true };
        assert!(ReturnTime::Finite(u64::MAX) < inf);
        assert_eq!(inf.cmp(&ReturnTime::NotFound { n_max: 9, escaped: false }), Ordering::Equal);
        assert_eq!(inf.to_string(), "inf");
    }

    #[test]
    fn escaping_orbit_is_flagged() {
        let map = z2();
        let t = return_time_with(&map, Complex64::new(1.5, 0.0), Complex64::new(0.0, 0.0), 0.1, 100, Tracking::Raw).unwrap();
        assert_eq!(t, ReturnTime::NotFound { n_max: 100, escaped: true });
    }

    #[test]
    fn periodic_center_has_zero_rate() {
        let rate = recurrence_rate(&z2(), circle(1.0 / 3.0), &RadiusSchedule::default(), 1000).unwrap();
        assert_eq!((rate.r_lower, rate.r_upper, rate.periodic), (0.0, 0.0, Some(2)));
    }

    #[test]
    fn single_radius_schedule_is_rejected() {
        let sched = RadiusSchedule::new(0.1, 0).unwrap();
        let err = recurrence_rate(&z2(), circle(0.1234), &sched, 1000).unwrap_err();
        assert!(matches!(err, Error::InsufficientRecurrence { .. }));
    }

    #[test]
    fn typical_rate_near_one() {
        let rate = recurrence_rate(&z2(), circle(0.2718281828), &RadiusSchedule::default(), 10_000_000).unwrap();
        assert!((rate.rate - 1.0).abs() < 0.2, "{rate:?}");
        assert!(rate.r_lower <= rate.rate && rate.rate <= rate.r_upper);
    }

    #[test]
    fn identity_case_holds_with_equality() {
        let z = circle(0.377);
        let cases = [MonotonicityCase { w: z, z, r: 0.05, k: 1.0 }];
        let report = verify_monotonicity(&z2(), &cases, 100_000).unwrap();
        let row = &report.rows[0];
        assert!(row.center_monotone && row.incidence_monotone);
        assert_eq!((row.sandwich_left, row.sandwich_right), (Some(true), Some(true)));
    }

    #[test]
    fn multi_radius_pass_matches_single_radius_calls() {
        let map = z2();
        let (w, z) = (circle(0.61), circle(0.17));
        let radii = [0.3, 0.05, 0.01, 0.002];
        let all = incidence_times(&map, w, z, &radii, 1_000_000, Tracking::for_map(&map)).unwrap();
        for (r, t) in radii.iter().zip(&all) {
            assert_eq!(return_time(&map, w, z, *r, 1_000_000).unwrap(), *t);
        }
    }
}
