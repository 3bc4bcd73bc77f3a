//! The rate/dimension comparison must be able to fail: pair circle
//! recurrence (rate 1) with a measure of dimension 2.

use jlab_core::empirical_measure::{EmpiricalMeasure, RadiusSchedule};
use jlab_core::orbit::Tracking;
use jlab_core::rational_map::RationalMap;
use jlab_core::recurrence::{compare_rate_dimension, ProbeStatus};
use jlab_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

#[test]
fn disk_measure_against_circle_recurrence_fails() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    // Uniform on the disk of radius 1.5, which contains the unit circle.
    let disk: Vec<Complex64> = (0..400_000)
        .map(|_| Complex64::from_polar(1.5 * rng.gen::<f64>().sqrt(), TAU * rng.gen::<f64>()))
        .collect();
    let sched = RadiusSchedule::new(0.5, 16).unwrap();
    let mu = EmpiricalMeasure::for_schedule(disk, &sched).unwrap();
    let probes: Vec<Complex64> = (0..20).map(|_| Complex64::from_polar(1.0, TAU * rng.gen::<f64>())).collect();
    let map = RationalMap::power(2).unwrap();
    let (report, _) = compare_rate_dimension(&map, &mu, &probes, &sched, 10_000_000, 0.15, Tracking::UnitCircle).unwrap();
    let dims: Vec<f64> = report.rows.iter().filter_map(|r| r.dimension.map(|d| d.dimension)).collect();
    let mean_dim = dims.iter().sum::<f64>() / dims.len() as f64;
    println!(
        "negative control: pass fraction {} over {} probes, mean local dimension {mean_dim:.3}",
        report.pass_fraction, report.compared
    );
    assert!(report.rows.iter().all(|r| r.status == ProbeStatus::Compared));
    assert!((mean_dim - 2.0).abs() < 0.15);
    assert!(report.pass_fraction <= 0.1);
}
