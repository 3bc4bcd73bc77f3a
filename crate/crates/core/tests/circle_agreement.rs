//! Cross-checks of the floating-point estimators against exact angle arithmetic.

use jlab_core::circle_oracle::{
    angle_orbit, chord_to_halfwidth, oracle_arc_measure, oracle_return_time, rational_from_f64, RationalAngle,
};
use jlab_core::empirical_measure::EmpiricalMeasure;
use jlab_core::julia_sampler::inverse_iteration_sample;
use jlab_core::rational_map::RationalMap;
use jlab_core::recurrence::{incidence_times_along, return_time, ReturnTime};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_angle(rng: &mut ChaCha8Rng) -> RationalAngle {
    let q: i64 = rng.gen_range(1_000..1_000_000);
    RationalAngle::new(rng.gen_range(0..q), q).unwrap()
}

#[test]
fn euclidean_return_times_on_exact_orbits_match_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let d = 2;
    let mut mismatches = 0;
    let trials = 1000;
    for _ in 0..trials {
        let theta = random_angle(&mut rng);
        let r: f64 = rng.gen_range(0.005..0.1);
        let n_max = 100_000;
        let exact = oracle_return_time(&theta, d, &rational_from_f64(chord_to_halfwidth(r)).unwrap(), n_max).unwrap();
        let orbit = angle_orbit(&theta, d).unwrap().map(|a| Ok(a.to_complex()));
        let euclid = incidence_times_along(orbit, theta.to_complex(), &[r], n_max).unwrap()[0];
        if exact != euclid {
            mismatches += 1;
        }
    }
    println!("chord/arc mismatches: {mismatches}/{trials}");
    assert!((mismatches as f64) < 0.02 * trials as f64);
}

#[test]
fn float_orbits_agree_with_the_oracle_before_divergence() {
    // A float orbit of z^2 loses one bit per step, so agreement with the
    // exact orbit is only expected for short return times.
    let map = RationalMap::power(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut short, mut short_mismatch, mut long, mut long_mismatch) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let theta = random_angle(&mut rng);
        let r: f64 = rng.gen_range(0.02..0.1);
        let h = rational_from_f64(chord_to_halfwidth(r)).unwrap();
        let exact = oracle_return_time(&theta, 2, &h, 100_000).unwrap();
        let float = return_time(&map, theta.to_complex(), theta.to_complex(), r, 100_000).unwrap();
        match exact {
            ReturnTime::Finite(n) if n <= 30 => {
                short += 1;
                short_mismatch += usize::from(exact != float);
            }
            _ => {
                long += 1;
                long_mismatch += usize::from(exact != float);
            }
        }
    }
    println!("tau <= 30: {short_mismatch}/{short} mismatches; longer: {long_mismatch}/{long}");
    assert!(short > 200);
    assert!((short_mismatch as f64) < 0.02 * short as f64);
}

#[test]
fn haar_ball_measures_match_exact_arcs() {
    let map = RationalMap::power(2).unwrap();
    let n = 400_000;
    let sample = inverse_iteration_sample(&map, n, 60, 11).unwrap();
    let mu = EmpiricalMeasure::new(sample.points, 1e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let theta = random_angle(&mut rng);
        let r: f64 = rng.gen_range(0.01..0.5);
        let h = rational_from_f64(chord_to_halfwidth(r)).unwrap();
        let p = oracle_arc_measure(&h).to_f64().unwrap();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let z = mu.ball_measure(theta.to_complex(), r);
        worst = worst.max((z - p).abs() / se);
    }
    println!("largest deviation: {worst:.2} standard errors");
    assert!(worst < 3.0, "{worst}");
}
