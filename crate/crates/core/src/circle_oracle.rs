//! Exact arithmetic for `z^d` on the unit circle.
//!
//! On the circle `z^d` is the angle map `theta -> d theta mod 1`. Rational
//! angles keep their denominator under this map, so orbits, return times
//! and arc measures can be computed with no rounding at all.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};
use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational_map::RationalMap;
use crate::recurrence::ReturnTime;

/// A reduced fraction `p/q` with `0 <= p < q`, read as the point
/// `exp(2 pi i p/q)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RationalAngle(BigRational);

impl RationalAngle {
    /// `p/q` reduced mod 1. Fails when `q == 0`.
    pub fn new(p: impl Into<BigInt>, q: impl Into<BigInt>) -> Result<Self> {
        let q = q.into();
        if q.is_zero() {
            return Err(Error::InvalidArgument("angle denominator must be non-zero".into()));
        }
        Ok(Self::from_rational(BigRational::new(p.into(), q)))
    }

    pub fn from_rational(x: BigRational) -> Self {
        let frac = &x - x.floor();
        Self(frac)
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// The point `exp(2 pi i theta)`.
    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(1.0, TAU * self.to_f64())
    }

    /// Distance on the circle `R/Z`, in `[0, 1/2]`.
    pub fn circle_distance(&self, other: &Self) -> BigRational {
        let d = (&self.0 - &other.0).abs();
        let e = BigRational::one() - &d;
        d.min(e)
    }
}

impl fmt::Display for RationalAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl Serialize for RationalAngle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `Some(d)` when the map is exactly `z^d`, the case the angle map models.
pub fn angle_map_degree(map: &RationalMap) -> Option<u32> {
    let num = map.numerator().coeffs();
    let den = map.denominator().coeffs();
    let d = num.len() - 1;
    let exact = den.len() == 1
        && den[0] == Complex64::new(1.0, 0.0)
        && num[d] == Complex64::new(1.0, 0.0)
        && num[..d].iter().all(|c| c.norm_sqr() == 0.0);
    exact.then(|| d as u32)
}

fn check_degree(d: u32) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("degree must be >= 2, got {d}")));
    }
    Ok(())
}

/// `theta -> d theta mod 1`.
pub fn oracle_step(theta: &RationalAngle, d: u32) -> Result<RationalAngle> {
    check_degree(d)?;
    Ok(step(theta, d))
}

fn step(theta: &RationalAngle, d: u32) -> RationalAngle {
    let q = theta.denom();
    let p = (theta.numer() * BigInt::from(d)) % q;
    RationalAngle(BigRational::new(p, q.clone()))
}

/// The orbit `d theta, d^2 theta, ...` (without `theta` itself).
pub fn angle_orbit(theta: &RationalAngle, d: u32) -> Result<impl Iterator<Item = RationalAngle>> {
    check_degree(d)?;
    let mut current = theta.clone();
    Ok(std::iter::repeat_with(move || {
        current = step(&current, d);
        current.clone()
    }))
}

/// `(preperiod, period)` of the orbit of `theta` (Brent's cycle detection).
pub fn orbit_cycle(theta: &RationalAngle, d: u32) -> Result<(u64, u64)> {
    check_degree(d)?;
    let mut power = 1u64;
    let mut period = 1u64;
    let mut tortoise = theta.clone();
    let mut hare = step(theta, d);
    while tortoise != hare {
        if power == period {
            tortoise = hare.clone();
            power *= 2;
            period = 0;
        }
        hare = step(&hare, d);
        period += 1;
    }
    let mut tortoise = theta.clone();
    let mut hare = theta.clone();
    for _ in 0..period {
        hare = step(&hare, d);
    }
    let mut preperiod = 0;
    while tortoise != hare {
        tortoise = step(&tortoise, d);
        hare = step(&hare, d);
        preperiod += 1;
    }
    Ok((preperiod, period))
}

/// Least `n` in `1..=n_max` with circle distance from `d^n theta` to `theta`
/// strictly below `halfwidth`.
pub fn oracle_return_time(theta: &RationalAngle, d: u32, halfwidth: &BigRational, n_max: u64) -> Result<ReturnTime> {
    oracle_incidence_time(theta, theta, d, halfwidth, n_max)
}

/// Least `n` in `1..=n_max` with `d^n w` in the open arc of `halfwidth`
/// around `center`.
pub fn oracle_incidence_time(
    w: &RationalAngle,
    center: &RationalAngle,
    d: u32,
    halfwidth: &BigRational,
    n_max: u64,
) -> Result<ReturnTime> {
    if !halfwidth.is_positive() {
        return Err(Error::InvalidArgument("arc halfwidth must be positive".into()));
    }
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    for (n, x) in (1..=n_max).zip(angle_orbit(w, d)?) {
        if x.circle_distance(center).cmp(halfwidth) == Ordering::Less {
            return Ok(ReturnTime::Finite(n));
        }
    }
    Ok(ReturnTime::NotFound { n_max, escaped: false })
}

/// Haar measure of an open arc: `2 * halfwidth`, capped at 1.
pub fn oracle_arc_measure(halfwidth: &BigRational) -> BigRational {
    let two = BigRational::from_integer(BigInt::from(2));
    (two * halfwidth).min(BigRational::one())
}

/// Arc halfwidth (in turns) of the circle points within chord distance `r`:
/// `|e^{2 pi i a} - e^{2 pi i b}| = 2 sin(pi dist(a, b))`.
pub fn chord_to_halfwidth(r: f64) -> f64 {
    if r >= 2.0 {
        0.5
    } else {
        (r / 2.0).asin() / PI
    }
}

pub fn halfwidth_to_chord(h: f64) -> f64 {
    2.0 * (PI * h.clamp(0.0, 0.5)).sin()
}

/// Exact rational value of a finite float.
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::InvalidArgument(format!("{x} is not finite")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angle(p: i64, q: i64) -> RationalAngle {
        RationalAngle::new(p, q).unwrap()
    }

    fn ratio(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn step_examples() {
        assert_eq!(oracle_step(&angle(1, 3), 2).unwrap(), angle(2, 3));
        assert_eq!(oracle_step(&angle(2, 3), 2).unwrap(), angle(1, 3));
        let orbit: Vec<_> = angle_orbit(&angle(1, 7), 2).unwrap().take(3).collect();
        assert_eq!(orbit, vec![angle(2, 7), angle(4, 7), angle(1, 7)]);
        assert!(oracle_step(&angle(1, 3), 1).is_err());
    }

    #[test]
    fn angles_are_reduced_mod_one() {
        let a = angle(9, 6);
        assert_eq!((a.numer().clone(), a.denom().clone()), (BigInt::from(1), BigInt::from(2)));
        assert_eq!(angle(-1, 4), angle(3, 4));
        assert!(RationalAngle::new(1, 0).is_err());
    }

    #[test]
    fn return_time_examples() {
        let h = ratio(1, 100);
        assert_eq!(oracle_return_time(&angle(1, 3), 2, &h, 10).unwrap(), ReturnTime::Finite(2));
        assert_eq!(oracle_return_time(&angle(0, 1), 2, &h, 10).unwrap(), ReturnTime::Finite(1));
        assert_eq!(oracle_return_time(&angle(1, 7), 2, &h, 10).unwrap(), ReturnTime::Finite(3));
        // 1/5 -> 2/5 -> 4/5 -> 3/5 -> 1/5 never comes closer than 1/5 before n = 4.
        assert_eq!(
            oracle_return_time(&angle(1, 5), 2, &h, 3).unwrap(),
            ReturnTime::NotFound { n_max: 3, escaped: false }
        );
    }

    #[test]
    fn arc_measures() {
        assert_eq!(oracle_arc_measure(&ratio(1, 4)), ratio(1, 2));
        let eps = ratio(1, 1000);
        assert_eq!(oracle_arc_measure(&(ratio(1, 2) - &eps)), BigRational::one() - ratio(2, 1000));
        let m = 2.0 * chord_to_halfwidth(0.2);
        assert!((m - 2.0 / PI * 0.1f64.asin()).abs() < 1e-15);
        assert!((m - 0.06377).abs() < 1e-5);
        assert!((halfwidth_to_chord(chord_to_halfwidth(0.3)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn angle_map_applies_to_monic_powers_only() {
        assert_eq!(angle_map_degree(&RationalMap::power(3).unwrap()), Some(3));
        assert_eq!(angle_map_degree(&RationalMap::quadratic(Complex64::new(0.05, 0.0)).unwrap()), None);
    }

    #[test]
    fn cycle_detection() {
        assert_eq!(orbit_cycle(&angle(1, 7), 2).unwrap(), (0, 3));
        assert_eq!(orbit_cycle(&angle(1, 3), 2).unwrap(), (0, 2));
        // 1/12 -> 1/6 -> 1/3 -> 2/3 -> 1/3.
        assert_eq!(orbit_cycle(&angle(1, 12), 2).unwrap(), (2, 2));
        assert_eq!(orbit_cycle(&angle(0, 1), 3).unwrap(), (0, 1));
        // Denominators never grow along an orbit.
        let q = angle(5, 24).denom().clone();
        assert!(angle_orbit(&angle(5, 24), 2).unwrap().take(20).all(|a| (&q % a.denom()).is_zero()));
    }
}
