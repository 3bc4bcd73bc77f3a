//! Rational maps `T = P/Q` on the Riemann sphere.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{aberth, Probe, RootOptions};

/// Orbits leaving this disc are treated as escaped.
pub const DEFAULT_ESCAPE_RADIUS: f64 = 1e6;
/// Default cap on `d^n` for periodic-point enumeration.
pub const DEFAULT_DEGREE_BUDGET: u64 = 1 << 14;
/// Normalized resultant below which `P` and `Q` are considered to share a root.
pub const COPRIME_TOLERANCE: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A point of the Riemann sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        SpherePoint::Finite(z)
    }
}

/// Dense polynomial, coefficients lowest degree first. Trailing zero
/// coefficients are trimmed so that the leading coefficient is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMap("non-finite coefficient".into()));
        }
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.norm_sqr() == 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        Ok(Self { coeffs })
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn monomial(degree: usize, coefficient: Complex64) -> Self {
        let mut coeffs = vec![ZERO; degree + 1];
        coeffs[degree] = coefficient;
        Self { coeffs }
    }

    pub fn constant(c: Complex64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].norm_sqr() == 0.0
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs[self.degree()]
    }

    /// Largest coefficient modulus.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// Value and first derivative by Horner's scheme.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `sum |c_k| max(1,|z|)^k`, the magnitude against which residuals are measured.
    pub fn residual_scale(&self, z: Complex64) -> f64 {
        let t = z.norm().max(1.0);
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c.norm())
    }

    /// `self - w * other`.
    fn sub_scaled(&self, w: Complex64, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|k| {
                let a = self.coeffs.get(k).copied().unwrap_or(ZERO);
                let b = other.coeffs.get(k).copied().unwrap_or(ZERO);
                a - w * b
            })
            .collect();
        Polynomial::new(coeffs).expect("finite inputs stay finite")
    }

    /// All roots with multiplicity.
    pub fn roots(&self, opts: &RootOptions) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Err(Error::InvalidArgument("roots of the zero polynomial".into()));
        }
        // Exact zero roots first.
        let zeros = self.coeffs.iter().take_while(|c| c.norm_sqr() == 0.0).count();
        let reduced = Polynomial {
            coeffs: self.coeffs[zeros..].to_vec(),
        };
        let mut roots = vec![ZERO; zeros];
        roots.extend(reduced.nonzero_roots(opts)?);
        Ok(roots)
    }

    fn nonzero_roots(&self, opts: &RootOptions) -> Result<Vec<Complex64>> {
        let n = self.degree();
        let c = &self.coeffs;
        match n {
            0 => return Ok(Vec::new()),
            1 => return Ok(vec![-c[0] / c[1]]),
            _ => {}
        }
        // a z^n + b: closed form.
        if c[1..n].iter().all(|x| x.norm_sqr() == 0.0) {
            if n == 2 {
                let base = (-c[0] / c[2]).sqrt();
                return Ok(vec![base, -base]);
            }
            let base = (-c[0] / c[n]).powf(1.0 / n as f64);
            return Ok((0..n)
                .map(|k| base * Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / n as f64))
                .collect());
        }
        if n == 2 {
            return Ok(quadratic_roots(c[2], c[1], c[0]).to_vec());
        }
        let lead = c[n];
        let radius = (0..n)
            .map(|k| (c[k] / lead).norm().powf(1.0 / (n - k) as f64))
            .fold(0.0, f64::max);
        let center = -c[n - 1] / (lead * n as f64);
        aberth(
            n,
            center,
            radius + (center.norm()),
            |z| {
                let (p, dp) = self.eval_with_derivative(z);
                Probe {
                    log_derivative: if p.norm_sqr() == 0.0 { None } else { Some(dp / p) },
                    residual: p.norm() / self.residual_scale(z),
                }
            },
            opts,
        )
    }
}

/// Roots of `a z^2 + b z + c` without cancellation.
fn quadratic_roots(a: Complex64, b: Complex64, c: Complex64) -> [Complex64; 2] {
    let disc = (b * b - 4.0 * a * c).sqrt();
    // Pick the sign that avoids subtracting nearly equal numbers.
    let q = if (b.conj() * disc).re >= 0.0 {
        -0.5 * (b + disc)
    } else {
        -0.5 * (b - disc)
    };
    if q.norm_sqr() == 0.0 {
        return [ZERO, ZERO];
    }
    [q / a, c / q]
}

/// A periodic point of exact-or-dividing period `n` with its multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicPoint {
    pub point: Complex64,
    /// `|(T^n)'(z)|`.
    pub multiplier: f64,
    /// `log |(T^n)'(z)|` (`-inf` for superattracting points).
    pub log_multiplier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitStatus {
    Complete,
    /// `|z|` exceeded the escape radius at this step.
    Escaped { step: usize },
    /// The iterate at this step is a pole.
    Pole { step: usize },
}

/// Forward orbit with cumulative `log |T'|` sums.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTrace {
    pub start: Complex64,
    /// `points[j] = T^j(start)`.
    pub points: Vec<Complex64>,
    /// `derivative_log_sums[j] = log |(T^j)'(start)|`; entry 0 is 0.
    pub derivative_log_sums: Vec<f64>,
    pub status: OrbitStatus,
}

impl OrbitTrace {
    pub fn is_complete(&self) -> bool {
        self.status == OrbitStatus::Complete
    }
}

/// JSON map description: `{"numerator": [[re,im],...], "denominator": [[re,im],...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub numerator: Vec<[f64; 2]>,
    pub denominator: Vec<[f64; 2]>,
}

impl MapSpec {
    pub fn build(&self) -> Result<RationalMap> {
        let conv = |v: &[[f64; 2]]| v.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        if self.numerator.is_empty() || self.denominator.is_empty() {
            return Err(Error::InvalidMap("empty coefficient list".into()));
        }
        RationalMap::new(Polynomial::new(conv(&self.numerator))?, Polynomial::new(conv(&self.denominator))?)
    }
}

/// `T = P / Q` with `P`, `Q` coprime and `max(deg P, deg Q) >= 2`.
#[derive(Clone, PartialEq)]
pub struct RationalMap {
    numerator: Polynomial,
    denominator: Polynomial,
    degree: usize,
    /// Homogeneous coefficients padded to `degree + 1`.
    hom_num: Vec<Complex64>,
    hom_den: Vec<Complex64>,
}

impl fmt::Debug for RationalMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RationalMap")
            .field("numerator", &self.numerator.coeffs)
            .field("denominator", &self.denominator.coeffs)
            .field("degree", &self.degree)
            .finish()
    }
}

impl RationalMap {
    pub fn new(numerator: Polynomial, denominator: Polynomial) -> Result<Self> {
        if denominator.is_zero() {
            return Err(Error::InvalidMap("zero denominator".into()));
        }
        let degree = numerator.degree().max(denominator.degree());
        if numerator.is_zero() || degree < 2 {
            return Err(Error::InvalidMap(format!("degree {degree} < 2")));
        }
        let resultant = normalized_resultant(&numerator, &denominator);
        if resultant <= COPRIME_TOLERANCE {
            return Err(Error::NotCoprime { resultant });
        }
        let pad = |p: &Polynomial| {
            let mut c = p.coeffs.clone();
            c.resize(degree + 1, ZERO);
            c
        };
        Ok(Self {
            hom_num: pad(&numerator),
            hom_den: pad(&denominator),
            numerator,
            denominator,
            degree,
        })
    }

    /// Polynomial map with real-or-complex coefficients, lowest degree first.
    pub fn polynomial(coeffs: Vec<Complex64>) -> Result<Self> {
        Self::new(Polynomial::new(coeffs)?, Polynomial::constant(ONE))
    }

    /// `z^d`.
    pub fn power(d: usize) -> Result<Self> {
        Self::new(Polynomial::monomial(d, ONE), Polynomial::constant(ONE))
    }

    /// `z^2 + c`.
    pub fn quadratic(c: Complex64) -> Result<Self> {
        Self::polynomial(vec![c, ZERO, ONE])
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.numerator
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.denominator
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_polynomial(&self) -> bool {
        self.denominator.degree() == 0
    }

    pub fn spec(&self) -> MapSpec {
        let conv = |p: &Polynomial| p.coeffs.iter().map(|c| [c.re, c.im]).collect();
        MapSpec {
            numerator: conv(&self.numerator),
            denominator: conv(&self.denominator),
        }
    }

    /// True for `T(z) = a z^d` with `|a| = 1`, whose Julia set is the unit circle.
    pub fn has_unit_circle_julia_set(&self) -> bool {
        if !self.is_polynomial() {
            return false;
        }
        let d = self.numerator.degree();
        let c = self.numerator.coeffs();
        let a = c[d] / self.denominator.coeffs[0];
        c[..d].iter().all(|x| x.norm_sqr() == 0.0) && (a.norm() - 1.0).abs() < 1e-14
    }

    /// Finite-plane value; `None` at a pole.
    #[inline]
    pub fn eval_finite(&self, z: Complex64) -> Option<Complex64> {
        let q = self.denominator.eval(z);
        if q.norm_sqr() == 0.0 {
            return None;
        }
        let w = self.numerator.eval(z) / q;
        if w.is_finite() {
            Some(w)
        } else {
            None
        }
    }

    pub fn evaluate(&self, z: SpherePoint) -> Result<SpherePoint> {
        match z {
            SpherePoint::Finite(z) => {
                let q = self.denominator.eval(z);
                let p = self.numerator.eval(z);
                if q.norm_sqr() == 0.0 {
                    if p.norm_sqr() == 0.0 {
                        return Err(Error::Internal(format!("0/0 at {z}")));
                    }
                    return Ok(SpherePoint::Infinity);
                }
                let w = p / q;
                Ok(if w.is_finite() {
                    SpherePoint::Finite(w)
                } else {
                    SpherePoint::Infinity
                })
            }
            SpherePoint::Infinity => {
                let dp = self.numerator.degree();
                let dq = self.denominator.degree();
                Ok(match dp.cmp(&dq) {
                    std::cmp::Ordering::Greater => SpherePoint::Infinity,
                    std::cmp::Ordering::Less => SpherePoint::Finite(ZERO),
                    std::cmp::Ordering::Equal => {
                        SpherePoint::Finite(self.numerator.leading() / self.denominator.leading())
                    }
                })
            }
        }
    }

    /// `T'(z) = (P'Q - PQ') / Q^2`.
    #[inline]
    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        let (p, dp) = self.numerator.eval_with_derivative(z);
        let (q, dq) = self.denominator.eval_with_derivative(z);
        if q.norm_sqr() == 0.0 {
            return Err(Error::DerivativeAtPole);
        }
        Ok((dp * q - p * dq) / (q * q))
    }

    pub fn derivative_modulus(&self, z: Complex64) -> Result<f64> {
        self.derivative(z).map(|d| d.norm())
    }

    pub fn orbit(&self, z0: Complex64, n: usize) -> OrbitTrace {
        self.orbit_with_escape(z0, n, DEFAULT_ESCAPE_RADIUS)
    }

    pub fn orbit_with_escape(&self, z0: Complex64, n: usize, escape_radius: f64) -> OrbitTrace {
        let mut points = Vec::with_capacity(n + 1);
        let mut sums = Vec::with_capacity(n + 1);
        points.push(z0);
        sums.push(0.0);
        let mut z = z0;
        let mut acc = 0.0;
        let mut status = OrbitStatus::Complete;
        for step in 1..=n {
            let Ok(d) = self.derivative(z) else {
                status = OrbitStatus::Pole { step };
                break;
            };
            let Some(next) = self.eval_finite(z) else {
                status = OrbitStatus::Pole { step };
                break;
            };
            if next.norm() > escape_radius {
                status = OrbitStatus::Escaped { step };
                break;
            }
            acc += d.norm().ln();
            z = next;
            points.push(z);
            sums.push(acc);
        }
        OrbitTrace {
            start: z0,
            points,
            derivative_log_sums: sums,
            status,
        }
    }

    /// `T^n(z)` on the sphere by repeated evaluation.
    pub fn iterate(&self, z: SpherePoint, n: usize) -> Result<SpherePoint> {
        (0..n).try_fold(z, |acc, _| self.evaluate(acc))
    }

    /// Roots of `P(z) - w Q(z)` with multiplicity (the `d` preimages of `w`,
    /// minus any that sit at infinity).
    pub fn preimages(&self, w: Complex64) -> Result<Vec<Complex64>> {
        self.preimages_with(w, &RootOptions::default())
    }

    pub fn preimages_with(&self, w: Complex64, opts: &RootOptions) -> Result<Vec<Complex64>> {
        if !w.is_finite() {
            return Err(Error::InvalidArgument("preimages of a non-finite point".into()));
        }
        let target = self.numerator.sub_scaled(w, &self.denominator);
        if target.is_zero() {
            return Err(Error::Internal(format!("P - wQ vanishes identically at w = {w}")));
        }
        target.roots(opts)
    }

    /// Inverse-branch step: the preimage of `w` closest to `hint`.
    pub fn preimage_near(&self, w: Complex64, hint: Complex64) -> Result<Complex64> {
        let pre = self.preimages(w)?;
        pre.into_iter()
            .min_by(|a, b| (a - hint).norm_sqr().total_cmp(&(b - hint).norm_sqr()))
            .ok_or_else(|| Error::Internal("no finite preimage".into()))
    }

    /// One homogeneous step on `(p, q)` together with their z-derivatives.
    #[inline]
    fn hom_step(&self, p: Complex64, q: Complex64, dp: Complex64, dq: Complex64) -> [Complex64; 4] {
        let d = self.degree;
        let mut pp = [ONE; 17];
        let mut qq = [ONE; 17];
        let mut pp_v;
        let mut qq_v;
        let (pp, qq): (&mut [Complex64], &mut [Complex64]) = if d < 17 {
            (&mut pp[..=d], &mut qq[..=d])
        } else {
            pp_v = vec![ONE; d + 1];
            qq_v = vec![ONE; d + 1];
            (&mut pp_v[..], &mut qq_v[..])
        };
        for k in 1..=d {
            pp[k] = pp[k - 1] * p;
            qq[k] = qq[k - 1] * q;
        }
        let mut np = ZERO;
        let mut nq = ZERO;
        let mut ndp = ZERO;
        let mut ndq = ZERO;
        for k in 0..=d {
            let mono = pp[k] * qq[d - k];
            let mut dmono = ZERO;
            if k > 0 {
                dmono += pp[k - 1] * qq[d - k] * dp * k as f64;
            }
            if k < d {
                dmono += pp[k] * qq[d - k - 1] * dq * (d - k) as f64;
            }
            np += self.hom_num[k] * mono;
            nq += self.hom_den[k] * mono;
            ndp += self.hom_num[k] * dmono;
            ndq += self.hom_den[k] * dmono;
        }
        [np, nq, ndp, ndq]
    }

    /// Homogeneous lift of `T^n` at `z`, rescaled each step: returns
    /// `(p, q, p', q')` with `T^n(z) = p/q` up to a common factor.
    fn hom_iterate(&self, z: Complex64, n: usize) -> [Complex64; 4] {
        let mut s = [z, ONE, ONE, ZERO];
        for _ in 0..n {
            s = self.hom_step(s[0], s[1], s[2], s[3]);
            let scale = s[0].norm().max(s[1].norm());
            if scale > 0.0 && scale.is_finite() {
                let inv = 1.0 / scale;
                for v in s.iter_mut() {
                    *v *= inv;
                }
            }
        }
        s
    }

    /// Whether infinity is fixed by `T^n`.
    fn infinity_is_periodic(&self, n: usize) -> bool {
        let mut p = ONE;
        let mut q = ZERO;
        for _ in 0..n {
            let s = self.hom_step(p, q, ZERO, ZERO);
            let scale = s[0].norm().max(s[1].norm());
            p = s[0] / scale;
            q = s[1] / scale;
        }
        q.norm() <= 1e-12 * p.norm()
    }

    /// Radius of a disc expected to contain the finite periodic points.
    fn periodic_radius(&self) -> f64 {
        let bound = |p: &Polynomial| {
            let n = p.degree();
            if n == 0 {
                return 0.0;
            }
            let lead = p.leading();
            (0..n)
                .map(|k| (p.coeffs[k] / lead).norm().powf(1.0 / (n - k) as f64))
                .fold(0.0, f64::max)
                * 2.0
        };
        if self.is_polynomial() {
            // |T(z)| > |z| whenever |z| > R.
            let q0 = self.denominator.coeffs[0];
            let d = self.numerator.degree();
            let lead = (self.numerator.leading() / q0).norm();
            let rest: f64 = self.numerator.coeffs[..d].iter().map(|c| (c / q0).norm()).sum();
            ((1.0 + rest) / lead).max(1.0)
        } else {
            bound(&self.numerator).max(bound(&self.denominator)).max(1.0)
        }
    }

    /// Finite solutions of `T^n(z) = z` with multiplicity, each with
    /// `|(T^n)'(z)|` attached.
    pub fn periodic_points(&self, n: usize) -> Result<Vec<PeriodicPoint>> {
        self.periodic_points_with(n, DEFAULT_DEGREE_BUDGET, &RootOptions::default())
    }

    pub fn periodic_points_with(&self, n: usize, budget: u64, opts: &RootOptions) -> Result<Vec<PeriodicPoint>> {
        if n == 0 {
            return Err(Error::InvalidArgument("period must be >= 1".into()));
        }
        let dn = (self.degree as u64)
            .checked_pow(n as u32)
            .ok_or(Error::DegreeBudget { degree: u64::MAX, budget })?;
        if dn > budget {
            return Err(Error::DegreeBudget { degree: dn, budget });
        }
        let count = if self.infinity_is_periodic(n) { dn } else { dn + 1 } as usize;
        let radius = self.periodic_radius() * 1.05;
        let roots = aberth(
            count,
            ZERO,
            radius,
            |z| {
                let [p, q, dp, dq] = self.hom_iterate(z, n);
                let f = p - z * q;
                let df = dp - q - z * dq;
                let residual = if q.norm_sqr() == 0.0 {
                    f64::INFINITY
                } else {
                    f.norm() / (q.norm() * z.norm().max(1.0))
                };
                Probe {
                    log_derivative: if f.norm_sqr() == 0.0 { None } else { Some(df / f) },
                    residual,
                }
            },
            opts,
        )?;
        roots
            .into_iter()
            .map(|z| {
                let trace = self.orbit_with_escape(z, n, f64::INFINITY);
                if !trace.is_complete() {
                    return Err(Error::Internal(format!("periodic point {z} hits a pole")));
                }
                let log_multiplier = trace.derivative_log_sums[n];
                Ok(PeriodicPoint {
                    point: z,
                    multiplier: log_multiplier.exp(),
                    log_multiplier,
                })
            })
            .collect()
    }

    /// Whether `z` (periodic with period `p`) is repelling.
    pub fn is_repelling(&self, z: Complex64, p: usize) -> Result<bool> {
        if p == 0 {
            return Err(Error::InvalidArgument("period must be >= 1".into()));
        }
        let trace = self.orbit_with_escape(z, p, f64::INFINITY);
        if !trace.is_complete() {
            return Err(Error::NotPeriodic {
                period: p,
                residual: f64::INFINITY,
            });
        }
        let residual = (trace.points[p] - z).norm();
        if residual > 1e-9 * z.norm().max(1.0) {
            return Err(Error::NotPeriodic { period: p, residual });
        }
        Ok(trace.derivative_log_sums[p] > 0.0)
    }
}

/// `|Res(P/|P|, Q/|Q|)|` via the Sylvester determinant.
fn normalized_resultant(p: &Polynomial, q: &Polynomial) -> f64 {
    let m = p.degree();
    let n = q.degree();
    if m == 0 || n == 0 {
        return 1.0;
    }
    let pn = p.norm();
    let qn = q.norm();
    let size = m + n;
    let mut mat = DMatrix::<Complex64>::zeros(size, size);
    // Highest degree first along each row.
    for row in 0..n {
        for (k, c) in p.coeffs.iter().rev().enumerate() {
            mat[(row, row + k)] = c / pn;
        }
    }
    for row in 0..m {
        for (k, c) in q.coeffs.iter().rev().enumerate() {
            mat[(n + row, row + k)] = c / qn;
        }
    }
    mat.determinant().norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn z2() -> RationalMap {
        RationalMap::power(2).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(z2().evaluate(c(2.0, 0.0).into()).unwrap(), SpherePoint::Finite(c(4.0, 0.0)));
        assert_eq!(z2().evaluate(SpherePoint::Infinity).unwrap(), SpherePoint::Infinity);
        // (z^2 + 1) / (2z)
        let newton = RationalMap::new(
            Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap(),
            Polynomial::from_real(&[0.0, 2.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(newton.evaluate(c(1.0, 0.0).into()).unwrap(), SpherePoint::Finite(c(1.0, 0.0)));
        assert_eq!(newton.evaluate(c(0.0, 0.0).into()).unwrap(), SpherePoint::Infinity);
        assert_eq!(newton.evaluate(SpherePoint::Infinity).unwrap(), SpherePoint::Infinity);
    }

    #[test]
    fn infinity_chart_for_equal_degrees() {
        // (2z^2 + 1) / (z^2 - 3)
        let m = RationalMap::new(
            Polynomial::from_real(&[1.0, 0.0, 2.0]).unwrap(),
            Polynomial::from_real(&[-3.0, 0.0, 1.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(m.evaluate(SpherePoint::Infinity).unwrap(), SpherePoint::Finite(c(2.0, 0.0)));
        // 1 / z^2 sends infinity to 0
        let inv = RationalMap::new(Polynomial::constant(ONE), Polynomial::monomial(2, ONE)).unwrap();
        assert_eq!(inv.evaluate(SpherePoint::Infinity).unwrap(), SpherePoint::Finite(ZERO));
    }

    #[test]
    fn construction_errors() {
        // z^2 - 1 over z - 1 share the root 1.
        let err = RationalMap::new(
            Polynomial::from_real(&[-1.0, 0.0, 1.0]).unwrap(),
            Polynomial::from_real(&[-1.0, 1.0]).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotCoprime { .. }));
        assert!(matches!(RationalMap::power(1), Err(Error::InvalidMap(_))));
        assert!(matches!(
            RationalMap::new(Polynomial::monomial(2, ONE), Polynomial::constant(ZERO)),
            Err(Error::InvalidMap(_))
        ));
        assert!(Polynomial::new(vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn derivative_examples() {
        assert!((z2().derivative_modulus(c(1.0, 0.0)).unwrap() - 2.0).abs() < 1e-15);
        let z3 = RationalMap::power(3).unwrap();
        for k in 0..16 {
            let z = Complex64::from_polar(1.0, 0.39 * k as f64);
            assert!((z3.derivative_modulus(z).unwrap() - 3.0).abs() < 1e-14);
        }
        let q = RationalMap::quadratic(c(0.1, 0.0)).unwrap();
        assert_eq!(q.derivative_modulus(ZERO).unwrap(), 0.0);
        let inv = RationalMap::new(Polynomial::constant(ONE), Polynomial::monomial(2, ONE)).unwrap();
        assert_eq!(inv.derivative_modulus(ZERO), Err(Error::DerivativeAtPole));
    }

    #[test]
    fn orbit_examples() {
        let t = z2().orbit(c(1.0, 0.0), 3);
        assert_eq!(t.points, vec![c(1.0, 0.0); 4]);
        let t = z2().orbit(c(2.0, 0.0), 2);
        assert_eq!(t.points, vec![c(2.0, 0.0), c(4.0, 0.0), c(16.0, 0.0)]);
        assert!((t.derivative_log_sums[2] - (4.0f64 * 8.0).ln()).abs() < 1e-14);
        let w = Complex64::from_polar(1.0, std::f64::consts::TAU / 3.0);
        let t = z2().orbit(w, 2);
        assert!((t.points[2] - w).norm() < 1e-12);
        let t = z2().orbit(c(10.0, 0.0), 5);
        assert_eq!(t.status, OrbitStatus::Escaped { step: 3 });
        assert_eq!(t.points.len(), 3);
    }

    #[test]
    fn preimage_examples() {
        let mut pre = z2().preimages(c(4.0, 0.0)).unwrap();
        pre.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((pre[0] - c(-2.0, 0.0)).norm() < 1e-14 && (pre[1] - c(2.0, 0.0)).norm() < 1e-14);
        assert_eq!(z2().preimages(ZERO).unwrap(), vec![ZERO, ZERO]);
        let cst = c(-0.12, 0.07);
        let w = c(0.3, -0.8);
        let q = RationalMap::quadratic(cst).unwrap();
        let root = (w - cst).sqrt();
        for p in q.preimages(w).unwrap() {
            assert!((p - root).norm() < 1e-14 || (p + root).norm() < 1e-14);
        }
    }

    #[test]
    fn periodic_point_examples() {
        let mut p1: Vec<_> = z2().periodic_points(1).unwrap().into_iter().map(|p| p.point).collect();
        p1.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert_eq!(p1.len(), 2);
        assert!(p1[0].norm() < 1e-12 && (p1[1] - ONE).norm() < 1e-12);

        let p2 = z2().periodic_points(2).unwrap();
        assert_eq!(p2.len(), 4);
        let expected = [
            ZERO,
            ONE,
            Complex64::from_polar(1.0, std::f64::consts::TAU / 3.0),
            Complex64::from_polar(1.0, -std::f64::consts::TAU / 3.0),
        ];
        for e in expected {
            assert!(p2.iter().any(|p| (p.point - e).norm() < 1e-10), "missing {e}");
        }
        for d in 2..=4usize {
            for n in 1..=3usize {
                let pts = RationalMap::power(d).unwrap().periodic_points(n).unwrap();
                assert_eq!(pts.len(), d.pow(n as u32));
            }
        }
    }

    #[test]
    fn degree_budget_is_enforced() {
        let err = z2().periodic_points(15).unwrap_err();
        assert_eq!(err, Error::DegreeBudget { degree: 1 << 15, budget: 1 << 14 });
    }

    #[test]
    fn rational_map_periodic_points_include_degree_plus_one() {
        // Newton map of z^2 - 1: fixed points are 1, -1 (superattracting) and
        // infinity (repelling, excluded as non-finite).
        let newton = RationalMap::new(
            Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap(),
            Polynomial::from_real(&[0.0, 2.0]).unwrap(),
        )
        .unwrap();
        let pts = newton.periodic_points(1).unwrap();
        assert_eq!(pts.len(), 2);
        let pts = newton.periodic_points(3).unwrap();
        assert_eq!(pts.len(), 8);
        for p in pts {
            let w = newton.iterate(p.point.into(), 3).unwrap().finite().unwrap();
            assert!((w - p.point).norm() < 1e-8);
        }
        // 1 / z^2: infinity is not fixed, so all d^n + 1 fixed points are finite.
        let inv = RationalMap::new(Polynomial::constant(ONE), Polynomial::monomial(2, ONE)).unwrap();
        assert_eq!(inv.periodic_points(1).unwrap().len(), 3);
    }

    #[test]
    fn repelling_examples() {
        assert!(z2().is_repelling(ONE, 1).unwrap());
        assert!(!z2().is_repelling(ZERO, 1).unwrap());
        let w = Complex64::from_polar(1.0, std::f64::consts::TAU / 3.0);
        assert!(z2().is_repelling(w, 2).unwrap());
        assert!(matches!(z2().is_repelling(c(0.5, 0.0), 1), Err(Error::NotPeriodic { .. })));
    }

    #[test]
    fn unit_circle_detection() {
        assert!(z2().has_unit_circle_julia_set());
        assert!(RationalMap::power(5).unwrap().has_unit_circle_julia_set());
        assert!(!RationalMap::quadratic(c(0.05, 0.0)).unwrap().has_unit_circle_julia_set());
    }
}
