//! Small least-squares and summary helpers.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; NaN with fewer than three points.
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub rss: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
///
/// Needs at least two distinct `x` values; otherwise every field is NaN.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let nan = LinearFit {
        slope: f64::NAN,
        intercept: f64::NAN,
        slope_stderr: f64::NAN,
        r_squared: f64::NAN,
        rss: f64::NAN,
    };
    if x.len() < 2 {
        return nan;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return nan;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_stderr = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    LinearFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
        rss,
    }
}

/// Least squares through the origin, `y = slope * x`, with the slope's
/// standard error (NaN with fewer than two points).
pub fn origin_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    if x.is_empty() || sxx == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let slope = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx;
    let stderr = if x.len() > 1 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
        (rss / (x.len() - 1) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, stderr)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// `sum w_i (y_i - fit_i)^2`.
    pub chi2: f64,
}

/// Weighted least squares `y = intercept + slope * x` with weights `w`
/// (inverse variances). Needs two distinct `x` values with positive weight.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<WeightedFit> {
    assert!(x.len() == y.len() && y.len() == w.len());
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        return None;
    }
    let mx = x.iter().zip(w).map(|(a, wi)| a * wi).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(b, wi)| b * wi).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, wi)| wi * (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = (0..x.len()).map(|i| w[i] * (x[i] - mx) * (y[i] - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let chi2 = (0..x.len()).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    Some(WeightedFit {
        slope,
        intercept,
        slope_stderr: (1.0 / sxx).sqrt(),
        chi2,
    })
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}
