//! One-sample Kolmogorov–Smirnov distance to the standard normal.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// `Phi(x)` via the complementary error function (absolute error far
/// below 1e-7 across the real line).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `sup_x |F_R(x) - Phi(x)|` for the empirical CDF `F_R` of `values`.
pub fn ks_statistic(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("KS input"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("KS input contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = normal_cdf(x);
        d = d.max((i + 1) as f64 / r - f).max(f - i as f64 / r);
    }
    Ok(d)
}

/// Asymptotic 1% critical value `1.628 / sqrt(R)`.
pub fn ks_critical_1pct(r: usize) -> f64 {
    1.628 / (r as f64).sqrt()
}
