//! Goodness-of-fit helpers.

use crate::error::{invalid, Result};

/// Two-sided Kolmogorov-Smirnov distance between `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("samples", "at least one sample is required"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(invalid("samples", "NaN in sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Asymptotic Kolmogorov tail probability `Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = sign * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// p-value of a KS distance `d` at effective sample size `n`, with the usual
/// small-sample correction `lambda = (sqrt(n) + 0.12 + 0.11 / sqrt(n)) d`.
pub fn ks_pvalue(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub n_samples: usize,
    pub n_effective: f64,
    pub p_value: f64,
}

/// KS test of possibly autocorrelated samples; `n_effective` replaces the sample
/// count in the p-value (pass `samples.len()` for independent draws).
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, n_effective: f64) -> Result<KsResult> {
    if !(n_effective > 0.0) {
        return Err(invalid("n_effective", "must be positive"));
    }
    let d = ks_statistic(samples, cdf)?;
    Ok(KsResult {
        statistic: d,
        n_samples: samples.len(),
        n_effective,
        p_value: ks_pvalue(d, n_effective),
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
