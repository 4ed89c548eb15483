//! Numerically stable helpers for working with log-probabilities.

/// `ln(exp(a) + exp(b))` without overflow. Either argument may be `-inf`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum(exp(x)))` with max-subtraction. Empty input gives `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `ln(1 - exp(x))` for `x <= 0`.
///
/// Switches between `ln(-expm1(x))` and `ln1p(-exp(x))` at `x = -ln 2`, which keeps
/// full relative precision on both sides. Returns `-inf` at `x = 0`.
#[inline]
pub fn log1m_exp(x: f64) -> f64 {
    debug_assert!(x <= 0.0, "log1m_exp requires x <= 0, got {x}");
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(1 / sqrt(2 pi))`.
pub const LN_INV_SQRT_2PI: f64 = -0.918_938_533_204_672_8;

/// Log-density of `N(mean, sd^2)` at `x`.
#[inline]
pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    LN_INV_SQRT_2PI - sd.ln() - 0.5 * z * z
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}
