//! Autocorrelation and variance diagnostics for chains.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, DrError, Result};
use crate::exec::Execution;
use crate::rng::child_rng;

/// Sample autocorrelation of a series and the times derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    pub lags: Vec<usize>,
    /// `rho[n] = C(n) / C(0)`.
    pub rho: Vec<f64>,
    pub c0: f64,
    pub n_samples: usize,
    pub tau_int: Option<f64>,
    pub tau_exp: Option<f64>,
    /// Summation window used for `tau_int`.
    pub window: Option<usize>,
    /// False when the window reached the largest computed lag.
    pub window_converged: bool,
}

/// Biased (`1/N`) sample autocorrelation about the mean, up to `max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<AcfResult> {
    let n = series.len();
    if max_lag < 1 {
        return Err(invalid("max_lag", "must be at least 1"));
    }
    if n <= max_lag {
        return Err(DrError::SeriesTooShort {
            needed: max_lag,
            found: n,
        });
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(invalid("series", "values must be finite"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex::new(v.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    let c: Vec<f64> = buf[..=max_lag].iter().map(|v| v.re * scale).collect();
    let c0 = c[0];
    let spread = series.iter().fold(0.0f64, |m, x| m.max((x - mean).abs()));
    if c0 <= 0.0 || spread == 0.0 || c0 < 1e-28 * mean * mean {
        return Err(DrError::ConstantSeries);
    }
    Ok(AcfResult {
        lags: (0..=max_lag).collect(),
        rho: c.iter().map(|v| v / c0).collect(),
        c0,
        n_samples: n,
        tau_int: None,
        tau_exp: None,
        window: None,
        window_converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauInt {
    pub tau: f64,
    pub window: usize,
    pub converged: bool,
}

/// `1/2 + sum_{n=1}^{W} rho(n)` with the smallest window `W >= 6 tau(W)`.
pub fn integrated_time(acf: &AcfResult) -> TauInt {
    let mut tau = 0.5;
    let max_lag = acf.rho.len() - 1;
    for w in 1..=max_lag {
        tau += acf.rho[w];
        if w as f64 >= 6.0 * tau {
            return TauInt {
                tau,
                window: w,
                converged: true,
            };
        }
    }
    TauInt {
        tau,
        window: max_lag,
        converged: false,
    }
}

/// Variance of the sample mean, `2 tau_int C(0) / N`.
pub fn estimate_variance(acf: &AcfResult) -> f64 {
    let tau = acf.tau_int.unwrap_or_else(|| integrated_time(acf).tau);
    2.0 * tau * acf.c0 / acf.n_samples as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauExpFit {
    /// `None` when the autocorrelation does not look exponential.
    pub tau: Option<f64>,
    pub points: usize,
}

/// Least-squares fit of `log rho(n) = a - n / tau` over lags `1..`.
///
/// The fit stops at the first lag where `rho` drops below `max(0.05, 3/sqrt(N))`,
/// beyond which the estimate is dominated by noise.
pub fn fit_tau_exp(acf: &AcfResult) -> TauExpFit {
    let floor = (3.0 / (acf.n_samples as f64).sqrt()).max(0.05);
    let pts: Vec<(f64, f64)> = acf
        .rho
        .iter()
        .enumerate()
        .skip(1)
        .take_while(|(_, &r)| r >= floor)
        .map(|(n, &r)| (n as f64, r.ln()))
        .collect();
    let m = pts.len();
    if m < 2 {
        return TauExpFit { tau: None, points: m };
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    TauExpFit {
        tau: (slope < 0.0).then(|| -1.0 / slope),
        points: m,
    }
}

/// Autocorrelation plus integrated and exponential times in one call.
pub fn analyze(series: &[f64], max_lag: usize) -> Result<AcfResult> {
    let mut acf = autocorrelation(series, max_lag)?;
    let t = integrated_time(&acf);
    acf.tau_int = Some(t.tau);
    acf.window = Some(t.window);
    acf.window_converged = t.converged;
    acf.tau_exp = fit_tau_exp(&acf).tau;
    Ok(acf)
}

/// `c tanh(b) / tanh(c b) - 1` without cancellation at small `b`.
fn coth_tanh_excess(c: f64, b: f64) -> f64 {
    let cb = c * b;
    if cb < 0.1 {
        // tanh(x)/x = 1 - x^2/3 + 2x^4/15 - 17x^6/315 + 62x^8/2835
        let t = |x: f64| {
            let x2 = x * x;
            1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0 - 17.0 * x2 * x2 * x2 / 315.0 + 62.0 * x2 * x2 * x2 * x2 / 2835.0
        };
        let (b2, c2) = (b * b, c * c);
        let diff = b2 * (c2 - 1.0) / 3.0 - 2.0 * b2 * b2 * (c2 * c2 - 1.0) / 15.0
            + 17.0 * b2 * b2 * b2 * (c2 * c2 * c2 - 1.0) / 315.0
            - 62.0 * b2 * b2 * b2 * b2 * (c2 * c2 * c2 * c2 - 1.0) / 2835.0;
        diff / t(cb)
    } else {
        c * b.tanh() / cb.tanh() - 1.0
    }
}

/// Relative variance excess `(var_A - var_B) / var_B` of a chain that repeats one
/// state `m2` times every `m1 + 1` steps, over the chain that collapses the repeats,
/// for an exponential autocorrelation with time `tau_exp`.
pub fn dr_variance_gain(m1: u32, m2: u32, tau_exp: f64) -> Result<f64> {
    if m1 < 1 {
        return Err(invalid("m1", "must be at least 1"));
    }
    if m2 < 1 {
        return Err(invalid("m2", "must be at least 1"));
    }
    if !(tau_exp.is_finite() && tau_exp > 0.0) {
        return Err(invalid("tau_exp", format!("must be positive and finite, got {tau_exp}")));
    }
    let f = (m2 as f64 - 1.0) / (m1 as f64 + m2 as f64);
    let c = m1 as f64 + 1.0;
    let b = 0.5 / tau_exp;
    Ok(f * f * coth_tanh_excess(c, b).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub gain: f64,
    pub stderr: f64,
    pub replicas: usize,
}

/// Monte Carlo counterpart of [`dr_variance_gain`].
///
/// Each replica draws a stationary AR(1) series with `rho(n) = exp(-n/tau)`. Chain B
/// is the series itself; chain A is the same series with element `m1 - 1` of every
/// block of `m1 + 1` repeated `m2` times. The squared means of both chains give the
/// variance ratio, with a delta-method standard error over replicas.
pub fn simulate_variance_gain(
    m1: u32,
    m2: u32,
    tau_exp: f64,
    n_blocks: usize,
    replicas: usize,
    seed: u64,
    exec: Execution,
) -> Result<GainEstimate> {
    dr_variance_gain(m1, m2, tau_exp)?;
    if replicas < 2 || n_blocks < 1 {
        return Err(invalid("replicas", "need at least two replicas and one block"));
    }
    let phi = (-1.0 / tau_exp).exp();
    let innov = (1.0 - phi * phi).sqrt();
    let block = m1 as usize + 1;
    let pairs: Vec<(f64, f64)> = exec.map_range(replicas, |r| {
        let mut rng = child_rng(seed, r as u64);
        let mut y: f64 = rng.sample(StandardNormal);
        let (mut sum_a, mut sum_b) = (0.0, 0.0);
        let mut n_a = 0.0;
        for _ in 0..n_blocks {
            for j in 0..block {
                let w = if j + 2 == block { m2 as f64 } else { 1.0 };
                sum_a += w * y;
                n_a += w;
                sum_b += y;
                let z: f64 = rng.sample(StandardNormal);
                y = phi * y + innov * z;
            }
        }
        let n_b = (n_blocks * block) as f64;
        ((sum_a / n_a).powi(2), (sum_b / n_b).powi(2))
    });
    let n = replicas as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        vaa += (a - ma) * (a - ma);
        vbb += (b - mb) * (b - mb);
        vab += (a - ma) * (b - mb);
    }
    vaa /= n - 1.0;
    vbb /= n - 1.0;
    vab /= n - 1.0;
    // Var(A/B) ~ (vaa/B^2 - 2 A vab/B^3 + A^2 vbb/B^4) / n
    let var = (vaa / (mb * mb) - 2.0 * ma * vab / mb.powi(3) + ma * ma * vbb / mb.powi(4)) / n;
    Ok(GainEstimate {
        gain: ma / mb - 1.0,
        stderr: var.max(0.0).sqrt(),
        replicas,
    })
}
