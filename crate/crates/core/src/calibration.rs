//! Expected log proposal ratios of three-Gaussian DR proposals.
//!
//! All widths are expressed in units of the side offset: the Monte Carlo estimators
//! use `mu = 1` and `sigma_i = sigma_i / mu`.
//!
//! Two kinds of loss appear in the stage acceptance of a DR excursion:
//!
//! * asymmetric-proposal (AP) losses from evaluating the first and last steps of the
//!   reverse path with the other weight (`q_a` versus `q_b`);
//! * central-proposal-evolution (CPE) losses from evaluating interior steps of the
//!   reverse path at a running mean that has drifted from the forward one.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, DrError, Result};
use crate::exec::Execution;
use crate::proposal::{MixtureKernel, ThreeGaussianParams};
use crate::rng::{rng_from_seed, splitmix64, DrRng};
use crate::stats::mean_stderr;

/// Default ladder of `sigma_i / mu` values.
pub const SIGMA_LADDER: [f64; 4] = [2.00, 0.54, 0.15, 0.04];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else if v == 0.0 || v == 1.0 {
        Err(DrError::Divergent {
            what: "asymmetric-proposal loss",
            detail: format!("{name} = {v}"),
        })
    } else {
        Err(invalid(name, format!("must lie in (0, 1), got {v}")))
    }
}

fn check_width(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

/// Closed-form AP loss for well separated modes:
/// `(na - nb) ln[(1/na - 1) / (1/nb - 1)]`.
pub fn analytic_ap_loss(na: f64, nb: f64) -> Result<f64> {
    check_open_unit("na", na)?;
    check_open_unit("nb", nb)?;
    if na == nb {
        return Ok(0.0);
    }
    Ok((na - nb) * ((1.0 / na - 1.0) / (1.0 / nb - 1.0)).ln())
}

/// Expected log ratio of one proposal evaluated at a centre shifted by `delta`:
/// `-(delta^2 / 2)(nb / sigma1^2 + (1 - nb) / sigma2^2)`.
pub fn analytic_cpe_shift(delta: f64, nb: f64, sigma1: f64, sigma2: f64) -> Result<f64> {
    check_width("sigma1", sigma1)?;
    check_width("sigma2", sigma2)?;
    if !(0.0..=1.0).contains(&nb) {
        return Err(invalid("nb", format!("must lie in [0, 1], got {nb}")));
    }
    Ok(-0.5 * delta * delta * (nb / (sigma1 * sigma1) + (1.0 - nb) / (sigma2 * sigma2)))
}

fn pair(s1: f64, s2: f64, n: f64) -> Result<ThreeGaussianParams> {
    ThreeGaussianParams::new(s1, s2, 1.0, n)
}

/// One draw of the AP log ratio from the shortest excursion that contains both
/// boundary factors: `beta1 ~ q_a(lambda)`, `beta2 ~ q_b(beta1)` with `lambda = 0`.
///
/// The ratio is `q_a(beta2 -> beta1) q_b(beta1 -> lambda) / (q_a(lambda -> beta1) q_b(beta1 -> beta2))`.
fn ap_draw(rng: &mut DrRng, qa: &MixtureKernel, qb: &MixtureKernel) -> f64 {
    let lambda = 0.0;
    let b1 = qa.sample(rng, lambda);
    let b2 = qb.sample(rng, b1);
    qa.logpdf(b2, b1) - qa.logpdf(lambda, b1) + qb.logpdf(b1, lambda) - qb.logpdf(b1, b2)
}

/// Monte Carlo AP loss; returns `(mean, stderr)`.
pub fn mc_ap_loss(
    rng: &mut DrRng,
    s1_over_mu: f64,
    s2_over_mu: f64,
    na: f64,
    nb: f64,
    n_samples: usize,
) -> Result<(f64, f64)> {
    let qa = pair(s1_over_mu, s2_over_mu, na)?.kernel();
    let qb = pair(s1_over_mu, s2_over_mu, nb)?.kernel();
    if n_samples < 2 {
        return Err(invalid("n_samples", "need at least two samples"));
    }
    let xs: Vec<f64> = (0..n_samples).map(|_| ap_draw(rng, &qa, &qb)).collect();
    Ok(mean_stderr(&xs))
}

/// Sum of the interior reverse-minus-forward log proposal ratios of one `q_b`
/// excursion `beta_1 = 0, beta_2, ..., beta_{n_dr - 1}`.
fn cpe_draw(rng: &mut DrRng, qb: &MixtureKernel, n_dr: usize, path: &mut Vec<f64>, suffix: &mut Vec<f64>) -> f64 {
    let lp = |c: f64, x: f64| qb.logpdf(c, x);
    let len = n_dr - 1;
    path.clear();
    path.push(0.0);
    let mut prefix = 0.0;
    let mut den = 0.0;
    for j in 1..len {
        // forward anchor of beta_{j+1} is mean(beta_1..beta_j)
        prefix += path[j - 1];
        let anchor = prefix / j as f64;
        let b = qb.sample(rng, anchor);
        den += lp(anchor, b);
        path.push(b);
    }
    // reverse anchor of beta_m is mean(beta_{m+1}..beta_{len})
    suffix.clear();
    suffix.resize(len + 1, 0.0);
    for m in (0..len).rev() {
        suffix[m] = suffix[m + 1] + path[m];
    }
    let mut num = 0.0;
    for m in 0..len.saturating_sub(1) {
        let count = (len - m - 1) as f64;
        num += lp(suffix[m + 1] / count, path[m]);
    }
    num - den
}

/// Monte Carlo CPE loss of an `n_dr`-stage excursion; returns `(mean, stderr)`.
pub fn mc_cpe_loss(
    rng: &mut DrRng,
    s1_over_mu: f64,
    s2_over_mu: f64,
    nb: f64,
    n_dr: usize,
    n_samples: usize,
) -> Result<(f64, f64)> {
    let qb = pair(s1_over_mu, s2_over_mu, nb)?.kernel();
    if n_dr < 3 {
        return Err(invalid("n_dr", "interior ratios need at least three stages"));
    }
    if n_samples < 2 {
        return Err(invalid("n_samples", "need at least two samples"));
    }
    let mut path = Vec::with_capacity(n_dr);
    let mut suffix = Vec::with_capacity(n_dr);
    let xs: Vec<f64> = (0..n_samples)
        .map(|_| cpe_draw(rng, &qb, n_dr, &mut path, &mut suffix))
        .collect();
    Ok(mean_stderr(&xs))
}

/// Root mean square of `mc_ap_loss - analytic_ap_loss` over an `na x nb` grid.
pub fn ap_validity_rms(
    seed: u64,
    s1_over_mu: f64,
    s2_over_mu: f64,
    na_grid: &[f64],
    nb_grid: &[f64],
    n_samples: usize,
    exec: Execution,
) -> Result<f64> {
    let grid = ap_grid(&[s1_over_mu], &[s2_over_mu], na_grid, nb_grid, n_samples, seed, exec)?;
    validity_rms_of(&grid, 0, 0)
}

fn validity_rms_of(grid: &LossGrid, i1: usize, i2: usize) -> Result<f64> {
    let (nas, nbs) = (&grid.axes[2].values, &grid.axes[3].values);
    let mut sq = 0.0;
    for (ia, &na) in nas.iter().enumerate() {
        for (ib, &nb) in nbs.iter().enumerate() {
            let cell = &grid.cells[grid.flat_index(&[i1, i2, ia, ib])];
            let d = cell.mean - analytic_ap_loss(na, nb)?;
            sq += d * d;
        }
    }
    Ok((sq / (nas.len() * nbs.len()) as f64).sqrt())
}

// Densities and means of log f' for f' = f(x), x ~ q, with well separated modes.

fn term_density(log_f: f64, log_peak: f64, weight: f64, sigma: f64, shift: f64) -> f64 {
    // log_f = log_peak - z^2/2, with z the standardized distance to the nearest mode
    let r2 = -2.0 * (log_f - log_peak);
    if !(r2 > 0.0) || weight == 0.0 {
        return 0.0;
    }
    let r = r2.sqrt();
    let core = 2.0 * sigma * weight * log_f.exp() / r;
    if shift == 0.0 {
        core
    } else {
        let a = shift / sigma;
        core * (-0.5 * a * a).exp() * (a * r).cosh()
    }
}

fn check_density_args(n: f64, sigma1: f64, sigma2: f64) -> Result<()> {
    check_width("sigma1", sigma1)?;
    check_width("sigma2", sigma2)?;
    if !(0.0..=1.0).contains(&n) {
        return Err(invalid("n", format!("must lie in [0, 1], got {n}")));
    }
    Ok(())
}

/// Peak log-heights `ln(N / (sqrt(2 pi) sigma1))` and `ln((1 - N) / (2 sqrt(2 pi) sigma2))`.
fn log_peaks(m: f64, sigma1: f64, sigma2: f64) -> (f64, f64) {
    (
        m.ln() - sigma1.ln() - LN_SQRT_2PI,
        (1.0 - m).ln() - (2.0 * sigma2).ln() - LN_SQRT_2PI,
    )
}

/// Density of `log f'` when points drawn from a mixture with weight `n` are evaluated
/// with the same mixture.
pub fn logratio_density_same(log_f: f64, n: f64, sigma1: f64, sigma2: f64) -> Result<f64> {
    logratio_density_reweighted(log_f, n, n, sigma1, sigma2)
}

/// Density of `log f'` for points drawn with weight `n` and evaluated with weight `m`.
pub fn logratio_density_reweighted(log_f: f64, n: f64, m: f64, sigma1: f64, sigma2: f64) -> Result<f64> {
    check_density_args(n, sigma1, sigma2)?;
    check_density_args(m, sigma1, sigma2)?;
    let (p1, p2) = log_peaks(m, sigma1, sigma2);
    let c = if n == 0.0 { 0.0 } else { n / m };
    let s = if n == 1.0 { 0.0 } else { (1.0 - n) / (1.0 - m) };
    Ok(term_density(log_f, p1, c, sigma1, 0.0) + 2.0 * term_density(log_f, p2, s, sigma2, 0.0))
}

/// Density of `log f'` when the evaluating mixture is centred `delta` away.
pub fn logratio_density_shifted(log_f: f64, delta: f64, n: f64, sigma1: f64, sigma2: f64) -> Result<f64> {
    check_density_args(n, sigma1, sigma2)?;
    let (p1, p2) = log_peaks(n, sigma1, sigma2);
    let c = if n == 0.0 { 0.0 } else { 1.0 };
    let s = if n == 1.0 { 0.0 } else { 1.0 };
    Ok(term_density(log_f, p1, c, sigma1, delta) + 2.0 * term_density(log_f, p2, s, sigma2, delta))
}

/// `w ln(x)` with `0 ln(.) = 0`.
fn xlogy(w: f64, x: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * x.ln()
    }
}

pub fn mean_same(n: f64, sigma1: f64, sigma2: f64) -> Result<f64> {
    mean_reweighted(n, n, sigma1, sigma2)
}

/// `-1/2 - N ln(sqrt(2 pi) sigma1 / M) - (1 - N) ln(sqrt(2 pi) 2 sigma2 / (1 - M))`.
pub fn mean_reweighted(n: f64, m: f64, sigma1: f64, sigma2: f64) -> Result<f64> {
    check_density_args(n, sigma1, sigma2)?;
    check_density_args(m, sigma1, sigma2)?;
    let s2pi = (2.0 * std::f64::consts::PI).sqrt();
    Ok(-0.5 - xlogy(n, s2pi * sigma1 / m) - xlogy(1.0 - n, s2pi * 2.0 * sigma2 / (1.0 - m)))
}

/// Mean of the shifted evaluation: the same-mixture mean plus the shift penalty.
pub fn mean_shifted(delta: f64, n: f64, sigma1: f64, sigma2: f64) -> Result<f64> {
    check_density_args(n, sigma1, sigma2)?;
    let s2pi = (2.0 * std::f64::consts::PI).sqrt();
    let d2 = delta * delta;
    let central = if n == 0.0 {
        0.0
    } else {
        n * ((s2pi * sigma1 / n).ln() + d2 / (2.0 * sigma1 * sigma1))
    };
    let side = if n == 1.0 {
        0.0
    } else {
        (1.0 - n) * ((s2pi * 2.0 * sigma2 / (1.0 - n)).ln() + d2 / (2.0 * sigma2 * sigma2))
    };
    Ok(-0.5 - central - side)
}

/// Upper end of the support of the log-ratio densities, plus the interior
/// breakpoint where the other term's support ends.
pub fn logratio_support(m: f64, sigma1: f64, sigma2: f64) -> Vec<f64> {
    let (p1, p2) = log_peaks(m, sigma1, sigma2);
    let mut pts: Vec<f64> = [p1, p2].into_iter().filter(|p| p.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts
}

/// Monte Carlo estimate of `E[ln f(x)]` for `x ~ gen` and `f = eval` centred at `shift`.
pub fn mc_mean_log_eval(
    rng: &mut DrRng,
    gen: &ThreeGaussianParams,
    eval: &ThreeGaussianParams,
    shift: f64,
    n_samples: usize,
) -> Result<(f64, f64)> {
    gen.validate()?;
    eval.validate()?;
    let (g, e) = (gen.kernel(), eval.kernel());
    let xs: Vec<f64> = (0..n_samples)
        .map(|_| {
            let x = g.sample(rng, 0.0);
            e.logpdf(shift, x)
        })
        .collect();
    Ok(mean_stderr(&xs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Ap,
    Cpe,
}

/// One work item of a loss map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellSpec {
    Ap { s1: f64, s2: f64, na: f64, nb: f64 },
    Cpe { s1: f64, s2: f64, nb: f64, n_dr: usize },
}

impl CellSpec {
    /// Seed derived from the cell parameters, so a cell's value does not depend on
    /// which grid it belongs to.
    pub fn seed(&self, master: u64) -> u64 {
        let words: [u64; 5] = match *self {
            CellSpec::Ap { s1, s2, na, nb } => [1, s1.to_bits(), s2.to_bits(), na.to_bits(), nb.to_bits()],
            CellSpec::Cpe { s1, s2, nb, n_dr } => [2, s1.to_bits(), s2.to_bits(), nb.to_bits(), n_dr as u64],
        };
        words.iter().fold(splitmix64(master), |h, w| splitmix64(h ^ w))
    }

    pub fn coords(&self) -> Vec<f64> {
        match *self {
            CellSpec::Ap { s1, s2, na, nb } => vec![s1, s2, na, nb],
            CellSpec::Cpe { s1, s2, nb, n_dr } => vec![s1, s2, nb, n_dr as f64],
        }
    }

    pub fn evaluate(&self, master: u64, n_samples: usize) -> Result<LossCell> {
        let mut rng = rng_from_seed(self.seed(master));
        let (mean, stderr) = match *self {
            CellSpec::Ap { s1, s2, na, nb } => mc_ap_loss(&mut rng, s1, s2, na, nb, n_samples)?,
            CellSpec::Cpe { s1, s2, nb, n_dr } => mc_cpe_loss(&mut rng, s1, s2, nb, n_dr, n_samples)?,
        };
        Ok(LossCell {
            coords: self.coords(),
            mean,
            stderr,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCell {
    pub coords: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
}

/// A loss map. Cells are stored row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossGrid {
    pub kind: LossKind,
    pub axes: Vec<Axis>,
    pub cells: Vec<LossCell>,
    pub mc_samples: usize,
}

impl LossGrid {
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.values.len() + i)
    }

    /// The work items of an AP map in storage order.
    pub fn ap_cells(s1s: &[f64], s2s: &[f64], nas: &[f64], nbs: &[f64]) -> Vec<CellSpec> {
        let mut out = Vec::with_capacity(s1s.len() * s2s.len() * nas.len() * nbs.len());
        for &s1 in s1s {
            for &s2 in s2s {
                for &na in nas {
                    for &nb in nbs {
                        out.push(CellSpec::Ap { s1, s2, na, nb });
                    }
                }
            }
        }
        out
    }

    /// The work items of a CPE map in storage order.
    pub fn cpe_cells(s1s: &[f64], s2s: &[f64], nbs: &[f64], n_drs: &[usize]) -> Vec<CellSpec> {
        let mut out = Vec::with_capacity(s1s.len() * s2s.len() * nbs.len() * n_drs.len());
        for &s1 in s1s {
            for &s2 in s2s {
                for &nb in nbs {
                    for &n_dr in n_drs {
                        out.push(CellSpec::Cpe { s1, s2, nb, n_dr });
                    }
                }
            }
        }
        out
    }

    pub fn ap_axes(s1s: &[f64], s2s: &[f64], nas: &[f64], nbs: &[f64]) -> Vec<Axis> {
        axes(&[("s1_over_mu", s1s), ("s2_over_mu", s2s), ("na", nas), ("nb", nbs)])
    }

    pub fn cpe_axes(s1s: &[f64], s2s: &[f64], nbs: &[f64], n_drs: &[usize]) -> Vec<Axis> {
        let nd: Vec<f64> = n_drs.iter().map(|&n| n as f64).collect();
        axes(&[("s1_over_mu", s1s), ("s2_over_mu", s2s), ("nb", nbs), ("n_dr", &nd)])
    }

    fn axis_position(&self, axis: usize, value: f64) -> Option<usize> {
        self.axes[axis].values.iter().position(|&v| v == value)
    }

    /// Nearest `(sigma1/mu, sigma2/mu)` cell in log distance.
    fn nearest_sigma_cell(&self, s1: f64, s2: f64) -> (usize, usize) {
        let nearest = |vals: &[f64], x: f64| {
            vals.iter()
                .enumerate()
                .min_by(|a, b| (a.1.ln() - x.ln()).abs().total_cmp(&(b.1.ln() - x.ln()).abs()))
                .map(|(i, _)| i)
                .expect("non-empty axis")
        };
        (nearest(&self.axes[0].values, s1), nearest(&self.axes[1].values, s2))
    }
}

fn axes(spec: &[(&str, &[f64])]) -> Vec<Axis> {
    spec.iter()
        .map(|(n, v)| Axis {
            name: n.to_string(),
            values: v.to_vec(),
        })
        .collect()
}

fn check_axis(name: &'static str, vals: &[f64]) -> Result<()> {
    if vals.is_empty() {
        return Err(invalid(name, "axis must not be empty"));
    }
    if vals.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid(name, "axis values must be strictly increasing"));
    }
    Ok(())
}

/// Evaluates cells independently; each derives its stream from its own parameters.
pub fn evaluate_cells(cells: &[CellSpec], n_samples: usize, seed: u64, exec: Execution) -> Result<Vec<LossCell>> {
    exec.map_slice(cells, |c| c.evaluate(seed, n_samples)).into_iter().collect()
}

pub fn ap_grid(
    s1s: &[f64],
    s2s: &[f64],
    nas: &[f64],
    nbs: &[f64],
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<LossGrid> {
    check_axis("s1_over_mu", s1s)?;
    check_axis("s2_over_mu", s2s)?;
    check_axis("na", nas)?;
    check_axis("nb", nbs)?;
    let cells = evaluate_cells(&LossGrid::ap_cells(s1s, s2s, nas, nbs), n_samples, seed, exec)?;
    Ok(LossGrid {
        kind: LossKind::Ap,
        axes: LossGrid::ap_axes(s1s, s2s, nas, nbs),
        cells,
        mc_samples: n_samples,
    })
}

pub fn cpe_grid(
    s1s: &[f64],
    s2s: &[f64],
    nbs: &[f64],
    n_drs: &[usize],
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<LossGrid> {
    check_axis("s1_over_mu", s1s)?;
    check_axis("s2_over_mu", s2s)?;
    check_axis("nb", nbs)?;
    if n_drs.is_empty() || n_drs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_dr", "axis must be non-empty and strictly increasing"));
    }
    let cells = evaluate_cells(&LossGrid::cpe_cells(s1s, s2s, nbs, n_drs), n_samples, seed, exec)?;
    Ok(LossGrid {
        kind: LossKind::Cpe,
        axes: LossGrid::cpe_axes(s1s, s2s, nbs, n_drs),
        cells,
        mc_samples: n_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityCell {
    pub s1_over_mu: f64,
    pub s2_over_mu: f64,
    pub rms: f64,
}

/// RMS deviation from the closed form for every `(sigma1/mu, sigma2/mu)` of an AP map.
pub fn validity_map(grid: &LossGrid) -> Result<Vec<ValidityCell>> {
    if grid.kind != LossKind::Ap {
        return Err(invalid("grid", "validity needs an AP map"));
    }
    let mut out = Vec::new();
    for (i1, &s1) in grid.axes[0].values.iter().enumerate() {
        for (i2, &s2) in grid.axes[1].values.iter().enumerate() {
            out.push(ValidityCell {
                s1_over_mu: s1,
                s2_over_mu: s2,
                rms: validity_rms_of(grid, i1, i2)?,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetStructure {
    /// Typical distance between neighbouring maxima.
    pub mode_spacing: f64,
    /// Width used for the central Gaussian.
    pub width_center: f64,
    /// Width used for the side Gaussians.
    pub width_side: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub sigma1: f64,
    pub sigma2: f64,
    pub mu: f64,
    pub na: f64,
    pub nb: f64,
    pub n_dr: usize,
    /// The map cell the weights were read from.
    pub s1_over_mu: f64,
    pub s2_over_mu: f64,
    pub ap_loss: f64,
    pub cpe_loss: f64,
}

/// Linear interpolation of `ys` over strictly increasing `xs`, clamped at the ends.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.len() == 1 || x <= xs[0] {
        return ys[0];
    }
    for i in 1..xs.len() {
        if x <= xs[i] {
            let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return ys[i - 1] + t * (ys[i] - ys[i - 1]);
        }
    }
    ys[ys.len() - 1]
}

/// Points of a fine sweep over `[xs[0], xs[last]]` that include every node.
fn sweep(xs: &[f64]) -> Vec<f64> {
    const STEPS: usize = 50;
    let mut out = vec![xs[0]];
    for w in xs.windows(2) {
        for s in 1..=STEPS {
            out.push(w[0] + (w[1] - w[0]) * s as f64 / STEPS as f64);
        }
    }
    out
}

/// Smallest `n_dr` over which the CPE tolerance must hold.
pub const CPE_MIN_STAGES: usize = 100;

/// Picks proposal parameters from precomputed loss maps.
///
/// The widths and offset come from the target structure. `nb` is the smallest value
/// whose worst-case CPE loss over `n_dr >= 100` reaches `tol_cpe`; `na` is then the
/// smallest value whose AP loss (bilinear in `na`, `nb`) reaches `tol_ap`. Both maps
/// are read at the `(sigma1/mu, sigma2/mu)` cell nearest in log distance. Tolerances
/// are log values; `-inf` accepts everything.
pub fn recommend_parameters(
    structure: &TargetStructure,
    tol_ap: f64,
    tol_cpe: f64,
    ap: &LossGrid,
    cpe: &LossGrid,
    n_dr: usize,
) -> Result<Recommendation> {
    check_width("mode_spacing", structure.mode_spacing)?;
    check_width("width_center", structure.width_center)?;
    check_width("width_side", structure.width_side)?;
    if ap.kind != LossKind::Ap || cpe.kind != LossKind::Cpe {
        return Err(invalid("grids", "expected an AP map and a CPE map"));
    }
    if tol_ap.is_nan() || tol_cpe.is_nan() {
        return Err(invalid("tolerance", "must not be NaN"));
    }
    let mu = structure.mode_spacing;
    let s1 = structure.width_center / mu;
    let s2 = structure.width_side / mu;

    let (c1, c2) = cpe.nearest_sigma_cell(s1, s2);
    let nbs = &cpe.axes[2].values;
    let n_drs = &cpe.axes[3].values;
    let stage_idx: Vec<usize> = (0..n_drs.len()).filter(|&i| n_drs[i] >= CPE_MIN_STAGES as f64).collect();
    if stage_idx.is_empty() {
        return Err(DrError::Infeasible(format!(
            "the CPE map has no n_dr >= {CPE_MIN_STAGES}"
        )));
    }
    let worst: Vec<f64> = (0..nbs.len())
        .map(|ib| {
            stage_idx
                .iter()
                .map(|&id| cpe.cells[cpe.flat_index(&[c1, c2, ib, id])].mean)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let (nb, cpe_loss) = sweep(nbs)
        .into_iter()
        .map(|x| (x, interp(nbs, &worst, x)))
        .find(|&(_, l)| l >= tol_cpe)
        .ok_or_else(|| DrError::Infeasible(format!("no nb reaches the CPE tolerance {tol_cpe}")))?;

    let (a1, a2) = ap.nearest_sigma_cell(s1, s2);
    let nas = &ap.axes[2].values;
    let ap_nbs = &ap.axes[3].values;
    let along_na: Vec<f64> = (0..nas.len())
        .map(|ia| {
            let row: Vec<f64> = (0..ap_nbs.len())
                .map(|ib| ap.cells[ap.flat_index(&[a1, a2, ia, ib])].mean)
                .collect();
            interp(ap_nbs, &row, nb)
        })
        .collect();
    let (na, ap_loss) = sweep(nas)
        .into_iter()
        .map(|x| (x, interp(nas, &along_na, x)))
        .find(|&(_, l)| l >= tol_ap)
        .ok_or_else(|| DrError::Infeasible(format!("no na reaches the AP tolerance {tol_ap} at nb = {nb}")))?;

    Ok(Recommendation {
        sigma1: structure.width_center,
        sigma2: structure.width_side,
        mu,
        na,
        nb,
        n_dr,
        s1_over_mu: ap.axes[0].values[a1],
        s2_over_mu: ap.axes[1].values[a2],
        ap_loss,
        cpe_loss,
    })
}

/// Reads a cell of an AP map at exact axis values.
pub fn ap_cell<'g>(grid: &'g LossGrid, s1: f64, s2: f64, na: f64, nb: f64) -> Option<&'g LossCell> {
    let idx = [
        grid.axis_position(0, s1)?,
        grid.axis_position(1, s2)?,
        grid.axis_position(2, na)?,
        grid.axis_position(3, nb)?,
    ];
    grid.cells.get(grid.flat_index(&idx))
}
