//! Proposal densities for delayed rejection.
//!
//! Every DR-varied coordinate uses either a symmetric three-Gaussian mixture (a
//! central Gaussian of width `sigma1` plus two side Gaussians of width `sigma2` at
//! `±mu`) or a plain Gaussian. Stage 1 of an excursion uses the big-jump weights
//! (`na`); later stages use the exploration weights (`nb`) anchored at the running
//! mean of the excursion so far.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::logspace::{normal_logpdf, LN_INV_SQRT_2PI};

/// Parameters of one symmetric three-Gaussian mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeGaussianParams {
    pub sigma1: f64,
    pub sigma2: f64,
    pub mu: f64,
    /// Probability of drawing from the central Gaussian.
    pub weight_center: f64,
}

impl ThreeGaussianParams {
    pub fn new(sigma1: f64, sigma2: f64, mu: f64, weight_center: f64) -> Result<Self> {
        let p = Self {
            sigma1,
            sigma2,
            mu,
            weight_center,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1.is_finite() && self.sigma1 > 0.0) {
            return Err(invalid("sigma1", format!("must be positive and finite, got {}", self.sigma1)));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(invalid("sigma2", format!("must be positive and finite, got {}", self.sigma2)));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(invalid("mu", format!("must be non-negative and finite, got {}", self.mu)));
        }
        if !(0.0..=1.0).contains(&self.weight_center) {
            return Err(invalid(
                "weight_center",
                format!("must lie in [0, 1], got {}", self.weight_center),
            ));
        }
        Ok(())
    }

    /// Variance of the mixture about its center.
    pub fn variance(&self) -> f64 {
        let n = self.weight_center;
        n * self.sigma1 * self.sigma1 + (1.0 - n) * (self.sigma2 * self.sigma2 + self.mu * self.mu)
    }

    pub(crate) fn kernel(&self) -> MixtureKernel {
        MixtureKernel::new(self)
    }
}

/// Precomputed log-normalizers of a [`ThreeGaussianParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct MixtureKernel {
    params: ThreeGaussianParams,
    /// `ln(N) - ln(sigma1) - ln sqrt(2 pi)`, or `None` when the central weight is zero.
    center_norm: Option<f64>,
    /// `ln((1 - N) / 2) - ln(sigma2) - ln sqrt(2 pi)`, or `None` when the side weight is zero.
    side_norm: Option<f64>,
    inv_sigma1: f64,
    inv_sigma2: f64,
}

impl MixtureKernel {
    fn new(p: &ThreeGaussianParams) -> Self {
        let n = p.weight_center;
        let center_norm = (n > 0.0).then(|| n.ln() - p.sigma1.ln() + LN_INV_SQRT_2PI);
        let side_norm = (n < 1.0).then(|| ((1.0 - n) / 2.0).ln() - p.sigma2.ln() + LN_INV_SQRT_2PI);
        Self {
            params: *p,
            center_norm,
            side_norm,
            inv_sigma1: 1.0 / p.sigma1,
            inv_sigma2: 1.0 / p.sigma2,
        }
    }

    /// Depends on `|x - center|` only, so the density is exactly symmetric.
    #[inline]
    pub(crate) fn logpdf(&self, center: f64, x: f64) -> f64 {
        let u = (x - center).abs();
        let mut terms = [f64::NEG_INFINITY; 3];
        if let Some(c) = self.center_norm {
            let z = u * self.inv_sigma1;
            terms[0] = c - 0.5 * z * z;
        }
        if let Some(s) = self.side_norm {
            let zn = (u - self.params.mu) * self.inv_sigma2;
            let zf = (u + self.params.mu) * self.inv_sigma2;
            terms[1] = s - 0.5 * zn * zn;
            terms[2] = s - 0.5 * zf * zf;
        }
        let max = terms[0].max(terms[1]);
        // terms[2] <= terms[1] always, so `max` is the true maximum.
        if max == f64::NEG_INFINITY {
            return max;
        }
        let sum = (terms[0] - max).exp() + (terms[1] - max).exp() + (terms[2] - max).exp();
        max + sum.ln()
    }

    #[inline]
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R, center: f64) -> f64 {
        let p = &self.params;
        let u: f64 = rng.random();
        let z: f64 = rng.sample(StandardNormal);
        if u < p.weight_center {
            center + p.sigma1 * z
        } else if u < p.weight_center + 0.5 * (1.0 - p.weight_center) {
            center - p.mu + p.sigma2 * z
        } else {
            center + p.mu + p.sigma2 * z
        }
    }
}

/// Log-density of the three-Gaussian mixture centred at `center`, evaluated at `x`.
pub fn three_gaussian_logpdf(center: f64, x: f64, params: &ThreeGaussianParams) -> Result<f64> {
    params.validate()?;
    Ok(params.kernel().logpdf(center, x))
}

/// One draw from the mixture centred at `center`.
///
/// Consumes one uniform (component choice; the side is chosen by the same uniform)
/// followed by one standard normal.
pub fn three_gaussian_sample<R: Rng + ?Sized>(
    rng: &mut R,
    center: f64,
    params: &ThreeGaussianParams,
) -> Result<f64> {
    params.validate()?;
    Ok(params.kernel().sample(rng, center))
}

/// Big-jump / exploration pair sharing widths and offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeGaussianPair {
    pub sigma1: f64,
    pub sigma2: f64,
    pub mu: f64,
    /// Central weight of the stage-1 (big jump) proposal.
    pub na: f64,
    /// Central weight of the stage >= 2 (exploration) proposal.
    pub nb: f64,
}

impl ThreeGaussianPair {
    pub fn qa(&self) -> ThreeGaussianParams {
        ThreeGaussianParams {
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            mu: self.mu,
            weight_center: self.na,
        }
    }

    pub fn qb(&self) -> ThreeGaussianParams {
        ThreeGaussianParams {
            weight_center: self.nb,
            ..self.qa()
        }
    }
}

/// Proposal of a single coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimProposal {
    ThreeGaussian(ThreeGaussianPair),
    SingleGaussian { sigma: f64 },
}

/// Which proposal family a DR stage draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StageRole {
    /// Stage 1: `q_a`, anchored at the state the excursion started from.
    BigJump,
    /// Stages 2 and later: `q_b`, anchored at the running mean of the excursion.
    Explore,
}

impl StageRole {
    pub fn for_stage(stage: usize) -> Self {
        if stage <= 1 {
            StageRole::BigJump
        } else {
            StageRole::Explore
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum DimKernel {
    Mixture { qa: MixtureKernel, qb: MixtureKernel },
    Gaussian { sigma: f64 },
}

/// Product proposal over all coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DimProposal>", into = "Vec<DimProposal>")]
pub struct ProposalSpec {
    dims: Vec<DimProposal>,
    kernels: Vec<DimKernel>,
}

impl ProposalSpec {
    pub fn new(dims: Vec<DimProposal>) -> Result<Self> {
        if dims.is_empty() {
            return Err(invalid("proposal", "at least one dimension is required"));
        }
        let kernels = dims
            .iter()
            .map(|d| match d {
                DimProposal::ThreeGaussian(pair) => {
                    let qa = pair.qa();
                    let qb = pair.qb();
                    qa.validate()?;
                    qb.validate()?;
                    Ok(DimKernel::Mixture {
                        qa: qa.kernel(),
                        qb: qb.kernel(),
                    })
                }
                DimProposal::SingleGaussian { sigma } => {
                    if !(sigma.is_finite() && *sigma > 0.0) {
                        return Err(invalid("sigma", format!("must be positive and finite, got {sigma}")));
                    }
                    Ok(DimKernel::Gaussian { sigma: *sigma })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dims, kernels })
    }

    /// One three-Gaussian coordinate.
    pub fn three_gaussian(pair: ThreeGaussianPair) -> Result<Self> {
        Self::new(vec![DimProposal::ThreeGaussian(pair)])
    }

    pub fn dims(&self) -> &[DimProposal] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    fn log_density_unchecked(&self, role: StageRole, anchor: &[f64], candidate: &[f64]) -> f64 {
        let mut total = 0.0;
        for ((k, &a), &x) in self.kernels.iter().zip(anchor).zip(candidate) {
            total += match (k, role) {
                (DimKernel::Mixture { qa, .. }, StageRole::BigJump) => qa.logpdf(a, x),
                (DimKernel::Mixture { qb, .. }, StageRole::Explore) => qb.logpdf(a, x),
                (DimKernel::Gaussian { sigma }, _) => normal_logpdf(x, a, *sigma),
            };
        }
        total
    }

    fn sample_unchecked<R: Rng + ?Sized>(&self, rng: &mut R, role: StageRole, anchor: &[f64], out: &mut [f64]) {
        for ((k, &a), o) in self.kernels.iter().zip(anchor).zip(out.iter_mut()) {
            *o = match (k, role) {
                (DimKernel::Mixture { qa, .. }, StageRole::BigJump) => qa.sample(rng, a),
                (DimKernel::Mixture { qb, .. }, StageRole::Explore) => qb.sample(rng, a),
                (DimKernel::Gaussian { sigma }, _) => {
                    let z: f64 = rng.sample(StandardNormal);
                    a + sigma * z
                }
            };
        }
    }
}

impl TryFrom<Vec<DimProposal>> for ProposalSpec {
    type Error = crate::DrError;

    fn try_from(dims: Vec<DimProposal>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<ProposalSpec> for Vec<DimProposal> {
    fn from(spec: ProposalSpec) -> Self {
        spec.dims
    }
}

/// Log-density of proposing `candidate` at DR stage `stage` from `anchor`.
///
/// `anchor` is the current state for stage 1 and the running mean of the excursion
/// for later stages; choosing it is the caller's job.
pub fn dr_proposal_logpdf(stage: usize, anchor: &[f64], candidate: &[f64], spec: &ProposalSpec) -> Result<f64> {
    if stage == 0 {
        return Err(invalid("stage", "stages are numbered from 1"));
    }
    check_dim(spec.dim(), anchor.len())?;
    check_dim(spec.dim(), candidate.len())?;
    Ok(spec.log_density_unchecked(StageRole::for_stage(stage), anchor, candidate))
}

/// Draw a stage-`stage` candidate around `anchor`.
pub fn dr_proposal_sample<R: Rng + ?Sized>(
    rng: &mut R,
    stage: usize,
    anchor: &[f64],
    spec: &ProposalSpec,
) -> Result<Vec<f64>> {
    if stage == 0 {
        return Err(invalid("stage", "stages are numbered from 1"));
    }
    check_dim(spec.dim(), anchor.len())?;
    let mut out = vec![0.0; spec.dim()];
    spec.sample_unchecked(rng, StageRole::for_stage(stage), anchor, &mut out);
    Ok(out)
}

/// A proposal family usable by the delayed rejection engine.
///
/// Implementations must be consistent: `sample_into` draws from the density that
/// `log_density` evaluates, for the same role and anchor.
pub trait DrProposal: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, role: StageRole, anchor: &[f64], candidate: &[f64]) -> f64;

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, role: StageRole, anchor: &[f64], out: &mut [f64]);

    /// Turn the running mean of an excursion into the anchor actually used.
    fn central_anchor(&self, _mean: &mut [f64]) {}

    /// Whether `q_a(x, y) == q_a(y, x)` holds exactly, letting the table reuse one
    /// evaluation for both orders.
    fn big_jump_symmetric(&self) -> bool {
        false
    }
}

impl DrProposal for ProposalSpec {
    fn dim(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    fn log_density(&self, role: StageRole, anchor: &[f64], candidate: &[f64]) -> f64 {
        self.log_density_unchecked(role, anchor, candidate)
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, role: StageRole, anchor: &[f64], out: &mut [f64]) {
        self.sample_unchecked(rng, role, anchor, out)
    }

    fn big_jump_symmetric(&self) -> bool {
        true
    }
}

/// Running mean of the excursion states after the first one.
///
/// Uses a compensated (Neumaier) sum per coordinate, so the mean is independent of
/// push order to within a few ulps.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralTracker {
    count: usize,
    sum: Vec<f64>,
    compensation: Vec<f64>,
}

impl CentralTracker {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            sum: vec![0.0; dim],
            compensation: vec![0.0; dim],
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn push(&mut self, value: &[f64]) {
        debug_assert_eq!(value.len(), self.sum.len());
        for ((s, c), &v) in self.sum.iter_mut().zip(self.compensation.iter_mut()).zip(value) {
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
        self.count += 1;
    }

    /// Writes the running mean into `out`. An empty tracker yields zeros.
    pub fn mean_into(&self, out: &mut [f64]) {
        let n = self.count.max(1) as f64;
        for ((o, s), c) in out.iter_mut().zip(&self.sum).zip(&self.compensation) {
            *o = (s + c) / n;
        }
    }

    pub fn running_mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.sum.len()];
        self.mean_into(&mut out);
        out
    }

    pub fn clear(&mut self) {
        self.count = 0;
        self.sum.iter_mut().for_each(|s| *s = 0.0);
        self.compensation.iter_mut().for_each(|c| *c = 0.0);
    }
}

/// Functional form of [`CentralTracker::push`].
pub fn central_push(mut tracker: CentralTracker, value: &[f64]) -> CentralTracker {
    tracker.push(value);
    tracker
}
