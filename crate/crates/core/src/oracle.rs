//! Brute-force reference computations for testing the DR engine.
//!
//! [`direct_alpha`] evaluates the stage acceptance probability straight from its
//! recursive definition, recomputing every proposal density and every nested
//! sub-chain acceptance with no sharing. [`build_discrete_kernel`] enumerates every
//! proposal path of a DR step on a lattice and assembles the exact transition
//! matrix.

use rand::Rng;

use crate::dr_engine::{ratio_is_one, Alpha, AlphaTable};
use crate::error::{check_dim, invalid, DrError, Result};
use crate::logspace::log_sum_exp;
use crate::proposal::{DrProposal, ProposalSpec, StageRole};
use crate::targets::{LogTarget, TargetSpec};

/// Largest excursion [`direct_alpha`] accepts.
pub const DIRECT_MAX_STAGES: usize = 5;

/// (log magnitude, number of exact zero factors)
type Zl = (f64, u32);

fn zl(log: f64) -> Zl {
    if log == f64::NEG_INFINITY {
        (0.0, 1)
    } else {
        (log, 0)
    }
}

fn proposal_log<P: DrProposal>(proposal: &P, path: &[&[f64]], j: usize) -> f64 {
    if j == 1 {
        proposal.log_density(StageRole::BigJump, path[0], path[1])
    } else {
        let d = path[0].len();
        let mut anchor = vec![0.0; d];
        for s in &path[1..j] {
            for (a, v) in anchor.iter_mut().zip(s.iter()) {
                *a += v;
            }
        }
        for a in anchor.iter_mut() {
            *a /= (j - 1) as f64;
        }
        proposal.central_anchor(&mut anchor);
        proposal.log_density(StageRole::Explore, &anchor, path[j])
    }
}

/// Probability of proposing and rejecting along `path` up to its last element.
fn path_weight<T: LogTarget + ?Sized, P: DrProposal>(target: &T, proposal: &P, path: &[&[f64]]) -> Zl {
    let m = path.len() - 1;
    let mut acc = zl(target.log_pi(path[0]));
    for j in 1..=m {
        let q = zl(proposal_log(proposal, path, j));
        acc = (acc.0 + q.0, acc.1 + q.1);
    }
    for j in 1..m {
        let (a, one) = alpha_rec(target, proposal, &path[..=j]);
        if one {
            acc.1 += 1;
        } else {
            acc.0 += (-a).ln_1p();
        }
    }
    acc
}

fn alpha_rec<T: LogTarget + ?Sized, P: DrProposal>(target: &T, proposal: &P, path: &[&[f64]]) -> (f64, bool) {
    let den = path_weight(target, proposal, path);
    let rev: Vec<&[f64]> = path.iter().rev().copied().collect();
    let num = path_weight(target, proposal, &rev);
    if num.1 > den.1 {
        (0.0, false)
    } else if den.1 > num.1 {
        (1.0, true)
    } else {
        let r = (num.0 - den.0).exp();
        if ratio_is_one(num.0, den.0) {
            (1.0, true)
        } else {
            (r, false)
        }
    }
}

fn check_path<T: LogTarget + ?Sized>(target: &T, states: &[Vec<f64>]) -> Result<()> {
    if states.len() < 2 {
        return Err(invalid("states", "need the current state and at least one candidate"));
    }
    if states.len() - 1 > DIRECT_MAX_STAGES {
        return Err(DrError::SizeLimit(format!(
            "direct evaluation is limited to {DIRECT_MAX_STAGES} stages, got {}",
            states.len() - 1
        )));
    }
    for s in states {
        check_dim(target.dim(), s.len())?;
    }
    Ok(())
}

/// Stage acceptance probability of `states = [lambda, beta_1, ..., beta_k]`.
pub fn direct_alpha<T: LogTarget + ?Sized, P: DrProposal>(states: &[Vec<f64>], target: &T, proposal: &P) -> Result<f64> {
    check_path(target, states)?;
    let path: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    Ok(alpha_rec(target, proposal, &path).0)
}

/// `ln(N/D)` of the full excursion, evaluated directly; `±inf` when one side has
/// more exact zeros.
pub fn direct_log_ratio<T: LogTarget + ?Sized, P: DrProposal>(
    states: &[Vec<f64>],
    target: &T,
    proposal: &P,
) -> Result<f64> {
    check_path(target, states)?;
    let path: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let den = path_weight(target, proposal, &path);
    let rev: Vec<&[f64]> = path.iter().rev().copied().collect();
    let num = path_weight(target, proposal, &rev);
    Ok(match num.1.cmp(&den.1) {
        std::cmp::Ordering::Greater => f64::NEG_INFINITY,
        std::cmp::Ordering::Less => f64::INFINITY,
        std::cmp::Ordering::Equal => num.0 - den.0,
    })
}

/// Largest lattice [`build_discrete_kernel`] accepts.
pub const LATTICE_MAX_POINTS: usize = 31;
/// Largest number of stages [`build_discrete_kernel`] accepts.
pub const KERNEL_MAX_STAGES: usize = 3;

/// A one-dimensional proposal restricted to lattice points and renormalized for each
/// anchor. Running means are snapped to the nearest lattice point.
#[derive(Debug, Clone)]
pub struct LatticeProposal {
    origin: f64,
    pitch: f64,
    n: usize,
    base: ProposalSpec,
    /// Log-normalizers per anchor index, for stage 1 and later stages.
    log_norm: [Vec<f64>; 2],
}

impl LatticeProposal {
    pub fn new(origin: f64, pitch: f64, n: usize, base: ProposalSpec) -> Result<Self> {
        if base.dim() != 1 {
            return Err(invalid("base", "lattice proposals are one-dimensional"));
        }
        if n == 0 || !(pitch > 0.0) {
            return Err(invalid("lattice", "need at least one point and positive pitch"));
        }
        let point = |i: usize| origin + i as f64 * pitch;
        let norm = |role| -> Vec<f64> {
            (0..n)
                .map(|a| {
                    let terms: Vec<f64> = (0..n).map(|j| base.log_density(role, &[point(a)], &[point(j)])).collect();
                    log_sum_exp(&terms)
                })
                .collect()
        };
        let log_norm = [norm(StageRole::BigJump), norm(StageRole::Explore)];
        Ok(Self {
            origin,
            pitch,
            n,
            base,
            log_norm,
        })
    }

    /// Lattice proposal on the grid of a lattice target.
    pub fn for_target(target: &TargetSpec, base: ProposalSpec) -> Result<Self> {
        let (points, _) = target
            .lattice()
            .ok_or_else(|| DrError::Unsupported("lattice proposal needs a lattice target".into()))?;
        let pitch = if points.len() > 1 { points[1] - points[0] } else { 1.0 };
        Self::new(points[0], pitch, points.len(), base)
    }

    pub fn point(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.pitch
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn index(&self, x: f64) -> Option<usize> {
        let r = ((x - self.origin) / self.pitch).round();
        if !(r >= 0.0 && r < self.n as f64) {
            return None;
        }
        ((x - self.point(r as usize)).abs() <= 1e-9 * self.pitch).then_some(r as usize)
    }

    /// Nearest point; halfway cases go up, with a margin so that means summed in a
    /// different order snap alike.
    fn snap(&self, x: f64) -> usize {
        let r = ((x - self.origin) / self.pitch + 0.5 + 1e-9).floor();
        r.clamp(0.0, (self.n - 1) as f64) as usize
    }

    fn role_index(role: StageRole) -> usize {
        match role {
            StageRole::BigJump => 0,
            StageRole::Explore => 1,
        }
    }
}

impl DrProposal for LatticeProposal {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, role: StageRole, anchor: &[f64], candidate: &[f64]) -> f64 {
        match (self.index(anchor[0]), self.index(candidate[0])) {
            (Some(a), Some(_)) => {
                self.base.log_density(role, &[self.point(a)], candidate) - self.log_norm[Self::role_index(role)][a]
            }
            _ => f64::NEG_INFINITY,
        }
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, role: StageRole, anchor: &[f64], out: &mut [f64]) {
        let a = self.snap(anchor[0]);
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut pick = self.n - 1;
        for j in 0..self.n {
            cum += self.log_density(role, &[self.point(a)], &[self.point(j)]).exp();
            if u < cum {
                pick = j;
                break;
            }
        }
        out[0] = self.point(pick);
    }

    fn central_anchor(&self, mean: &mut [f64]) {
        mean[0] = self.point(self.snap(mean[0]));
    }
}

/// A row-stochastic transition matrix over lattice points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    pub states: Vec<f64>,
    /// Row-major `n x n`.
    pub matrix: Vec<f64>,
}

impl DiscreteKernel {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n() + j]
    }

    pub fn identity(states: Vec<f64>) -> Self {
        let n = states.len();
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            matrix[i * n + i] = 1.0;
        }
        Self { states, matrix }
    }

    /// Largest deviation of a row sum from 1.
    pub fn row_sum_error(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| (self.matrix[i * n..(i + 1) * n].iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn enumerate<'p>(
    table: &AlphaTable<'p, LatticeProposal>,
    proposal: &'p LatticeProposal,
    target: &TargetSpec,
    stage: usize,
    n_dr: usize,
    reach: f64,
    row: &mut [f64],
) -> Result<f64> {
    let role = StageRole::for_stage(stage);
    let mut anchor = if stage == 1 {
        table.state(0).to_vec()
    } else {
        let mut m = (1..stage).map(|i| table.state(i)[0]).sum::<f64>() / (stage - 1) as f64;
        let mut buf = [m];
        proposal.central_anchor(&mut buf);
        m = buf[0];
        vec![m]
    };
    if stage == 1 {
        proposal.central_anchor(&mut anchor);
    }
    let mut rejected = 0.0;
    for j in 0..proposal.len() {
        let y = [proposal.point(j)];
        let q = proposal.log_density(role, &anchor, &y).exp();
        if q == 0.0 {
            continue;
        }
        let mut t = table.clone();
        let alpha: Alpha = t.extend(&y, target.log_pi(&y))?;
        let a = alpha.value();
        row[j] += reach * q * a;
        let rest = reach * q * (1.0 - a);
        if rest > 0.0 {
            if stage < n_dr {
                rejected += enumerate(&t, proposal, target, stage + 1, n_dr, rest, row)?;
            } else {
                rejected += rest;
            }
        }
    }
    Ok(rejected)
}

/// Exact DR transition matrix on a lattice target, enumerating every proposal path.
///
/// Rows of zero-probability states are the identity.
pub fn build_discrete_kernel(target: &TargetSpec, proposal: &LatticeProposal, n_dr: usize) -> Result<DiscreteKernel> {
    let (points, _) = target
        .lattice()
        .ok_or_else(|| DrError::Unsupported("kernel enumeration needs a lattice target".into()))?;
    let n = points.len();
    if n > LATTICE_MAX_POINTS {
        return Err(DrError::SizeLimit(format!("lattice has {n} points, limit is {LATTICE_MAX_POINTS}")));
    }
    if n_dr == 0 || n_dr > KERNEL_MAX_STAGES {
        return Err(DrError::SizeLimit(format!("n_dr must be in 1..={KERNEL_MAX_STAGES}, got {n_dr}")));
    }
    if proposal.len() != n {
        return Err(DrError::DimensionMismatch {
            expected: n,
            found: proposal.len(),
        });
    }
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        let row = &mut matrix[i * n..(i + 1) * n];
        let x = [points[i]];
        let lt = target.log_pi(&x);
        if lt == f64::NEG_INFINITY {
            row[i] = 1.0;
            continue;
        }
        let table = AlphaTable::new(proposal, &x, lt)?;
        let stay = enumerate(&table, proposal, target, 1, n_dr, 1.0, row)?;
        row[i] += stay;
    }
    Ok(DiscreteKernel { states: points, matrix })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `max_j |(pi P)_j - pi_j|`
    pub stationarity: f64,
    /// `max_{i,j} |pi_i P_ij - pi_j P_ji|`
    pub detailed_balance: f64,
}

pub fn stationarity_residual(kernel: &DiscreteKernel, pi: &[f64]) -> Result<Residuals> {
    let n = kernel.n();
    check_dim(n, pi.len())?;
    let mut stationarity: f64 = 0.0;
    let mut detailed_balance: f64 = 0.0;
    for j in 0..n {
        let flow: f64 = (0..n).map(|i| pi[i] * kernel.get(i, j)).sum();
        stationarity = stationarity.max((flow - pi[j]).abs());
        for i in 0..n {
            detailed_balance = detailed_balance.max((pi[i] * kernel.get(i, j) - pi[j] * kernel.get(j, i)).abs());
        }
    }
    Ok(Residuals {
        stationarity,
        detailed_balance,
    })
}
