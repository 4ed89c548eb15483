//! The outer Metropolis-Hastings loop and its delayed rejection variant.
//!
//! Every iteration first draws a selector uniform. In delayed rejection mode the
//! iteration runs a DR excursion when the selector falls below `p_dr`; in the two
//! baseline modes it proposes a single big jump from `q_a` when the selector falls
//! below `p_bj`. All other iterations are ordinary MH steps with the per-dimension
//! base Gaussian.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dr_engine::dr_step;
use crate::error::{check_dim, invalid, DrError, Result};
use crate::exec::Execution;
use crate::logspace::normal_logpdf;
use crate::proposal::{DrProposal, ProposalSpec, StageRole};
use crate::rng::{child_seed, rng_from_seed};
use crate::targets::{LogTarget, TargetSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    /// Case A: rare big jumps, no delayed rejection.
    BaselineRareJump,
    /// Case B: frequent big jumps, no delayed rejection.
    BaselineFrequentJump,
    /// Case C: rare entry into a delayed rejection excursion.
    DelayedRejection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Point(Vec<f64>),
    /// Uniform draw from the box `[lo, hi]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Iterations(u64),
    /// Stop once at least this many target evaluations were spent. The last
    /// iteration may overshoot by up to `n_dr - 1`.
    TargetEvals(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub target: TargetSpec,
    pub spec: ProposalSpec,
    /// Widths of the base Gaussian, one per dimension.
    pub base_widths: Vec<f64>,
    pub p_dr: f64,
    pub p_bj: f64,
    pub n_dr: usize,
    pub termination: Termination,
    pub seed: u64,
    pub mode: SamplerMode,
    pub initial: InitialState,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.target.dim();
        check_dim(d, self.spec.dim())?;
        check_dim(d, self.base_widths.len())?;
        for &w in &self.base_widths {
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid("base_widths", format!("must be positive and finite, got {w}")));
            }
        }
        if !(0.0..=1.0).contains(&self.p_dr) {
            return Err(invalid("p_dr", format!("must lie in [0, 1], got {}", self.p_dr)));
        }
        if !(0.0..=1.0).contains(&self.p_bj) {
            return Err(invalid("p_bj", format!("must lie in [0, 1], got {}", self.p_bj)));
        }
        if self.n_dr == 0 {
            return Err(invalid("n_dr", "at least one stage is required"));
        }
        match self.termination {
            Termination::Iterations(0) => return Err(invalid("n_iterations", "must be at least 1")),
            Termination::TargetEvals(0) => return Err(invalid("budget", "must be at least 1")),
            _ => {}
        }
        match &self.initial {
            InitialState::Point(p) => {
                check_dim(d, p.len())?;
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("initial", "coordinates must be finite"));
                }
            }
            InitialState::Box { lo, hi } => {
                check_dim(d, lo.len())?;
                check_dim(d, hi.len())?;
                if lo.iter().zip(hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
                    return Err(invalid("initial", "box bounds must be finite with lo <= hi"));
                }
            }
        }
        Ok(())
    }
}

/// Per-iteration metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub accepted: bool,
    /// Stage at which a DR excursion was accepted.
    pub dr_stage: Option<u32>,
    pub target_evals: u32,
}

/// Acceptance counts by proposal kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStats {
    pub base_proposed: u64,
    pub base_accepted: u64,
    pub big_jump_proposed: u64,
    pub big_jump_accepted: u64,
    pub dr_entered: u64,
    pub dr_accepted: u64,
}

impl ChainStats {
    fn rate(a: u64, n: u64) -> Option<f64> {
        (n > 0).then(|| a as f64 / n as f64)
    }

    pub fn base_rate(&self) -> Option<f64> {
        Self::rate(self.base_accepted, self.base_proposed)
    }

    pub fn big_jump_rate(&self) -> Option<f64> {
        Self::rate(self.big_jump_accepted, self.big_jump_proposed)
    }

    pub fn dr_rate(&self) -> Option<f64> {
        Self::rate(self.dr_accepted, self.dr_entered)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub dim: usize,
    /// Row-major states; the first row is the initial state.
    pub states: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub total_target_evals: u64,
    pub stats: ChainStats,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.states.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn n_iterations(&self) -> usize {
        self.records.len()
    }

    /// Coordinate `d` of every state from `discard` on.
    pub fn coordinate(&self, d: usize, discard: usize) -> Vec<f64> {
        self.states.iter().skip(d).step_by(self.dim).skip(discard).copied().collect()
    }
}

/// Proposal of an ordinary MH step.
#[derive(Debug, Clone, Copy)]
pub enum MhProposal<'a> {
    /// Independent Gaussian per dimension, centred on the current state.
    Base(&'a [f64]),
    /// The stage-1 proposal of a DR spec.
    BigJump(&'a ProposalSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhOutcome {
    pub next: Vec<f64>,
    pub accepted: bool,
    pub log_target: f64,
}

fn base_log_density(widths: &[f64], from: &[f64], to: &[f64]) -> f64 {
    widths.iter().zip(from).zip(to).map(|((&s, &a), &b)| normal_logpdf(b, a, s)).sum()
}

/// One Metropolis-Hastings step. The proposal ratio is always included.
///
/// Consumes the candidate draw, then one uniform (`u < alpha` accepts).
pub fn mh_step<R, T>(
    rng: &mut R,
    current: &[f64],
    log_target_current: f64,
    target: &T,
    proposal: MhProposal<'_>,
) -> Result<MhOutcome>
where
    R: Rng + ?Sized,
    T: LogTarget + ?Sized,
{
    check_dim(target.dim(), current.len())?;
    let mut candidate = vec![0.0; current.len()];
    let (lq_fwd, lq_rev) = match proposal {
        MhProposal::Base(widths) => {
            check_dim(current.len(), widths.len())?;
            for ((c, &x), &s) in candidate.iter_mut().zip(current).zip(widths) {
                let z: f64 = rng.sample(StandardNormal);
                *c = x + s * z;
            }
            (
                base_log_density(widths, current, &candidate),
                base_log_density(widths, &candidate, current),
            )
        }
        MhProposal::BigJump(spec) => {
            check_dim(current.len(), spec.dim())?;
            spec.sample_into(rng, StageRole::BigJump, current, &mut candidate);
            (
                spec.log_density(StageRole::BigJump, current, &candidate),
                spec.log_density(StageRole::BigJump, &candidate, current),
            )
        }
    };
    let lt = target.log_pi(&candidate);
    if lt.is_nan() || lt == f64::INFINITY {
        return Err(DrError::NonFiniteTarget { value: lt });
    }
    let u: f64 = rng.random();
    let accepted = if lt == f64::NEG_INFINITY {
        false
    } else {
        let log_alpha = (lt + lq_rev) - (log_target_current + lq_fwd);
        log_alpha >= 0.0 || u < log_alpha.exp()
    };
    Ok(if accepted {
        MhOutcome {
            next: candidate,
            accepted,
            log_target: lt,
        }
    } else {
        MhOutcome {
            next: current.to_vec(),
            accepted,
            log_target: log_target_current,
        }
    })
}

fn initial_state<R: Rng + ?Sized>(rng: &mut R, init: &InitialState) -> Vec<f64> {
    match init {
        InitialState::Point(p) => p.clone(),
        InitialState::Box { lo, hi } => lo
            .iter()
            .zip(hi)
            .map(|(&l, &h)| {
                let u: f64 = rng.random();
                l + (h - l) * u
            })
            .collect(),
    }
}

/// Runs one chain. Deterministic given `config.seed`.
pub fn run_chain(config: &ChainConfig) -> Result<Chain> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let dim = config.target.dim();
    let target = &config.target;
    let mut current = initial_state(&mut rng, &config.initial);
    let mut lt = target.log_pi(&current);
    if lt == f64::NEG_INFINITY {
        return Err(DrError::ZeroDensityStart);
    }
    if !lt.is_finite() {
        return Err(DrError::NonFiniteTarget { value: lt });
    }

    let capacity = match config.termination {
        Termination::Iterations(n) => n as usize,
        Termination::TargetEvals(b) => b as usize,
    }
    .min(1 << 24);
    let mut states = Vec::with_capacity((capacity + 1) * dim);
    states.extend_from_slice(&current);
    let mut records = Vec::with_capacity(capacity);
    let mut stats = ChainStats::default();
    let mut total: u64 = 0;
    let p_jump = match config.mode {
        SamplerMode::DelayedRejection => config.p_dr,
        _ => config.p_bj,
    };

    loop {
        match config.termination {
            Termination::Iterations(n) if records.len() as u64 >= n => break,
            Termination::TargetEvals(b) if total >= b => break,
            _ => {}
        }
        let sel: f64 = rng.random();
        let record = if sel < p_jump && config.mode == SamplerMode::DelayedRejection {
            stats.dr_entered += 1;
            let out = dr_step(&mut rng, &current, lt, target, &config.spec, config.n_dr)?;
            if let (Some(s), Some(l)) = (out.accepted_state, out.accepted_log_target) {
                current = s;
                lt = l;
                stats.dr_accepted += 1;
            }
            IterationRecord {
                accepted: out.accepted_stage.is_some(),
                dr_stage: out.accepted_stage.map(|s| s as u32),
                target_evals: out.n_target_evals as u32,
            }
        } else {
            let big = sel < p_jump;
            let proposal = if big {
                MhProposal::BigJump(&config.spec)
            } else {
                MhProposal::Base(&config.base_widths)
            };
            let out = mh_step(&mut rng, &current, lt, target, proposal)?;
            if big {
                stats.big_jump_proposed += 1;
                stats.big_jump_accepted += out.accepted as u64;
            } else {
                stats.base_proposed += 1;
                stats.base_accepted += out.accepted as u64;
            }
            current = out.next;
            lt = out.log_target;
            IterationRecord {
                accepted: out.accepted,
                dr_stage: None,
                target_evals: 1,
            }
        };
        total += record.target_evals as u64;
        records.push(record);
        states.extend_from_slice(&current);
    }

    Ok(Chain {
        dim,
        states,
        records,
        total_target_evals: total,
        stats,
    })
}

/// Runs `n_chains` copies of `config`, chain `i` seeded with `child_seed(seed, i)`.
pub fn run_chains(config: &ChainConfig, n_chains: usize, exec: Execution) -> Result<Vec<Chain>> {
    config.validate()?;
    exec.map_range(n_chains, |i| {
        let mut c = config.clone();
        c.seed = child_seed(config.seed, i as u64);
        run_chain(&c)
    })
    .into_iter()
    .collect()
}
