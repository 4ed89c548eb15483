//! General n-stage delayed rejection.
//!
//! The acceptance probability of stage `k` depends on the acceptance probabilities of
//! every sub-chain of the excursion, in both directions. [`AlphaTable`] stores them as
//! a triangle: row `k` holds one entry per sub-chain `(x_i, ..., x_k)` ending at the
//! newest state, and is filled right to left so that each entry reuses the
//! denominator of the entry above it and the reverse-order acceptance of the entry to
//! its right. A row costs `k` new entries and `k` new proposal kernels.
//!
//! Probabilities are kept as [`ZeroAwareLog`] values. Exact zeros (zero target
//! density, or a `1 - alpha` factor with `alpha == 1`) are counted instead of being
//! folded into the magnitude, and matched counts cancel in ratios.

use rand::Rng;

use crate::error::{check_dim, invalid, DrError, Result};
use crate::logspace::log1m_exp;
use crate::proposal::{CentralTracker, DrProposal, StageRole};
use crate::targets::LogTarget;

/// `exp(log_magnitude) * 0^zero_count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroAwareLog {
    pub log_magnitude: f64,
    pub zero_count: u32,
}

impl ZeroAwareLog {
    pub const ONE: Self = Self {
        log_magnitude: 0.0,
        zero_count: 0,
    };

    /// A single exact zero.
    pub const ZERO: Self = Self {
        log_magnitude: 0.0,
        zero_count: 1,
    };

    /// Wraps a log value; `-inf` becomes one exact zero.
    #[inline]
    pub fn from_log(log: f64) -> Self {
        if log == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                log_magnitude: log,
                zero_count: 0,
            }
        }
    }

    #[inline]
    pub fn mul(self, other: Self) -> Self {
        Self {
            log_magnitude: self.log_magnitude + other.log_magnitude,
            zero_count: self.zero_count + other.zero_count,
        }
    }

    #[inline]
    pub fn mul_log(self, log: f64) -> Self {
        self.mul(Self::from_log(log))
    }

    /// Plain log value, `-inf` if any zero was absorbed.
    pub fn to_log(self) -> f64 {
        if self.zero_count > 0 {
            f64::NEG_INFINITY
        } else {
            self.log_magnitude
        }
    }
}

/// An acceptance probability `min(1, N/D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha {
    /// `ln(alpha)`; `-inf` when the numerator has more zeros.
    pub log_alpha: f64,
    /// Set iff `alpha == 1` exactly.
    pub is_one: bool,
}

impl Alpha {
    pub fn value(self) -> f64 {
        if self.is_one {
            1.0
        } else {
            self.log_alpha.exp()
        }
    }

    /// `1 - alpha`, an exact zero when `alpha == 1`.
    #[inline]
    pub fn complement(self) -> ZeroAwareLog {
        if self.is_one {
            ZeroAwareLog::ZERO
        } else {
            ZeroAwareLog::from_log(log1m_exp(self.log_alpha))
        }
    }
}

/// Relative tolerance under which two log weights count as an exact tie.
pub const TIE_TOLERANCE: f64 = 64.0 * f64::EPSILON;

/// Whether `num >= den` once rounding noise is ignored. A sub-chain whose exact
/// ratio is 1 (a repeated state, say) must give `alpha == 1` however its terms were
/// summed, or `1 - alpha` becomes noise instead of an exact zero.
#[inline]
pub fn ratio_is_one(log_num: f64, log_den: f64) -> bool {
    log_num - log_den >= -TIE_TOLERANCE * log_num.abs().max(log_den.abs()).max(1.0)
}

/// `min(1, num / den)` in log space with exact zeros counted.
#[inline]
pub fn alpha_of(num: ZeroAwareLog, den: ZeroAwareLog) -> Alpha {
    if num.zero_count > den.zero_count {
        Alpha {
            log_alpha: f64::NEG_INFINITY,
            is_one: false,
        }
    } else if den.zero_count > num.zero_count {
        Alpha {
            log_alpha: 0.0,
            is_one: true,
        }
    } else if ratio_is_one(num.log_magnitude, den.log_magnitude) {
        Alpha {
            log_alpha: 0.0,
            is_one: true,
        }
    } else {
        Alpha {
            log_alpha: num.log_magnitude - den.log_magnitude,
            is_one: false,
        }
    }
}

/// `min(1, num / den)` with exact zeros counted; returns `(alpha, alpha_is_one)`.
pub fn acceptance_alpha(num: ZeroAwareLog, den: ZeroAwareLog) -> (f64, bool) {
    let a = alpha_of(num, den);
    (a.value(), a.is_one)
}

/// `ln(num / den)` with matched zeros cancelled; `±inf` when the counts differ.
pub fn log_ratio(num: ZeroAwareLog, den: ZeroAwareLog) -> f64 {
    match num.zero_count.cmp(&den.zero_count) {
        std::cmp::Ordering::Greater => f64::NEG_INFINITY,
        std::cmp::Ordering::Less => f64::INFINITY,
        std::cmp::Ordering::Equal => num.log_magnitude - den.log_magnitude,
    }
}

/// One sub-chain `(x_i, ..., x_k)` of the excursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableEntry {
    /// Numerator: the reverse path `(x_k, ..., x_i)`.
    pub log_num: ZeroAwareLog,
    /// Denominator: the forward path `(x_i, ..., x_k)`.
    pub log_den: ZeroAwareLog,
    /// Acceptance of the forward path, `min(1, N/D)`.
    pub forward: Alpha,
    /// Acceptance of the reverse path, `min(1, D/N)`.
    pub reverse: Alpha,
}

impl TableEntry {
    pub fn alpha(&self) -> f64 {
        self.forward.value()
    }

    pub fn alpha_is_one(&self) -> bool {
        self.forward.is_one
    }
}

/// Work performed by an [`AlphaTable`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TableCounters {
    /// Proposal densities evaluated at a point.
    pub density_evals: u64,
    /// Distinct anchored proposal kernels set up.
    pub kernels: u64,
    /// Table entries computed.
    pub entries: u64,
}

/// The triangular table of sub-chain acceptance quantities for one excursion.
///
/// Only the latest row and the leftmost entry of every row are kept, unless the
/// table was created with [`AlphaTable::with_history`].
#[derive(Debug, Clone)]
pub struct AlphaTable<'p, P: DrProposal> {
    proposal: &'p P,
    dim: usize,
    states: Vec<f64>,
    log_targets: Vec<f64>,
    last_row: Vec<TableEntry>,
    leftmost: Vec<TableEntry>,
    history: Option<Vec<Vec<TableEntry>>>,
    counters: TableCounters,
    row_buf: Vec<TableEntry>,
    tracker: CentralTracker,
    anchor: Vec<f64>,
}

impl<'p, P: DrProposal> AlphaTable<'p, P> {
    /// Starts a table at `initial`, which must have positive target density.
    pub fn new(proposal: &'p P, initial: &[f64], log_target_initial: f64) -> Result<Self> {
        let dim = proposal.dim();
        check_dim(dim, initial.len())?;
        if log_target_initial == f64::NEG_INFINITY {
            return Err(DrError::ZeroDensityStart);
        }
        if !log_target_initial.is_finite() {
            return Err(DrError::NonFiniteTarget {
                value: log_target_initial,
            });
        }
        Ok(Self {
            proposal,
            dim,
            states: initial.to_vec(),
            log_targets: vec![log_target_initial],
            last_row: Vec::new(),
            leftmost: Vec::new(),
            history: None,
            counters: TableCounters::default(),
            row_buf: Vec::new(),
            tracker: CentralTracker::new(dim),
            anchor: vec![0.0; dim],
        })
    }

    /// Like [`AlphaTable::new`] but keeps every row.
    pub fn with_history(proposal: &'p P, initial: &[f64], log_target_initial: f64) -> Result<Self> {
        let mut t = Self::new(proposal, initial, log_target_initial)?;
        t.history = Some(Vec::new());
        Ok(t)
    }

    /// Number of rows, i.e. proposed states so far.
    pub fn rows(&self) -> usize {
        self.log_targets.len() - 1
    }

    pub fn counters(&self) -> TableCounters {
        self.counters
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn log_target(&self, i: usize) -> f64 {
        self.log_targets[i]
    }

    /// Leftmost entry of row `row` (1-based): the full excursion up to that stage.
    pub fn leftmost(&self, row: usize) -> Result<&TableEntry> {
        if row == 0 || row > self.leftmost.len() {
            return Err(DrError::RowOutOfRange {
                row,
                rows: self.leftmost.len(),
            });
        }
        Ok(&self.leftmost[row - 1])
    }

    /// Entries of the latest row, indexed by the start of the sub-chain.
    pub fn last_row(&self) -> &[TableEntry] {
        &self.last_row
    }

    /// Full row `row` (1-based), available only with history.
    pub fn row(&self, row: usize) -> Option<&[TableEntry]> {
        self.history.as_ref()?.get(row.checked_sub(1)?).map(|r| r.as_slice())
    }

    /// Appends `new_state` and fills its row; returns the stage acceptance.
    pub fn extend(&mut self, new_state: &[f64], log_target_new: f64) -> Result<Alpha> {
        check_dim(self.dim, new_state.len())?;
        if log_target_new.is_nan() || log_target_new == f64::INFINITY {
            return Err(DrError::NonFiniteTarget { value: log_target_new });
        }
        self.states.extend_from_slice(new_state);
        self.log_targets.push(log_target_new);
        let k = self.rows();
        let dim = self.dim;
        let p = self.proposal;

        let mut row = std::mem::take(&mut self.row_buf);
        row.clear();
        row.resize(
            k,
            TableEntry {
                log_num: ZeroAwareLog::ONE,
                log_den: ZeroAwareLog::ONE,
                forward: Alpha {
                    log_alpha: 0.0,
                    is_one: true,
                },
                reverse: Alpha {
                    log_alpha: 0.0,
                    is_one: true,
                },
            },
        );

        let xk = &self.states[k * dim..(k + 1) * dim];
        let x_prev = &self.states[(k - 1) * dim..k * dim];

        // Rightmost entry: the single step (x_{k-1}, x_k), an ordinary MH ratio.
        let lq_fwd = p.log_density(StageRole::BigJump, x_prev, xk);
        let lq_rev = if p.big_jump_symmetric() {
            lq_fwd
        } else {
            self.counters.density_evals += 1;
            p.log_density(StageRole::BigJump, xk, x_prev)
        };
        self.counters.density_evals += 1;
        self.counters.kernels += 1;
        let den = ZeroAwareLog::from_log(self.log_targets[k - 1]).mul_log(lq_fwd);
        let mut num = ZeroAwareLog::from_log(log_target_new).mul_log(lq_rev);
        row[k - 1] = entry(num, den);

        // Moving left, sub-chain (x_i, ..., x_k) has length m = k - i >= 2 and both
        // its last forward and last reverse proposal are anchored at mean(x_{i+1..k-1}).
        self.tracker.clear();
        for i in (0..k - 1).rev() {
            let xi = &self.states[i * dim..(i + 1) * dim];
            self.tracker.push(&self.states[(i + 1) * dim..(i + 2) * dim]);
            self.tracker.mean_into(&mut self.anchor);
            p.central_anchor(&mut self.anchor);
            self.counters.kernels += 1;
            let lq_den = p.log_density(StageRole::Explore, &self.anchor, xk);
            let lq_num = p.log_density(StageRole::Explore, &self.anchor, xi);
            self.counters.density_evals += 2;

            let above = &self.last_row[i];
            let den = above.log_den.mul_log(lq_den).mul(above.forward.complement());
            num = num.mul(row[i + 1].reverse.complement()).mul_log(lq_num);
            row[i] = entry(num, den);
        }
        self.counters.entries += k as u64;

        let left = row[0];
        self.leftmost.push(left);
        if let Some(h) = self.history.as_mut() {
            h.push(row.clone());
        }
        self.row_buf = std::mem::replace(&mut self.last_row, row);
        Ok(left.forward)
    }
}

#[inline]
fn entry(num: ZeroAwareLog, den: ZeroAwareLog) -> TableEntry {
    TableEntry {
        log_num: num,
        log_den: den,
        forward: alpha_of(num, den),
        reverse: alpha_of(den, num),
    }
}

/// Functional form of [`AlphaTable::extend`] returning the stage acceptance value.
pub fn extend_table<P: DrProposal>(table: &mut AlphaTable<'_, P>, new_state: &[f64], log_target_new: f64) -> Result<f64> {
    table.extend(new_state, log_target_new).map(Alpha::value)
}

/// `N/D` of the leftmost entry of `row`, which equals the ratio of the forward and
/// reverse acceptance probabilities of the whole excursion.
pub fn forward_reverse_ratio<P: DrProposal>(table: &AlphaTable<'_, P>, row: usize) -> Result<f64> {
    let e = table.leftmost(row)?;
    Ok(log_ratio(e.log_num, e.log_den).exp())
}

/// Result of one delayed rejection excursion.
#[derive(Debug, Clone, PartialEq)]
pub struct DrOutcome {
    pub accepted_state: Option<Vec<f64>>,
    /// 1-based stage at which the excursion was accepted.
    pub accepted_stage: Option<usize>,
    /// Log target density of the accepted state.
    pub accepted_log_target: Option<f64>,
    pub n_target_evals: u64,
    pub n_proposal_evals: u64,
    pub counters: TableCounters,
}

/// Runs up to `n_dr` stages starting from `current`.
///
/// Per stage the random stream is consumed in a fixed order: the candidate is drawn,
/// the target is evaluated, the table row is built, and then one uniform decides
/// acceptance (`u < alpha`).
pub fn dr_step<R, T, P>(
    rng: &mut R,
    current: &[f64],
    log_target_current: f64,
    target: &T,
    proposal: &P,
    n_dr: usize,
) -> Result<DrOutcome>
where
    R: Rng + ?Sized,
    T: LogTarget + ?Sized,
    P: DrProposal,
{
    if n_dr == 0 {
        return Err(invalid("n_dr", "at least one stage is required"));
    }
    check_dim(target.dim(), current.len())?;
    check_dim(proposal.dim(), current.len())?;
    let dim = current.len();
    let mut table = AlphaTable::new(proposal, current, log_target_current)?;
    let mut tracker = CentralTracker::new(dim);
    let mut anchor = current.to_vec();
    let mut candidate = vec![0.0; dim];
    let mut n_target_evals = 0;

    for stage in 1..=n_dr {
        let role = StageRole::for_stage(stage);
        if stage >= 2 {
            tracker.push(table.state(stage - 1));
            tracker.mean_into(&mut anchor);
            proposal.central_anchor(&mut anchor);
        }
        proposal.sample_into(rng, role, &anchor, &mut candidate);
        let lt = target.log_pi(&candidate);
        n_target_evals += 1;
        let alpha = table.extend(&candidate, lt)?;
        debug_assert_eq!(table.leftmost(stage)?.log_den.zero_count, 0);
        let u: f64 = rng.random();
        if alpha.is_one || u < alpha.log_alpha.exp() {
            let counters = table.counters();
            return Ok(DrOutcome {
                accepted_state: Some(candidate),
                accepted_stage: Some(stage),
                accepted_log_target: Some(lt),
                n_target_evals,
                n_proposal_evals: counters.density_evals,
                counters,
            });
        }
    }
    let counters = table.counters();
    Ok(DrOutcome {
        accepted_state: None,
        accepted_stage: None,
        accepted_log_target: None,
        n_target_evals,
        n_proposal_evals: counters.density_evals,
        counters,
    })
}
