use std::path::{Path, PathBuf};

use drmc::calibration::{validity_map, CellSpec, LossCell, LossGrid, LossKind};
use drmc::diagnostics::{analyze, AcfResult};
use drmc::exec::Execution;
use drmc::rng::child_seed;
use drmc::sampler::{run_chain, Chain, ChainStats, SamplerMode, Termination};
use drmc::targets::TargetSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{CalibrateSection, ExperimentConfig, MapKind, SCHEMA_VERSION};
use crate::error::CliError;
use crate::io::{write_atomic, write_json, ChainTable};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub base: Option<f64>,
    pub big_jump: Option<f64>,
    pub dr: Option<f64>,
}

impl From<&ChainStats> for AcceptanceRates {
    fn from(s: &ChainStats) -> Self {
        Self {
            base: s.base_rate(),
            big_jump: s.big_jump_rate(),
            dr: s.dr_rate(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub mode: SamplerMode,
    pub n_iterations: usize,
    pub total_target_evals: u64,
    pub acceptance: AcceptanceRates,
    pub stats: ChainStats,
    pub chain_file: PathBuf,
}

pub fn sample(config: &ExperimentConfig, out: &Path) -> Result<SampleSummary, CliError> {
    let chain_config = config.sample_chain()?;
    let chain = run_chain(&chain_config)?;
    let hash = config.hash();
    let chain_file = out.join(format!("{}.csv", config.output.prefix));
    write_atomic(&chain_file, &ChainTable::from_chain(&chain, Some(hash.clone())).to_csv())?;
    let summary = SampleSummary {
        schema_version: SCHEMA_VERSION,
        seed: chain_config.seed,
        config_hash: hash,
        mode: chain_config.mode,
        n_iterations: chain.n_iterations(),
        total_target_evals: chain.total_target_evals,
        acceptance: (&chain.stats).into(),
        stats: chain.stats,
        chain_file,
    };
    write_json(&out.join(format!("{}.summary.json", config.output.prefix)), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrateSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub kind: MapKind,
    pub n_cells: usize,
    /// Cells evaluated in this run; the rest came from the cache.
    pub computed_cells: usize,
    pub map_file: PathBuf,
}

fn cell_key(cell: &CellSpec, samples: usize, seed: u64) -> String {
    let json = serde_json::to_vec(&(SCHEMA_VERSION, cell, samples, seed)).expect("cell serializes");
    hex::encode(Sha256::digest(json))
}

/// Evaluates the cells missing from `cache`, storing each as it completes.
fn cached_cells(
    cells: &[CellSpec],
    samples: usize,
    seed: u64,
    cache: &Path,
    exec: Execution,
) -> Result<(Vec<LossCell>, usize), CliError> {
    let results = exec.map_slice(cells, |cell| -> Result<(LossCell, bool), CliError> {
        let path = cache.join(format!("{}.json", cell_key(cell, samples, seed)));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(hit) = serde_json::from_str::<LossCell>(&text) {
                return Ok((hit, false));
            }
        }
        let fresh = cell.evaluate(seed, samples)?;
        write_json(&path, &fresh)?;
        Ok((fresh, true))
    });
    let mut out = Vec::with_capacity(cells.len());
    let mut computed = 0;
    for r in results {
        let (cell, fresh) = r?;
        computed += fresh as usize;
        out.push(cell);
    }
    Ok((out, computed))
}

fn check_axis(name: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() || v.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::Config(format!("calibrate.{name} must be non-empty and strictly increasing")));
    }
    Ok(())
}

fn loss_grid(c: &CalibrateSection, cache: &Path, exec: Execution) -> Result<(LossGrid, usize), CliError> {
    check_axis("s1_over_mu", &c.s1_over_mu)?;
    check_axis("s2_over_mu", &c.s2_over_mu)?;
    check_axis("nb", &c.nb)?;
    if c.samples < 2 {
        return Err(CliError::Config("calibrate.samples must be at least 2".into()));
    }
    let (kind, cells, axes) = match c.kind {
        MapKind::Ap | MapKind::Validity => {
            check_axis("na", &c.na)?;
            (
                LossKind::Ap,
                LossGrid::ap_cells(&c.s1_over_mu, &c.s2_over_mu, &c.na, &c.nb),
                LossGrid::ap_axes(&c.s1_over_mu, &c.s2_over_mu, &c.na, &c.nb),
            )
        }
        MapKind::Cpe => {
            if c.n_dr.is_empty() || c.n_dr.windows(2).any(|w| w[0] >= w[1]) || c.n_dr[0] == 0 {
                return Err(CliError::Config("calibrate.n_dr must be positive and strictly increasing".into()));
            }
            (
                LossKind::Cpe,
                LossGrid::cpe_cells(&c.s1_over_mu, &c.s2_over_mu, &c.nb, &c.n_dr),
                LossGrid::cpe_axes(&c.s1_over_mu, &c.s2_over_mu, &c.nb, &c.n_dr),
            )
        }
    };
    let (cells, computed) = cached_cells(&cells, c.samples, c.seed, cache, exec)?;
    let grid = LossGrid {
        kind,
        axes,
        cells,
        mc_samples: c.samples,
    };
    Ok((grid, computed))
}

pub fn calibrate(config: &ExperimentConfig, out: &Path, cache: &Path, exec: Execution) -> Result<CalibrateSummary, CliError> {
    let c = config.calibrate.as_ref().ok_or(CliError::MissingSection("calibrate"))?;
    let (grid, computed) = loss_grid(c, cache, exec)?;
    let name = match c.kind {
        MapKind::Ap => "ap",
        MapKind::Cpe => "cpe",
        MapKind::Validity => "validity",
    };
    let map_file = out.join(format!("{}.{name}.json", config.output.prefix));
    let hash = config.hash();
    let header = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "seed": c.seed,
        "config_hash": hash,
    });
    let body = match c.kind {
        MapKind::Validity => serde_json::json!({ "meta": header, "validity": validity_map(&grid)? }),
        _ => serde_json::json!({ "meta": header, "map": grid }),
    };
    write_json(&map_file, &body)?;
    Ok(CalibrateSummary {
        schema_version: SCHEMA_VERSION,
        seed: c.seed,
        config_hash: hash,
        kind: c.kind,
        n_cells: grid.cells.len(),
        computed_cells: computed,
        map_file,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub schema_version: u32,
    pub config_hash: Option<String>,
    pub discard: usize,
    pub n_samples: usize,
    pub dimensions: Vec<AcfResult>,
}

pub fn diagnose(chain: &Path, discard: usize, max_lag: Option<usize>) -> Result<DiagnoseReport, CliError> {
    let table = ChainTable::read(chain)?;
    let rows = table.n_rows();
    if discard >= rows {
        return Err(CliError::Config(format!(
            "discard {discard} leaves no samples from a chain of {rows} states"
        )));
    }
    let n = rows - discard;
    let lag = max_lag.unwrap_or(n / 2).min(n.saturating_sub(1));
    let dimensions = (0..table.dim)
        .map(|d| analyze(&table.coordinate(d, discard), lag))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DiagnoseReport {
        schema_version: SCHEMA_VERSION,
        config_hash: table.config_hash,
        discard,
        n_samples: n,
        dimensions,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: SamplerMode,
    pub seed: u64,
    pub n_iterations: usize,
    pub total_target_evals: u64,
    pub acceptance: AcceptanceRates,
    /// Number of changes of the nearest target mode along the chain.
    pub mode_transitions: usize,
    /// First iteration in the dominant mode.
    pub first_dominant_visit: Option<usize>,
    /// Integrated time of coordinate 0 from the first dominant visit on.
    pub tau_int: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub budget: u64,
    pub runs: Vec<ModeReport>,
    /// Iterations of the frequent-jump baseline over iterations of the DR chain, per seed.
    pub iteration_ratio_b_over_c: Vec<f64>,
}

fn mode_report(chain: &Chain, target: &TargetSpec, mode: SamplerMode, seed: u64) -> ModeReport {
    let labels: Vec<Option<usize>> = (0..chain.len()).map(|i| target.mode_index(chain.state(i))).collect();
    let mut transitions = 0;
    let mut last = None;
    for l in labels.iter().flatten() {
        if last.is_some_and(|p| p != *l) {
            transitions += 1;
        }
        last = Some(*l);
    }
    let dominant = target.dominant_mode();
    let first = labels.iter().position(|l| *l == Some(dominant));
    let tau_int = first.and_then(|f| {
        let x = chain.coordinate(0, f);
        analyze(&x, x.len() / 2).ok().and_then(|a| a.tau_int)
    });
    ModeReport {
        mode,
        seed,
        n_iterations: chain.n_iterations(),
        total_target_evals: chain.total_target_evals,
        acceptance: (&chain.stats).into(),
        mode_transitions: transitions,
        first_dominant_visit: first,
        tau_int,
    }
}

pub fn compare(config: &ExperimentConfig, out: &Path, exec: Execution) -> Result<CompareReport, CliError> {
    let c = config.compare.as_ref().ok_or(CliError::MissingSection("compare"))?;
    let run = config.run()?;
    if c.seeds == 0 || c.budget == 0 {
        return Err(CliError::Config("compare.budget and compare.seeds must be positive".into()));
    }
    let modes = [
        (SamplerMode::BaselineRareJump, c.p_bj_rare),
        (SamplerMode::BaselineFrequentJump, c.p_bj_frequent),
        (SamplerMode::DelayedRejection, run.p_dr),
    ];
    let mut jobs = Vec::new();
    for s in 0..c.seeds {
        let seed = if c.seeds == 1 { run.seed } else { child_seed(run.seed, s) };
        for (mode, p) in modes {
            jobs.push(config.chain(mode, p, Termination::TargetEvals(c.budget), seed)?);
        }
    }
    let target = config.target()?;
    let runs = exec
        .map_slice(&jobs, |job| run_chain(job).map(|ch| mode_report(&ch, target, job.mode, job.seed)))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let ratios = runs
        .chunks(3)
        .map(|r| r[1].n_iterations as f64 / r[2].n_iterations.max(1) as f64)
        .collect();
    let report = CompareReport {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        budget: c.budget,
        runs,
        iteration_ratio_b_over_c: ratios,
    };
    write_json(&out.join(format!("{}.compare.json", config.output.prefix)), &report)?;
    Ok(report)
}
