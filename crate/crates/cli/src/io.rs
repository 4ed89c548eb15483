//! Chain CSV files, JSON summaries and atomic writes.
//!
//! A chain file starts with the line `# drmc chain schema_version=1 config_hash=<hex>`,
//! then a header `iteration,x0,..,x{d-1},accepted,dr_stage,target_evals`. Row 0 is the
//! initial state and leaves the three per-iteration fields empty. Floats are written
//! in their shortest round-trip form.

use std::io::Write;
use std::path::{Path, PathBuf};

use drmc::sampler::{Chain, IterationRecord};
use serde::Serialize;

use crate::config::SCHEMA_VERSION;
use crate::error::CliError;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp: PathBuf = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Chain contents as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTable {
    pub dim: usize,
    pub config_hash: Option<String>,
    /// `(n_iterations + 1) * dim` values, row-major.
    pub states: Vec<f64>,
    pub records: Vec<IterationRecord>,
}

impl ChainTable {
    pub fn from_chain(chain: &Chain, config_hash: Option<String>) -> Self {
        Self {
            dim: chain.dim,
            config_hash,
            states: chain.states.clone(),
            records: chain.records.clone(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn coordinate(&self, d: usize, discard: usize) -> Vec<f64> {
        self.states.chunks(self.dim).skip(discard).map(|s| s[d]).collect()
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut out = format!("# drmc chain schema_version={SCHEMA_VERSION}");
        if let Some(h) = &self.config_hash {
            out.push_str(&format!(" config_hash={h}"));
        }
        out.push('\n');
        let mut w = csv::Writer::from_writer(out.into_bytes());
        let mut header = vec!["iteration".to_string()];
        header.extend((0..self.dim).map(|d| format!("x{d}")));
        header.extend(["accepted", "dr_stage", "target_evals"].map(String::from));
        w.write_record(&header).expect("in-memory write");
        for (i, state) in self.states.chunks(self.dim).enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(state.iter().map(|v| v.to_string()));
            match i.checked_sub(1).map(|j| self.records[j]) {
                None => row.extend([String::new(), String::new(), String::new()]),
                Some(r) => {
                    row.push((r.accepted as u8).to_string());
                    row.push(r.dr_stage.map(|s| s.to_string()).unwrap_or_default());
                    row.push(r.target_evals.to_string());
                }
            }
            w.write_record(&row).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text).map_err(|message| CliError::Parse {
            path: path.to_owned(),
            message,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let first = text.lines().next().unwrap_or_default();
        let meta = first
            .strip_prefix("# drmc chain ")
            .ok_or("missing `# drmc chain` schema line")?;
        let mut config_hash = None;
        for kv in meta.split_whitespace() {
            match kv.split_once('=') {
                Some(("schema_version", v)) if v == SCHEMA_VERSION.to_string() => {}
                Some(("schema_version", v)) => return Err(format!("unsupported schema_version {v}")),
                Some(("config_hash", v)) => config_hash = Some(v.to_string()),
                _ => return Err(format!("unexpected schema field `{kv}`")),
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| e.to_string())?.clone();
        let n = header.len();
        if n < 5 || &header[0] != "iteration" || &header[n - 3] != "accepted" {
            return Err("header must be iteration, x0.., accepted, dr_stage, target_evals".into());
        }
        let dim = n - 4;
        let mut states = Vec::new();
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| e.to_string())?;
            let field = |k: usize| &row[k];
            if field(0).parse::<usize>().ok() != Some(i) {
                return Err(format!("row {i}: iteration column out of sequence"));
            }
            for d in 0..dim {
                states.push(field(1 + d).parse::<f64>().map_err(|e| format!("row {i}, x{d}: {e}"))?);
            }
            let (acc, stage, evals) = (field(n - 3), field(n - 2), field(n - 1));
            if i == 0 {
                if !(acc.is_empty() && stage.is_empty() && evals.is_empty()) {
                    return Err("row 0 must be the initial state".into());
                }
                continue;
            }
            let accepted = match acc {
                "0" => false,
                "1" => true,
                other => return Err(format!("row {i}: accepted must be 0 or 1, got `{other}`")),
            };
            let dr_stage = if stage.is_empty() {
                None
            } else {
                Some(stage.parse::<u32>().map_err(|e| format!("row {i}, dr_stage: {e}"))?)
            };
            let target_evals = evals.parse::<u32>().map_err(|e| format!("row {i}, target_evals: {e}"))?;
            records.push(IterationRecord {
                accepted,
                dr_stage,
                target_evals,
            });
        }
        if states.is_empty() {
            return Err("chain has no rows".into());
        }
        Ok(Self {
            dim,
            config_hash,
            states,
            records,
        })
    }
}
