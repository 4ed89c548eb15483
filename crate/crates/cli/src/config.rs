//! Experiment configuration files (TOML or JSON).

use std::path::{Path, PathBuf};

use drmc::proposal::ProposalSpec;
use drmc::sampler::{ChainConfig, InitialState, SamplerMode, Termination};
use drmc::targets::TargetSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub target: Option<TargetSpec>,
    pub proposal: Option<ProposalSection>,
    pub run: Option<RunSection>,
    #[serde(default)]
    pub output: OutputSection,
    pub calibrate: Option<CalibrateSection>,
    pub compare: Option<CompareSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSection {
    pub dims: ProposalSpec,
    pub base_widths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub mode: SamplerMode,
    pub n_iterations: u64,
    #[serde(default)]
    pub p_dr: f64,
    #[serde(default)]
    pub p_bj: f64,
    #[serde(default = "one")]
    pub n_dr: usize,
    #[serde(default)]
    pub seed: u64,
    pub initial: InitialState,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            prefix: default_prefix(),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("drmc-out")
}

fn default_prefix() -> String {
    "run".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Ap,
    Cpe,
    Validity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateSection {
    pub kind: MapKind,
    pub s1_over_mu: Vec<f64>,
    pub s2_over_mu: Vec<f64>,
    #[serde(default)]
    pub na: Vec<f64>,
    pub nb: Vec<f64>,
    #[serde(default)]
    pub n_dr: Vec<usize>,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSection {
    /// Target evaluations granted to every mode.
    pub budget: u64,
    pub p_bj_rare: f64,
    pub p_bj_frequent: f64,
    #[serde(default = "one_u64")]
    pub seeds: u64,
}

fn one_u64() -> u64 {
    1
}

impl ExperimentConfig {
    /// Parses TOML or JSON (by extension; `.json` is JSON, anything else TOML),
    /// rejecting unknown keys with their full paths.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_owned(),
            source: e,
        })?;
        let json = path.extension().is_some_and(|e| e == "json");
        Self::parse(&text, json)
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, CliError> {
        let mut unknown = Vec::new();
        let parsed: Result<Self, String> = if json {
            let de = &mut serde_json::Deserializer::from_str(text);
            serde_ignored::deserialize(de, |p| unknown.push(key_path(&p))).map_err(|e| e.to_string())
        } else {
            let de = toml::Deserializer::new(text);
            serde_ignored::deserialize(de, |p| unknown.push(key_path(&p))).map_err(|e| e.to_string())
        };
        if !unknown.is_empty() {
            return Err(CliError::UnknownKeys(unknown));
        }
        parsed.map_err(|message| unknown_from_message(&message).unwrap_or(CliError::Config(message)))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn target(&self) -> Result<&TargetSpec, CliError> {
        self.target.as_ref().ok_or(CliError::MissingSection("target"))
    }

    pub fn proposal(&self) -> Result<&ProposalSection, CliError> {
        self.proposal.as_ref().ok_or(CliError::MissingSection("proposal"))
    }

    pub fn run(&self) -> Result<&RunSection, CliError> {
        self.run.as_ref().ok_or(CliError::MissingSection("run"))
    }

    /// Chain configuration for `mode` with the given termination; validated.
    pub fn chain(&self, mode: SamplerMode, p_jump: f64, termination: Termination, seed: u64) -> Result<ChainConfig, CliError> {
        let run = self.run()?;
        let proposal = self.proposal()?;
        let c = ChainConfig {
            target: self.target()?.clone(),
            spec: proposal.dims.clone(),
            base_widths: proposal.base_widths.clone(),
            p_dr: if mode == SamplerMode::DelayedRejection { p_jump } else { run.p_dr },
            p_bj: if mode == SamplerMode::DelayedRejection { run.p_bj } else { p_jump },
            n_dr: run.n_dr,
            termination,
            seed,
            mode,
            initial: run.initial.clone(),
        };
        c.validate()?;
        Ok(c)
    }

    /// The chain described by the `run` section.
    pub fn sample_chain(&self) -> Result<ChainConfig, CliError> {
        let run = self.run()?;
        let p = match run.mode {
            SamplerMode::DelayedRejection => run.p_dr,
            _ => run.p_bj,
        };
        self.chain(run.mode, p, Termination::Iterations(run.n_iterations), run.seed)
    }

    pub fn override_seed(&mut self, seed: u64) {
        if let Some(r) = self.run.as_mut() {
            r.seed = seed;
        }
        if let Some(c) = self.calibrate.as_mut() {
            c.seed = seed;
        }
    }
}

/// Dotted key path without the `?` segments that optional sections add.
fn key_path(p: &serde_ignored::Path) -> String {
    p.to_string().split('.').filter(|s| *s != "?").collect::<Vec<_>>().join(".")
}

/// `deny_unknown_fields` inside tagged enums reports through the error message
/// rather than the ignored-path callback.
fn unknown_from_message(message: &str) -> Option<CliError> {
    let start = message.find("unknown field `")? + "unknown field `".len();
    let end = start + message[start..].find('`')?;
    Some(CliError::UnknownKeys(vec![message[start..end].to_string()]))
}
