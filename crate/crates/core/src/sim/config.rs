//! Simulation configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::ByzantineKind;
use crate::fl::PartitionScheme;
use crate::zkproof::BackendKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {reason}")]
    Read { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Mnist,
    Synthetic,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mnist => "mnist",
            Self::Synthetic => "synthetic",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mnist" => Ok(Self::Mnist),
            "synthetic" => Ok(Self::Synthetic),
            _ => Err(format!("unknown dataset {s:?}")),
        }
    }
}

/// One-way message delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyModel {
    FixedMs(f64),
    Uniform { lo_ms: f64, hi_ms: f64 },
}

impl LatencyModel {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::FixedMs(ms) => ms / 1e3,
            Self::Uniform { lo_ms, hi_ms } if hi_ms > lo_ms => rng.gen_range(lo_ms..hi_ms) / 1e3,
            Self::Uniform { lo_ms, .. } => lo_ms / 1e3,
        }
    }

    pub fn max_s(&self) -> f64 {
        match *self {
            Self::FixedMs(ms) => ms / 1e3,
            Self::Uniform { lo_ms, hi_ms } => lo_ms.max(hi_ms) / 1e3,
        }
    }
}

/// Per-operation durations in seconds used instead of wall-clock
/// measurements when the scheduler runs deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub setup_s: f64,
    pub train_per_sample_epoch_s: f64,
    pub commit_per_kib_s: f64,
    pub prove_per_sample_s: f64,
    pub verify_s: f64,
    pub signature_s: f64,
    pub aggregate_per_model_s: f64,
    pub block_check_per_tx_s: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            setup_s: 0.5,
            train_per_sample_epoch_s: 1.2e-5,
            commit_per_kib_s: 1.5e-3,
            prove_per_sample_s: 2e-3,
            verify_s: 0.08,
            signature_s: 5e-5,
            aggregate_per_model_s: 2e-3,
            block_check_per_tx_s: 1.5e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// All nodes, the task publisher included.
    pub nodes: usize,
    pub rounds: usize,
    pub byzantine_frac: f64,
    pub byzantine_kind: ByzantineKind,
    pub dataset: DatasetKind,
    pub data_dir: Option<PathBuf>,
    pub backend: BackendKind,
    pub seed: u64,
    pub latency: LatencyModel,
    /// Size of the test set every proof is about.
    pub prove_samples: usize,
    pub deadline_s: f64,
    pub vote_timeout_s: f64,
    pub out: PathBuf,
    pub deterministic: bool,
    pub clients_per_round: usize,
    pub hidden: Vec<usize>,
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub partition: PartitionScheme,
    /// Caps the training split; `None` uses all of it.
    pub train_samples: Option<usize>,
    /// Caps the held-out set used for the reported global accuracy.
    pub eval_samples: Option<usize>,
    pub synthetic_dim: usize,
    pub synthetic_classes: usize,
    pub bit_width: u8,
    pub shift: u32,
    pub security_bits: u32,
    /// Fraction of the test set below the top accuracy still aggregated.
    pub inclusion_margin: f64,
    /// Extra correct predictions claimed by inflating nodes.
    pub inflation: u64,
    pub cost: CostModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            nodes: 10,
            rounds: 5,
            byzantine_frac: 0.0,
            byzantine_kind: ByzantineKind::ClaimInflatedAcc,
            dataset: DatasetKind::Synthetic,
            data_dir: None,
            backend: BackendKind::Oracle,
            seed: 0,
            latency: LatencyModel::FixedMs(50.0),
            prove_samples: 100,
            deadline_s: 30.0,
            vote_timeout_s: 5.0,
            out: PathBuf::from("zkpot-out"),
            deterministic: false,
            clients_per_round: 20,
            hidden: vec![128],
            local_epochs: 5,
            learning_rate: 0.05,
            batch_size: 32,
            partition: PartitionScheme::Iid,
            train_samples: None,
            eval_samples: None,
            synthetic_dim: 64,
            synthetic_classes: 10,
            bit_width: 8,
            shift: crate::quant::DEFAULT_SHIFT,
            security_bits: 128,
            inclusion_margin: 0.2,
            inflation: 10,
            cost: CostModel::default(),
        }
    }
}

impl SimConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, ConfigError> {
        let read = |reason: String| ConfigError::Read { path: path.to_path_buf(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| read(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| read(e.to_string()))
    }

    pub fn byzantine_count(&self) -> usize {
        (self.byzantine_frac * self.nodes as f64 + 1e-9).floor() as usize
    }

    pub fn clients(&self) -> usize {
        self.nodes.saturating_sub(1)
    }

    pub fn participants(&self) -> usize {
        self.clients_per_round.min(self.clients())
    }

    /// Deadline stretched by the worst-case latency.
    pub fn effective_deadline(&self) -> f64 {
        self.deadline_s + 2.0 * self.latency.max_s()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.nodes < 2 {
            return bad(format!("need a publisher and at least one client, got {} nodes", self.nodes));
        }
        if self.rounds == 0 {
            return bad("rounds must be positive".into());
        }
        if !(0.0..=1.0 / 3.0 + 1e-9).contains(&self.byzantine_frac) {
            return bad(format!("byzantine fraction {} outside [0, 1/3]", self.byzantine_frac));
        }
        if self.byzantine_frac > 0.0 && self.nodes < 4 {
            return bad("byzantine runs need at least 4 nodes".into());
        }
        if self.byzantine_count() > self.clients() {
            return bad("more byzantine nodes than clients".into());
        }
        if self.clients_per_round == 0 {
            return bad("clients_per_round must be positive".into());
        }
        if self.prove_samples == 0 {
            return bad("prove_samples must be positive".into());
        }
        if !(self.deadline_s.is_finite() && self.deadline_s > 0.0 && self.vote_timeout_s > 0.0) {
            return bad("deadline and vote timeout must be positive".into());
        }
        match self.latency {
            LatencyModel::FixedMs(ms) if !(ms.is_finite() && ms >= 0.0) => return bad(format!("latency {ms} ms")),
            LatencyModel::Uniform { lo_ms, hi_ms } if !(lo_ms >= 0.0 && hi_ms >= lo_ms && hi_ms.is_finite()) => {
                return bad(format!("latency range {lo_ms}..{hi_ms} ms"))
            }
            _ => {}
        }
        if self.latency.max_s() >= self.deadline_s {
            return bad("latency must stay below the pool deadline".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) || self.batch_size == 0 {
            return bad("learning rate and batch size must be positive".into());
        }
        if self.hidden.iter().any(|w| *w == 0) {
            return bad("hidden widths must be positive".into());
        }
        if !matches!(self.bit_width, 8 | 16) {
            return bad(format!("bit width {}", self.bit_width));
        }
        if !(0.0..=1.0).contains(&self.inclusion_margin) {
            return bad(format!("inclusion margin {}", self.inclusion_margin));
        }
        if self.dataset == DatasetKind::Synthetic && (self.synthetic_dim == 0 || self.synthetic_classes < 2) {
            return bad("synthetic data needs a positive dimension and at least two classes".into());
        }
        Ok(())
    }
}
