//! Multi-node simulation, experiments, metrics and plots.

pub mod config;
pub mod engine;
pub mod experiments;
pub mod metrics;
pub mod plot;
pub mod scheduler;

pub use config::{ConfigError, CostModel, DatasetKind, LatencyModel, SimConfig};
pub use engine::{load_data, simulate, SimReport, Simulation, GENESIS_TIME};
pub use experiments::{scaling_experiment, timing_breakdown, BreakdownRow, ScaleRow};
pub use metrics::{read_metrics, write_csv, MetricsRow, StageTimings, METRICS_HEADER};
pub use plot::emit_plots;
pub use scheduler::Scheduler;

use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::consensus::ConsensusError;
use crate::ledger::LedgerError;
use crate::zkproof::ProofError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Proof(#[from] ProofError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error("simulation aborted: {0}")]
    Aborted(String),
    #[error("{0} not found")]
    NotFound(PathBuf),
    #[error("{0} holds no rows")]
    EmptyInput(PathBuf),
    #[error("i/o: {0}")]
    Io(String),
    #[error("plot: {0}")]
    Plot(String),
}

impl SimError {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 3,
        }
    }
}

#[derive(Serialize)]
struct Summary {
    rounds: usize,
    blocks: usize,
    tip_hash: String,
    final_accuracy: f64,
    leaders: Vec<Option<u32>>,
    byzantine_nodes: Vec<u32>,
    byzantine_leaders: usize,
    aborted_rounds: Vec<u64>,
}

/// Runs the simulation, checks the resulting chain and writes
/// `metrics.csv`, `chain.log` and `summary.json` under `cfg.out`.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimReport, SimError> {
    let report = simulate(cfg)?;
    report.chain.validate(&report.registry)?;
    report.chain.validate_store(report.store.as_ref())?;
    fs::create_dir_all(&cfg.out).map_err(|e| SimError::Io(format!("{}: {e}", cfg.out.display())))?;
    write_csv(&cfg.out.join("metrics.csv"), &report.metrics)?;
    report.chain.write_log(cfg.out.join("chain.log"))?;
    let summary = Summary {
        rounds: report.metrics.len(),
        blocks: report.chain.len(),
        tip_hash: hex::encode(report.chain_hash()),
        final_accuracy: report.final_accuracy,
        leaders: report.metrics.iter().map(|r| r.leader_id).collect(),
        byzantine_nodes: report.byzantine.clone(),
        byzantine_leaders: report.metrics.iter().filter(|r| r.byzantine_elected).count(),
        aborted_rounds: report.aborted_rounds.clone(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| SimError::Io(e.to_string()))?;
    fs::write(cfg.out.join("summary.json"), json).map_err(|e| SimError::Io(e.to_string()))?;
    Ok(report)
}
