//! Node-count sweeps: block generation scaling and per-phase timings.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, SimConfig};
use super::engine::{load_data, mix, simulate};
use super::metrics::{mean, std_dev};
use super::SimError;
use crate::fl::FloatModel;
use crate::zkproof::{backend_for, CircuitConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub nodes: usize,
    pub rounds: usize,
    pub mean_block_generation_s: f64,
    pub std_block_generation_s: f64,
    pub mean_verify_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub nodes: usize,
    pub setup_s: f64,
    pub commitment_s: f64,
    pub prove_s: f64,
    pub verify_s: f64,
    pub block_generation_s: f64,
}

fn check_counts(counts: &[usize], cfg: &SimConfig) -> Result<(), ConfigError> {
    if counts.is_empty() {
        return Err(ConfigError::Invalid("no node counts given".into()));
    }
    if cfg.rounds == 0 {
        return Err(ConfigError::Invalid("rounds must be positive".into()));
    }
    Ok(())
}

/// Mean and standard deviation of per-block generation time for each node count.
pub fn scaling_experiment(counts: &[usize], cfg: &SimConfig) -> Result<Vec<ScaleRow>, SimError> {
    check_counts(counts, cfg)?;
    counts
        .iter()
        .map(|&nodes| {
            let report = simulate(&SimConfig { nodes, ..cfg.clone() })?;
            let gen: Vec<f64> = report.metrics.iter().map(|r| r.block_generation_s).collect();
            let ver: Vec<f64> = report.metrics.iter().map(|r| r.verify_s).collect();
            log::info!("{nodes} nodes: mean block generation {:.4} s", mean(&gen));
            Ok(ScaleRow {
                nodes,
                rounds: gen.len(),
                mean_block_generation_s: mean(&gen),
                std_block_generation_s: std_dev(&gen),
                mean_verify_s: mean(&ver),
            })
        })
        .collect()
}

/// Fastest of `repeats` key generations for each config, measured
/// round-robin so that drift in machine load hits every config alike.
pub fn measure_setup(cfgs: &[SimConfig], repeats: usize) -> Result<Vec<f64>, SimError> {
    let mut jobs = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        let (train, test) = load_data(cfg)?;
        let mut widths = vec![train.dim()];
        widths.extend_from_slice(&cfg.hidden);
        widths.push(train.classes().max(test.classes()));
        jobs.push((FloatModel::mlp(&widths, cfg.seed).shape(cfg.bit_width, cfg.shift), backend_for(cfg.backend)));
    }
    let mut best = vec![f64::INFINITY; cfgs.len()];
    for i in 0..repeats.max(1) {
        for (k, (cfg, (shape, backend))) in cfgs.iter().zip(&jobs).enumerate() {
            if cfg.deterministic {
                best[k] = cfg.cost.setup_s;
                continue;
            }
            let mut rng = ChaCha20Rng::seed_from_u64(mix(&[cfg.seed, i as u64]));
            let t = Instant::now();
            backend.setup(shape, &CircuitConfig { samples: cfg.prove_samples }, cfg.security_bits, &mut rng)?;
            best[k] = best[k].min(t.elapsed().as_secs_f64());
        }
    }
    Ok(best)
}

/// Per-phase mean timings for each node count; setup is the best of `setup_repeats` runs.
pub fn timing_breakdown(counts: &[usize], cfg: &SimConfig, setup_repeats: usize) -> Result<Vec<BreakdownRow>, SimError> {
    check_counts(counts, cfg)?;
    let cfgs: Vec<_> = counts.iter().map(|&nodes| SimConfig { nodes, ..cfg.clone() }).collect();
    let setups = measure_setup(&cfgs, setup_repeats)?;
    cfgs.iter()
        .zip(setups)
        .map(|(c, setup_s)| {
            let nodes = c.nodes;
            let report = simulate(c)?;
            let col = |f: fn(&super::MetricsRow) -> f64| mean(&report.metrics.iter().map(f).collect::<Vec<_>>());
            Ok(BreakdownRow {
                nodes,
                setup_s,
                commitment_s: col(|r| r.commitment_s),
                prove_s: col(|r| r.prove_s),
                verify_s: col(|r| r.verify_s),
                block_generation_s: col(|r| r.block_generation_s),
            })
        })
        .collect()
}
