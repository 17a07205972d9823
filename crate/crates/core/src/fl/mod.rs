//! Federated learning: data, local training and aggregation.

pub mod data;
pub mod model;

pub use data::{load_idx, load_mnist, partition, synthetic, Dataset, PartitionScheme, Split};
pub use model::{evaluate, fedavg, local_train, loss, FloatLayer, FloatModel};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quant::QuantError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlError {
    #[error("malformed data: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("training diverged: {0}")]
    TrainingDiverged(String),
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Quant(#[from] QuantError),
}

pub type Result<T> = std::result::Result<T, FlError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub clients_total: usize,
    pub clients_per_round: usize,
    pub global_rounds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            local_epochs: 5,
            learning_rate: 0.05,
            batch_size: 32,
            clients_total: 100,
            clients_per_round: 20,
            global_rounds: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FlError::InvalidConfig(m));
        if self.clients_total == 0 || self.clients_per_round == 0 {
            return bad("client counts must be positive".into());
        }
        if self.clients_per_round > self.clients_total {
            return bad(format!("{} of {} clients per round", self.clients_per_round, self.clients_total));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) || self.batch_size == 0 {
            return bad("learning rate and batch size must be positive".into());
        }
        Ok(())
    }

    /// Copy with a seed derived for one client in one round.
    pub fn for_client(&self, round: u64, client: usize) -> TrainConfig {
        let mut c = self.clone();
        c.seed = self.seed ^ round.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (client as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
        c
    }
}

/// Uniform choice of `per_round` distinct clients, sorted.
pub fn select_clients(total: usize, per_round: usize, round: u64, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(round.wrapping_mul(0x2545_f491_4f6c_dd1d)));
    let mut picked = sample(&mut rng, total, per_round.min(total)).into_vec();
    picked.sort_unstable();
    picked
}

/// Plain FedAvg over `clients`, returning the final model and per-round test accuracy.
pub fn train_federated(
    initial: &FloatModel,
    clients: &[Dataset],
    test: &Dataset,
    cfg: &TrainConfig,
) -> Result<(FloatModel, Vec<f64>)> {
    cfg.validate()?;
    if clients.len() != cfg.clients_total {
        return Err(FlError::InvalidConfig(format!("{} shards for {} clients", clients.len(), cfg.clients_total)));
    }
    let mut global = initial.clone();
    let mut history = Vec::with_capacity(cfg.global_rounds);
    for round in 0..cfg.global_rounds as u64 {
        let chosen = select_clients(cfg.clients_total, cfg.clients_per_round, round, cfg.seed);
        let mut models = Vec::with_capacity(chosen.len());
        let mut sizes = Vec::with_capacity(chosen.len());
        for c in chosen {
            models.push(local_train(&global, &clients[c], &cfg.for_client(round, c))?);
            sizes.push(clients[c].len().max(1));
        }
        global = fedavg(&models, &sizes)?;
        history.push(evaluate(&global, test));
    }
    Ok((global, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_is_seeded_and_distinct() {
        let a = select_clients(100, 20, 3, 7);
        assert_eq!(a, select_clients(100, 20, 3, 7));
        assert_ne!(a, select_clients(100, 20, 4, 7));
        let mut d = a.clone();
        d.dedup();
        assert_eq!(d.len(), 20);
        assert!(a.iter().all(|c| *c < 100));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig { clients_per_round: 101, ..TrainConfig::default() };
        assert!(matches!(c.validate(), Err(FlError::InvalidConfig(_))));
    }

    #[test]
    fn federated_run_is_deterministic() {
        let train = synthetic(200, 12, 3, 1 << 32, Split::Train);
        let test = synthetic(60, 12, 3, (1 << 32) + 1, Split::Test);
        let clients = partition(&train, 10, PartitionScheme::Iid, 2).unwrap();
        let cfg = TrainConfig { clients_total: 10, clients_per_round: 4, global_rounds: 3, local_epochs: 2, learning_rate: 0.1, batch_size: 8, seed: 5 };
        let init = FloatModel::mlp(&[12, 6, 3], 0);
        let (a, ha) = train_federated(&init, &clients, &test, &cfg).unwrap();
        let (b, hb) = train_federated(&init, &clients, &test, &cfg).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(ha, hb);
        assert!(*ha.last().unwrap() > evaluate(&init, &test), "{ha:?}");
    }
}
