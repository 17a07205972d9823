//! Leader election over the sorted pool and the elected leader's block.

use std::sync::Arc;

use ed25519_dalek::SigningKey;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::vote::{threshold, VoteRecord};
use super::{ConsensusError, Result};
use crate::commit::{verify_opening, CommitKey};
use crate::field::fr_from_bytes;
use crate::fl::{fedavg, FloatLayer, FloatModel};
use crate::ledger::{BlobStore, Block, BlockHeader, CasAddress, LedgerError, Transaction};
use crate::quant::QuantizedModel;
use crate::zkproof::{Proof, ProofBackend, Statement, TestSet, VerifyingKey};

/// What every node knows about the task before the round starts.
#[derive(Clone)]
pub struct TaskContext {
    pub task_name: String,
    pub backend: Arc<dyn ProofBackend>,
    pub vk: Arc<VerifyingKey>,
    pub vk_addr: CasAddress,
    pub test: Arc<TestSet>,
}

/// Runs the proof check a voter performs on one transaction.
pub fn verify_transaction(ctx: &TaskContext, tx: &Transaction, store: &dyn BlobStore) -> bool {
    if tx.task_name != ctx.task_name || tx.vk_addr != ctx.vk_addr || tx.acc > ctx.test.samples() as u64 {
        return false;
    }
    let Ok(proof) = store.get(&tx.proof_addr) else {
        return false;
    };
    let st = Statement::new(tx.commitment, &ctx.test, tx.acc, ctx.vk.shape().clone());
    ctx.backend.verify(&ctx.vk, &st, &Proof::from_bytes(proof)).unwrap_or(false)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Election {
    /// Index into the ordered pool.
    pub leader: Option<usize>,
    /// Tallies of every transaction polled, in order.
    pub records: Vec<VoteRecord>,
}

/// Polls transactions in order until one gathers `threshold(voters)` accepts.
pub fn elect_leader(
    ordered: &[Transaction],
    voters: usize,
    mut poll: impl FnMut(&Transaction) -> VoteRecord,
) -> Election {
    let need = threshold(voters);
    let mut records = Vec::new();
    for (i, tx) in ordered.iter().enumerate() {
        let rec = poll(tx);
        let passed = rec.tally() >= need;
        records.push(rec);
        if passed {
            return Election { leader: Some(i), records };
        }
    }
    Election { leader: None, records }
}

/// Lowest accuracy still aggregated: `top_acc` minus `margin` of the test set.
pub fn inclusion_threshold(top_acc: u64, samples: usize, margin: f64) -> u64 {
    top_acc.saturating_sub((margin * samples as f64).floor() as u64)
}

pub struct FinalizeParams<'a> {
    pub parent: &'a BlockHeader,
    pub timestamp: u64,
    pub inclusion_threshold: u64,
    pub key: &'a SigningKey,
    /// Set when a byzantine leader replaces the aggregate with noise.
    pub gaussian_seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub leader_id: u32,
    pub block: Block,
    pub global_model: FloatModel,
    pub global_model_addr: CasAddress,
    /// Senders after the leader that were left out of the aggregate.
    pub excluded: Vec<u32>,
}

/// Fetches a client model and checks it against the committed opening.
/// `Ok(None)` marks a model to exclude; a store miss aborts the round.
fn load_model(tx: &Transaction, store: &dyn BlobStore) -> Result<Option<FloatModel>> {
    let bytes = store.get(&tx.model_addr).map_err(|e| match e {
        LedgerError::NotFound(_) | LedgerError::CorruptBlob(_) => ConsensusError::AbortRound(e.to_string()),
        other => ConsensusError::Ledger(other),
    })?;
    let Some(r) = fr_from_bytes(&tx.opening) else {
        return Ok(None);
    };
    if !verify_opening(&CommitKey::for_bytes(bytes.len()), &tx.commitment, &bytes, &r) {
        return Ok(None);
    }
    Ok(QuantizedModel::from_bytes(&bytes).ok().map(|q| FloatModel::dequantize(&q)))
}

/// Verifies the transactions ranked below the leader, aggregates the
/// acceptable ones with the leader's model and seals the block.
pub fn leader_finalize(
    ordered: &[Transaction],
    leader: usize,
    mut verify: impl FnMut(&Transaction) -> bool,
    store: &dyn BlobStore,
    p: &FinalizeParams<'_>,
) -> Result<RoundOutcome> {
    let lead = &ordered[leader];
    let lead_model = load_model(lead, store)?
        .ok_or_else(|| ConsensusError::AbortRound(format!("leader {} model does not match its commitment", lead.sender_id)))?;
    let shape = lead_model.shape(8, 0);
    let mut included = vec![lead.clone()];
    let mut models = vec![lead_model];
    let mut excluded = Vec::new();
    for tx in &ordered[leader + 1..] {
        if tx.acc < p.inclusion_threshold || !verify(tx) {
            excluded.push(tx.sender_id);
            continue;
        }
        match load_model(tx, store)? {
            Some(m) if m.shape(8, 0) == shape => {
                models.push(m);
                included.push(tx.clone());
            }
            _ => excluded.push(tx.sender_id),
        }
    }
    let sizes: Vec<usize> = included.iter().map(|t| t.shard_size.max(1) as usize).collect();
    let mut global = fedavg(&models, &sizes)?;
    if let Some(seed) = p.gaussian_seed {
        global = gaussian_model(&global, seed);
    }
    let addr = store.put(&global.to_bytes())?;
    let block = Block::seal(Some(p.parent), p.timestamp, lead.sender_id, included, addr, p.key);
    Ok(RoundOutcome { leader_id: lead.sender_id, block, global_model: global, global_model_addr: addr, excluded })
}

/// Same architecture with every parameter drawn from N(0, 1).
pub fn gaussian_model(template: &FloatModel, seed: u64) -> FloatModel {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut m = template.clone();
    for l in &mut m.layers {
        if let FloatLayer::Dense { weights, bias } = l {
            weights.iter_mut().chain(bias.iter_mut()).for_each(|v| *v = StandardNormal.sample(&mut rng));
        }
    }
    m
}
