//! In-process multi-node protocol run driven by the event scheduler.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use ed25519_dalek::SigningKey;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::config::{DatasetKind, SimConfig};
use super::metrics::{mean, MetricsRow};
use super::scheduler::Scheduler;
use super::SimError;
use crate::commit::{commit, random_opening, CommitKey};
use crate::consensus::{
    inclusion_threshold, leader_finalize, threshold, verify_transaction, Behavior, ByzantineKind, ConsensusError,
    FinalizeParams, TaskContext, TransactionPool, Verdict, Vote, VoteRecord,
};
use crate::field::fr_to_bytes;
use crate::fl::{evaluate, load_mnist, local_train, partition, select_clients, synthetic, Dataset, FloatModel, Split, TrainConfig};
use crate::ledger::{
    node_signing_key, sign_tx, BlobStore, Block, Chain, KeyRegistry, MemCas, Transaction, NO_LEADER, PUBLISHER_ID,
};
use crate::zkproof::{backend_for, CircuitConfig, ProvingKey, Statement, TestSet, Witness};

/// Unix time of the genesis block; later timestamps add simulated seconds.
pub const GENESIS_TIME: u64 = 1_700_000_000;

const TASK_NAME: &str = "zkpot-classification";

pub(crate) fn mix(parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.to_le_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

/// Final state of a simulation.
pub struct SimReport {
    pub chain: Chain,
    pub metrics: Vec<MetricsRow>,
    pub registry: KeyRegistry,
    pub store: Arc<MemCas>,
    pub byzantine: Vec<u32>,
    pub aborted_rounds: Vec<u64>,
    pub final_model: FloatModel,
    pub final_accuracy: f64,
}

impl SimReport {
    pub fn chain_hash(&self) -> [u8; 32] {
        self.chain.tip_hash()
    }
}

/// Training and held-out data for a run.
pub fn load_data(cfg: &SimConfig) -> Result<(Dataset, Dataset), SimError> {
    let (mut train, mut test) = match cfg.dataset {
        DatasetKind::Mnist => {
            let dir = cfg.data_dir.clone().unwrap_or_else(|| PathBuf::from("data/mnist"));
            load_mnist(&dir).map_err(|e| SimError::Data(format!("{}: {e}", dir.display())))?
        }
        DatasetKind::Synthetic => {
            let base = (cfg.seed & 0xffff_ffff) << 32;
            let n_train = cfg.train_samples.unwrap_or(6000);
            let n_test = cfg.eval_samples.unwrap_or(2000).max(cfg.prove_samples);
            (
                synthetic(n_train, cfg.synthetic_dim, cfg.synthetic_classes, base, Split::Train),
                synthetic(n_test, cfg.synthetic_dim, cfg.synthetic_classes, base | 1, Split::Test),
            )
        }
    };
    if let Some(n) = cfg.train_samples {
        train = train.head(n);
    }
    if test.len() < cfg.prove_samples {
        return Err(SimError::Data(format!("{} test samples, {} needed for proofs", test.len(), cfg.prove_samples)));
    }
    if let Some(n) = cfg.eval_samples {
        test = test.head(n.max(cfg.prove_samples));
    }
    Ok((train, test))
}

struct NodeInfo {
    behavior: Behavior,
    key: SigningKey,
    shard: Option<usize>,
}

struct Submission {
    tx: Transaction,
    ready_at: f64,
    commit_s: f64,
    prove_s: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Decision {
    Leader(usize),
    NoLeader,
}

enum Ev {
    Tx { to: u32, tx: usize },
    Deadline,
    Vote { to: u32, tx: usize, voter: u32 },
    Timeout { to: u32, tx: usize },
    Block { to: u32 },
}

#[derive(Default)]
struct NodeRound {
    pool: Option<TransactionPool>,
    closed_at: Option<f64>,
    ordered: Vec<usize>,
    pos: usize,
    busy: f64,
    tallies: Vec<(usize, usize)>,
    decided: Option<(Decision, f64)>,
    appended_at: Option<f64>,
}

impl NodeRound {
    fn exec(&mut self, at: f64, cost: f64) -> f64 {
        self.busy = self.busy.max(at) + cost;
        self.busy
    }
}

pub struct Simulation {
    cfg: SimConfig,
    nodes: Vec<NodeInfo>,
    registry: KeyRegistry,
    store: Arc<MemCas>,
    ctx: TaskContext,
    pk: ProvingKey,
    shards: Vec<Dataset>,
    eval: Dataset,
    chain: Chain,
    global: FloatModel,
    setup_s: f64,
    clock: f64,
    byzantine: Vec<u32>,
    aborted_rounds: Vec<u64>,
}

impl Simulation {
    pub fn new(cfg: &SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let cfg = cfg.clone();
        let (train, eval) = load_data(&cfg)?;
        let test_part = eval.head(cfg.prove_samples);
        let test = Arc::new(TestSet::new(
            test_part.quantized_inputs(cfg.bit_width).map_err(|e| SimError::Data(e.to_string()))?,
            test_part.labels().to_vec(),
        )?);
        let mut widths = vec![train.dim()];
        widths.extend_from_slice(&cfg.hidden);
        widths.push(train.classes().max(eval.classes()));
        let global = FloatModel::mlp(&widths, cfg.seed);
        let shape = global.shape(cfg.bit_width, cfg.shift);

        let backend = backend_for(cfg.backend);
        let mut rng = ChaCha20Rng::seed_from_u64(mix(&[cfg.seed, 0x5e7]));
        let started = Instant::now();
        let (pk, vk) = backend.setup(&shape, &CircuitConfig { samples: cfg.prove_samples }, cfg.security_bits, &mut rng)?;
        let setup_s = if cfg.deterministic { cfg.cost.setup_s } else { started.elapsed().as_secs_f64() };
        backend.register_test_set(&test);

        let store = Arc::new(MemCas::new());
        let vk_addr = store.put(&vk.to_bytes())?;
        let ctx = TaskContext { task_name: TASK_NAME.into(), backend, vk: Arc::new(vk), vk_addr, test };

        let clients = cfg.clients();
        let shards = partition(&train, clients, cfg.partition, mix(&[cfg.seed, 0xda7a])).map_err(|e| SimError::Data(e.to_string()))?;
        let mut byz_rng = ChaCha20Rng::seed_from_u64(mix(&[cfg.seed, 0xb7]));
        let mut byzantine: Vec<u32> = sample(&mut byz_rng, clients, cfg.byzantine_count()).into_iter().map(|c| c as u32 + 1).collect();
        byzantine.sort_unstable();

        let mut registry = KeyRegistry::new();
        let nodes: Vec<NodeInfo> = (0..cfg.nodes as u32)
            .map(|id| {
                let key = node_signing_key(cfg.seed, id);
                registry.insert(id, key.verifying_key());
                let behavior = if byzantine.contains(&id) { Behavior::Byzantine(cfg.byzantine_kind) } else { Behavior::Honest };
                NodeInfo { behavior, key, shard: (id != PUBLISHER_ID).then(|| id as usize - 1) }
            })
            .collect();

        let mut chain = Chain::new();
        let genesis_model = store.put(&global.to_bytes())?;
        chain.append(Block::seal(None, GENESIS_TIME, NO_LEADER, vec![], genesis_model, &nodes[0].key), &registry)?;
        Ok(Self { cfg, nodes, registry, store, ctx, pk, shards, eval, chain, global, setup_s, clock: 0.0, byzantine, aborted_rounds: Vec::new() })
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn byzantine(&self) -> &[u32] {
        &self.byzantine
    }

    fn timed<T>(&self, f: impl FnOnce() -> T) -> (T, f64) {
        let start = Instant::now();
        let out = f();
        (out, start.elapsed().as_secs_f64())
    }

    fn pick(&self, measured: f64, modeled: f64) -> f64 {
        if self.cfg.deterministic {
            modeled
        } else {
            measured
        }
    }

    /// Local training, quantization, commitment and proof of one client.
    fn client_work(&self, node: u32, round: u64) -> Result<Option<Submission>, SimError> {
        let info = &self.nodes[node as usize];
        let Some(shard) = info.shard.map(|s| &self.shards[s]) else { return Ok(None) };
        if shard.is_empty() {
            return Ok(None);
        }
        let cfg = &self.cfg;
        let tc = TrainConfig {
            local_epochs: cfg.local_epochs,
            learning_rate: cfg.learning_rate,
            batch_size: cfg.batch_size,
            clients_total: cfg.clients(),
            clients_per_round: cfg.participants(),
            global_rounds: cfg.rounds,
            seed: cfg.seed,
        }
        .for_client(round, node as usize);
        let (trained, train_s) = self.timed(|| local_train(&self.global, shard, &tc));
        let model = match trained {
            Ok(m) => m,
            Err(e) => {
                log::warn!("round {round}: node {node} dropped out: {e}");
                return Ok(None);
            }
        };
        let train_s = self.pick(train_s, cfg.cost.train_per_sample_epoch_s * (shard.len() * cfg.local_epochs) as f64);

        let mut rng = ChaCha20Rng::seed_from_u64(mix(&[cfg.seed, round, node as u64, 0xc0]));
        let (committed, commit_s) = self.timed(|| -> Result<_, SimError> {
            let calib = shard.head(1000);
            let q = model.quantize(calib.features().view(), cfg.bit_width, cfg.shift).map_err(|e| SimError::Data(e.to_string()))?;
            let bytes = q.to_bytes();
            let r = random_opening(&mut rng);
            let cm = commit(&CommitKey::for_bytes(bytes.len()), &bytes, &r).map_err(|e| SimError::Data(e.to_string()))?;
            Ok((q, bytes, r, cm))
        });
        let (q, bytes, r, cm) = committed?;
        let commit_s = self.pick(commit_s, cfg.cost.commit_per_kib_s * bytes.len() as f64 / 1024.0);

        let inflated = info.behavior == Behavior::Byzantine(ByzantineKind::ClaimInflatedAcc);
        let test = &self.ctx.test;
        let (proved, prove_s) = self.timed(|| -> Result<_, SimError> {
            let w = Witness::new(q, r, test)?;
            let acc = w.accuracy();
            let claimed = if inflated { acc + cfg.inflation } else { acc };
            let st = Statement::new(cm, test, claimed, self.ctx.vk.shape().clone());
            let backend = &self.ctx.backend;
            let (_, proof) = if inflated {
                backend.prove_unchecked(&self.pk, &st, &w, &mut rng)?
            } else {
                backend.prove(&self.pk, &st, &w, &mut rng)?
            };
            Ok((claimed, proof))
        });
        let (claimed, proof) = proved?;
        let prove_s = self.pick(prove_s, cfg.cost.prove_per_sample_s * test.samples() as f64);

        let mut tx = Transaction {
            sender_id: node,
            task_name: TASK_NAME.into(),
            acc: claimed,
            shard_size: shard.len() as u64,
            model_addr: self.store.put(&bytes)?,
            proof_addr: self.store.put(proof.as_bytes())?,
            vk_addr: self.ctx.vk_addr,
            commitment: cm,
            opening: fr_to_bytes(&r),
            nonce: round,
            signature: [0; 64],
        };
        sign_tx(&mut tx, &info.key);
        Ok(Some(Submission { tx, ready_at: train_s + commit_s + prove_s, commit_s, prove_s }))
    }

    /// Runs one round and appends its block.
    pub fn step(&mut self, round: u64) -> Result<MetricsRow, SimError> {
        let n = self.cfg.nodes;
        let chosen = select_clients(self.cfg.clients(), self.cfg.participants(), round, self.cfg.seed);
        let mut subs = Vec::new();
        for c in &chosen {
            if let Some(s) = self.client_work(*c as u32 + 1, round)? {
                subs.push(s);
            }
        }
        let mut rs = RoundState::new(self, round, chosen.len(), &subs);
        rs.run(self)?;

        let block = rs.block.take().ok_or_else(|| SimError::Aborted(format!("round {round} produced no block")))?;
        self.chain.append(block.clone(), &self.registry)?;
        let honest: Vec<usize> = (0..n).filter(|j| !self.nodes[*j].behavior.is_byzantine()).collect();
        let decisions: Vec<Option<Decision>> = honest.iter().map(|j| rs.nodes[*j].decided.map(|d| d.0)).collect();
        if decisions.windows(2).any(|w| w[0] != w[1]) {
            return Err(SimError::Aborted(format!("round {round}: honest nodes disagree on the leader")));
        }
        if let Some(m) = rs.new_model.take() {
            self.global = m;
        }
        let start = honest.iter().filter_map(|j| rs.nodes[*j].closed_at).fold(f64::INFINITY, f64::min);
        let decided = honest.iter().filter_map(|j| rs.nodes[*j].decided.map(|d| d.1)).fold(0.0, f64::max);
        let appended = honest.iter().filter_map(|j| rs.nodes[*j].appended_at).fold(0.0, f64::max);
        self.clock += appended;
        let leader_id = (block.header.leader_id != NO_LEADER).then_some(block.header.leader_id);
        if rs.aborted {
            self.aborted_rounds.push(round);
        }
        Ok(MetricsRow {
            round,
            global_accuracy: evaluate(&self.global, &self.eval),
            leader_id,
            pool_size: rs.nodes[PUBLISHER_ID as usize].pool.as_ref().map_or(0, |p| p.len()),
            included_txs: block.transactions.len(),
            setup_s: if round == 1 { self.setup_s } else { 0.0 },
            commitment_s: mean(&subs.iter().map(|s| s.commit_s).collect::<Vec<_>>()),
            prove_s: mean(&subs.iter().map(|s| s.prove_s).collect::<Vec<_>>()),
            verify_s: (decided - start).max(0.0),
            block_generation_s: (appended - start).max(0.0),
            byzantine_elected: leader_id.is_some_and(|l| self.nodes[l as usize].behavior.is_byzantine()),
        })
    }

    pub fn run(mut self) -> Result<SimReport, SimError> {
        let mut metrics = Vec::with_capacity(self.cfg.rounds);
        for round in 1..=self.cfg.rounds as u64 {
            let row = self.step(round)?;
            log::info!(
                "round {round}: leader {:?}, {} of {} txs, accuracy {:.4}",
                row.leader_id,
                row.included_txs,
                row.pool_size,
                row.global_accuracy
            );
            metrics.push(row);
        }
        let final_accuracy = metrics.last().map_or(0.0, |r| r.global_accuracy);
        Ok(SimReport {
            chain: self.chain,
            metrics,
            registry: self.registry,
            store: self.store,
            byzantine: self.byzantine,
            aborted_rounds: self.aborted_rounds,
            final_model: self.global,
            final_accuracy,
        })
    }
}

/// Message-level state of one round.
struct RoundState {
    round: u64,
    txs: Vec<Transaction>,
    by_sender: HashMap<u32, usize>,
    rank: Vec<usize>,
    nodes: Vec<NodeRound>,
    records: Vec<VoteRecord>,
    verdicts: Vec<Option<(bool, f64)>>,
    sched: Scheduler<Ev>,
    lat_rng: ChaCha20Rng,
    block: Option<Block>,
    block_check_s: f64,
    signature_check_s: f64,
    new_model: Option<FloatModel>,
    aborted: bool,
}

impl RoundState {
    fn new(sim: &Simulation, round: u64, expected: usize, subs: &[Submission]) -> Self {
        let txs: Vec<Transaction> = subs.iter().map(|s| s.tx.clone()).collect();
        let by_sender = txs.iter().enumerate().map(|(i, t)| (t.sender_id, i)).collect();
        let sorted = crate::consensus::sort_pool(&txs);
        let mut rank = vec![0; txs.len()];
        for (r, t) in sorted.iter().enumerate() {
            rank[txs.iter().position(|x| x.sender_id == t.sender_id).expect("same set")] = r;
        }
        let records = txs.iter().map(|t| VoteRecord::new(t.id())).collect();
        let mut sched = Scheduler::new(mix(&[sim.cfg.seed, round, 0x5c]));
        let mut lat_rng = ChaCha20Rng::seed_from_u64(mix(&[sim.cfg.seed, round, 0x1a]));
        let deadline = sim.cfg.effective_deadline();
        let n = sim.cfg.nodes;
        let nodes = (0..n)
            .map(|_| NodeRound { pool: Some(TransactionPool::new(deadline, expected)), tallies: vec![(0, 0); txs.len()], ..Default::default() })
            .collect();
        for (i, s) in subs.iter().enumerate() {
            for to in 0..n as u32 {
                let lat = if to == s.tx.sender_id { 0.0 } else { sim.cfg.latency.sample(&mut lat_rng) };
                sched.schedule(s.ready_at + lat, round, Ev::Tx { to, tx: i });
            }
        }
        sched.schedule(deadline, round, Ev::Deadline);
        Self {
            round,
            txs,
            by_sender,
            rank,
            nodes,
            records,
            verdicts: vec![None; subs.len()],
            sched,
            lat_rng,
            block: None,
            block_check_s: 0.0,
            signature_check_s: 0.0,
            new_model: None,
            aborted: false,
        }
    }

    fn broadcast(&mut self, sim: &Simulation, from: u32, at: f64, make: impl Fn(u32) -> Ev) {
        for to in 0..sim.cfg.nodes as u32 {
            let lat = if to == from { 0.0 } else { sim.cfg.latency.sample(&mut self.lat_rng) };
            self.sched.schedule(at + lat, self.round, make(to));
        }
    }

    /// Proof check shared by every node; executed once per transaction.
    fn verdict(&mut self, sim: &Simulation, tx: usize) -> (bool, f64) {
        if let Some(v) = self.verdicts[tx] {
            return v;
        }
        let (ok, measured) = sim.timed(|| verify_transaction(&sim.ctx, &self.txs[tx], sim.store.as_ref()));
        let v = (ok, sim.pick(measured, sim.cfg.cost.verify_s));
        self.verdicts[tx] = Some(v);
        v
    }

    fn run(&mut self, sim: &Simulation) -> Result<(), SimError> {
        while let Some((at, ev)) = self.sched.pop() {
            match ev {
                Ev::Tx { to, tx } => {
                    let node = &mut self.nodes[to as usize];
                    if let Some(pool) = node.pool.as_mut() {
                        if node.closed_at.is_none() {
                            match pool.offer(self.txs[tx].clone(), at) {
                                Ok(_) if pool.is_closed() => self.close_pool(sim, to, at)?,
                                Ok(_) => {}
                                Err(ConsensusError::LateTransaction(s)) => log::debug!("node {to}: late tx from {s}"),
                                Err(e) => return Err(e.into()),
                            }
                        }
                    }
                }
                Ev::Deadline => {
                    for j in 0..sim.cfg.nodes as u32 {
                        if self.nodes[j as usize].closed_at.is_none() {
                            if let Some(p) = self.nodes[j as usize].pool.as_mut() {
                                p.tick(at);
                            }
                            self.close_pool(sim, j, at)?;
                        }
                    }
                }
                Ev::Vote { to, tx, voter } => {
                    let cost = sim.pick(self.signature_check_s, sim.cfg.cost.signature_s);
                    let node = &mut self.nodes[to as usize];
                    let t = node.exec(at, cost);
                    match self.records[tx].verdicts.get(&voter) {
                        Some(Verdict::Accept) => node.tallies[tx].0 += 1,
                        Some(Verdict::Reject) => node.tallies[tx].1 += 1,
                        None => {}
                    }
                    if node.decided.is_none() && node.ordered.get(node.pos) == Some(&tx) {
                        self.check(sim, to, tx, t)?;
                    }
                }
                Ev::Timeout { to, tx } => {
                    let node = &mut self.nodes[to as usize];
                    if node.decided.is_none() && node.ordered.get(node.pos) == Some(&tx) {
                        node.pos += 1;
                        self.advance(sim, to, at)?;
                    }
                }
                Ev::Block { to } => {
                    let txs = self.block.as_ref().map_or(0, |b| b.transactions.len());
                    let cost = sim.pick(self.block_check_s, sim.cfg.cost.block_check_per_tx_s * (txs + 1) as f64);
                    let node = &mut self.nodes[to as usize];
                    node.appended_at = Some(node.exec(at, cost));
                }
            }
        }
        Ok(())
    }

    fn close_pool(&mut self, sim: &Simulation, j: u32, at: f64) -> Result<(), SimError> {
        let node = &mut self.nodes[j as usize];
        node.closed_at = Some(at);
        node.busy = node.busy.max(at);
        let pool = node.pool.as_ref().expect("pool");
        let mut ordered: Vec<usize> = pool.transactions().iter().map(|t| self.by_sender[&t.sender_id]).collect();
        ordered.sort_by_key(|i| self.rank[*i]);
        node.ordered = ordered;
        self.advance(sim, j, at)
    }

    /// Verifies and votes on the node's current transaction.
    fn advance(&mut self, sim: &Simulation, j: u32, at: f64) -> Result<(), SimError> {
        let Some(&tx) = self.nodes[j as usize].ordered.get(self.nodes[j as usize].pos) else {
            let t = self.nodes[j as usize].busy.max(at);
            return self.decide(sim, j, Decision::NoLeader, t);
        };
        let (valid, cost) = self.verdict(sim, tx);
        let done = self.nodes[j as usize].exec(at, cost);
        let sender = self.txs[tx].sender_id;
        let info = &sim.nodes[j as usize];
        if let Some(verdict) = info.behavior.cast(valid, sim.nodes[sender as usize].behavior) {
            let (vote, sign_s) = sim.timed(|| Vote::new(self.records[tx].tx_id, j, verdict, &info.key));
            let (recorded, check_s) = sim.timed(|| self.records[tx].record(&vote, &sim.registry));
            recorded?;
            self.signature_check_s = check_s;
            let sent = self.nodes[j as usize].exec(done, sim.pick(sign_s, sim.cfg.cost.signature_s));
            self.broadcast(sim, j, sent, |to| Ev::Vote { to, tx, voter: j });
        }
        let wait_from = self.nodes[j as usize].busy;
        self.sched.schedule(wait_from + sim.cfg.vote_timeout_s, self.round, Ev::Timeout { to: j, tx });
        self.check(sim, j, tx, wait_from)
    }

    fn check(&mut self, sim: &Simulation, j: u32, tx: usize, at: f64) -> Result<(), SimError> {
        let n = sim.cfg.nodes;
        let need = threshold(n);
        let (acc, rej) = self.nodes[j as usize].tallies[tx];
        if acc >= need {
            self.decide(sim, j, Decision::Leader(tx), at)
        } else if rej > n - need {
            self.nodes[j as usize].pos += 1;
            self.advance(sim, j, at)
        } else {
            Ok(())
        }
    }

    fn decide(&mut self, sim: &Simulation, j: u32, d: Decision, at: f64) -> Result<(), SimError> {
        self.nodes[j as usize].decided = Some((d, at));
        match d {
            Decision::Leader(tx) if self.txs[tx].sender_id == j => self.lead(sim, j, tx, at),
            Decision::NoLeader if j == PUBLISHER_ID => self.seal_empty(sim, at),
            _ => Ok(()),
        }
    }

    fn timestamp(&self, sim: &Simulation, at: f64) -> u64 {
        GENESIS_TIME + (sim.clock + at).floor() as u64
    }

    /// Validates the block once against the common tip; every node is charged the measured cost.
    fn publish(&mut self, sim: &Simulation, block: Block) -> Result<(), SimError> {
        let tip = sim.chain.tip().map(|b| &b.header);
        let (checked, secs) = sim.timed(|| block.check(tip, &sim.registry));
        checked?;
        self.block_check_s = secs;
        self.block = Some(block);
        Ok(())
    }

    fn seal_empty(&mut self, sim: &Simulation, at: f64) -> Result<(), SimError> {
        let tip = sim.chain.tip().expect("genesis");
        let block = Block::seal(Some(&tip.header), self.timestamp(sim, at), NO_LEADER, vec![], tip.global_model_addr(), &sim.nodes[0].key);
        self.publish(sim, block)?;
        let sent = self.nodes[0].exec(at, sim.pick(0.0, sim.cfg.cost.signature_s));
        self.broadcast(sim, 0, sent, |to| Ev::Block { to });
        Ok(())
    }

    fn lead(&mut self, sim: &Simulation, j: u32, tx: usize, at: f64) -> Result<(), SimError> {
        let ordered: Vec<Transaction> = self.nodes[j as usize].ordered.iter().map(|i| self.txs[*i].clone()).collect();
        let pos = self.nodes[j as usize].pos;
        let tip = sim.chain.tip().expect("genesis");
        let info = &sim.nodes[j as usize];
        let params = FinalizeParams {
            parent: &tip.header,
            timestamp: self.timestamp(sim, at),
            inclusion_threshold: inclusion_threshold(self.txs[tx].acc, sim.ctx.test.samples(), sim.cfg.inclusion_margin),
            key: &info.key,
            gaussian_seed: (info.behavior == Behavior::Byzantine(ByzantineKind::GaussianAggregate))
                .then(|| mix(&[sim.cfg.seed, self.round, 0x6a])),
        };
        let mut charged = 0.0;
        let mut inner = 0.0;
        let by_sender = self.by_sender.clone();
        let started = Instant::now();
        let result = leader_finalize(
            &ordered,
            pos,
            |t| {
                let s = Instant::now();
                let (ok, cost) = self.verdict(sim, by_sender[&t.sender_id]);
                inner += s.elapsed().as_secs_f64();
                charged += cost;
                ok
            },
            sim.store.as_ref(),
            &params,
        );
        let own = started.elapsed().as_secs_f64() - inner;
        match result {
            Ok(outcome) => {
                let modeled = sim.cfg.cost.aggregate_per_model_s * outcome.block.transactions.len() as f64;
                let cost = charged + sim.pick(own, modeled);
                let sent = self.nodes[j as usize].exec(at, cost);
                self.publish(sim, outcome.block)?;
                self.new_model = Some(outcome.global_model);
                self.broadcast(sim, j, sent, |to| Ev::Block { to });
                Ok(())
            }
            Err(ConsensusError::AbortRound(why)) => {
                log::warn!("round {}: leader {j} aborted: {why}", self.round);
                self.aborted = true;
                self.seal_empty(sim, at)
            }
            Err(e) => Err(e.into()),
        }
    }
}

/// Builds the network and runs every configured round in memory.
pub fn simulate(cfg: &SimConfig) -> Result<SimReport, SimError> {
    Simulation::new(cfg)?.run()
}
