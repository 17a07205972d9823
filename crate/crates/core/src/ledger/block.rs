//! Blocks, Merkle roots and the hash-linked chain.

use std::fs;
use std::path::Path;

use ed25519_dalek::{Signer, SigningKey};
use sha2::{Digest, Sha256};

use super::cas::{BlobStore, CasAddress};
use super::tx::{verify_tx, KeyRegistry, Transaction};
use super::wire::{Reader, Writer};
use super::{LedgerError, Result};

/// `leader_id` of blocks produced without an elected leader.
pub const NO_LEADER: u32 = u32::MAX;
/// The task publisher seals genesis and leaderless blocks.
pub const PUBLISHER_ID: u32 = 0;

fn sha(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Binary SHA-256 tree over the canonical transaction bytes.
pub fn merkle_root(txs: &[Transaction]) -> [u8; 32] {
    if txs.is_empty() {
        return [0; 32];
    }
    let mut level: Vec<[u8; 32]> = txs.iter().map(|t| sha(&[&t.to_bytes()])).collect();
    while level.len() > 1 {
        if level.len() % 2 == 1 {
            level.push(*level.last().expect("non-empty"));
        }
        level = level.chunks(2).map(|p| sha(&[&p[0], &p[1]])).collect();
    }
    level[0]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockHeader {
    pub height: u64,
    pub timestamp: u64,
    pub prev_hash: [u8; 32],
    pub merkle_root: [u8; 32],
    pub global_model_addr: CasAddress,
    pub leader_id: u32,
}

pub const HEADER_LEN: usize = 8 + 8 + 32 + 32 + 32 + 4;

impl BlockHeader {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u64(self.height)
            .u64(self.timestamp)
            .raw(&self.prev_hash)
            .raw(&self.merkle_root)
            .raw(&self.global_model_addr.0)
            .u32(self.leader_id);
        w.0
    }

    fn read(r: &mut Reader<'_>) -> Result<Self> {
        Ok(Self {
            height: r.u64()?,
            timestamp: r.u64()?,
            prev_hash: r.array()?,
            merkle_root: r.array()?,
            global_model_addr: CasAddress(r.array()?),
            leader_id: r.u32()?,
        })
    }

    pub fn hash(&self) -> [u8; 32] {
        sha(&[&self.to_bytes()])
    }

    /// Node whose signature seals the block.
    pub fn sealer(&self) -> u32 {
        if self.leader_id == NO_LEADER {
            PUBLISHER_ID
        } else {
            self.leader_id
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
    /// Sealer's signature over the header hash.
    pub seal: [u8; 64],
}

impl Block {
    /// Builds and seals the successor of `parent` (genesis when `None`).
    pub fn seal(
        parent: Option<&BlockHeader>,
        timestamp: u64,
        leader_id: u32,
        transactions: Vec<Transaction>,
        global_model_addr: CasAddress,
        key: &SigningKey,
    ) -> Self {
        let header = BlockHeader {
            height: parent.map_or(0, |p| p.height + 1),
            timestamp,
            prev_hash: parent.map_or([0; 32], |p| p.hash()),
            merkle_root: merkle_root(&transactions),
            global_model_addr,
            leader_id,
        };
        let seal = key.sign(&header.hash()).to_bytes();
        Self { header, transactions, seal }
    }

    pub fn global_model_addr(&self) -> CasAddress {
        self.header.global_model_addr
    }

    pub fn hash(&self) -> [u8; 32] {
        self.header.hash()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.raw(&self.header.to_bytes()).raw(&self.seal).u32(self.transactions.len() as u32);
        for tx in &self.transactions {
            w.bytes(&tx.to_bytes());
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let header = BlockHeader::read(&mut r)?;
        let seal = r.array()?;
        let n = r.u32()? as usize;
        let mut transactions = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            transactions.push(Transaction::from_bytes(r.bytes()?)?);
        }
        r.finish()?;
        Ok(Self { header, transactions, seal })
    }

    /// Link, Merkle root, seal and transaction signatures against `parent`.
    pub fn check(&self, parent: Option<&BlockHeader>, registry: &KeyRegistry) -> Result<()> {
        let (height, prev) = parent.map_or((0, [0; 32]), |p| (p.height + 1, p.hash()));
        if self.header.height != height {
            return Err(LedgerError::ForkRejected(format!("height {} after {}", self.header.height, height as i128 - 1)));
        }
        if self.header.prev_hash != prev {
            return Err(LedgerError::ForkRejected(format!("stale parent hash at height {height}")));
        }
        let invalid = |m: String| Err(LedgerError::InvalidBlock(m));
        if self.header.merkle_root != merkle_root(&self.transactions) {
            return invalid(format!("merkle root mismatch at height {height}"));
        }
        if self.header.leader_id == NO_LEADER && !self.transactions.is_empty() {
            return invalid(format!("leaderless block {height} carries transactions"));
        }
        match registry.verify(self.header.sealer(), &self.header.hash(), &self.seal) {
            Ok(true) => {}
            Ok(false) => return invalid(format!("bad seal at height {height}")),
            Err(e) => return invalid(e.to_string()),
        }
        for tx in &self.transactions {
            if !verify_tx(tx, registry).map_err(|e| LedgerError::InvalidBlock(e.to_string()))? {
                return invalid(format!("bad signature from {} at height {height}", tx.sender_id));
            }
        }
        Ok(())
    }
}

/// Ordered blocks from genesis.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Chain {
    blocks: Vec<Block>,
}

impl Chain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    /// Number of blocks, genesis included.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip_hash(&self) -> [u8; 32] {
        self.tip().map_or([0; 32], Block::hash)
    }

    pub fn append(&mut self, block: Block, registry: &KeyRegistry) -> Result<()> {
        block.check(self.tip().map(|b| &b.header), registry)?;
        self.blocks.push(block);
        Ok(())
    }

    pub fn validate(&self, registry: &KeyRegistry) -> Result<()> {
        let mut parent = None;
        for b in &self.blocks {
            b.check(parent, registry)?;
            parent = Some(&b.header);
        }
        Ok(())
    }

    /// Every address referenced by the chain resolves and re-hashes.
    pub fn validate_store(&self, store: &dyn BlobStore) -> Result<()> {
        for b in &self.blocks {
            store.get(&b.global_model_addr())?;
            for tx in &b.transactions {
                for a in [tx.model_addr, tx.proof_addr, tx.vk_addr] {
                    store.get(&a)?;
                }
            }
        }
        Ok(())
    }

    /// Length-prefixed block records.
    pub fn to_log(&self) -> Vec<u8> {
        let mut w = Writer::default();
        for b in &self.blocks {
            w.bytes(&b.to_bytes());
        }
        w.0
    }

    /// Parses a log without validating it; re-encoding must reproduce the input.
    pub fn from_log(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let mut blocks = Vec::new();
        while !r.is_empty() {
            blocks.push(Block::from_bytes(r.bytes()?)?);
        }
        let chain = Self { blocks };
        if chain.to_log() != bytes {
            return Err(LedgerError::Format("non-canonical chain log".into()));
        }
        Ok(chain)
    }

    pub fn write_log(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_log()).map_err(|e| LedgerError::Io(e.to_string()))
    }

    pub fn read_log(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_log(&fs::read(path).map_err(|e| LedgerError::Io(e.to_string()))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::cas::MemCas;
    use crate::ledger::tx::node_signing_key;
    use crate::ledger::tx::tests::{registry, sample_tx};

    fn naive_root(txs: &[Transaction]) -> [u8; 32] {
        if txs.is_empty() {
            return [0; 32];
        }
        let mut nodes: Vec<Vec<u8>> = txs.iter().map(|t| Sha256::digest(t.to_bytes()).to_vec()).collect();
        while nodes.len() > 1 {
            if nodes.len() % 2 == 1 {
                let last = nodes[nodes.len() - 1].clone();
                nodes.push(last);
            }
            let mut next = Vec::new();
            let mut i = 0;
            while i < nodes.len() {
                let mut cat = nodes[i].clone();
                cat.extend_from_slice(&nodes[i + 1]);
                next.push(Sha256::digest(&cat).to_vec());
                i += 2;
            }
            nodes = next;
        }
        nodes[0].clone().try_into().unwrap()
    }

    fn build_chain(blocks: usize) -> (Chain, KeyRegistry) {
        let reg = registry(5);
        let mut chain = Chain::new();
        let genesis = Block::seal(None, 1000, NO_LEADER, vec![], CasAddress::of(b"g0"), &node_signing_key(1, 0));
        chain.append(genesis, &reg).unwrap();
        for h in 1..blocks as u64 {
            let leader = (h % 4 + 1) as u32;
            let txs: Vec<_> = (0..(h % 3)).map(|i| sample_tx(i as u32 + 1, 10 + i, h)).collect();
            let (leader, txs) = if txs.is_empty() { (NO_LEADER, txs) } else { (leader, txs) };
            let key = node_signing_key(1, if leader == NO_LEADER { 0 } else { leader });
            let b = Block::seal(Some(&chain.tip().unwrap().header), 1000 + h, leader, txs, CasAddress::of(&h.to_le_bytes()), &key);
            chain.append(b, &reg).unwrap();
        }
        (chain, reg)
    }

    #[test]
    fn merkle_matches_naive_tree() {
        assert_eq!(merkle_root(&[]), [0; 32]);
        let one = sample_tx(1, 1, 1);
        let leaf: [u8; 32] = Sha256::digest(one.to_bytes()).into();
        assert_eq!(merkle_root(std::slice::from_ref(&one)), leaf);
        for n in 1..=7 {
            let txs: Vec<_> = (0..n).map(|i| sample_tx(i, 5, i as u64)).collect();
            assert_eq!(merkle_root(&txs), naive_root(&txs), "n = {n}");
        }
    }

    #[test]
    fn append_and_reject_forks() {
        let (mut chain, reg) = build_chain(4);
        chain.validate(&reg).unwrap();
        assert_eq!(chain.len(), 4);
        let parent = chain.blocks()[1].header.clone();
        let stale = Block::seal(Some(&parent), 5, 1, vec![sample_tx(1, 3, 3)], CasAddress::of(b"x"), &node_signing_key(1, 1));
        assert!(matches!(chain.append(stale, &reg), Err(LedgerError::ForkRejected(_))));
        let tip = chain.tip().unwrap().header.clone();
        let mut bad_root = Block::seal(Some(&tip), 5, 1, vec![sample_tx(1, 3, 3)], CasAddress::of(b"x"), &node_signing_key(1, 1));
        bad_root.transactions.push(sample_tx(2, 3, 3));
        assert!(matches!(chain.append(bad_root, &reg), Err(LedgerError::InvalidBlock(_))));
        let wrong_sealer = Block::seal(Some(&tip), 5, 1, vec![], CasAddress::of(b"x"), &node_signing_key(1, 2));
        assert!(matches!(chain.append(wrong_sealer, &reg), Err(LedgerError::InvalidBlock(_))));
    }

    #[test]
    fn log_round_trip() {
        let (chain, reg) = build_chain(6);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.log");
        chain.write_log(&path).unwrap();
        let back = Chain::read_log(&path).unwrap();
        assert_eq!(back, chain);
        back.validate(&reg).unwrap();
    }

    #[test]
    fn tx_byte_mutation_after_sealing_fails() {
        let (mut chain, reg) = build_chain(3);
        chain.blocks[2].transactions[0].nonce ^= 1;
        assert!(chain.validate(&reg).is_err());
    }

    #[test]
    fn store_references_resolve() {
        let cas = MemCas::new();
        let reg = registry(2);
        let mut chain = Chain::new();
        let g = cas.put(b"genesis model").unwrap();
        chain.append(Block::seal(None, 0, NO_LEADER, vec![], g, &node_signing_key(1, 0)), &reg).unwrap();
        chain.validate_store(&cas).unwrap();
        let mut tx = sample_tx(1, 1, 1);
        tx.model_addr = cas.put(b"m").unwrap();
        tx.proof_addr = cas.put(b"p").unwrap();
        crate::ledger::sign_tx(&mut tx, &node_signing_key(1, 1));
        let b = Block::seal(Some(&chain.tip().unwrap().header), 1, 1, vec![tx], g, &node_signing_key(1, 1));
        chain.append(b, &reg).unwrap();
        assert!(matches!(chain.validate_store(&cas), Err(LedgerError::NotFound(_))));
        cas.put(b"vk").unwrap();
        chain.validate_store(&cas).unwrap();
    }
}
