//! Signed training transactions.

use std::collections::BTreeMap;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use sha2::{Digest, Sha256};

use super::cas::CasAddress;
use super::wire::{Reader, Writer};
use super::{LedgerError, Result};
use crate::commit::{Commitment, COMMITMENT_LEN};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub sender_id: u32,
    pub task_name: String,
    /// Correctly classified test samples.
    pub acc: u64,
    /// Local dataset size used as the aggregation weight.
    pub shard_size: u64,
    pub model_addr: CasAddress,
    pub proof_addr: CasAddress,
    pub vk_addr: CasAddress,
    pub commitment: Commitment,
    /// Commitment opening, canonical field bytes.
    pub opening: [u8; 32],
    pub nonce: u64,
    pub signature: [u8; 64],
}

impl Transaction {
    /// Everything except the signature.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u32(self.sender_id)
            .bytes(self.task_name.as_bytes())
            .u64(self.acc)
            .u64(self.shard_size)
            .raw(&self.model_addr.0)
            .raw(&self.proof_addr.0)
            .raw(&self.vk_addr.0)
            .raw(&self.commitment.to_bytes())
            .raw(&self.opening)
            .u64(self.nonce);
        w.0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = self.signing_bytes();
        b.extend_from_slice(&self.signature);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let tx = Self::read(&mut r)?;
        r.finish()?;
        Ok(tx)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let sender_id = r.u32()?;
        let task_name = std::str::from_utf8(r.bytes()?)
            .map_err(|_| LedgerError::Format("task name is not utf-8".into()))?
            .to_owned();
        let acc = r.u64()?;
        let shard_size = r.u64()?;
        let model_addr = CasAddress(r.array()?);
        let proof_addr = CasAddress(r.array()?);
        let vk_addr = CasAddress(r.array()?);
        let commitment = Commitment::from_bytes(r.take(COMMITMENT_LEN)?)
            .map_err(|e| LedgerError::Format(format!("commitment: {e}")))?;
        Ok(Self {
            sender_id,
            task_name,
            acc,
            shard_size,
            model_addr,
            proof_addr,
            vk_addr,
            commitment,
            opening: r.array()?,
            nonce: r.u64()?,
            signature: r.array()?,
        })
    }

    /// SHA-256 of the canonical bytes, signature included.
    pub fn id(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

/// Public keys of every registered node.
#[derive(Debug, Clone, Default)]
pub struct KeyRegistry {
    keys: BTreeMap<u32, VerifyingKey>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: u32, key: VerifyingKey) {
        self.keys.insert(id, key);
    }

    pub fn get(&self, id: u32) -> Result<&VerifyingKey> {
        self.keys.get(&id).ok_or(LedgerError::UnknownSender(id))
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Checks an ed25519 signature by `id` over `msg`.
    pub fn verify(&self, id: u32, msg: &[u8], sig: &[u8; 64]) -> Result<bool> {
        let key = self.get(id)?;
        Ok(key.verify_strict(msg, &Signature::from_bytes(sig)).is_ok())
    }
}

/// Deterministic per-node key for simulations.
pub fn node_signing_key(seed: u64, id: u32) -> SigningKey {
    let mut h = Sha256::new();
    h.update(b"zkpot-node-key");
    h.update(seed.to_le_bytes());
    h.update(id.to_le_bytes());
    SigningKey::from_bytes(&h.finalize().into())
}

pub fn sign_tx(tx: &mut Transaction, key: &SigningKey) {
    tx.signature = key.sign(&tx.signing_bytes()).to_bytes();
}

pub fn verify_tx(tx: &Transaction, registry: &KeyRegistry) -> Result<bool> {
    registry.verify(tx.sender_id, &tx.signing_bytes(), &tx.signature)
}
