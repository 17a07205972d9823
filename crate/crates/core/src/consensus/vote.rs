//! Signed votes and per-transaction tallies.

use std::collections::BTreeMap;

use ed25519_dalek::{Signer, SigningKey};

use super::{ConsensusError, Result};
use crate::ledger::KeyRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn to_byte(self) -> u8 {
        match self {
            Self::Accept => 1,
            Self::Reject => 0,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(Self::Accept),
            0 => Some(Self::Reject),
            _ => None,
        }
    }
}

/// Smallest tally that reaches two thirds of `n` voters.
pub fn threshold(n: usize) -> usize {
    (2 * n).div_ceil(3)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vote {
    pub tx_id: [u8; 32],
    pub voter: u32,
    pub verdict: Verdict,
    pub signature: [u8; 64],
}

impl Vote {
    pub fn signing_bytes(tx_id: &[u8; 32], voter: u32, verdict: Verdict) -> Vec<u8> {
        let mut b = Vec::with_capacity(4 + 32 + 4 + 1);
        b.extend_from_slice(b"VOTE");
        b.extend_from_slice(tx_id);
        b.extend_from_slice(&voter.to_le_bytes());
        b.push(verdict.to_byte());
        b
    }

    pub fn new(tx_id: [u8; 32], voter: u32, verdict: Verdict, key: &SigningKey) -> Self {
        let signature = key.sign(&Self::signing_bytes(&tx_id, voter, verdict)).to_bytes();
        Self { tx_id, voter, verdict, signature }
    }

    pub fn verify(&self, registry: &KeyRegistry) -> bool {
        registry
            .verify(self.voter, &Self::signing_bytes(&self.tx_id, self.voter, self.verdict), &self.signature)
            .unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteRecord {
    pub tx_id: [u8; 32],
    pub verdicts: BTreeMap<u32, Verdict>,
}

impl VoteRecord {
    pub fn new(tx_id: [u8; 32]) -> Self {
        Self { tx_id, verdicts: BTreeMap::new() }
    }

    /// Records a signed vote; a second vote by the same node is refused.
    pub fn record(&mut self, vote: &Vote, registry: &KeyRegistry) -> Result<()> {
        if vote.tx_id != self.tx_id {
            return Err(ConsensusError::BadVote("vote for another transaction".into()));
        }
        if !vote.verify(registry) {
            return Err(ConsensusError::BadVote(format!("bad signature from {}", vote.voter)));
        }
        if self.verdicts.contains_key(&vote.voter) {
            return Err(ConsensusError::BadVote(format!("{} voted twice", vote.voter)));
        }
        self.verdicts.insert(vote.voter, vote.verdict);
        Ok(())
    }

    pub fn tally(&self) -> usize {
        self.verdicts.values().filter(|v| **v == Verdict::Accept).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::node_signing_key;
    use crate::ledger::tx::tests::registry;

    #[test]
    fn threshold_values() {
        assert_eq!(threshold(3), 2);
        assert_eq!(threshold(4), 3);
        assert_eq!(threshold(6), 4);
        assert_eq!(threshold(7), 5);
        assert_eq!(threshold(100), 67);
        for n in 1..500 {
            let t = threshold(n);
            assert!(3 * t >= 2 * n && 3 * (t - 1) < 2 * n, "n = {n}");
        }
    }

    #[test]
    fn record_and_tally() {
        let reg = registry(4);
        let id = [7; 32];
        let mut rec = VoteRecord::new(id);
        rec.record(&Vote::new(id, 1, Verdict::Accept, &node_signing_key(1, 1)), &reg).unwrap();
        rec.record(&Vote::new(id, 2, Verdict::Reject, &node_signing_key(1, 2)), &reg).unwrap();
        assert!(rec.record(&Vote::new(id, 1, Verdict::Accept, &node_signing_key(1, 1)), &reg).is_err());
        assert!(rec.record(&Vote::new(id, 3, Verdict::Accept, &node_signing_key(1, 2)), &reg).is_err());
        let mut forged = Vote::new(id, 3, Verdict::Reject, &node_signing_key(1, 3));
        forged.verdict = Verdict::Accept;
        assert!(rec.record(&forged, &reg).is_err());
        assert_eq!(rec.tally(), 1);
    }
}
