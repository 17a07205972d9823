//! Transaction pool collected by every node during a round.

use std::collections::HashSet;

use super::{ConsensusError, Result};
use crate::ledger::Transaction;

#[derive(Debug, Clone)]
pub struct TransactionPool {
    txs: Vec<Transaction>,
    senders: HashSet<u32>,
    /// Simulated seconds.
    deadline: f64,
    expected: usize,
    closed: bool,
}

impl TransactionPool {
    pub fn new(deadline: f64, expected: usize) -> Self {
        Self { txs: Vec::new(), senders: HashSet::new(), deadline, expected, closed: expected == 0 }
    }

    pub fn deadline(&self) -> f64 {
        self.deadline
    }

    pub fn expected(&self) -> usize {
        self.expected
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Closes the pool once the clock reaches the deadline.
    pub fn tick(&mut self, now: f64) -> bool {
        if now >= self.deadline {
            self.closed = true;
        }
        self.closed
    }

    /// Adds a transaction arriving at `now`. `Ok(false)` for a repeated sender.
    pub fn offer(&mut self, tx: Transaction, now: f64) -> Result<bool> {
        if self.tick(now) {
            return Err(ConsensusError::LateTransaction(tx.sender_id));
        }
        if !self.senders.insert(tx.sender_id) {
            return Ok(false);
        }
        self.txs.push(tx);
        if self.txs.len() >= self.expected {
            self.closed = true;
        }
        Ok(true)
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.txs
    }

    pub fn len(&self) -> usize {
        self.txs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }
}

/// Accuracy descending, ties by ascending transaction hash.
pub fn sort_pool(txs: &[Transaction]) -> Vec<Transaction> {
    let mut keyed: Vec<_> = txs.iter().map(|t| (std::cmp::Reverse(t.acc), t.id(), t)).collect();
    keyed.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    keyed.into_iter().map(|(_, _, t)| t.clone()).collect()
}
