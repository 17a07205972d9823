//! Proof-of-training consensus: transaction pool, voting, leader election
//! and the leader's aggregation duties.

pub mod leader;
pub mod message;
pub mod pool;
pub mod vote;

pub use leader::{
    elect_leader, gaussian_model, inclusion_threshold, leader_finalize, verify_transaction, Election,
    FinalizeParams, RoundOutcome, TaskContext,
};
pub use message::Message;
pub use pool::{sort_pool, TransactionPool};
pub use vote::{threshold, Verdict, Vote, VoteRecord};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fl::FlError;
use crate::ledger::LedgerError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsensusError {
    #[error("transaction from {0} arrived after the pool closed")]
    LateTransaction(u32),
    #[error("round aborted: {0}")]
    AbortRound(String),
    #[error("vote rejected: {0}")]
    BadVote(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Fl(#[from] FlError),
}

pub type Result<T> = std::result::Result<T, ConsensusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ByzantineKind {
    /// Claims a higher accuracy than the proof supports and votes for fellow attackers.
    ClaimInflatedAcc,
    /// Replaces the aggregate with standard Gaussian noise when elected.
    GaussianAggregate,
    /// Never votes.
    WithholdVote,
}

impl ByzantineKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ClaimInflatedAcc => "claim_inflated_acc",
            Self::GaussianAggregate => "gaussian_aggregate",
            Self::WithholdVote => "withhold_vote",
        }
    }
}

impl fmt::Display for ByzantineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ByzantineKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "claim_inflated_acc" | "inflated_acc" => Ok(Self::ClaimInflatedAcc),
            "gaussian_aggregate" | "gaussian" => Ok(Self::GaussianAggregate),
            "withhold_vote" | "withhold" => Ok(Self::WithholdVote),
            _ => Err(format!("unknown byzantine kind {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Honest,
    Byzantine(ByzantineKind),
}

impl Behavior {
    pub fn is_byzantine(self) -> bool {
        matches!(self, Self::Byzantine(_))
    }

    /// Verdict this node casts on a transaction whose proof checks out as
    /// `valid`; `None` abstains.
    pub fn cast(self, valid: bool, sender: Behavior) -> Option<Verdict> {
        let honest = Some(if valid { Verdict::Accept } else { Verdict::Reject });
        match self {
            Self::Honest | Self::Byzantine(ByzantineKind::GaussianAggregate) => honest,
            Self::Byzantine(ByzantineKind::WithholdVote) => None,
            Self::Byzantine(ByzantineKind::ClaimInflatedAcc) => Some(if sender == self {
                Verdict::Accept
            } else {
                Verdict::Reject
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Publisher,
    Client,
}
