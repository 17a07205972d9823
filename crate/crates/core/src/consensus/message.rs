//! Wire messages exchanged between nodes.

use super::vote::{Verdict, Vote};
use crate::ledger::wire::{Reader, Writer};
use crate::ledger::{Block, LedgerError, Transaction};

pub const TX_SUBMIT: u8 = 1;
pub const VOTE: u8 = 2;
pub const BLOCK_ANNOUNCE: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    TxSubmit(Transaction),
    Vote(Vote),
    BlockAnnounce(Block),
}

impl Message {
    pub fn tag(&self) -> u8 {
        match self {
            Self::TxSubmit(_) => TX_SUBMIT,
            Self::Vote(_) => VOTE,
            Self::BlockAnnounce(_) => BLOCK_ANNOUNCE,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.u8(self.tag());
        match self {
            Self::TxSubmit(tx) => w.raw(&tx.to_bytes()),
            Self::Vote(v) => w.raw(&v.tx_id).u32(v.voter).u8(v.verdict.to_byte()).raw(&v.signature),
            Self::BlockAnnounce(b) => w.raw(&b.to_bytes()),
        };
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LedgerError> {
        let mut r = Reader::new(bytes);
        let msg = match r.u8()? {
            TX_SUBMIT => Self::TxSubmit(Transaction::from_bytes(r.take(bytes.len() - 1)?)?),
            VOTE => {
                let tx_id = r.array()?;
                let voter = r.u32()?;
                let verdict = Verdict::from_byte(r.u8()?).ok_or_else(|| LedgerError::Format("bad verdict".into()))?;
                let signature = r.array()?;
                Self::Vote(Vote { tx_id, voter, verdict, signature })
            }
            BLOCK_ANNOUNCE => Self::BlockAnnounce(Block::from_bytes(r.take(bytes.len() - 1)?)?),
            t => return Err(LedgerError::Format(format!("unknown message tag {t}"))),
        };
        r.finish()?;
        Ok(msg)
    }
}
