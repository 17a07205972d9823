//! Hash-linked chain of blocks, signed transactions and the blob store
//! holding models, proofs and keys.

pub mod block;
pub mod cas;
pub mod ipfs;
pub mod tx;
pub(crate) mod wire;

pub use block::{merkle_root, Block, BlockHeader, Chain, NO_LEADER, PUBLISHER_ID};
pub use cas::{BlobStore, CasAddress, DiskCas, MemCas};
pub use ipfs::IpfsCas;
pub use tx::{node_signing_key, sign_tx, verify_tx, KeyRegistry, Transaction};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("blob {0} not found")]
    NotFound(CasAddress),
    #[error("blob {0} does not hash to its address")]
    CorruptBlob(CasAddress),
    #[error("refusing to store an empty blob")]
    EmptyBlob,
    #[error("i/o: {0}")]
    Io(String),
    #[error("malformed encoding: {0}")]
    Format(String),
    #[error("sender {0} has no registered key")]
    UnknownSender(u32),
    #[error("block does not extend the tip: {0}")]
    ForkRejected(String),
    #[error("invalid block: {0}")]
    InvalidBlock(String),
    #[error("ipfs: {0}")]
    Ipfs(String),
}

pub type Result<T> = std::result::Result<T, LedgerError>;
