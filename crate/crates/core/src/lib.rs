//! Zero-knowledge proof-of-training consensus for blockchain-secured
//! federated learning.

pub mod quant;
pub mod commit;
pub mod field;
pub mod poseidon;
pub mod zkproof;
pub mod fl;
pub mod ledger;
pub mod consensus;
pub mod sim;
#[doc(hidden)]
pub mod testkit;
