//! Proofs that a committed quantized model reaches a claimed accuracy on a test set.
//!
//! Two interchangeable backends implement setup/prove/verify: `oracle`
//! re-executes the model against the opening, `snark` proves the R1CS from
//! [`circuit`] with Groth16 over BLS12-381.

pub mod backend;
pub mod circuit;
pub mod gadgets;
pub mod r1cs;

pub use backend::{
    backend_for, BackendKind, CircuitConfig, OracleBackend, Proof, ProofBackend, ProvingKey,
    SnarkBackend, VerifyingKey, MAX_SECURITY_BITS, trace_digest,
};
pub use circuit::{
    check_supported, check_witness, dataset_bytes, dataset_digest, labels_digest, synthesize,
    synthesize_r1cs, Statement, TestSet, Witness,
};
pub use r1cs::R1cs as ConstraintSystem;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProofError {
    #[error("unsupported circuit: {0}")]
    UnsupportedCircuit(String),
    #[error("witness does not satisfy the statement: {0}")]
    UnsatisfiableWitness(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("constraint synthesis failed: {0}")]
    Synthesis(String),
}

pub type Result<T> = std::result::Result<T, ProofError>;
