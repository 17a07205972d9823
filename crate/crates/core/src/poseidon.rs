//! Width-3 Poseidon permutation and sponge over the BLS12-381 scalar field.
//!
//! Round constants and the Cauchy MDS matrix are expanded deterministically
//! from a fixed tag, so every party derives identical parameters.

use std::sync::OnceLock;

use ark_ff::Field;

use crate::field::{fr_from_seed, Fr};

pub const WIDTH: usize = 3;
pub const RATE: usize = 2;
pub const FULL_ROUNDS: usize = 8;
pub const PARTIAL_ROUNDS: usize = 57;
pub const ALPHA: u64 = 5;
const TAG: &[u8] = b"ZKPOT-POSEIDON-v1";

pub struct PoseidonParams {
    /// One row of `WIDTH` constants per round.
    pub round_constants: Vec<[Fr; WIDTH]>,
    pub mds: [[Fr; WIDTH]; WIDTH],
}

impl PoseidonParams {
    fn generate() -> Self {
        let rounds = FULL_ROUNDS + PARTIAL_ROUNDS;
        let round_constants = (0..rounds)
            .map(|r| {
                let mut row = [Fr::from(0u64); WIDTH];
                for (i, c) in row.iter_mut().enumerate() {
                    let mut seed = TAG.to_vec();
                    seed.extend_from_slice(&(r as u32).to_le_bytes());
                    seed.extend_from_slice(&(i as u32).to_le_bytes());
                    *c = fr_from_seed(&seed);
                }
                row
            })
            .collect();
        let mut mds = [[Fr::from(0u64); WIDTH]; WIDTH];
        for (i, row) in mds.iter_mut().enumerate() {
            for (j, m) in row.iter_mut().enumerate() {
                let denom = Fr::from(i as u64) + Fr::from((WIDTH + j) as u64);
                *m = denom.inverse().expect("nonzero");
            }
        }
        Self { round_constants, mds }
    }

    pub fn get() -> &'static PoseidonParams {
        static P: OnceLock<PoseidonParams> = OnceLock::new();
        P.get_or_init(Self::generate)
    }

    pub fn is_full_round(r: usize) -> bool {
        r < FULL_ROUNDS / 2 || r >= FULL_ROUNDS / 2 + PARTIAL_ROUNDS
    }
}

fn sbox(x: Fr) -> Fr {
    let x2 = x.square();
    x2.square() * x
}

pub fn permute(state: &mut [Fr; WIDTH]) {
    let p = PoseidonParams::get();
    for (r, rc) in p.round_constants.iter().enumerate() {
        for (s, c) in state.iter_mut().zip(rc) {
            *s += c;
        }
        if PoseidonParams::is_full_round(r) {
            for s in state.iter_mut() {
                *s = sbox(*s);
            }
        } else {
            state[0] = sbox(state[0]);
        }
        let old = *state;
        for (i, s) in state.iter_mut().enumerate() {
            *s = p.mds[i].iter().zip(&old).map(|(m, v)| *m * v).sum();
        }
    }
}

/// Sponge over a fixed-length input; the length is bound into the capacity.
pub fn hash(inputs: &[Fr]) -> Fr {
    let mut state = [Fr::from(inputs.len() as u64), Fr::from(0u64), Fr::from(0u64)];
    if inputs.is_empty() {
        permute(&mut state);
    }
    for pair in inputs.chunks(RATE) {
        state[1] += pair[0];
        if let Some(b) = pair.get(1) {
            state[2] += b;
        }
        permute(&mut state);
    }
    state[1]
}

/// Hash of a byte string via its 31-byte chunks.
pub fn hash_bytes(bytes: &[u8]) -> Fr {
    hash(&crate::field::chunk_bytes(bytes))
}
