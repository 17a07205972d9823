//! Scalar-field helpers shared by commitments, digests and circuits.

use ark_ff::{BigInteger, PrimeField};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};

pub use ark_bls12_381::Fr;

/// Bytes packed per field element; 31 bytes always fit below the modulus.
pub const CHUNK_BYTES: usize = 31;

/// Splits `bytes` into 31-byte big-endian chunks, zero-padding the last one on the right.
pub fn chunk_bytes(bytes: &[u8]) -> Vec<Fr> {
    bytes
        .chunks(CHUNK_BYTES)
        .map(|c| {
            let mut buf = [0u8; CHUNK_BYTES];
            buf[..c.len()].copy_from_slice(c);
            Fr::from_be_bytes_mod_order(&buf)
        })
        .collect()
}

pub fn chunk_count(len: usize) -> usize {
    len.div_ceil(CHUNK_BYTES)
}

/// Canonical 32-byte little-endian encoding.
pub fn fr_to_bytes(x: &Fr) -> [u8; 32] {
    let mut out = [0u8; 32];
    let b = x.into_bigint().to_bytes_le();
    out.copy_from_slice(&b);
    out
}

/// Inverse of [`fr_to_bytes`]; rejects non-canonical encodings.
pub fn fr_from_bytes(bytes: &[u8; 32]) -> Option<Fr> {
    Fr::deserialize_compressed(&bytes[..]).ok().filter(|x| fr_to_bytes(x) == *bytes)
}

pub fn fr_from_i64(v: i64) -> Fr {
    if v >= 0 {
        Fr::from(v as u64)
    } else {
        -Fr::from(v.unsigned_abs())
    }
}

/// Uniform scalar from 32 bytes of entropy (reduced from a 64-byte SHA-256 expansion).
pub fn fr_from_seed(seed: &[u8]) -> Fr {
    use sha2::{Digest, Sha256};
    let a = Sha256::new().chain_update(b"fr-wide-0").chain_update(seed).finalize();
    let b = Sha256::new().chain_update(b"fr-wide-1").chain_update(seed).finalize();
    let mut wide = [0u8; 64];
    wide[..32].copy_from_slice(&a);
    wide[32..].copy_from_slice(&b);
    Fr::from_le_bytes_mod_order(&wide)
}

pub fn fr_serialized_ok(x: &Fr) -> bool {
    x.serialized_size(ark_serialize::Compress::Yes) == 32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_are_big_endian_and_padded() {
        let bytes: Vec<u8> = (1..=33).collect();
        let c = chunk_bytes(&bytes);
        assert_eq!(c.len(), 2);
        let mut first = Fr::from(0u64);
        for b in 1..=31u8 {
            first = first * Fr::from(256u64) + Fr::from(b as u64);
        }
        assert_eq!(c[0], first);
        // [32, 33, 0, ..., 0]
        let second = (Fr::from(32u64) * Fr::from(256u64) + Fr::from(33u64))
            * Fr::from(256u64).pow([29u64]);
        assert_eq!(c[1], second);
        assert!(chunk_bytes(&[]).is_empty());
        assert_eq!(chunk_count(62), 2);
        assert_eq!(chunk_count(63), 3);
    }

    #[test]
    fn encoding_round_trip() {
        for v in [0i64, 1, -1, i64::MAX, i64::MIN] {
            let x = fr_from_i64(v);
            assert_eq!(fr_from_bytes(&fr_to_bytes(&x)), Some(x));
            assert!(fr_serialized_ok(&x));
        }
        assert_eq!(fr_from_bytes(&[0xff; 32]), None);
    }

    use ark_ff::Field;
}
