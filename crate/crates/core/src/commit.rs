//! Vector Pedersen commitments to serialized models.
//!
//! The byte string is split into 31-byte scalars `v_i` and committed as
//! `sum v_i * G_i + r * H` on BLS12-381 G1. Generators come from
//! hash-to-curve under a fixed tag, so no discrete-log relation between them
//! is known to anyone.
//!
//! Every commitment also carries a `link`: a Poseidon hash of the same
//! scalars followed by the same `r`. The proof circuit recomputes the link,
//! which ties a proof to the bytes behind the curve point.

use std::sync::{Arc, Mutex};

use ark_bls12_381::{g1, G1Affine, G1Projective};
use ark_ec::{
    hashing::{curve_maps::wb::WBMap, map_to_curve_hasher::MapToCurveBasedHasher, HashToCurve},
    AffineRepr, CurveGroup, VariableBaseMSM,
};
use ark_ff::{field_hashers::DefaultFieldHasher, UniformRand, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use rand::{CryptoRng, RngCore};
use sha2::Sha256;
use thiserror::Error;

use crate::field::{chunk_bytes, chunk_count, fr_from_bytes, fr_to_bytes, Fr};
use crate::poseidon;

pub const GENERATOR_TAG: &[u8] = b"ZKPOT-PEDERSEN-v1";

/// Encoded size: compressed G1 point followed by the 32-byte link.
pub const COMMITMENT_LEN: usize = 48 + 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommitError {
    #[error("key holds {capacity} generators, {needed} needed")]
    KeyTooSmall { capacity: usize, needed: usize },
    #[error("nothing to commit")]
    Empty,
    #[error("malformed commitment encoding")]
    Encoding,
}

type Hasher = MapToCurveBasedHasher<G1Projective, DefaultFieldHasher<Sha256, 128>, WBMap<g1::Config>>;

fn derive_point(hasher: &Hasher, label: &[u8]) -> G1Affine {
    hasher.hash(label).expect("hash to curve is total on BLS12-381 G1")
}

/// Public generators `G_1..G_n` and blinding base `H`.
#[derive(Clone, Debug)]
pub struct CommitKey {
    generators: Vec<G1Affine>,
    blinder: G1Affine,
}

impl CommitKey {
    /// Derives `n` value generators. Generator `i` does not depend on `n`.
    pub fn derive(n: usize) -> Self {
        let hasher = Hasher::new(GENERATOR_TAG).expect("static domain");
        let blinder = derive_point(&hasher, b"blinder");
        let generators = (0..n as u64)
            .map(|i| {
                let mut label = b"value-".to_vec();
                label.extend_from_slice(&i.to_le_bytes());
                derive_point(&hasher, &label)
            })
            .collect();
        Self { generators, blinder }
    }

    /// Derives `extra` further generators in place.
    fn extend_to(&mut self, n: usize) {
        if n <= self.generators.len() {
            return;
        }
        let hasher = Hasher::new(GENERATOR_TAG).expect("static domain");
        for i in self.generators.len() as u64..n as u64 {
            let mut label = b"value-".to_vec();
            label.extend_from_slice(&i.to_le_bytes());
            self.generators.push(derive_point(&hasher, &label));
        }
    }

    /// Process-wide key with at least `n` generators, grown on demand.
    pub fn shared(n: usize) -> Arc<CommitKey> {
        static SHARED: Mutex<Option<Arc<CommitKey>>> = Mutex::new(None);
        let mut guard = SHARED.lock().unwrap_or_else(|e| e.into_inner());
        match guard.as_ref() {
            Some(k) if k.capacity() >= n => k.clone(),
            current => {
                let mut key = current.map(|k| (**k).clone()).unwrap_or_else(|| CommitKey::derive(0));
                key.extend_to(n.max(64));
                let key = Arc::new(key);
                *guard = Some(key.clone());
                key
            }
        }
    }

    /// Key sized for byte strings of `len` bytes.
    pub fn for_bytes(len: usize) -> Arc<CommitKey> {
        Self::shared(chunk_count(len))
    }

    pub fn capacity(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[G1Affine] {
        &self.generators
    }

    pub fn blinder(&self) -> G1Affine {
        self.blinder
    }

    /// `sum values_i * G_i + r * H`.
    pub fn commit_scalars(&self, values: &[Fr], r: &Fr) -> Result<G1Affine, CommitError> {
        if values.len() > self.generators.len() {
            return Err(CommitError::KeyTooSmall { capacity: self.capacity(), needed: values.len() });
        }
        let acc: G1Projective = if values.is_empty() {
            G1Projective::zero()
        } else {
            G1Projective::msm(&self.generators[..values.len()], values).expect("equal lengths")
        };
        Ok((acc + self.blinder * r).into_affine())
    }
}

/// Opening randomness.
pub fn random_opening<R: RngCore + CryptoRng>(rng: &mut R) -> Fr {
    Fr::rand(rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Commitment {
    pub point: G1Affine,
    pub link: Fr,
}

impl Commitment {
    pub fn to_bytes(&self) -> [u8; COMMITMENT_LEN] {
        let mut out = [0u8; COMMITMENT_LEN];
        self.point
            .serialize_compressed(&mut out[..48])
            .expect("fixed-size buffer");
        out[48..].copy_from_slice(&fr_to_bytes(&self.link));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CommitError> {
        if bytes.len() != COMMITMENT_LEN {
            return Err(CommitError::Encoding);
        }
        let point = G1Affine::deserialize_compressed(&bytes[..48]).map_err(|_| CommitError::Encoding)?;
        let link = fr_from_bytes(bytes[48..].try_into().expect("32 bytes")).ok_or(CommitError::Encoding)?;
        Ok(Self { point, link })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self, CommitError> {
        Self::from_bytes(&hex::decode(s).map_err(|_| CommitError::Encoding)?)
    }

    pub fn is_identity(&self) -> bool {
        self.point.is_zero()
    }
}

/// Poseidon link over the committed scalars followed by `r`.
pub fn link_hash(values: &[Fr], r: &Fr) -> Fr {
    let mut inputs = Vec::with_capacity(values.len() + 1);
    inputs.extend_from_slice(values);
    inputs.push(*r);
    poseidon::hash(&inputs)
}

pub fn commit(key: &CommitKey, model_bytes: &[u8], r: &Fr) -> Result<Commitment, CommitError> {
    if model_bytes.is_empty() {
        return Err(CommitError::Empty);
    }
    let values = chunk_bytes(model_bytes);
    let point = key.commit_scalars(&values, r)?;
    Ok(Commitment { point, link: link_hash(&values, r) })
}

/// Recomputes both the point and the link from the claimed opening.
pub fn verify_opening(key: &CommitKey, cm: &Commitment, model_bytes: &[u8], r: &Fr) -> bool {
    match commit(key, model_bytes, r) {
        Ok(c) => c == *cm,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rng() -> rand_chacha::ChaCha20Rng {
        rand_chacha::ChaCha20Rng::seed_from_u64(5)
    }

    #[test]
    fn empty_vector_with_zero_blinding_is_identity() {
        let key = CommitKey::derive(4);
        assert!(key.commit_scalars(&[], &Fr::zero()).unwrap().is_zero());
    }

    #[test]
    fn generators_are_distinct_and_prefix_stable() {
        let a = CommitKey::derive(8);
        let b = CommitKey::derive(12);
        assert_eq!(a.generators(), &b.generators()[..8]);
        for i in 0..12 {
            assert_ne!(b.generators()[i], b.blinder());
            for j in 0..i {
                assert_ne!(b.generators()[i], b.generators()[j]);
            }
            assert!(b.generators()[i].is_on_curve() && b.generators()[i].is_in_correct_subgroup_assuming_on_curve());
        }
    }

    #[test]
    fn homomorphism() {
        let key = CommitKey::derive(6);
        let mut rng = rng();
        for _ in 0..20 {
            let v: Vec<Fr> = (0..6).map(|_| Fr::rand(&mut rng)).collect();
            let w: Vec<Fr> = (0..6).map(|_| Fr::rand(&mut rng)).collect();
            let (r1, r2) = (Fr::rand(&mut rng), Fr::rand(&mut rng));
            let sum: Vec<Fr> = v.iter().zip(&w).map(|(a, b)| *a + b).collect();
            let lhs = key.commit_scalars(&v, &r1).unwrap() + key.commit_scalars(&w, &r2).unwrap();
            assert_eq!(lhs.into_affine(), key.commit_scalars(&sum, &(r1 + r2)).unwrap());
        }
    }

    #[test]
    fn hiding_sanity_and_openings() {
        let bytes = b"a small serialized model".to_vec();
        let key = CommitKey::derive(chunk_count(bytes.len()));
        let mut rng = rng();
        let (r1, r2) = (random_opening(&mut rng), random_opening(&mut rng));
        let c1 = commit(&key, &bytes, &r1).unwrap();
        let c2 = commit(&key, &bytes, &r2).unwrap();
        assert_ne!(c1, c2);
        assert!(verify_opening(&key, &c1, &bytes, &r1));
        assert!(verify_opening(&key, &c2, &bytes, &r2));
        assert!(!verify_opening(&key, &c1, &bytes, &r2));
    }

    #[test]
    fn single_byte_tamper_sweep() {
        let mut rng = rng();
        let bytes: Vec<u8> = (0..70).map(|_| rng.gen()).collect();
        let key = CommitKey::derive(chunk_count(bytes.len()));
        let r = random_opening(&mut rng);
        let cm = commit(&key, &bytes, &r).unwrap();
        for i in 0..bytes.len() {
            for delta in [1u8, 0x80] {
                let mut t = bytes.clone();
                t[i] ^= delta;
                assert!(!verify_opening(&key, &cm, &t, &r));
            }
        }
    }

    #[test]
    fn key_too_small() {
        let key = CommitKey::derive(1);
        let err = commit(&key, &[1u8; 40], &Fr::zero()).unwrap_err();
        assert_eq!(err, CommitError::KeyTooSmall { capacity: 1, needed: 2 });
        assert_eq!(commit(&key, &[], &Fr::zero()).unwrap_err(), CommitError::Empty);
    }

    #[test]
    fn encoding_round_trip() {
        let key = CommitKey::derive(2);
        let cm = commit(&key, b"xyz", &Fr::from(9u64)).unwrap();
        assert_eq!(Commitment::from_hex(&cm.to_hex()).unwrap(), cm);
        assert!(Commitment::from_bytes(&[0u8; 10]).is_err());
    }

    #[test]
    fn shared_key_grows() {
        let a = CommitKey::shared(10);
        let b = CommitKey::shared(100);
        assert!(b.capacity() >= 100);
        assert_eq!(a.generators()[..10], b.generators()[..10]);
    }
}
