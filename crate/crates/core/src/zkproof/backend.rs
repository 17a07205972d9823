//! Setup/prove/verify backends and their byte formats.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use ark_bls12_381::Bls12_381;
use ark_groth16::{Groth16, PreparedVerifyingKey};
use ark_relations::r1cs::{ConstraintSynthesizer, ConstraintSystemRef, SynthesisError};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize, Compress, Validate};
use ark_snark::SNARK;
use rand_chacha::ChaCha20Rng;

use super::circuit::{check_supported, check_witness, synthesize, Statement, TestSet, Witness};
use super::r1cs::ArkSink;
use super::{ProofError, Result};
use crate::commit::{verify_opening, CommitKey};
use crate::field::{fr_from_bytes, fr_to_bytes, Fr};
use crate::quant::{correctness, quantized_forward, InferenceTrace, LayerTrace, ModelShape, QuantizedModel};

/// SHA-256 over every recorded intermediate of a forward pass.
pub fn trace_digest(trace: &InferenceTrace) -> [u8; 32] {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    let mut put = |vals: &[i64]| {
        h.update((vals.len() as u64).to_le_bytes());
        for v in vals {
            h.update(v.to_le_bytes());
        }
    };
    for layer in &trace.layers {
        match layer {
            LayerTrace::Dense(d) => {
                put(&d.output.raw);
                put(&d.output.remainder);
                put(d.output.qy.values());
            }
            LayerTrace::Relu { output, .. } => put(output.values()),
        }
    }
    h.finalize().into()
}

const MAGIC: &[u8; 8] = b"ZKPOTPRF";
const FORMAT_VERSION: u16 = 1;
const OBJ_PROVING_KEY: u8 = 1;
const OBJ_VERIFYING_KEY: u8 = 2;
const OBJ_PROOF: u8 = 3;
/// Magic, version, backend tag, then the payload's leading object-type byte.
const HEADER_LEN: usize = 12;

/// Largest supported security parameter; BLS12-381 gives about 128 bits.
pub const MAX_SECURITY_BITS: u32 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Oracle = 1,
    Snark = 2,
}

impl BackendKind {
    fn from_tag(t: u8) -> Option<Self> {
        match t {
            1 => Some(Self::Oracle),
            2 => Some(Self::Snark),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Snark => "snark",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "snark" => Ok(Self::Snark),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircuitConfig {
    /// Test-set size the keys are generated for.
    pub samples: usize,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self { samples: 100 }
    }
}

fn header(kind: BackendKind, obj: u8) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(kind as u8);
    out.push(obj);
    out
}

fn parse_header(bytes: &[u8], obj: u8) -> Option<(BackendKind, &[u8])> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC || bytes[8..10] != FORMAT_VERSION.to_le_bytes() || bytes[11] != obj {
        return None;
    }
    Some((BackendKind::from_tag(bytes[10])?, &bytes[HEADER_LEN..]))
}

fn put_shape(out: &mut Vec<u8>, shape: &ModelShape, samples: usize) {
    let s = shape.to_bytes();
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(&s);
    out.extend_from_slice(&(samples as u32).to_le_bytes());
}

fn take_shape(bytes: &[u8]) -> Option<(ModelShape, usize, &[u8])> {
    let len = u32::from_le_bytes(bytes.get(..4)?.try_into().ok()?) as usize;
    let shape = ModelShape::from_bytes(bytes.get(4..4 + len)?).ok()?;
    let rest = &bytes[4 + len..];
    let samples = u32::from_le_bytes(rest.get(..4)?.try_into().ok()?) as usize;
    Some((shape, samples, &rest[4..]))
}

#[derive(Clone)]
enum PkBody {
    Oracle,
    Snark(Arc<ark_groth16::ProvingKey<Bls12_381>>),
}

#[derive(Clone)]
enum VkBody {
    Oracle,
    Snark(Arc<ark_groth16::VerifyingKey<Bls12_381>>, Arc<PreparedVerifyingKey<Bls12_381>>),
}

#[derive(Clone)]
pub struct ProvingKey {
    kind: BackendKind,
    shape: ModelShape,
    samples: usize,
    body: PkBody,
}

#[derive(Clone)]
pub struct VerifyingKey {
    kind: BackendKind,
    shape: ModelShape,
    samples: usize,
    body: VkBody,
}

impl fmt::Debug for ProvingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ProvingKey({}, {} samples)", self.kind, self.samples)
    }
}

impl fmt::Debug for VerifyingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VerifyingKey({}, {} samples)", self.kind, self.samples)
    }
}

fn invalid_key(m: &str) -> ProofError {
    ProofError::InvalidKey(m.into())
}

impl ProvingKey {
    pub fn backend(&self) -> BackendKind {
        self.kind
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = header(self.kind, OBJ_PROVING_KEY);
        put_shape(&mut out, &self.shape, self.samples);
        if let PkBody::Snark(pk) = &self.body {
            pk.serialize_compressed(&mut out).expect("vec writer");
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (kind, rest) = parse_header(bytes, OBJ_PROVING_KEY).ok_or_else(|| invalid_key("bad header"))?;
        let (shape, samples, rest) = take_shape(rest).ok_or_else(|| invalid_key("bad shape"))?;
        let body = match kind {
            BackendKind::Oracle if rest.is_empty() => PkBody::Oracle,
            BackendKind::Oracle => return Err(invalid_key("trailing bytes")),
            BackendKind::Snark => {
                let mut reader = rest;
                let pk = ark_groth16::ProvingKey::deserialize_with_mode(&mut reader, Compress::Yes, Validate::No)
                    .map_err(|e| ProofError::InvalidKey(e.to_string()))?;
                if !reader.is_empty() {
                    return Err(invalid_key("trailing bytes"));
                }
                PkBody::Snark(Arc::new(pk))
            }
        };
        Ok(Self { kind, shape, samples, body })
    }
}

impl VerifyingKey {
    pub fn backend(&self) -> BackendKind {
        self.kind
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = header(self.kind, OBJ_VERIFYING_KEY);
        put_shape(&mut out, &self.shape, self.samples);
        if let VkBody::Snark(vk, _) = &self.body {
            vk.serialize_compressed(&mut out).expect("vec writer");
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (kind, rest) = parse_header(bytes, OBJ_VERIFYING_KEY).ok_or_else(|| invalid_key("bad header"))?;
        let (shape, samples, rest) = take_shape(rest).ok_or_else(|| invalid_key("bad shape"))?;
        let body = match kind {
            BackendKind::Oracle if rest.is_empty() => VkBody::Oracle,
            BackendKind::Oracle => return Err(invalid_key("trailing bytes")),
            BackendKind::Snark => {
                let mut reader = rest;
                let vk = ark_groth16::VerifyingKey::deserialize_compressed(&mut reader)
                    .map_err(|e| ProofError::InvalidKey(e.to_string()))?;
                if !reader.is_empty() {
                    return Err(invalid_key("trailing bytes"));
                }
                if vk.gamma_abc_g1.len() != 5 {
                    return Err(invalid_key("wrong number of public inputs"));
                }
                let pvk = Groth16::<Bls12_381>::process_vk(&vk).map_err(|e| ProofError::InvalidKey(e.to_string()))?;
                VkBody::Snark(Arc::new(vk), Arc::new(pvk))
            }
        };
        Ok(Self { kind, shape, samples, body })
    }
}

/// Opaque proof bytes with a format header.
#[derive(Clone, PartialEq, Eq)]
pub struct Proof(Vec<u8>);

impl Proof {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Proof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Proof({} bytes)", self.0.len())
    }
}

pub trait ProofBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    /// Keys depend on the shape, the test-set size and the randomness only.
    fn setup(
        &self,
        shape: &ModelShape,
        config: &CircuitConfig,
        security_bits: u32,
        rng: &mut ChaCha20Rng,
    ) -> Result<(ProvingKey, VerifyingKey)>;

    /// Checks the witness natively, then proves. Returns the proven accuracy.
    fn prove(&self, pk: &ProvingKey, st: &Statement, w: &Witness, rng: &mut ChaCha20Rng) -> Result<(u64, Proof)> {
        check_key(pk.kind, self.kind(), &pk.shape, pk.samples, st)?;
        check_witness(st, w)?;
        self.prove_unchecked(pk, st, w, rng)
    }

    /// Proves without the native witness check; a bad witness yields a proof that fails to verify.
    #[doc(hidden)]
    fn prove_unchecked(&self, pk: &ProvingKey, st: &Statement, w: &Witness, rng: &mut ChaCha20Rng) -> Result<(u64, Proof)>;

    /// `Ok(false)` for any rejected proof; errors only for unusable keys.
    fn verify(&self, vk: &VerifyingKey, st: &Statement, proof: &Proof) -> Result<bool>;

    /// Makes a test set available to verifiers that re-execute the model.
    fn register_test_set(&self, _test: &TestSet) {}
}

fn check_key(key: BackendKind, backend: BackendKind, shape: &ModelShape, samples: usize, st: &Statement) -> Result<()> {
    if key != backend {
        return Err(ProofError::InvalidKey(format!("{key} key given to the {backend} backend")));
    }
    if *shape != st.shape || samples != st.samples {
        return Err(ProofError::UnsatisfiableWitness("statement shape differs from the key".into()));
    }
    Ok(())
}

fn check_setup(shape: &ModelShape, config: &CircuitConfig, security_bits: u32) -> Result<()> {
    if security_bits > MAX_SECURITY_BITS {
        return Err(ProofError::UnsupportedCircuit(format!(
            "{security_bits}-bit security exceeds {MAX_SECURITY_BITS}"
        )));
    }
    check_supported(shape, config.samples)
}

pub fn backend_for(kind: BackendKind) -> Arc<dyn ProofBackend> {
    match kind {
        BackendKind::Oracle => Arc::new(OracleBackend::default()),
        BackendKind::Snark => Arc::new(SnarkBackend),
    }
}

/// Re-executes the committed model on the registered test set.
///
/// The proof reveals the model and opening, so this backend gives no
/// zero-knowledge; it exists for large simulations and cross-checking.
#[derive(Default)]
pub struct OracleBackend {
    test_sets: Mutex<HashMap<([u8; 32], [u8; 32]), Arc<TestSet>>>,
}

impl OracleBackend {
    fn lookup(&self, st: &Statement) -> Option<Arc<TestSet>> {
        let sets = self.test_sets.lock().unwrap_or_else(|e| e.into_inner());
        sets.get(&(st.dataset_digest, st.labels_digest)).cloned()
    }
}

impl ProofBackend for OracleBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Oracle
    }

    fn setup(
        &self,
        shape: &ModelShape,
        config: &CircuitConfig,
        security_bits: u32,
        _rng: &mut ChaCha20Rng,
    ) -> Result<(ProvingKey, VerifyingKey)> {
        check_setup(shape, config, security_bits)?;
        let (shape, samples) = (shape.clone(), config.samples);
        Ok((
            ProvingKey { kind: BackendKind::Oracle, shape: shape.clone(), samples, body: PkBody::Oracle },
            VerifyingKey { kind: BackendKind::Oracle, shape, samples, body: VkBody::Oracle },
        ))
    }

    fn prove_unchecked(&self, pk: &ProvingKey, st: &Statement, w: &Witness, _rng: &mut ChaCha20Rng) -> Result<(u64, Proof)> {
        check_key(pk.kind, self.kind(), &pk.shape, pk.samples, st)?;
        let model = w.model.to_bytes();
        let mut out = header(BackendKind::Oracle, OBJ_PROOF);
        out.extend_from_slice(&st.claimed_acc.to_le_bytes());
        out.extend_from_slice(&fr_to_bytes(&w.opening));
        out.extend_from_slice(&trace_digest(&w.trace));
        out.extend_from_slice(&(model.len() as u32).to_le_bytes());
        out.extend_from_slice(&model);
        Ok((st.claimed_acc, Proof(out)))
    }

    fn verify(&self, vk: &VerifyingKey, st: &Statement, proof: &Proof) -> Result<bool> {
        if vk.kind != BackendKind::Oracle {
            return Err(ProofError::InvalidKey(format!("{} key given to the oracle backend", vk.kind)));
        }
        if vk.shape != st.shape || vk.samples != st.samples {
            return Ok(false);
        }
        let Some((BackendKind::Oracle, body)) = parse_header(proof.as_bytes(), OBJ_PROOF) else {
            return Ok(false);
        };
        if body.len() < 8 + 32 + 32 + 4 {
            return Ok(false);
        }
        let acc = u64::from_le_bytes(body[..8].try_into().expect("8 bytes"));
        let Some(r) = fr_from_bytes(body[8..40].try_into().expect("32 bytes")) else {
            return Ok(false);
        };
        let digest = &body[40..72];
        let len = u32::from_le_bytes(body[72..76].try_into().expect("4 bytes")) as usize;
        let model_bytes = &body[76..];
        if acc != st.claimed_acc || model_bytes.len() != len {
            return Ok(false);
        }
        let Ok(model) = QuantizedModel::from_bytes(model_bytes) else {
            return Ok(false);
        };
        if model.shape() != st.shape {
            return Ok(false);
        }
        let key = CommitKey::for_bytes(model_bytes.len());
        if !verify_opening(&key, &st.commitment, model_bytes, &r) {
            return Ok(false);
        }
        let Some(test) = self.lookup(st) else {
            return Ok(false);
        };
        let Ok((logits, trace)) = quantized_forward(&model, test.inputs()) else {
            return Ok(false);
        };
        let correct = correctness(&logits, test.labels()).iter().filter(|c| **c).count() as u64;
        Ok(correct == acc && trace_digest(&trace) == digest)
    }

    fn register_test_set(&self, test: &TestSet) {
        let mut sets = self.test_sets.lock().unwrap_or_else(|e| e.into_inner());
        sets.entry((test.dataset_digest(), test.labels_digest()))
            .or_insert_with(|| Arc::new(test.clone()));
    }
}

struct ArkCircuit<'a> {
    statement: &'a Statement,
    witness: &'a Witness,
}

impl ConstraintSynthesizer<Fr> for ArkCircuit<'_> {
    fn generate_constraints(self, cs: ConstraintSystemRef<Fr>) -> std::result::Result<(), SynthesisError> {
        let mut sink = ArkSink::new(cs);
        synthesize(&mut sink, self.statement, self.witness).map_err(|_| SynthesisError::Unsatisfiable)?;
        sink.finish()
    }
}

/// Groth16 over BLS12-381 on the R1CS statement.
pub struct SnarkBackend;

const SNARK_PROOF_LEN: usize = 192;

impl ProofBackend for SnarkBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Snark
    }

    fn setup(
        &self,
        shape: &ModelShape,
        config: &CircuitConfig,
        security_bits: u32,
        rng: &mut ChaCha20Rng,
    ) -> Result<(ProvingKey, VerifyingKey)> {
        check_setup(shape, config, security_bits)?;
        let (st, w) = Witness::dummy(shape, config.samples)?;
        let circuit = ArkCircuit { statement: &st, witness: &w };
        let (pk, vk) = Groth16::<Bls12_381>::circuit_specific_setup(circuit, rng)
            .map_err(|e| ProofError::Synthesis(e.to_string()))?;
        let pvk = Groth16::<Bls12_381>::process_vk(&vk).map_err(|e| ProofError::Synthesis(e.to_string()))?;
        let (shape, samples) = (shape.clone(), config.samples);
        Ok((
            ProvingKey { kind: BackendKind::Snark, shape: shape.clone(), samples, body: PkBody::Snark(Arc::new(pk)) },
            VerifyingKey { kind: BackendKind::Snark, shape, samples, body: VkBody::Snark(Arc::new(vk), Arc::new(pvk)) },
        ))
    }

    fn prove_unchecked(&self, pk: &ProvingKey, st: &Statement, w: &Witness, rng: &mut ChaCha20Rng) -> Result<(u64, Proof)> {
        check_key(pk.kind, self.kind(), &pk.shape, pk.samples, st)?;
        let PkBody::Snark(key) = &pk.body else {
            return Err(invalid_key("oracle key given to the snark backend"));
        };
        let circuit = ArkCircuit { statement: st, witness: w };
        let proof = Groth16::<Bls12_381>::prove(key, circuit, rng).map_err(|e| ProofError::Synthesis(e.to_string()))?;
        let mut out = header(BackendKind::Snark, OBJ_PROOF);
        proof.serialize_compressed(&mut out).expect("vec writer");
        Ok((st.claimed_acc, Proof(out)))
    }

    fn verify(&self, vk: &VerifyingKey, st: &Statement, proof: &Proof) -> Result<bool> {
        let VkBody::Snark(_, pvk) = &vk.body else {
            return Err(invalid_key("oracle key given to the snark backend"));
        };
        if vk.shape != st.shape || vk.samples != st.samples {
            return Ok(false);
        }
        let Some((BackendKind::Snark, body)) = parse_header(proof.as_bytes(), OBJ_PROOF) else {
            return Ok(false);
        };
        if body.len() != SNARK_PROOF_LEN {
            return Ok(false);
        }
        let Ok(p) = ark_groth16::Proof::<Bls12_381>::deserialize_compressed(body) else {
            return Ok(false);
        };
        let Some(inputs) = st.public_inputs() else {
            return Ok(false);
        };
        Ok(Groth16::<Bls12_381>::verify_with_processed_vk(pvk, &inputs, &p).unwrap_or(false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::honest;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn oracle_round_trip_and_tamper() {
        let b = OracleBackend::default();
        let (st, w) = honest(&[6, 5, 4], 5, 3);
        let test = TestSet::new(w.inputs.clone(), w.labels.clone()).unwrap();
        let (pk, vk) = b.setup(&st.shape, &CircuitConfig { samples: 5 }, 128, &mut rng(0)).unwrap();
        let (acc, proof) = b.prove(&pk, &st, &w, &mut rng(1)).unwrap();
        assert_eq!(acc, st.claimed_acc);
        // unknown test set
        assert!(!b.verify(&vk, &st, &proof).unwrap());
        b.register_test_set(&test);
        assert!(b.verify(&vk, &st, &proof).unwrap());
        let mut inflated = st.clone();
        inflated.claimed_acc += 1;
        assert!(!b.verify(&vk, &inflated, &proof).unwrap());
        let mut cut = proof.as_bytes().to_vec();
        cut.pop();
        assert!(!b.verify(&vk, &st, &Proof::from_bytes(cut)).unwrap());
    }

    #[test]
    fn key_formats_round_trip() {
        let shape = ModelShape::mlp(&[3, 2], 8, 24);
        let cfg = CircuitConfig { samples: 2 };
        for b in [backend_for(BackendKind::Oracle), backend_for(BackendKind::Snark)] {
            let (pk, vk) = b.setup(&shape, &cfg, 128, &mut rng(4)).unwrap();
            let pk2 = ProvingKey::from_bytes(&pk.to_bytes()).unwrap();
            let vk2 = VerifyingKey::from_bytes(&vk.to_bytes()).unwrap();
            assert_eq!(pk2.to_bytes(), pk.to_bytes());
            assert_eq!(vk2.to_bytes(), vk.to_bytes());
            assert_eq!(vk2.shape(), &shape);
            let mut bad = vk.to_bytes();
            bad[0] ^= 1;
            assert!(matches!(VerifyingKey::from_bytes(&bad), Err(ProofError::InvalidKey(_))));
        }
    }

    #[test]
    fn security_parameter_bounds() {
        let shape = ModelShape::mlp(&[3, 2], 8, 24);
        let err = OracleBackend::default().setup(&shape, &CircuitConfig { samples: 2 }, 256, &mut rng(0));
        assert!(matches!(err, Err(ProofError::UnsupportedCircuit(_))));
    }

    #[test]
    fn keys_depend_only_on_shape_and_seed() {
        let (st_a, _) = honest(&[4, 3, 2], 2, 30);
        let cfg = CircuitConfig { samples: 2 };
        let (_, vk1) = SnarkBackend.setup(&st_a.shape, &cfg, 128, &mut rng(8)).unwrap();
        let (_, vk2) = SnarkBackend.setup(&st_a.shape, &cfg, 128, &mut rng(8)).unwrap();
        assert_eq!(vk1.to_bytes(), vk2.to_bytes());
    }
}
