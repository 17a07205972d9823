//! Random honest instances for tests, benchmarks and simulations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::commit::{commit, random_opening, CommitKey};
use crate::quant::{fixed_multiplier, quantize_with, LayerSpec, QuantParams, QuantizedModel, QuantizedTensor, RealTensor};
use crate::quant::LayerTrace;
use crate::zkproof::{Proof, ProofBackend, ProvingKey, Statement, TestSet, Witness};

/// Random valid model of the given MLP widths.
pub fn random_model(widths: &[usize], rng: &mut ChaCha20Rng) -> QuantizedModel {
    let bw = 8;
    let shift = 24;
    let input = QuantParams::unit_interval(bw);
    let mut prev = input;
    let mut layers = Vec::new();
    for (li, pair) in widths.windows(2).enumerate() {
        if li > 0 {
            layers.push(LayerSpec::Relu { width: pair[0], out_params: prev });
        }
        let (n, m) = (pair[0], pair[1]);
        let wp = QuantParams::new(0.01 + rng.gen::<f64>() * 0.02, rng.gen_range(100..156), bw).unwrap();
        let q: Vec<i64> = (0..n * m).map(|_| rng.gen_range(0..=255)).collect();
        let weights = QuantizedTensor::new(m, n, q, wp).unwrap();
        let out = QuantParams::new(0.05 + rng.gen::<f64>() * 0.1, rng.gen_range(0..64), bw).unwrap();
        let bias = (0..m).map(|_| rng.gen_range(-5000..5000)).collect();
        let multiplier = fixed_multiplier(wp.scale, prev.scale, out.scale, shift).unwrap();
        layers.push(LayerSpec::Dense { weights, bias, multiplier, out_params: out });
        prev = out;
    }
    QuantizedModel::new(widths[0], input, shift, layers).unwrap()
}

pub fn random_test_set(dim: usize, samples: usize, classes: usize, rng: &mut ChaCha20Rng) -> TestSet {
    let x: Vec<f64> = (0..dim * samples).map(|_| rng.gen()).collect();
    let t = RealTensor::new(dim, samples, x).unwrap();
    let q = quantize_with(&t, QuantParams::unit_interval(8)).unwrap();
    TestSet::new(q, (0..samples).map(|_| rng.gen_range(0..classes) as u8).collect()).unwrap()
}

/// Commits to `model` and runs it over `test`.
pub fn instance(model: QuantizedModel, test: &TestSet, rng: &mut ChaCha20Rng) -> (Statement, Witness) {
    let r = random_opening(rng);
    let bytes = model.to_bytes();
    let key = CommitKey::for_bytes(bytes.len());
    let cm = commit(&key, &bytes, &r).unwrap();
    let w = Witness::new(model, r, test).unwrap();
    let st = Statement::new(cm, test, w.accuracy(), w.model.shape());
    (st, w)
}

pub fn honest(widths: &[usize], samples: usize, seed: u64) -> (Statement, Witness) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let model = random_model(widths, &mut rng);
    let test = random_test_set(widths[0], samples, *widths.last().unwrap(), &mut rng);
    instance(model, &test, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tamper {
    /// Claims one more correct prediction than the trace has.
    AccPlusOne,
    /// Presents a proof about model A against the commitment to model B.
    ModelSwap,
    /// Moves one remainder out of `[0, 2^k)` while keeping the identity.
    CorruptRemainder,
    /// Flips one random bit of an honest proof.
    ProofBitFlip,
}

pub const TAMPERS: [Tamper; 4] = [Tamper::AccPlusOne, Tamper::ModelSwap, Tamper::CorruptRemainder, Tamper::ProofBitFlip];

/// Builds an adversarial `(statement, proof)` pair; the test set is registered with `backend`.
pub fn tampered(
    backend: &dyn ProofBackend,
    pk: &ProvingKey,
    widths: &[usize],
    samples: usize,
    seed: u64,
    tamper: Tamper,
) -> (Statement, Proof) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let model = random_model(widths, &mut rng);
    let test = random_test_set(widths[0], samples, *widths.last().unwrap(), &mut rng);
    backend.register_test_set(&test);
    let (mut st, mut w) = instance(model, &test, &mut rng);
    match tamper {
        Tamper::AccPlusOne => {
            let (_, proof) = backend.prove(pk, &st, &w, &mut rng).unwrap();
            st.claimed_acc += 1;
            (st, proof)
        }
        Tamper::ModelSwap => {
            let (_, proof) = backend.prove(pk, &st, &w, &mut rng).unwrap();
            let other = random_model(widths, &mut rng);
            let (st_b, _) = instance(other, &test, &mut rng);
            st.commitment = st_b.commitment;
            (st, proof)
        }
        Tamper::CorruptRemainder => {
            let shift = st.shape.shift;
            if let Some(LayerTrace::Dense(d)) = w.trace.layers.first_mut() {
                d.output.remainder[0] += 1 << shift;
                d.output.raw[0] -= 1;
            }
            let (_, proof) = backend.prove_unchecked(pk, &st, &w, &mut rng).unwrap();
            (st, proof)
        }
        Tamper::ProofBitFlip => {
            let (_, proof) = backend.prove(pk, &st, &w, &mut rng).unwrap();
            let mut bytes = proof.into_bytes();
            let bit = rng.gen_range(0..bytes.len() * 8);
            bytes[bit / 8] ^= 1 << (bit % 8);
            (st, Proof::from_bytes(bytes))
        }
    }
}
