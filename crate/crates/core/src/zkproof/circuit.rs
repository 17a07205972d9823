//! The proof-of-accuracy statement and its R1CS arithmetization.

use ark_ec::AffineRepr;
use ark_ff::One;

use super::gadgets::{
    alloc_bits, boolean, bytes_from_bits, clamp_gadget, const_bytes, enforce_equal, max_gadget,
    mul, pack_bits, pack_chunks, poseidon, pow2, range_bits,
};
use super::r1cs::{ConstraintSink, Lc, R1cs, Var};
use super::{ProofError, Result};
use crate::commit::{link_hash, Commitment};
use crate::field::{chunk_bytes, fr_from_bytes, fr_from_i64, fr_to_bytes, Fr};
use crate::poseidon::hash_bytes;
use crate::quant::{
    quantized_forward, correctness, FixedMultiplier, InferenceTrace, LayerShape, LayerSpec,
    LayerTrace, ModelShape, QuantParams, QuantizedModel, QuantizedTensor, MODEL_MAGIC,
    MODEL_VERSION, TAG_DENSE, TAG_RELU,
};

/// Bits allotted to signed pre-clamp outputs in range checks.
const WIDE_BITS: usize = 64;

/// Sample-major serialization of a test set: each value as `bit_width / 8` little-endian bytes.
pub fn dataset_bytes(inputs: &QuantizedTensor) -> Vec<u8> {
    let width = inputs.params().bit_width as usize / 8;
    let mut out = Vec::with_capacity(inputs.values().len() * width);
    for c in 0..inputs.cols() {
        for j in 0..inputs.rows() {
            out.extend_from_slice(&(inputs.get(j, c) as u64).to_le_bytes()[..width]);
        }
    }
    out
}

pub fn dataset_digest(inputs: &QuantizedTensor) -> [u8; 32] {
    fr_to_bytes(&hash_bytes(&dataset_bytes(inputs)))
}

pub fn labels_digest(labels: &[u8]) -> [u8; 32] {
    fr_to_bytes(&hash_bytes(labels))
}

/// A labelled test set in model input space (`features x samples`).
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    inputs: QuantizedTensor,
    labels: Vec<u8>,
    dataset_digest: [u8; 32],
    labels_digest: [u8; 32],
}

impl TestSet {
    pub fn new(inputs: QuantizedTensor, labels: Vec<u8>) -> Result<Self> {
        if inputs.cols() != labels.len() || labels.is_empty() {
            return Err(ProofError::UnsatisfiableWitness(format!(
                "{} samples with {} labels",
                inputs.cols(),
                labels.len()
            )));
        }
        Ok(Self {
            dataset_digest: dataset_digest(&inputs),
            labels_digest: labels_digest(&labels),
            inputs,
            labels,
        })
    }

    pub fn inputs(&self) -> &QuantizedTensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    pub fn dataset_digest(&self) -> [u8; 32] {
        self.dataset_digest
    }

    pub fn labels_digest(&self) -> [u8; 32] {
        self.labels_digest
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub commitment: Commitment,
    pub dataset_digest: [u8; 32],
    pub labels_digest: [u8; 32],
    pub claimed_acc: u64,
    pub shape: ModelShape,
    pub samples: usize,
}

impl Statement {
    pub fn new(commitment: Commitment, test: &TestSet, claimed_acc: u64, shape: ModelShape) -> Self {
        Self {
            commitment,
            dataset_digest: test.dataset_digest(),
            labels_digest: test.labels_digest(),
            claimed_acc,
            shape,
            samples: test.samples(),
        }
    }

    /// Public inputs in allocation order: link, dataset digest, labels digest, accuracy.
    pub fn public_inputs(&self) -> Option<Vec<Fr>> {
        Some(vec![
            self.commitment.link,
            fr_from_bytes(&self.dataset_digest)?,
            fr_from_bytes(&self.labels_digest)?,
            Fr::from(self.claimed_acc),
        ])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub model: QuantizedModel,
    pub opening: Fr,
    pub inputs: QuantizedTensor,
    pub labels: Vec<u8>,
    pub trace: InferenceTrace,
    pub correct: Vec<bool>,
}

impl Witness {
    /// Runs the model over the test set and records everything the circuit needs.
    pub fn new(model: QuantizedModel, opening: Fr, test: &TestSet) -> Result<Self> {
        let (logits, trace) = quantized_forward(&model, test.inputs())
            .map_err(|e| ProofError::UnsatisfiableWitness(e.to_string()))?;
        let correct = correctness(&logits, test.labels());
        Ok(Self {
            model,
            opening,
            inputs: test.inputs().clone(),
            labels: test.labels().to_vec(),
            trace,
            correct,
        })
    }

    pub fn accuracy(&self) -> u64 {
        self.correct.iter().filter(|c| **c).count() as u64
    }

    /// All-zero model and data of the given shape; only its structure matters.
    pub fn dummy(shape: &ModelShape, samples: usize) -> Result<(Statement, Witness)> {
        check_supported(shape, samples)?;
        let bw = shape.bit_width;
        let unit = QuantParams::new(1.0, 0, bw).map_err(unsupported)?;
        let mult = FixedMultiplier::new(1, shape.shift).map_err(unsupported)?;
        let layers = shape
            .layers
            .iter()
            .map(|l| match *l {
                LayerShape::Dense { inputs, outputs } => Ok(LayerSpec::Dense {
                    weights: QuantizedTensor::new(outputs, inputs, vec![0; inputs * outputs], unit)?,
                    bias: vec![0; outputs],
                    multiplier: mult,
                    out_params: unit,
                }),
                LayerShape::Relu { width } => Ok(LayerSpec::Relu { width, out_params: unit }),
            })
            .collect::<std::result::Result<Vec<_>, crate::quant::QuantError>>()
            .map_err(unsupported)?;
        let model = QuantizedModel::new(shape.input_dim, QuantParams::unit_interval(bw), shape.shift, layers)
            .map_err(unsupported)?;
        let inputs = QuantizedTensor::new(
            shape.input_dim,
            samples,
            vec![0; shape.input_dim * samples],
            QuantParams::unit_interval(bw),
        )
        .map_err(unsupported)?;
        let test = TestSet::new(inputs, vec![0; samples])?;
        let opening = Fr::from(0u64);
        let link = link_hash(&chunk_bytes(&model.to_bytes()), &opening);
        let commitment = Commitment { point: ark_bls12_381::G1Affine::zero(), link };
        let witness = Witness::new(model, opening, &test)?;
        let statement = Statement::new(commitment, &test, witness.accuracy(), shape.clone());
        Ok((statement, witness))
    }
}

fn unsupported(e: impl std::fmt::Display) -> ProofError {
    ProofError::UnsupportedCircuit(e.to_string())
}

/// Rejects architectures the circuit cannot express.
pub fn check_supported(shape: &ModelShape, samples: usize) -> Result<()> {
    shape.validate().map_err(unsupported)?;
    if samples == 0 {
        return Err(ProofError::UnsupportedCircuit("empty test set".into()));
    }
    if shape.classes() < 2 || shape.classes() > 256 {
        return Err(ProofError::UnsupportedCircuit(format!("{} classes", shape.classes())));
    }
    if !matches!(shape.layers.last(), Some(LayerShape::Dense { .. })) {
        return Err(ProofError::UnsupportedCircuit("last layer must be fully connected".into()));
    }
    Ok(())
}

/// Checks that the witness has the dimensions the statement promises.
fn check_dimensions(st: &Statement, w: &Witness) -> Result<()> {
    check_supported(&st.shape, st.samples)?;
    let bad = |m: &str| Err(ProofError::UnsatisfiableWitness(m.into()));
    if w.model.shape() != st.shape {
        return bad("model shape differs from statement");
    }
    if w.inputs.cols() != st.samples || w.labels.len() != st.samples || w.inputs.rows() != st.shape.input_dim {
        return bad("test set size differs from statement");
    }
    if w.trace.layers.len() != st.shape.layers.len() {
        return bad("trace length differs from model depth");
    }
    for (l, t) in st.shape.layers.iter().zip(&w.trace.layers) {
        let ok = match (l, t) {
            (LayerShape::Dense { outputs, .. }, LayerTrace::Dense(d)) => {
                d.output.raw.len() == outputs * st.samples && d.output.remainder.len() == outputs * st.samples
            }
            (LayerShape::Relu { .. }, LayerTrace::Relu { .. }) => true,
            _ => false,
        };
        if !ok {
            return bad("trace does not match model layers");
        }
    }
    if w.labels.iter().any(|l| *l as usize >= st.shape.classes()) {
        return bad("label out of range");
    }
    Ok(())
}

/// Native check of everything the circuit enforces.
pub fn check_witness(st: &Statement, w: &Witness) -> Result<()> {
    check_dimensions(st, w)?;
    let bad = |m: &str| Err(ProofError::UnsatisfiableWitness(m.into()));
    if link_hash(&chunk_bytes(&w.model.to_bytes()), &w.opening) != st.commitment.link {
        return bad("opening does not match commitment");
    }
    if dataset_digest(&w.inputs) != st.dataset_digest || labels_digest(&w.labels) != st.labels_digest {
        return bad("test set does not match statement digests");
    }
    let (logits, trace) =
        quantized_forward(&w.model, &w.inputs).map_err(|e| ProofError::UnsatisfiableWitness(e.to_string()))?;
    if trace != w.trace || !trace.check() {
        return bad("trace is not the model's execution");
    }
    let correct = correctness(&logits, &w.labels);
    if correct != w.correct {
        return bad("correctness bits disagree with the trace");
    }
    if w.accuracy() != st.claimed_acc {
        return bad("claimed accuracy differs from the trace");
    }
    Ok(())
}

enum LayerVars {
    Dense {
        weights: Vec<Lc>,
        bias: Vec<Lc>,
        zw: Lc,
        zy: Lc,
        m: Lc,
        qmax: u64,
    },
    Relu {
        zp: Lc,
    },
}

struct ModelVars {
    input_zp: Lc,
    layers: Vec<LayerVars>,
    bytes: Vec<Lc>,
}

fn u32_bytes(v: usize) -> Vec<Lc> {
    const_bytes(&(v as u32).to_le_bytes())
}

/// Allocates the model and mirrors its serialized container byte for byte.
fn alloc_model<S: ConstraintSink>(cs: &mut S, model: &QuantizedModel) -> ModelVars {
    let bw = model.bit_width() as usize;
    let mut bytes = Vec::with_capacity(model.shape().serialized_len());
    bytes.extend(const_bytes(MODEL_MAGIC));
    bytes.extend(const_bytes(&MODEL_VERSION.to_le_bytes()));
    bytes.extend(const_bytes(&[bw as u8, model.shift as u8]));
    bytes.extend(u32_bytes(model.input_dim));
    let scale = alloc_bits(cs, model.input_params.scale.to_bits(), 64);
    bytes.extend(bytes_from_bits(&scale, 8));
    let mut zp_bits = alloc_bits(cs, model.input_params.zero_point as u64, bw);
    bytes.extend(bytes_from_bits(&zp_bits, 8));
    let input_zp = pack_bits(&zp_bits);
    bytes.extend(u32_bytes(model.layers.len()));

    let mut layers = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        match layer {
            LayerSpec::Dense { weights, bias, multiplier, out_params } => {
                bytes.extend(const_bytes(&[TAG_DENSE]));
                bytes.extend(u32_bytes(weights.rows()));
                bytes.extend(u32_bytes(weights.cols()));
                let mut w = Vec::with_capacity(weights.values().len());
                for v in weights.values() {
                    let bits = alloc_bits(cs, *v as u64, bw);
                    bytes.extend(bytes_from_bits(&bits, 8));
                    w.push(pack_bits(&bits));
                }
                let mut b = Vec::with_capacity(bias.len());
                for v in bias {
                    let bits = alloc_bits(cs, *v as u64, 64);
                    bytes.extend(bytes_from_bits(&bits, 8));
                    b.push(pack_bits(&bits[..63]) - Lc::var(bits[63]).scale(pow2(63)));
                }
                let w_scale = alloc_bits(cs, weights.params().scale.to_bits(), 64);
                bytes.extend(bytes_from_bits(&w_scale, 8));
                let zw = alloc_bits(cs, weights.params().zero_point as u64, bw);
                bytes.extend(bytes_from_bits(&zw, 8));
                let y_scale = alloc_bits(cs, out_params.scale.to_bits(), 64);
                bytes.extend(bytes_from_bits(&y_scale, 8));
                zp_bits = alloc_bits(cs, out_params.zero_point as u64, bw);
                bytes.extend(bytes_from_bits(&zp_bits, 8));
                let m = alloc_bits(cs, multiplier.m as u64, 63);
                bytes.extend(bytes_from_bits(&m, 8));
                layers.push(LayerVars::Dense {
                    weights: w,
                    bias: b,
                    zw: pack_bits(&zw),
                    zy: pack_bits(&zp_bits),
                    m: pack_bits(&m),
                    qmax: out_params.qmax() as u64,
                });
            }
            LayerSpec::Relu { width, out_params } => {
                bytes.extend(const_bytes(&[TAG_RELU]));
                bytes.extend(u32_bytes(*width));
                let scale = alloc_bits(cs, out_params.scale.to_bits(), 64);
                bytes.extend(bytes_from_bits(&scale, 8));
                // a ReLU keeps its input zero point, so the bytes reuse those bits
                bytes.extend(bytes_from_bits(&zp_bits, 8));
                layers.push(LayerVars::Relu { zp: pack_bits(&zp_bits) });
            }
        }
    }
    ModelVars { input_zp, layers, bytes }
}

/// Per-model terms of one dense layer, shared by every sample.
struct DenseConsts {
    g2: Vec<Lc>,
    n_zw_zx: Lc,
    m_prime: Lc,
}

fn dense_consts<S: ConstraintSink>(
    cs: &mut S,
    weights: &[Lc],
    rows: usize,
    zw: &Lc,
    zx: &Lc,
    zy: &Lc,
    m: &Lc,
    m_prime: i64,
    shift: u32,
) -> DenseConsts {
    let cols = weights.len() / rows;
    let g2 = weights
        .chunks(cols)
        .map(|row| {
            let mut sum = Lc::zero();
            for w in row {
                sum = sum + w;
            }
            Lc::var(mul(cs, zx, &sum.compact()))
        })
        .collect();
    let zwzx = mul(cs, zw, zx);
    let n_zw_zx = Lc::var(zwzx).scale(Fr::from(cols as u64));
    // M' = ceil(z_y 2^k / M)  <=>  0 <= M' M - z_y 2^k < M
    let mp = cs.alloc_witness(fr_from_i64(m_prime));
    range_bits(cs, &Lc::var(mp), 64);
    let prod = mul(cs, &Lc::var(mp), m);
    let t = Lc::var(prod) - zy.clone().scale(pow2(shift));
    range_bits(cs, &t, 64);
    range_bits(cs, &(m.clone() - Lc::constant(Fr::one()) - &t), 64);
    DenseConsts { g2, n_zw_zx, m_prime: Lc::var(mp) }
}

/// `1` iff the lowest-index argmax of `logits` is the one-hot label.
fn argmax_bit<S: ConstraintSink>(cs: &mut S, logits: &[Lc], onehot: &[Var], bw: usize) -> Lc {
    let mut chosen = Lc::zero();
    for (o, l) in onehot.iter().zip(logits) {
        chosen = chosen + Lc::var(mul(cs, &Lc::var(*o), l));
    }
    let mut correct: Option<Lc> = None;
    for j in 0..logits.len() {
        // label > j must win strictly, label <= j may tie
        let mut after = Lc::zero();
        for o in &onehot[j + 1..] {
            after.add_term(*o, Fr::one());
        }
        let v = chosen.clone() - &logits[j] - &after + Lc::constant(pow2(bw as u32));
        let bits = range_bits(cs, &v.compact(), bw + 1);
        let g = Lc::var(bits[bw]);
        correct = Some(match correct {
            None => g,
            Some(c) => Lc::var(mul(cs, &c, &g)),
        });
    }
    correct.unwrap_or_else(Lc::zero)
}

/// Writes the full statement into `cs`.
pub fn synthesize<S: ConstraintSink>(cs: &mut S, st: &Statement, w: &Witness) -> Result<()> {
    check_dimensions(st, w)?;
    let bad_digest = || ProofError::UnsatisfiableWitness("non-canonical digest".into());
    let link = cs.alloc_input(st.commitment.link);
    let dd = cs.alloc_input(fr_from_bytes(&st.dataset_digest).ok_or_else(bad_digest)?);
    let ld = cs.alloc_input(fr_from_bytes(&st.labels_digest).ok_or_else(bad_digest)?);
    let acc = cs.alloc_input(Fr::from(st.claimed_acc));

    let shape = &st.shape;
    let bw = shape.bit_width as usize;
    let shift = shape.shift;

    // (a) opening of the committed model
    let mv = alloc_model(cs, &w.model);
    let r = cs.alloc_witness(w.opening);
    let mut link_inputs = pack_chunks(&mv.bytes);
    link_inputs.push(Lc::var(r));
    let h = poseidon(cs, &link_inputs);
    enforce_equal(cs, h, Lc::var(link));

    let mut consts = Vec::with_capacity(mv.layers.len());
    let mut zx = mv.input_zp.clone();
    for (layer, spec) in mv.layers.iter().zip(&w.model.layers) {
        match (layer, spec) {
            (LayerVars::Dense { weights, zw, zy, m, .. }, LayerSpec::Dense { multiplier, out_params, .. }) => {
                let rows = layer_rows(spec);
                let mp = multiplier.m_prime(out_params.zero_point);
                consts.push(Some(dense_consts(cs, weights, rows, zw, &zx, zy, m, mp, shift)));
                zx = zy.clone();
            }
            _ => consts.push(None),
        }
    }

    // (b) per-sample inference, (c) argmax bits
    let classes = shape.classes();
    let mut data_bytes = Vec::with_capacity(st.samples * shape.input_dim * bw / 8);
    let mut label_bytes = Vec::with_capacity(st.samples);
    let mut total = Lc::zero();
    for c in 0..st.samples {
        let mut x: Vec<Lc> = Vec::with_capacity(shape.input_dim);
        for j in 0..shape.input_dim {
            let bits = alloc_bits(cs, w.inputs.get(j, c) as u64, bw);
            data_bytes.extend(bytes_from_bits(&bits, bw / 8));
            x.push(pack_bits(&bits));
        }
        for ((layer, trace), k) in mv.layers.iter().zip(&w.trace.layers).zip(&consts) {
            x = match (layer, trace, k) {
                (LayerVars::Dense { weights, bias, zw, m, qmax, .. }, LayerTrace::Dense(t), Some(k)) => {
                    let n = x.len();
                    let mut colsum = Lc::zero();
                    for v in &x {
                        colsum = colsum + v;
                    }
                    let g3 = Lc::var(mul(cs, zw, &colsum.compact()));
                    let mut out = Vec::with_capacity(bias.len());
                    for (i, b) in bias.iter().enumerate() {
                        let mut g1 = Lc::zero();
                        for (wij, xj) in weights[i * n..(i + 1) * n].iter().zip(&x) {
                            g1.add_term(mul(cs, wij, xj), Fr::one());
                        }
                        let bracket = g1 + b + &k.n_zw_zx + &k.m_prime - &k.g2[i] - &g3;
                        let idx = i * st.samples + c;
                        let y = cs.alloc_witness(fr_from_i64(t.output.raw[idx]));
                        let rem = cs.alloc_witness(fr_from_i64(t.output.remainder[idx]));
                        range_bits(cs, &Lc::var(rem), shift as usize);
                        let rhs = Lc::var(y).scale(pow2(shift)) + Lc::var(rem);
                        cs.enforce(m.clone(), bracket, rhs);
                        out.push(clamp_gadget(cs, y, *qmax, WIDE_BITS));
                    }
                    out
                }
                (LayerVars::Relu { zp }, LayerTrace::Relu { .. }, None) => {
                    x.iter().map(|v| max_gadget(cs, v, zp, bw)).collect()
                }
                _ => return Err(ProofError::UnsatisfiableWitness("trace does not match model layers".into())),
            };
        }
        let label = w.labels[c] as usize;
        let onehot: Vec<Var> = (0..classes).map(|l| boolean(cs, l == label)).collect();
        let mut sum = Lc::zero();
        let mut byte = Lc::zero();
        for (l, o) in onehot.iter().enumerate() {
            sum.add_term(*o, Fr::one());
            byte.add_term(*o, Fr::from(l as u64));
        }
        enforce_equal(cs, sum, Lc::constant(Fr::one()));
        label_bytes.push(byte);
        total = total + argmax_bit(cs, &x, &onehot, bw);
    }

    // (d) accuracy and test-set digests
    enforce_equal(cs, total, Lc::var(acc));
    let chunks = pack_chunks(&data_bytes);
    let h = poseidon(cs, &chunks);
    enforce_equal(cs, h, Lc::var(dd));
    let chunks = pack_chunks(&label_bytes);
    let h = poseidon(cs, &chunks);
    enforce_equal(cs, h, Lc::var(ld));
    Ok(())
}

fn layer_rows(spec: &LayerSpec) -> usize {
    match spec {
        LayerSpec::Dense { weights, .. } => weights.rows(),
        LayerSpec::Relu { width, .. } => *width,
    }
}

/// The statement as an explicit constraint system with its assignment.
pub fn synthesize_r1cs(st: &Statement, w: &Witness) -> Result<R1cs> {
    let mut cs = R1cs::new();
    synthesize(&mut cs, st, w)?;
    Ok(cs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::honest;

    #[test]
    fn model_bytes_are_mirrored_exactly() {
        let (_, w) = honest(&[5, 4, 3], 2, 1);
        let mut cs = R1cs::new();
        let mv = alloc_model(&mut cs, &w.model);
        let expected = w.model.to_bytes();
        assert_eq!(mv.bytes.len(), expected.len());
        for (lc, b) in mv.bytes.iter().zip(&expected) {
            assert_eq!(cs.eval(lc), Fr::from(*b as u64));
        }
        assert!(cs.is_satisfied());
    }

    #[test]
    fn honest_witness_satisfies() {
        for seed in 0..4 {
            let (st, w) = honest(&[6, 5, 4], 3, seed);
            check_witness(&st, &w).unwrap();
            let cs = synthesize_r1cs(&st, &w).unwrap();
            assert_eq!(cs.first_unsatisfied(), None, "seed {seed}");
            assert_eq!(cs.inputs(), &st.public_inputs().unwrap()[..]);
        }
    }

    #[test]
    fn accuracy_plus_one_is_unsatisfiable() {
        let (mut st, w) = honest(&[6, 5, 4], 3, 9);
        st.claimed_acc += 1;
        assert!(check_witness(&st, &w).is_err());
        assert!(!synthesize_r1cs(&st, &w).unwrap().is_satisfied());
    }

    #[test]
    fn remainder_at_modulus_is_unsatisfiable() {
        let (st, mut w) = honest(&[6, 5, 4], 3, 10);
        if let LayerTrace::Dense(d) = &mut w.trace.layers[0] {
            d.output.remainder[0] = 1 << st.shape.shift;
        }
        assert!(check_witness(&st, &w).is_err());
        assert!(!synthesize_r1cs(&st, &w).unwrap().is_satisfied());
        // also when the quotient is shifted to keep the identity
        let (st, mut w) = honest(&[6, 5, 4], 3, 10);
        if let LayerTrace::Dense(d) = &mut w.trace.layers[0] {
            d.output.remainder[0] += 1 << st.shape.shift;
            d.output.raw[0] -= 1;
        }
        assert!(!synthesize_r1cs(&st, &w).unwrap().is_satisfied());
    }

    #[test]
    fn wrong_label_or_data_is_unsatisfiable() {
        let (st, mut w) = honest(&[6, 5, 4], 3, 11);
        w.labels[0] = (w.labels[0] + 1) % 4;
        assert!(!synthesize_r1cs(&st, &w).unwrap().is_satisfied());
        let (st, w) = honest(&[6, 5, 4], 3, 11);
        let (st2, _) = honest(&[6, 5, 4], 3, 12);
        let mut swapped = st.clone();
        swapped.dataset_digest = st2.dataset_digest;
        assert!(!synthesize_r1cs(&swapped, &w).unwrap().is_satisfied());
    }

    #[test]
    fn model_swap_is_unsatisfiable() {
        let (st_a, _) = honest(&[6, 5, 4], 3, 13);
        let (_, w_b) = honest(&[6, 5, 4], 3, 14);
        let mut st = st_a.clone();
        st.dataset_digest = dataset_digest(&w_b.inputs);
        st.labels_digest = labels_digest(&w_b.labels);
        st.claimed_acc = w_b.accuracy();
        assert!(!synthesize_r1cs(&st, &w_b).unwrap().is_satisfied());
    }

    #[test]
    fn structure_is_independent_of_values() {
        let (st_a, w_a) = honest(&[6, 5, 4], 3, 20);
        let (st_b, w_b) = honest(&[6, 5, 4], 3, 21);
        let a = synthesize_r1cs(&st_a, &w_a).unwrap();
        let b = synthesize_r1cs(&st_b, &w_b).unwrap();
        let (ds, dw) = Witness::dummy(&st_a.shape, 3).unwrap();
        let d = synthesize_r1cs(&ds, &dw).unwrap();
        assert!(d.is_satisfied());
        assert_eq!(a.num_witness(), b.num_witness());
        assert_eq!(a.structure(), b.structure());
        assert_eq!(a.structure(), d.structure());
    }

    #[test]
    fn argmax_ties_go_to_lowest_index() {
        let mut cs = R1cs::new();
        let logits: Vec<Lc> = [7u64, 9, 9, 3].iter().map(|v| Lc::var(cs.alloc_witness(Fr::from(*v)))).collect();
        let expect = [false, true, false, false];
        for label in 0..4 {
            let onehot: Vec<Var> = (0..4).map(|l| boolean(&mut cs, l == label)).collect();
            let bit = argmax_bit(&mut cs, &logits, &onehot, 8);
            assert_eq!(cs.eval(&bit) == Fr::one(), expect[label], "label {label}");
        }
        assert!(cs.is_satisfied());
    }

    #[test]
    fn unsupported_shapes() {
        let shape = ModelShape::mlp(&[4, 3], 8, 24);
        assert!(matches!(check_supported(&shape, 0), Err(ProofError::UnsupportedCircuit(_))));
        let mut relu_last = shape.clone();
        relu_last.layers.push(LayerShape::Relu { width: 3 });
        assert!(matches!(check_supported(&relu_last, 2), Err(ProofError::UnsupportedCircuit(_))));
        assert!(check_supported(&shape, 2).is_ok());
    }
}
