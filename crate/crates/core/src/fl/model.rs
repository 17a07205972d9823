//! Float MLPs: SGD training, FedAvg, evaluation, checkpoints and quantization.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::data::Dataset;
use super::{FlError, Result, TrainConfig};
use crate::quant::{
    argmax_lowest, fixed_multiplier, quantize, LayerShape, LayerSpec, ModelShape, QuantParams,
    QuantizedModel, RealTensor, TAG_DENSE, TAG_RELU,
};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ZKPF";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum FloatLayer {
    /// `weights` is `out x in`.
    Dense { weights: Array2<f32>, bias: Array1<f32> },
    Relu { width: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloatModel {
    pub input_dim: usize,
    pub layers: Vec<FloatLayer>,
}

impl FloatModel {
    /// Fully connected network with ReLU between dense layers, He-uniform initialized.
    pub fn mlp(widths: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for (i, w) in widths.windows(2).enumerate() {
            if i > 0 {
                layers.push(FloatLayer::Relu { width: w[0] });
            }
            let bound = (6.0 / w[0] as f32).sqrt();
            let weights = Array2::from_shape_fn((w[1], w[0]), |_| rng.gen_range(-bound..bound));
            layers.push(FloatLayer::Dense { weights, bias: Array1::zeros(w[1]) });
        }
        Self { input_dim: widths[0], layers }
    }

    /// 784-128-10 MNIST classifier.
    pub fn shallow_net(seed: u64) -> Self {
        Self::mlp(&[784, 128, 10], seed)
    }

    pub fn shape(&self, bit_width: u8, shift: u32) -> ModelShape {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                FloatLayer::Dense { weights, .. } => LayerShape::Dense { inputs: weights.ncols(), outputs: weights.nrows() },
                FloatLayer::Relu { width } => LayerShape::Relu { width: *width },
            })
            .collect();
        ModelShape { input_dim: self.input_dim, bit_width, shift, layers }
    }

    pub fn classes(&self) -> usize {
        self.shape(8, 0).classes()
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                FloatLayer::Dense { weights, bias } => weights.len() + bias.len(),
                FloatLayer::Relu { .. } => 0,
            })
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| match l {
            FloatLayer::Dense { weights, bias } => weights.iter().chain(bias.iter()).all(|x| x.is_finite()),
            FloatLayer::Relu { .. } => true,
        })
    }

    /// Logits for a batch of samples (rows).
    pub fn forward(&self, x: ArrayView2<f32>) -> Array2<f32> {
        let mut a = x.to_owned();
        for layer in &self.layers {
            a = apply(layer, &a);
        }
        a
    }

    /// Predicted class per row, lowest index on ties.
    pub fn predict(&self, x: ArrayView2<f32>) -> Vec<usize> {
        self.forward(x)
            .outer_iter()
            .map(|row| argmax_lowest(row.iter().copied()).unwrap_or(0))
            .collect()
    }

    pub fn check_compatible(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.input_dim {
            return Err(FlError::ShapeError(format!(
                "model takes {} features, data has {}",
                self.input_dim,
                data.dim()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = CHECKPOINT_MAGIC.to_vec();
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.input_dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            match l {
                FloatLayer::Dense { weights, bias } => {
                    out.push(TAG_DENSE);
                    out.extend_from_slice(&(weights.nrows() as u32).to_le_bytes());
                    out.extend_from_slice(&(weights.ncols() as u32).to_le_bytes());
                    for v in weights.iter().chain(bias.iter()) {
                        out.extend_from_slice(&(*v as f64).to_le_bytes());
                    }
                }
                FloatLayer::Relu { width } => {
                    out.push(TAG_RELU);
                    out.extend_from_slice(&(*width as u32).to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| FlError::Format(format!("checkpoint: {m}"));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
            pos += n;
            Ok(s)
        };
        if take(4)? != CHECKPOINT_MAGIC {
            return Err(bad("magic"));
        }
        if u16::from_le_bytes(take(2)?.try_into().unwrap()) != CHECKPOINT_VERSION {
            return Err(bad("version"));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap()) as usize;
        let input_dim = u32_at(take(4)?);
        let count = u32_at(take(4)?);
        let mut layers = Vec::new();
        for _ in 0..count {
            match take(1)?[0] {
                TAG_DENSE => {
                    let rows = u32_at(take(4)?);
                    let cols = u32_at(take(4)?);
                    let n = rows.checked_mul(cols).ok_or_else(|| bad("size"))?;
                    let mut vals = Vec::with_capacity(n.min(1 << 24));
                    for _ in 0..n + rows {
                        vals.push(f64::from_le_bytes(take(8)?.try_into().unwrap()) as f32);
                    }
                    let bias = Array1::from(vals.split_off(n));
                    let weights = Array2::from_shape_vec((rows, cols), vals).map_err(|_| bad("shape"))?;
                    layers.push(FloatLayer::Dense { weights, bias });
                }
                TAG_RELU => layers.push(FloatLayer::Relu { width: u32_at(take(4)?) }),
                t => return Err(bad(&format!("layer tag {t}"))),
            }
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        let m = Self { input_dim, layers };
        m.shape(8, 0).validate().map_err(|e| bad(&e.to_string()))?;
        Ok(m)
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }

    /// Integer model with activation ranges calibrated on `calibration` (rows are samples).
    pub fn quantize(&self, calibration: ArrayView2<f32>, bit_width: u8, shift: u32) -> Result<QuantizedModel> {
        let input = QuantParams::unit_interval(bit_width);
        let mut prev = input;
        let mut a = calibration.to_owned();
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            match layer {
                FloatLayer::Dense { weights, bias } => {
                    let w = RealTensor::new(
                        weights.nrows(),
                        weights.ncols(),
                        weights.iter().map(|v| *v as f64).collect(),
                    )?;
                    let qw = quantize(&w, bit_width)?;
                    a = apply(layer, &a);
                    let (lo, hi) = a.iter().fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(*v as f64), hi.max(*v as f64)));
                    let (lo, hi) = if a.is_empty() { (0.0, 0.0) } else { (lo, hi) };
                    let out = QuantParams::from_range(lo, hi, bit_width)?;
                    let sb = qw.params().scale * prev.scale;
                    let qb = bias.iter().map(|b| (*b as f64 / sb).round() as i64).collect();
                    let multiplier = fixed_multiplier(qw.params().scale, prev.scale, out.scale, shift)?;
                    layers.push(LayerSpec::Dense { weights: qw, bias: qb, multiplier, out_params: out });
                    prev = out;
                }
                FloatLayer::Relu { width } => {
                    a = apply(layer, &a);
                    layers.push(LayerSpec::Relu { width: *width, out_params: prev });
                }
            }
        }
        Ok(QuantizedModel::new(self.input_dim, input, shift, layers)?)
    }
}

impl FloatModel {
    /// Real-valued model represented by a quantized container.
    pub fn dequantize(q: &QuantizedModel) -> Self {
        let mut prev = q.input_params.scale;
        let layers = q
            .layers
            .iter()
            .map(|l| match l {
                LayerSpec::Dense { weights, bias, out_params, .. } => {
                    let p = weights.params();
                    let w = Array2::from_shape_fn((weights.rows(), weights.cols()), |(r, c)| {
                        p.dequantize_value(weights.get(r, c)) as f32
                    });
                    let sb = p.scale * prev;
                    prev = out_params.scale;
                    FloatLayer::Dense { weights: w, bias: bias.iter().map(|b| (*b as f64 * sb) as f32).collect() }
                }
                LayerSpec::Relu { width, .. } => FloatLayer::Relu { width: *width },
            })
            .collect();
        Self { input_dim: q.input_dim, layers }
    }
}

fn apply(layer: &FloatLayer, a: &Array2<f32>) -> Array2<f32> {
    match layer {
        FloatLayer::Dense { weights, bias } => a.dot(&weights.t()) + bias,
        FloatLayer::Relu { .. } => a.mapv(|v| v.max(0.0)),
    }
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
fn softmax_xent(logits: &Array2<f32>, labels: &[u8]) -> (f64, Array2<f32>) {
    let n = logits.nrows() as f32;
    let mut grad = logits.clone();
    let mut loss = 0.0f64;
    for (mut row, y) in grad.outer_iter_mut().zip(labels) {
        let max = row.fold(f32::NEG_INFINITY, |m, v| m.max(*v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f32 = row.sum();
        loss += (sum.ln() - (row[*y as usize]).ln()) as f64;
        row.mapv_inplace(|v| v / sum / n);
        row[*y as usize] -= 1.0 / n;
    }
    (loss / labels.len().max(1) as f64, grad)
}

/// Mean cross-entropy of `model` on `data`.
pub fn loss(model: &FloatModel, data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    softmax_xent(&model.forward(data.features().view()), data.labels()).0
}

/// One SGD step on a batch; returns the batch loss before the step.
fn sgd_step(model: &mut FloatModel, x: Array2<f32>, labels: &[u8], lr: f32) -> f64 {
    let mut acts = Vec::with_capacity(model.layers.len() + 1);
    acts.push(x);
    for layer in &model.layers {
        let next = apply(layer, acts.last().expect("non-empty"));
        acts.push(next);
    }
    let (loss, mut delta) = softmax_xent(acts.last().expect("non-empty"), labels);
    for (i, layer) in model.layers.iter_mut().enumerate().rev() {
        let input = &acts[i];
        match layer {
            FloatLayer::Dense { weights, bias } => {
                let grad_w = delta.t().dot(input);
                let grad_b = delta.sum_axis(Axis(0));
                if i > 0 {
                    delta = delta.dot(weights);
                }
                weights.scaled_add(-lr, &grad_w);
                bias.scaled_add(-lr, &grad_b);
            }
            FloatLayer::Relu { .. } => {
                Zip::from(&mut delta).and(input).for_each(|d, a| {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
        }
    }
    loss
}

/// Mini-batch SGD on `data` for `cfg.local_epochs` epochs, shuffled by `cfg.seed`.
pub fn local_train(global: &FloatModel, data: &Dataset, cfg: &TrainConfig) -> Result<FloatModel> {
    global.check_compatible(data)?;
    let mut model = global.clone();
    if cfg.local_epochs == 0 || data.is_empty() {
        return Ok(model);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let lr = cfg.learning_rate as f32;
    for epoch in 0..cfg.local_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let x = data.features().select(Axis(0), batch);
            let labels: Vec<u8> = batch.iter().map(|i| data.labels()[*i]).collect();
            let l = sgd_step(&mut model, x, &labels, lr);
            if !l.is_finite() {
                return Err(FlError::TrainingDiverged(format!("loss {l} in epoch {epoch}")));
            }
        }
    }
    if !model.is_finite() {
        return Err(FlError::TrainingDiverged("non-finite parameters".into()));
    }
    Ok(model)
}

/// Size-weighted parameter average.
pub fn fedavg(models: &[FloatModel], sizes: &[usize]) -> Result<FloatModel> {
    let first = models.first().ok_or_else(|| FlError::ShapeError("no models to average".into()))?;
    if models.len() != sizes.len() {
        return Err(FlError::ShapeError(format!("{} models, {} sizes", models.len(), sizes.len())));
    }
    if sizes.iter().any(|s| *s == 0) {
        return Err(FlError::InvalidConfig("zero dataset size in fedavg".into()));
    }
    let shape = first.shape(8, 0);
    if models.iter().any(|m| m.shape(8, 0) != shape) {
        return Err(FlError::ShapeError("models differ in shape".into()));
    }
    let total: f64 = sizes.iter().map(|s| *s as f64).sum();
    let mut out = first.clone();
    for (li, layer) in out.layers.iter_mut().enumerate() {
        if let FloatLayer::Dense { weights, bias } = layer {
            let mut w = Array2::<f64>::zeros(weights.raw_dim());
            let mut b = Array1::<f64>::zeros(bias.raw_dim());
            for (m, s) in models.iter().zip(sizes) {
                if let FloatLayer::Dense { weights: mw, bias: mb } = &m.layers[li] {
                    let s = *s as f64;
                    Zip::from(&mut w).and(mw).for_each(|acc, v| *acc += s * *v as f64);
                    Zip::from(&mut b).and(mb).for_each(|acc, v| *acc += s * *v as f64);
                }
            }
            *weights = w.mapv(|v| (v / total) as f32);
            *bias = b.mapv(|v| (v / total) as f32);
        }
    }
    Ok(out)
}

/// Fraction of samples whose argmax (lowest index on ties) equals the label.
pub fn evaluate(model: &FloatModel, test: &Dataset) -> f64 {
    if test.is_empty() || model.check_compatible(test).is_err() {
        return 0.0;
    }
    let mut correct = 0usize;
    for start in (0..test.len()).step_by(2000) {
        let end = (start + 2000).min(test.len());
        let x = test.features().slice(ndarray::s![start..end, ..]);
        correct += model
            .predict(x)
            .iter()
            .zip(&test.labels()[start..end])
            .filter(|(p, y)| **p == **y as usize)
            .count();
    }
    correct as f64 / test.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::data::{synthetic, Split};

    fn cfg(epochs: usize, lr: f64) -> TrainConfig {
        TrainConfig { local_epochs: epochs, learning_rate: lr, batch_size: 16, seed: 3, ..TrainConfig::default() }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut model = FloatModel::mlp(&[5, 4, 3], 1);
        let data = synthetic(6, 5, 3, 2, Split::Train);
        let x = data.features().clone();
        let base = model.clone();
        // a tiny step along the negative gradient lowers the loss by about lr * |g|^2
        let lr = 1e-3;
        let l0 = sgd_step(&mut model, x.clone(), data.labels(), lr);
        let l1 = loss(&model, &data);
        assert!((l0 - loss(&base, &data)).abs() < 1e-6);
        assert!(l1 < l0);
        // numeric derivative along one weight
        let eps = 1e-2f32;
        let probe = |m: &FloatModel, d: f32| {
            let mut m = m.clone();
            if let FloatLayer::Dense { weights, .. } = &mut m.layers[0] {
                weights[[1, 2]] += d;
            }
            loss(&m, &data)
        };
        let numeric = (probe(&base, eps) - probe(&base, -eps)) / (2.0 * eps as f64);
        let mut stepped = base.clone();
        sgd_step(&mut stepped, x, data.labels(), 1.0);
        let analytic = match (&base.layers[0], &stepped.layers[0]) {
            (FloatLayer::Dense { weights: a, .. }, FloatLayer::Dense { weights: b, .. }) => (a[[1, 2]] - b[[1, 2]]) as f64,
            _ => unreachable!(),
        };
        assert!((numeric - analytic).abs() < 1e-3, "{numeric} vs {analytic}");
    }

    #[test]
    fn training_lowers_loss_and_zero_epochs_is_identity() {
        let m = FloatModel::mlp(&[16, 8, 4], 5);
        let data = synthetic(200, 16, 4, 9, Split::Train);
        assert_eq!(local_train(&m, &data, &cfg(0, 0.1)).unwrap(), m);
        let trained = local_train(&m, &data, &cfg(5, 0.1)).unwrap();
        assert!(loss(&trained, &data) <= loss(&m, &data));
        assert!(evaluate(&trained, &data) > 0.9);
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let m = FloatModel::mlp(&[16, 8, 4], 5);
        let data = synthetic(200, 16, 4, 9, Split::Train);
        assert!(matches!(local_train(&m, &data, &cfg(5, 1e3)), Err(FlError::TrainingDiverged(_))));
    }

    #[test]
    fn fedavg_weighted_sum_oracle() {
        let models: Vec<FloatModel> = (0..3).map(|s| FloatModel::mlp(&[3, 2], s)).collect();
        let avg = fedavg(&models, &[1, 2, 3]).unwrap();
        let w = |m: &FloatModel| match &m.layers[0] {
            FloatLayer::Dense { weights, bias } => (weights.clone(), bias.clone()),
            _ => unreachable!(),
        };
        let (aw, _) = w(&avg);
        for r in 0..2 {
            for c in 0..3 {
                let expect: f64 = models.iter().enumerate().map(|(i, m)| w(m).0[[r, c]] as f64 * (i + 1) as f64 / 6.0).sum();
                assert!((aw[[r, c]] as f64 - expect).abs() < 1e-6);
            }
        }
        assert_eq!(fedavg(&models[..1], &[7]).unwrap(), models[0]);
        assert_eq!(fedavg(&[models[0].clone(), models[0].clone()], &[3, 9]).unwrap(), models[0]);
        let mean = fedavg(&models[..2], &[4, 4]).unwrap();
        let expect = (w(&models[0]).0[[0, 0]] + w(&models[1]).0[[0, 0]]) / 2.0;
        assert!((w(&mean).0[[0, 0]] - expect).abs() < 1e-7);
        let other = FloatModel::mlp(&[3, 4], 0);
        assert!(matches!(fedavg(&[models[0].clone(), other], &[1, 1]), Err(FlError::ShapeError(_))));
        assert!(fedavg(&[], &[]).is_err());
    }

    #[test]
    fn evaluate_edge_cases() {
        // identity-like model on one-hot inputs is perfect
        let mut weights = Array2::zeros((3, 3));
        for i in 0..3 {
            weights[[i, i]] = 1.0;
        }
        let model = FloatModel { input_dim: 3, layers: vec![FloatLayer::Dense { weights, bias: Array1::zeros(3) }] };
        let x = Array2::from_shape_fn((3, 3), |(r, c)| if r == c { 1.0 } else { 0.0 });
        let data = Dataset::new(x.clone(), vec![0, 1, 2], Split::Test).unwrap();
        assert_eq!(evaluate(&model, &data), 1.0);
        let flat = FloatModel { input_dim: 3, layers: vec![FloatLayer::Dense { weights: Array2::zeros((3, 3)), bias: Array1::zeros(3) }] };
        let zeros = Dataset::new(x, vec![0, 0, 0], Split::Test).unwrap();
        assert_eq!(evaluate(&flat, &zeros), 1.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = FloatModel::mlp(&[6, 5, 3], 2);
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..4], CHECKPOINT_MAGIC);
        assert_eq!(FloatModel::from_bytes(&bytes).unwrap(), m);
        assert!(matches!(FloatModel::from_bytes(&bytes[..bytes.len() - 1]), Err(FlError::Format(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(FloatModel::from_bytes(&bad).is_err());
    }

    #[test]
    fn quantized_model_tracks_float_predictions() {
        let data = synthetic(300, 16, 4, 11, Split::Train);
        let m = local_train(&FloatModel::mlp(&[16, 12, 4], 1), &data, &cfg(5, 0.1)).unwrap();
        let q = m.quantize(data.features().view(), 8, 24).unwrap();
        let inputs = data.quantized_inputs(8).unwrap();
        let (logits, _) = crate::quant::quantized_forward(&q, &inputs).unwrap();
        let float = m.predict(data.features().view());
        let agree = (0..data.len())
            .filter(|c| argmax_lowest(logits.column(*c)) == Some(float[*c]))
            .count();
        assert!(agree as f64 / data.len() as f64 > 0.95, "{agree}");
    }

    #[test]
    fn dequantized_model_is_close() {
        let data = synthetic(200, 16, 4, 3, Split::Train);
        let m = local_train(&FloatModel::mlp(&[16, 12, 4], 2), &data, &cfg(3, 0.1)).unwrap();
        let q = m.quantize(data.features().view(), 8, 24).unwrap();
        let d = FloatModel::dequantize(&q);
        assert_eq!(d.shape(8, 24), m.shape(8, 24));
        for (a, b) in m.layers.iter().zip(&d.layers) {
            if let (FloatLayer::Dense { weights: wa, bias: ba }, FloatLayer::Dense { weights: wb, bias: bb }) = (a, b) {
                let range = wa.iter().fold(0f32, |m, v| m.max(v.abs())) * 2.0;
                let err = (wa - wb).iter().fold(0f32, |m, v| m.max(v.abs()));
                assert!(err <= range / 255.0 * 0.51 + 1e-6, "{err}");
                assert!((ba - bb).iter().all(|e| e.abs() < 1e-2));
            }
        }
        assert!((evaluate(&d, &data) - evaluate(&m, &data)).abs() < 0.05);
    }
}
