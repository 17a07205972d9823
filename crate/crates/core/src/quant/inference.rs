use super::{
    FixedMultiplier, LayerSpec, QuantError, QuantParams, QuantizedModel, QuantizedTensor, Result,
    INTEGER_BUDGET,
};

/// Auxiliary terms of the sign-grouped product.
///
/// `g2` is per output row (`z_x * rowsum(Q_W)`), `g3` per input column
/// (`z_w * colsum(Q_X)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatmulAux {
    pub g1: Vec<i64>,
    pub g2: Vec<i64>,
    pub g3: Vec<i64>,
    pub n_zw_zx: i64,
    pub m_prime: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatmulOutput {
    /// Clamped output.
    pub qy: QuantizedTensor,
    /// `floor(M * bracket / 2^k)` before clamping; satisfies the remainder identity.
    pub raw: Vec<i64>,
    pub remainder: Vec<i64>,
    pub aux: MatmulAux,
}

impl MatmulOutput {
    /// Re-evaluates the right-hand side of the identity at `(i, c)`.
    pub fn bracket(&self, bias: Option<&[i64]>, i: usize, c: usize) -> i64 {
        let p = self.aux.g3.len();
        let b = bias.map(|b| b[i]).unwrap_or(0);
        self.aux.g1[i * p + c] + b + self.aux.n_zw_zx + self.aux.m_prime
            - self.aux.g2[i]
            - self.aux.g3[c]
    }
}

/// Integer product `Q_Y ~ Q_W * Q_X` with remainder bookkeeping (no bias).
pub fn qmatmul(
    qw: &QuantizedTensor,
    qx: &QuantizedTensor,
    mult: &FixedMultiplier,
    out_params: &QuantParams,
) -> Result<MatmulOutput> {
    qmatmul_biased(qw, qx, None, mult, out_params)
}

pub fn qmatmul_biased(
    qw: &QuantizedTensor,
    qx: &QuantizedTensor,
    bias: Option<&[i64]>,
    mult: &FixedMultiplier,
    out_params: &QuantParams,
) -> Result<MatmulOutput> {
    let (m, n, p) = (qw.rows(), qw.cols(), qx.cols());
    if qx.rows() != n {
        return Err(QuantError::ShapeError(format!(
            "{m}x{n} weights against {}x{p} input",
            qx.rows()
        )));
    }
    if let Some(b) = bias {
        if b.len() != m {
            return Err(QuantError::ShapeError(format!("{} biases for {m} rows", b.len())));
        }
    }
    out_params.validate()?;
    let z_w = qw.params().zero_point;
    let z_x = qx.params().zero_point;
    let z_y = out_params.zero_point;
    let shift = mult.shift;

    let w = qw.values();
    let x = qx.values();
    let mut g1 = vec![0i64; m * p];
    for i in 0..m {
        let acc = &mut g1[i * p..(i + 1) * p];
        for j in 0..n {
            let wij = w[i * n + j];
            if wij == 0 {
                continue;
            }
            for (a, xv) in acc.iter_mut().zip(&x[j * p..(j + 1) * p]) {
                *a += wij * xv;
            }
        }
    }
    let g2: Vec<i64> = (0..m).map(|i| z_x * w[i * n..(i + 1) * n].iter().sum::<i64>()).collect();
    let mut colsum = vec![0i64; p];
    for j in 0..n {
        for (s, xv) in colsum.iter_mut().zip(&x[j * p..(j + 1) * p]) {
            *s += xv;
        }
    }
    let g3: Vec<i64> = colsum.into_iter().map(|s| z_w * s).collect();
    let n_zw_zx = n as i64 * z_w * z_x;
    let m_prime = mult.m_prime(z_y);

    let qmax = out_params.qmax();
    let mut raw = Vec::with_capacity(m * p);
    let mut remainder = Vec::with_capacity(m * p);
    let mut qy = Vec::with_capacity(m * p);
    for i in 0..m {
        let b = bias.map(|b| b[i]).unwrap_or(0) as i128;
        for c in 0..p {
            let bracket = g1[i * p + c] as i128 + b + n_zw_zx as i128 + m_prime as i128
                - g2[i] as i128
                - g3[c] as i128;
            let prod = mult.m as i128 * bracket;
            if prod.abs() >= INTEGER_BUDGET {
                return Err(QuantError::OverflowError(format!("product {prod} at ({i}, {c})")));
            }
            let y = prod >> shift;
            let r = prod - (y << shift);
            raw.push(y as i64);
            remainder.push(r as i64);
            qy.push((y as i64).clamp(0, qmax));
        }
    }
    Ok(MatmulOutput {
        qy: QuantizedTensor::new(m, p, qy, *out_params)?,
        raw,
        remainder,
        aux: MatmulAux { g1, g2, g3, n_zw_zx, m_prime },
    })
}

/// Everything recorded for one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrace {
    pub input: QuantizedTensor,
    pub weights: QuantizedTensor,
    pub bias: Vec<i64>,
    pub multiplier: FixedMultiplier,
    pub output: MatmulOutput,
}

impl DenseTrace {
    /// Checks the remainder identity and range of every element.
    pub fn check_identity(&self) -> bool {
        let out = &self.output;
        let p = self.input.cols();
        let k = self.multiplier.shift;
        let qmax = out.qy.params().qmax();
        (0..self.weights.rows()).all(|i| {
            (0..p).all(|c| {
                let idx = i * p + c;
                let lhs = ((out.raw[idx] as i128) << k) + out.remainder[idx] as i128;
                let rhs = self.multiplier.m as i128 * out.bracket(Some(&self.bias), i, c) as i128;
                lhs == rhs
                    && out.remainder[idx] >= 0
                    && (out.remainder[idx] as i128) < (1i128 << k)
                    && out.qy.values()[idx] == out.raw[idx].clamp(0, qmax)
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerTrace {
    Dense(DenseTrace),
    Relu { input: QuantizedTensor, output: QuantizedTensor },
}

/// Per-layer intermediates of one batched forward pass (columns are samples).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InferenceTrace {
    pub layers: Vec<LayerTrace>,
}

impl InferenceTrace {
    pub fn check(&self) -> bool {
        self.layers.iter().all(|l| match l {
            LayerTrace::Dense(d) => d.check_identity(),
            LayerTrace::Relu { input, output } => {
                let z = input.params().zero_point;
                input.values().len() == output.values().len()
                    && input.values().iter().zip(output.values()).all(|(a, b)| *b == (*a).max(z))
            }
        })
    }

    /// Final-layer output, one column per sample.
    pub fn logits(&self) -> Option<&QuantizedTensor> {
        self.layers.last().map(|l| match l {
            LayerTrace::Dense(d) => &d.output.qy,
            LayerTrace::Relu { output, .. } => output,
        })
    }
}

fn check_input(model: &QuantizedModel, input: &QuantizedTensor) -> Result<()> {
    if model.layers.is_empty() {
        return Err(QuantError::ShapeError("model has no layers".into()));
    }
    if input.rows() != model.input_dim {
        return Err(QuantError::ShapeError(format!(
            "input has {} features, model expects {}",
            input.rows(),
            model.input_dim
        )));
    }
    let (a, b) = (input.params(), model.input_params);
    if a.zero_point != b.zero_point || a.bit_width != b.bit_width {
        return Err(QuantError::InvalidParams("input mapping differs from the model's".into()));
    }
    Ok(())
}

fn relu(x: &QuantizedTensor) -> QuantizedTensor {
    let z = x.params().zero_point;
    let q = x.values().iter().map(|v| (*v).max(z)).collect();
    QuantizedTensor::new(x.rows(), x.cols(), q, x.params()).expect("relu preserves range")
}

fn forward(
    model: &QuantizedModel,
    input: &QuantizedTensor,
    mut trace: Option<&mut InferenceTrace>,
) -> Result<QuantizedTensor> {
    check_input(model, input)?;
    let mut x = input.clone();
    for layer in &model.layers {
        match layer {
            LayerSpec::Dense { weights, bias, multiplier, out_params } => {
                let out = qmatmul_biased(weights, &x, Some(bias), multiplier, out_params)?;
                let next = out.qy.clone();
                if let Some(t) = trace.as_deref_mut() {
                    t.layers.push(LayerTrace::Dense(DenseTrace {
                        input: x,
                        weights: weights.clone(),
                        bias: bias.clone(),
                        multiplier: *multiplier,
                        output: out,
                    }));
                }
                x = next;
            }
            LayerSpec::Relu { width, .. } => {
                if x.rows() != *width {
                    return Err(QuantError::ShapeError(format!("relu width {width} vs {}", x.rows())));
                }
                let y = relu(&x);
                if let Some(t) = trace.as_deref_mut() {
                    t.layers.push(LayerTrace::Relu { input: x, output: y.clone() });
                }
                x = y;
            }
        }
    }
    Ok(x)
}

/// Runs the integer network on `input` (`input_dim x samples`) and records the trace.
pub fn quantized_forward(
    model: &QuantizedModel,
    input: &QuantizedTensor,
) -> Result<(QuantizedTensor, InferenceTrace)> {
    let mut trace = InferenceTrace::default();
    let logits = forward(model, input, Some(&mut trace))?;
    Ok((logits, trace))
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax_lowest<T: PartialOrd + Copy>(values: impl IntoIterator<Item = T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Per-sample correctness of the integer argmax against `labels`.
pub fn correctness(logits: &QuantizedTensor, labels: &[u8]) -> Vec<bool> {
    (0..logits.cols())
        .map(|c| argmax_lowest(logits.column(c)) == Some(labels[c] as usize))
        .collect()
}

/// Number of samples whose integer argmax equals the label.
pub fn accuracy(model: &QuantizedModel, inputs: &QuantizedTensor, labels: &[u8]) -> Result<usize> {
    if inputs.cols() != labels.len() || labels.is_empty() {
        return Err(QuantError::InvalidDataset(format!(
            "{} samples, {} labels",
            inputs.cols(),
            labels.len()
        )));
    }
    const CHUNK: usize = 1000;
    let mut correct = 0;
    for start in (0..labels.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(labels.len());
        let cols: Vec<usize> = (start..end).collect();
        let batch = if start == 0 && end == labels.len() {
            inputs.clone()
        } else {
            inputs.select_columns(&cols)?
        };
        let logits = forward(model, &batch, None)?;
        correct += correctness(&logits, &labels[start..end]).into_iter().filter(|c| *c).count();
    }
    Ok(correct)
}
