use super::{FixedMultiplier, QuantError, QuantParams, QuantizedTensor, Result, INTEGER_BUDGET};

pub const MODEL_MAGIC: &[u8; 4] = b"ZKPQ";
pub const MODEL_VERSION: u16 = 1;

pub const TAG_DENSE: u8 = 1;
pub const TAG_RELU: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    FullyConnected,
    Relu,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// `weights` is `out x in`; `bias` lives at scale `s_w * s_x` with zero point 0.
    Dense {
        weights: QuantizedTensor,
        bias: Vec<i64>,
        multiplier: FixedMultiplier,
        out_params: QuantParams,
    },
    Relu { width: usize, out_params: QuantParams },
}

impl LayerSpec {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerSpec::Dense { .. } => LayerKind::FullyConnected,
            LayerSpec::Relu { .. } => LayerKind::Relu,
        }
    }

    pub fn out_params(&self) -> QuantParams {
        match self {
            LayerSpec::Dense { out_params, .. } | LayerSpec::Relu { out_params, .. } => *out_params,
        }
    }

    pub fn shape(&self) -> LayerShape {
        match self {
            LayerSpec::Dense { weights, .. } => {
                LayerShape::Dense { inputs: weights.cols(), outputs: weights.rows() }
            }
            LayerSpec::Relu { width, .. } => LayerShape::Relu { width: *width },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerShape {
    Dense { inputs: usize, outputs: usize },
    Relu { width: usize },
}

impl LayerShape {
    pub fn output_width(&self) -> usize {
        match self {
            LayerShape::Dense { outputs, .. } => *outputs,
            LayerShape::Relu { width } => *width,
        }
    }
}

/// Architecture without parameter values: what keys are generated for.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelShape {
    pub input_dim: usize,
    pub bit_width: u8,
    pub shift: u32,
    pub layers: Vec<LayerShape>,
}

impl ModelShape {
    pub fn classes(&self) -> usize {
        self.layers.last().map(|l| l.output_width()).unwrap_or(self.input_dim)
    }

    /// Fully connected stack with ReLU between consecutive dense layers.
    pub fn mlp(widths: &[usize], bit_width: u8, shift: u32) -> Self {
        let mut layers = Vec::new();
        for (i, w) in widths.windows(2).enumerate() {
            if i > 0 {
                layers.push(LayerShape::Relu { width: w[0] });
            }
            layers.push(LayerShape::Dense { inputs: w[0], outputs: w[1] });
        }
        Self { input_dim: widths[0], bit_width, shift, layers }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(QuantError::ShapeError("model has no layers".into()));
        }
        if self.bit_width != 8 && self.bit_width != 16 {
            return Err(QuantError::InvalidParams(format!("bit width {}", self.bit_width)));
        }
        let mut width = self.input_dim;
        for (i, l) in self.layers.iter().enumerate() {
            match *l {
                LayerShape::Dense { inputs, outputs } => {
                    if inputs != width || outputs == 0 {
                        return Err(QuantError::ShapeError(format!(
                            "layer {i}: dense {inputs}->{outputs} after width {width}"
                        )));
                    }
                    width = outputs;
                }
                LayerShape::Relu { width: w } => {
                    if w != width {
                        return Err(QuantError::ShapeError(format!(
                            "layer {i}: relu width {w} after width {width}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Length of the serialized container for any model of this shape.
    pub fn serialized_len(&self) -> usize {
        let mut n = 4 + 2 + 1 + 1 + 4 + 8 + 8 + 4;
        for l in &self.layers {
            n += 1;
            n += match *l {
                LayerShape::Dense { inputs, outputs } => {
                    8 + 8 * inputs * outputs + 8 * outputs + 8 + 8 + 8 + 8 + 8
                }
                LayerShape::Relu { .. } => 4 + 8 + 8,
            };
        }
        n
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.input_dim as u32).to_le_bytes());
        out.push(self.bit_width);
        out.push(self.shift as u8);
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            match *l {
                LayerShape::Dense { inputs, outputs } => {
                    out.push(TAG_DENSE);
                    out.extend_from_slice(&(outputs as u32).to_le_bytes());
                    out.extend_from_slice(&(inputs as u32).to_le_bytes());
                }
                LayerShape::Relu { width } => {
                    out.push(TAG_RELU);
                    out.extend_from_slice(&(width as u32).to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let input_dim = r.u32()? as usize;
        let bit_width = r.u8()?;
        let shift = r.u8()? as u32;
        let count = r.u32()? as usize;
        let mut layers = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            layers.push(match r.u8()? {
                TAG_DENSE => {
                    let outputs = r.u32()? as usize;
                    let inputs = r.u32()? as usize;
                    LayerShape::Dense { inputs, outputs }
                }
                TAG_RELU => LayerShape::Relu { width: r.u32()? as usize },
                t => return Err(QuantError::Format(format!("layer tag {t}"))),
            });
        }
        r.finish()?;
        let shape = Self { input_dim, bit_width, shift, layers };
        shape.validate()?;
        Ok(shape)
    }
}

/// A quantized fully-connected network.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub input_dim: usize,
    pub input_params: QuantParams,
    pub shift: u32,
    pub layers: Vec<LayerSpec>,
}

impl QuantizedModel {
    pub fn new(
        input_dim: usize,
        input_params: QuantParams,
        shift: u32,
        layers: Vec<LayerSpec>,
    ) -> Result<Self> {
        let m = Self { input_dim, input_params, shift, layers };
        m.validate()?;
        Ok(m)
    }

    pub fn bit_width(&self) -> u8 {
        self.input_params.bit_width
    }

    pub fn classes(&self) -> usize {
        self.shape().classes()
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            input_dim: self.input_dim,
            bit_width: self.input_params.bit_width,
            shift: self.shift,
            layers: self.layers.iter().map(LayerSpec::shape).collect(),
        }
    }

    /// Structural checks plus the worst-case integer budget of every dense layer.
    pub fn validate(&self) -> Result<()> {
        self.shape().validate()?;
        self.input_params.validate()?;
        let bw = self.input_params.bit_width;
        let mut prev = self.input_params;
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerSpec::Dense { weights, bias, multiplier, out_params } => {
                    out_params.validate()?;
                    if weights.params().bit_width != bw || out_params.bit_width != bw {
                        return Err(QuantError::InvalidParams(format!("layer {i}: mixed bit widths")));
                    }
                    if bias.len() != weights.rows() {
                        return Err(QuantError::ShapeError(format!(
                            "layer {i}: {} biases for {} outputs",
                            bias.len(),
                            weights.rows()
                        )));
                    }
                    if multiplier.shift != self.shift {
                        return Err(QuantError::InvalidParams(format!(
                            "layer {i}: shift {} differs from model shift {}",
                            multiplier.shift, self.shift
                        )));
                    }
                    check_budget(
                        weights.cols(),
                        bw,
                        bias,
                        multiplier,
                        weights.params().zero_point,
                        prev.zero_point,
                        out_params.zero_point,
                    )
                    .map_err(|e| match e {
                        QuantError::OverflowError(m) => QuantError::OverflowError(format!("layer {i}: {m}")),
                        e => e,
                    })?;
                    prev = *out_params;
                }
                LayerSpec::Relu { out_params, .. } => {
                    if out_params.zero_point != prev.zero_point || out_params.bit_width != bw {
                        return Err(QuantError::InvalidParams(format!(
                            "layer {i}: relu must keep its input mapping"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.shape().serialized_len());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.push(self.input_params.bit_width);
        out.push(self.shift as u8);
        out.extend_from_slice(&(self.input_dim as u32).to_le_bytes());
        out.extend_from_slice(&self.input_params.scale.to_le_bytes());
        out.extend_from_slice(&self.input_params.zero_point.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for layer in &self.layers {
            match layer {
                LayerSpec::Dense { weights, bias, multiplier, out_params } => {
                    out.push(TAG_DENSE);
                    out.extend_from_slice(&(weights.rows() as u32).to_le_bytes());
                    out.extend_from_slice(&(weights.cols() as u32).to_le_bytes());
                    for w in weights.values() {
                        out.extend_from_slice(&w.to_le_bytes());
                    }
                    for b in bias {
                        out.extend_from_slice(&b.to_le_bytes());
                    }
                    out.extend_from_slice(&weights.params().scale.to_le_bytes());
                    out.extend_from_slice(&weights.params().zero_point.to_le_bytes());
                    out.extend_from_slice(&out_params.scale.to_le_bytes());
                    out.extend_from_slice(&out_params.zero_point.to_le_bytes());
                    out.extend_from_slice(&multiplier.m.to_le_bytes());
                }
                LayerSpec::Relu { width, out_params } => {
                    out.push(TAG_RELU);
                    out.extend_from_slice(&(*width as u32).to_le_bytes());
                    out.extend_from_slice(&out_params.scale.to_le_bytes());
                    out.extend_from_slice(&out_params.zero_point.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MODEL_MAGIC {
            return Err(QuantError::Format("bad magic".into()));
        }
        let version = r.u16()?;
        if version != MODEL_VERSION {
            return Err(QuantError::Format(format!("unsupported version {version}")));
        }
        let bit_width = r.u8()?;
        let shift = r.u8()? as u32;
        let input_dim = r.u32()? as usize;
        let input_params = QuantParams::new(r.f64()?, r.i64()?, bit_width)?;
        let count = r.u32()? as usize;
        let mut layers = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            match r.u8()? {
                TAG_DENSE => {
                    let rows = r.u32()? as usize;
                    let cols = r.u32()? as usize;
                    let n = rows
                        .checked_mul(cols)
                        .filter(|n| n.saturating_mul(8) <= r.remaining())
                        .ok_or_else(|| QuantError::Format("truncated weights".into()))?;
                    let w: Vec<i64> = (0..n).map(|_| r.i64()).collect::<Result<_>>()?;
                    let bias: Vec<i64> = (0..rows).map(|_| r.i64()).collect::<Result<_>>()?;
                    let wp = QuantParams::new(r.f64()?, r.i64()?, bit_width)?;
                    let out_params = QuantParams::new(r.f64()?, r.i64()?, bit_width)?;
                    let multiplier = FixedMultiplier::new(r.i64()?, shift)?;
                    layers.push(LayerSpec::Dense {
                        weights: QuantizedTensor::new(rows, cols, w, wp)?,
                        bias,
                        multiplier,
                        out_params,
                    });
                }
                TAG_RELU => {
                    let width = r.u32()? as usize;
                    let out_params = QuantParams::new(r.f64()?, r.i64()?, bit_width)?;
                    layers.push(LayerSpec::Relu { width, out_params });
                }
                t => return Err(QuantError::Format(format!("layer tag {t}"))),
            }
        }
        r.finish()?;
        Self::new(input_dim, input_params, shift, layers)
    }
}

fn check_budget(
    n: usize,
    bit_width: u8,
    bias: &[i64],
    mult: &FixedMultiplier,
    z_w: i64,
    z_x: i64,
    z_y: i64,
) -> Result<()> {
    let qmax = ((1i64 << bit_width) - 1) as i128;
    let n = n as i128;
    let max_bias = bias.iter().map(|b| (*b as i128).abs()).max().unwrap_or(0);
    let m_prime = mult.m_prime(z_y) as i128;
    // largest partial sum before the subtractions, and the largest subtrahend
    let positive = n * qmax * qmax + max_bias + n * (z_w as i128) * (z_x as i128) + m_prime;
    let negative = max_bias + n * qmax * (z_w as i128 + z_x as i128);
    let worst = positive.max(negative) * mult.m as i128;
    if worst >= INTEGER_BUDGET || max_bias >= INTEGER_BUDGET {
        return Err(QuantError::OverflowError(format!("worst case {worst} exceeds 2^62")));
    }
    Ok(())
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(QuantError::Format(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub(crate) fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.array()?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(QuantError::Format(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}
