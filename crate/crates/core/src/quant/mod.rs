//! Affine quantization and the integer-only inference engine.
//!
//! Reals map to integers through `r = scale * (q - zero_point)`. Every
//! fully-connected layer is evaluated with the remainder identity
//!
//! ```text
//! Y * 2^k + R = M * (G1 + bias + n*z_w*z_x + M' - G2 - G3),   0 <= R < 2^k
//! ```
//!
//! which is exactly the relation the proof circuit enforces, so a trace
//! recorded here can be replayed as a constraint-system witness.

mod inference;
mod model;

pub use inference::{
    accuracy, argmax_lowest, correctness, qmatmul, qmatmul_biased, quantized_forward, DenseTrace,
    InferenceTrace, LayerTrace, MatmulAux, MatmulOutput,
};
pub use model::{LayerKind, LayerShape, LayerSpec, ModelShape, QuantizedModel, MODEL_MAGIC, MODEL_VERSION, TAG_DENSE, TAG_RELU};

use thiserror::Error;

/// Default requantization shift `k`.
pub const DEFAULT_SHIFT: u32 = 24;

/// Largest magnitude any intermediate may reach.
pub const INTEGER_BUDGET: i128 = 1 << 62;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("invalid quantization parameters: {0}")]
    InvalidParams(String),
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("multiplier does not fit the integer budget")]
    MultiplierOverflow,
    #[error("multiplier rounds to zero")]
    MultiplierUnderflow,
    #[error("intermediate overflow: {0}")]
    OverflowError(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("malformed model container: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, QuantError>;

/// Dense row-major matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealTensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(QuantError::InvalidTensor(format!(
                "{} elements for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(QuantError::InvalidTensor(format!("non-finite entry at {i}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Scale, zero point and bit width of an affine mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    pub scale: f64,
    pub zero_point: i64,
    pub bit_width: u8,
}

impl QuantParams {
    pub fn new(scale: f64, zero_point: i64, bit_width: u8) -> Result<Self> {
        let p = Self { scale, zero_point, bit_width };
        p.validate()?;
        Ok(p)
    }

    /// Fixed input mapping for byte-valued features in `[0, 1]`.
    pub fn unit_interval(bit_width: u8) -> Self {
        let qmax = (1i64 << bit_width) - 1;
        Self { scale: 1.0 / qmax as f64, zero_point: 0, bit_width }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bit_width != 8 && self.bit_width != 16 {
            return Err(QuantError::InvalidParams(format!("bit width {}", self.bit_width)));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(QuantError::InvalidParams(format!("scale {}", self.scale)));
        }
        if self.zero_point < 0 || self.zero_point > self.qmax() {
            return Err(QuantError::InvalidParams(format!(
                "zero point {} outside [0, {}]",
                self.zero_point,
                self.qmax()
            )));
        }
        Ok(())
    }

    pub fn qmax(&self) -> i64 {
        (1i64 << self.bit_width) - 1
    }

    pub fn quantize_value(&self, x: f64) -> i64 {
        let q = (x / self.scale).round() as i64 + self.zero_point;
        q.clamp(0, self.qmax())
    }

    pub fn dequantize_value(&self, q: i64) -> f64 {
        self.scale * (q - self.zero_point) as f64
    }

    /// Per-tensor asymmetric parameters covering `[min, max]` widened to include zero.
    pub fn from_range(min: f64, max: f64, bit_width: u8) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(QuantError::InvalidTensor(format!("range [{min}, {max}]")));
        }
        let qmax = (1i64 << bit_width) - 1;
        let lo = min.min(0.0);
        let hi = max.max(0.0);
        if hi - lo == 0.0 {
            // constant tensor (necessarily zero after widening)
            let zp = (min.round() as i64).clamp(0, qmax);
            return Self::new(1.0, zp, bit_width);
        }
        let scale = (hi - lo) / qmax as f64;
        let zero_point = ((-lo / scale).round() as i64).clamp(0, qmax);
        Self::new(scale, zero_point, bit_width)
    }
}

/// Integer matrix with its affine mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    rows: usize,
    cols: usize,
    q: Vec<i64>,
    params: QuantParams,
}

impl QuantizedTensor {
    pub fn new(rows: usize, cols: usize, q: Vec<i64>, params: QuantParams) -> Result<Self> {
        params.validate()?;
        if q.len() != rows * cols {
            return Err(QuantError::InvalidTensor(format!(
                "{} values for a {rows}x{cols} tensor",
                q.len()
            )));
        }
        let qmax = params.qmax();
        if let Some(v) = q.iter().find(|v| **v < 0 || **v > qmax) {
            return Err(QuantError::InvalidTensor(format!("value {v} outside [0, {qmax}]")));
        }
        Ok(Self { rows, cols, q, params })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[i64] {
        &self.q
    }

    pub fn params(&self) -> QuantParams {
        self.params
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.q[r * self.cols + c]
    }

    /// Column `c` as a vector (one sample when columns are samples).
    pub fn column(&self, c: usize) -> Vec<i64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Selects a subset of columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(c) = cols.iter().find(|c| **c >= self.cols) {
            return Err(QuantError::ShapeError(format!("column {c} of {}", self.cols)));
        }
        let mut q = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            let row = &self.q[r * self.cols..(r + 1) * self.cols];
            q.extend(cols.iter().map(|&c| row[c]));
        }
        Ok(Self { rows: self.rows, cols: cols.len(), q, params: self.params })
    }
}

/// Maps a real tensor onto per-tensor asymmetric integers.
pub fn quantize(t: &RealTensor, bit_width: u8) -> Result<QuantizedTensor> {
    if t.data.is_empty() {
        return Err(QuantError::InvalidTensor("empty tensor".into()));
    }
    if t.data.iter().any(|v| !v.is_finite()) {
        return Err(QuantError::InvalidTensor("non-finite entry".into()));
    }
    let min = t.data.iter().copied().fold(f64::INFINITY, f64::min);
    let max = t.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let params = QuantParams::from_range(min, max, bit_width)?;
    quantize_with(t, params)
}

/// Quantizes with caller-supplied parameters, clamping to the representable range.
pub fn quantize_with(t: &RealTensor, params: QuantParams) -> Result<QuantizedTensor> {
    params.validate()?;
    let q = t.data.iter().map(|&x| params.quantize_value(x)).collect();
    Ok(QuantizedTensor { rows: t.rows, cols: t.cols, q, params })
}

pub fn dequantize(qt: &QuantizedTensor) -> RealTensor {
    let data = qt.q.iter().map(|&q| qt.params.dequantize_value(q)).collect();
    RealTensor { rows: qt.rows, cols: qt.cols, data }
}

/// `M = round(2^k * s_w * s_x / s_y)` as an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedMultiplier {
    pub m: i64,
    pub shift: u32,
}

impl FixedMultiplier {
    pub fn new(m: i64, shift: u32) -> Result<Self> {
        if m < 1 {
            return Err(QuantError::MultiplierUnderflow);
        }
        if m as i128 > INTEGER_BUDGET || shift > 62 {
            return Err(QuantError::MultiplierOverflow);
        }
        Ok(Self { m, shift })
    }

    /// `ceil(z_y * 2^k / M)`, exact.
    pub fn m_prime(&self, z_y: i64) -> i64 {
        let num = (z_y as i128) << self.shift;
        let m = self.m as i128;
        ((num + m - 1).div_euclid(m)) as i64
    }
}

pub fn fixed_multiplier(s_w: f64, s_x: f64, s_y: f64, shift: u32) -> Result<FixedMultiplier> {
    for s in [s_w, s_x, s_y] {
        if !(s.is_finite() && s > 0.0) {
            return Err(QuantError::InvalidParams(format!("scale {s}")));
        }
    }
    if shift > 62 {
        return Err(QuantError::MultiplierOverflow);
    }
    let exact = (shift as f64).exp2() * s_w * s_x / s_y;
    if !exact.is_finite() || exact.round() > INTEGER_BUDGET as f64 {
        return Err(QuantError::MultiplierOverflow);
    }
    FixedMultiplier::new(exact.round() as i64, shift)
}
