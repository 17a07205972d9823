//! Datasets: MNIST IDX files, a seeded synthetic generator, and client partitioning.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Dirichlet, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FlError, Result};
use crate::quant::{QuantParams, QuantizedTensor};

pub const MNIST_CLASSES: usize = 10;
pub const MNIST_DIM: usize = 28 * 28;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Samples as rows of features in `[0, 1]`, with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f32>,
    labels: Vec<u8>,
    split: Split,
}

impl Dataset {
    pub fn new(features: Array2<f32>, labels: Vec<u8>, split: Split) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(FlError::Format(format!(
                "{} samples but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(FlError::Format("features outside [0, 1]".into()));
        }
        Ok(Self { features, labels, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f32> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn classes(&self) -> usize {
        self.labels.iter().map(|l| *l as usize + 1).max().unwrap_or(0)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|i| self.labels[*i]).collect(),
            split: self.split,
        }
    }

    /// The first `n` samples (or all of them).
    pub fn head(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Model-input tensor (`features x samples`) under the unit-interval mapping.
    pub fn quantized_inputs(&self, bit_width: u8) -> Result<QuantizedTensor> {
        let params = QuantParams::unit_interval(bit_width);
        let (n, d) = (self.len(), self.dim());
        let mut q = vec![0i64; n * d];
        for (s, row) in self.features.outer_iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                q[j * n + s] = params.quantize_value(*x as f64);
            }
        }
        Ok(QuantizedTensor::new(d, n, q, params)?)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| FlError::Format("truncated IDX header".into()))
}

/// Parses an IDX3 image file into `(count, rows * cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(FlError::Format(format!("image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let dim = be_u32(bytes, 8)? as usize * be_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    if body.len() != n * dim {
        return Err(FlError::Format(format!("expected {} pixel bytes, found {}", n * dim, body.len())));
    }
    Ok((n, dim, body.to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(FlError::Format(format!("label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(FlError::Format(format!("expected {n} labels, found {}", body.len())));
    }
    Ok(body.to_vec())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| FlError::Io(format!("{}: {e}", path.display())))
}

pub fn load_idx(images: &Path, labels: &Path, split: Split) -> Result<Dataset> {
    let (n, dim, pixels) = parse_idx_images(&read(images)?)?;
    let labels = parse_idx_labels(&read(labels)?)?;
    if labels.len() != n {
        return Err(FlError::Format(format!("{n} images but {} labels", labels.len())));
    }
    let features = Array2::from_shape_vec((n, dim), pixels.iter().map(|p| *p as f32 / 255.0).collect())
        .expect("length checked");
    Dataset::new(features, labels, split)
}

/// Loads the four standard MNIST files from `dir`.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset)> {
    let p = |f: &str| dir.join(f);
    let train = load_idx(&p(MNIST_FILES[0]), &p(MNIST_FILES[1]), Split::Train)?;
    let test = load_idx(&p(MNIST_FILES[2]), &p(MNIST_FILES[3]), Split::Test)?;
    Ok((train, test))
}

/// Well-separated Gaussian clusters around random prototypes, clipped to `[0, 1]`.
pub fn synthetic(samples: usize, dim: usize, classes: usize, seed: u64, split: Split) -> Dataset {
    // prototypes depend only on the seed's high half so train/test seeds can share them
    let mut proto_rng = ChaCha20Rng::seed_from_u64(seed >> 32);
    let prototypes: Vec<Vec<f32>> = (0..classes)
        .map(|_| (0..dim).map(|_| if proto_rng.gen_bool(0.3) { 0.9 } else { 0.1 }).collect())
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f32, 0.15).expect("valid sigma");
    let mut features = Array2::zeros((samples, dim));
    let mut labels = Vec::with_capacity(samples);
    for (s, mut row) in features.outer_iter_mut().enumerate() {
        let c = if s < classes { s } else { rng.gen_range(0..classes) };
        labels.push(c as u8);
        for (x, p) in row.iter_mut().zip(&prototypes[c]) {
            *x = (p + noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    Dataset::new(features, labels, split).expect("generated in range")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "alpha")]
pub enum PartitionScheme {
    Iid,
    Dirichlet(f64),
}

/// Splits `data` into `n_clients` disjoint shards whose union is `data`.
pub fn partition(data: &Dataset, n_clients: usize, scheme: PartitionScheme, seed: u64) -> Result<Vec<Dataset>> {
    if n_clients == 0 || n_clients > data.len() {
        return Err(FlError::InvalidPartition(format!("{n_clients} clients for {} samples", data.len())));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut shards: Vec<Vec<usize>> = vec![Vec::new(); n_clients];
    match scheme {
        PartitionScheme::Iid => {
            let mut idx: Vec<usize> = (0..data.len()).collect();
            idx.shuffle(&mut rng);
            let (base, extra) = (data.len() / n_clients, data.len() % n_clients);
            let mut start = 0;
            for (i, shard) in shards.iter_mut().enumerate() {
                let len = base + usize::from(i < extra);
                shard.extend_from_slice(&idx[start..start + len]);
                start += len;
            }
        }
        PartitionScheme::Dirichlet(alpha) => {
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(FlError::InvalidPartition(format!("dirichlet alpha {alpha}")));
            }
            let classes = data.classes();
            for c in 0..classes {
                let mut idx: Vec<usize> = (0..data.len()).filter(|i| data.labels[*i] as usize == c).collect();
                idx.shuffle(&mut rng);
                let props: Vec<f64> = if n_clients == 1 {
                    vec![1.0]
                } else {
                    Dirichlet::new_with_size(alpha, n_clients)
                        .map_err(|e| FlError::InvalidPartition(e.to_string()))?
                        .sample(&mut rng)
                };
                let mut start = 0;
                let mut acc = 0.0;
                for (k, p) in props.iter().enumerate() {
                    acc += p;
                    let end = if k + 1 == n_clients { idx.len() } else { ((acc * idx.len() as f64).round() as usize).min(idx.len()) };
                    let end = end.max(start);
                    shards[k].extend_from_slice(&idx[start..end]);
                    start = end;
                }
            }
        }
    }
    Ok(shards.iter().map(|s| data.subset(s)).collect())
}
