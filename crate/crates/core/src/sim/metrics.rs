//! Per-round metrics and their CSV form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;

/// Simulated seconds spent in each protocol phase of one round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub setup_s: f64,
    pub commitment_s: f64,
    pub prove_s: f64,
    pub verify_s: f64,
    pub block_generation_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub round: u64,
    pub global_accuracy: f64,
    pub leader_id: Option<u32>,
    pub pool_size: usize,
    pub included_txs: usize,
    pub setup_s: f64,
    pub commitment_s: f64,
    pub prove_s: f64,
    pub verify_s: f64,
    pub block_generation_s: f64,
    pub byzantine_elected: bool,
}

pub const METRICS_HEADER: &str = "round,global_accuracy,leader_id,pool_size,included_txs,setup_s,commitment_s,prove_s,verify_s,block_generation_s,byzantine_elected";

impl MetricsRow {
    pub fn timings(&self) -> StageTimings {
        StageTimings {
            setup_s: self.setup_s,
            commitment_s: self.commitment_s,
            prove_s: self.prove_s,
            verify_s: self.verify_s,
            block_generation_s: self.block_generation_s,
        }
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SimError::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| SimError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, SimError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| SimError::Io(e.to_string()))?;
    r.deserialize().map(|row| row.map_err(|e| SimError::Io(e.to_string()))).collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sample standard deviation; zero below two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_fields_and_round_trips() {
        let rows = vec![
            MetricsRow {
                round: 1,
                global_accuracy: 0.5,
                leader_id: Some(3),
                pool_size: 4,
                included_txs: 3,
                setup_s: 0.1,
                commitment_s: 0.2,
                prove_s: 0.3,
                verify_s: 0.4,
                block_generation_s: 0.5,
                byzantine_elected: false,
            },
            MetricsRow { round: 2, leader_id: None, ..rows_default() },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_csv(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), METRICS_HEADER);
        assert_eq!(read_metrics(&p).unwrap(), rows);
    }

    fn rows_default() -> MetricsRow {
        MetricsRow {
            round: 0,
            global_accuracy: 0.0,
            leader_id: None,
            pool_size: 0,
            included_txs: 0,
            setup_s: 0.0,
            commitment_s: 0.0,
            prove_s: 0.0,
            verify_s: 0.0,
            block_generation_s: 0.0,
            byzantine_elected: false,
        }
    }

    #[test]
    fn statistics() {
        assert_eq!(mean(&[]), 0.0);
        assert_eq!(mean(&[1.0, 3.0]), 2.0);
        assert!((std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]) - 2.138089935).abs() < 1e-8);
        assert_eq!(std_dev(&[1.0]), 0.0);
    }
}
