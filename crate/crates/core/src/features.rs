//! Feature engineering over cleaned records.
//!
//! Beyond the five base KPIs the model sees log transforms of delay and
//! bitrate, the throughput×jitter and delay×jitter interactions, squared
//! packet loss and `loss_rate = bitrate / (packet_loss + 1)`.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CleanDataset;
use crate::seed::rng_for;

/// Added to packet loss (percent) in the `loss_rate` denominator.
pub const LOSS_RATE_EPSILON: f64 = 1.0;

pub const BASE_FEATURES: [&str; 5] = ["delay", "bitrate", "jitter", "throughput", "packet_loss"];

pub const ENGINEERED_FEATURES: [&str; 11] = [
    "delay",
    "bitrate",
    "jitter",
    "throughput",
    "packet_loss",
    "log_delay",
    "log_bitrate",
    "thr_x_jitter",
    "delay_x_jitter",
    "packet_loss_sq",
    "loss_rate",
];

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("row {row} is not cleaned: delay {delay} and bitrate {bitrate} must be positive")]
    NotCleaned { row: usize, delay: f64, bitrate: f64 },
    #[error("need at least 5 rows to split, got {0}")]
    TooFewRows(usize),
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("split of {rows} rows at fraction {fraction} leaves an empty partition")]
    EmptyPartition { rows: usize, fraction: f64 },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub delay: f64,
    pub bitrate: f64,
    pub jitter: f64,
    pub throughput: f64,
    pub packet_loss: f64,
    pub log_delay: f64,
    pub log_bitrate: f64,
    pub thr_x_jitter: f64,
    pub delay_x_jitter: f64,
    pub packet_loss_sq: f64,
    pub loss_rate: f64,
}

impl FeatureVector {
    /// Builds all features from the five KPIs. Delay and bitrate must be
    /// positive.
    pub fn from_kpis(delay: f64, bitrate: f64, jitter: f64, throughput: f64, packet_loss: f64) -> Self {
        Self {
            delay,
            bitrate,
            jitter,
            throughput,
            packet_loss,
            log_delay: delay.ln(),
            log_bitrate: bitrate.ln(),
            thr_x_jitter: throughput * jitter,
            delay_x_jitter: delay * jitter,
            packet_loss_sq: packet_loss * packet_loss,
            loss_rate: bitrate / (packet_loss + LOSS_RATE_EPSILON),
        }
    }

    /// Values in `ENGINEERED_FEATURES` order.
    pub fn to_array(&self) -> [f64; 11] {
        [
            self.delay,
            self.bitrate,
            self.jitter,
            self.throughput,
            self.packet_loss,
            self.log_delay,
            self.log_bitrate,
            self.thr_x_jitter,
            self.delay_x_jitter,
            self.packet_loss_sq,
            self.loss_rate,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        ENGINEERED_FEATURES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.to_array()[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStat {
    pub mean: f64,
    pub std: f64,
    /// Zero spread; the column was left as is.
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub stats: Vec<FeatureStat>,
}

impl Normalization {
    pub fn flagged(&self) -> impl Iterator<Item = usize> + '_ {
        self.stats
            .iter()
            .enumerate()
            .filter(|(_, s)| s.constant)
            .map(|(i, _)| i)
    }
}

/// Dense, model-ready rows with their MOS targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub normalization: Option<Normalization>,
}

impl FeatureMatrix {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>, target: Vec<f64>) -> Self {
        assert_eq!(rows.len(), target.len(), "rows and targets must pair up");
        debug_assert!(rows.iter().all(|r| r.len() == feature_names.len()));
        Self {
            feature_names,
            rows,
            target,
            normalization: None,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    /// Projects onto the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<FeatureMatrix> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| FeatureError::UnknownFeature(n.to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(FeatureMatrix {
            feature_names: names.iter().map(|s| s.to_string()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i]).collect())
                .collect(),
            target: self.target.clone(),
            normalization: self
                .normalization
                .as_ref()
                .map(|n| Normalization {
                    stats: idx.iter().map(|&i| n.stats[i]).collect(),
                }),
        })
    }

    fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            target: indices.iter().map(|&i| self.target[i]).collect(),
            normalization: self.normalization.clone(),
        }
    }

    /// Writes the matrix with a `feature_names..., mos` header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{},mos", self.feature_names.join(","))?;
        for (row, y) in self.rows.iter().zip(&self.target) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{},{}", cells.join(","), y)?;
        }
        Ok(())
    }

    /// Long-format `feature,value,mos` series, one block per feature, for
    /// feature-versus-MOS scatter plots.
    pub fn write_scatter_series<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "feature,value,mos")?;
        for (j, name) in self.feature_names.iter().enumerate() {
            for (row, y) in self.rows.iter().zip(&self.target) {
                writeln!(out, "{name},{},{y}", row[j])?;
            }
        }
        Ok(())
    }
}

/// Builds the eleven-column matrix. Packet loss is in percent.
pub fn engineer(data: &CleanDataset) -> Result<FeatureMatrix> {
    let mut rows = Vec::with_capacity(data.records.len());
    let mut target = Vec::with_capacity(data.records.len());
    for (i, rec) in data.records.iter().enumerate() {
        let (delay, bitrate) = (rec.delay_ms as f64, rec.bitrate_kbps as f64);
        if delay <= 0.0 || bitrate <= 0.0 {
            return Err(FeatureError::NotCleaned { row: i, delay, bitrate });
        }
        let v = FeatureVector::from_kpis(
            delay,
            bitrate,
            rec.jitter_ms as f64,
            rec.throughput_bps as f64,
            rec.loss_pct(),
        );
        rows.push(v.to_array().to_vec());
        target.push(rec.mos());
    }
    Ok(FeatureMatrix::new(
        ENGINEERED_FEATURES.iter().map(|s| s.to_string()).collect(),
        rows,
        target,
    ))
}

/// Seeded shuffle, then the first `round(test_fraction * N)` rows go to test.
pub fn split(matrix: &FeatureMatrix, test_fraction: f64, seed: u64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(FeatureError::BadFraction(test_fraction));
    }
    let n = matrix.len();
    if n < 5 {
        return Err(FeatureError::TooFewRows(n));
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(FeatureError::EmptyPartition {
            rows: n,
            fraction: test_fraction,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, "split", 0));
    let (test_idx, train_idx) = order.split_at(n_test);
    Ok((matrix.subset(train_idx), matrix.subset(test_idx)))
}

fn column_stats(matrix: &FeatureMatrix) -> Normalization {
    let n = matrix.len() as f64;
    let stats = (0..matrix.n_features())
        .map(|j| {
            let mean = matrix.column(j).sum::<f64>() / n;
            let var = matrix.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            FeatureStat {
                mean,
                std,
                constant: !(std > 0.0) || std <= mean.abs() * 1e-12,
            }
        })
        .collect();
    Normalization { stats }
}

/// Applies stored statistics; flagged columns pass through unchanged.
pub fn apply_normalization(matrix: &FeatureMatrix, norm: &Normalization) -> FeatureMatrix {
    let rows = matrix
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&norm.stats)
                .map(|(v, s)| if s.constant { *v } else { (v - s.mean) / s.std })
                .collect()
        })
        .collect();
    FeatureMatrix {
        feature_names: matrix.feature_names.clone(),
        rows,
        target: matrix.target.clone(),
        normalization: Some(norm.clone()),
    }
}

/// Z-scores both partitions with statistics from `train` only.
///
/// # Panics
/// If `train` is empty.
pub fn standardize(train: &FeatureMatrix, test: &FeatureMatrix) -> (FeatureMatrix, FeatureMatrix, Normalization) {
    assert!(!train.is_empty(), "cannot standardize an empty training set");
    let norm = column_stats(train);
    (
        apply_normalization(train, &norm),
        apply_normalization(test, &norm),
        norm,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n: usize) -> FeatureMatrix {
        FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            (0..n).map(|i| vec![i as f64, 7.0]).collect(),
            (0..n).map(|i| i as f64).collect(),
        )
    }

    #[test]
    fn unit_inputs() {
        let v = FeatureVector::from_kpis(1.0, 1.0, 1.0, 0.0, 0.0);
        assert_eq!((v.log_delay, v.log_bitrate), (0.0, 0.0));
        assert_eq!((v.thr_x_jitter, v.packet_loss_sq), (0.0, 0.0));
        assert_eq!(v.delay_x_jitter, 1.0);
        assert_eq!(v.loss_rate, 1.0);
    }

    #[test]
    fn delay_jitter_product() {
        assert_eq!(FeatureVector::from_kpis(100.0, 1.0, 50.0, 0.0, 0.0).delay_x_jitter, 5000.0);
    }

    #[test]
    fn split_sizes_and_errors() {
        let (train, test) = split(&matrix(10), 0.2, 3).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert_eq!(split(&matrix(4), 0.2, 3).unwrap_err(), FeatureError::TooFewRows(4));
        assert!(matches!(split(&matrix(10), 1.0, 3), Err(FeatureError::BadFraction(_))));
        assert!(matches!(split(&matrix(10), 0.0, 3), Err(FeatureError::BadFraction(_))));
    }

    #[test]
    fn split_size_at_full_scale() {
        assert_eq!((0.2 * 20_411.0_f64).round() as usize, 4_082);
        let (train, test) = split(&matrix(20_411), 0.2, 1).unwrap();
        assert_eq!((train.len(), test.len()), (16_329, 4_082));
    }

    #[test]
    fn constant_column_is_flagged_and_untouched() {
        let m = matrix(10);
        let (tr, _, norm) = standardize(&m, &m);
        assert_eq!(norm.flagged().collect::<Vec<_>>(), vec![1]);
        assert!(tr.column(1).all(|v| v == 7.0));
    }

    #[test]
    fn select_projects_columns() {
        let m = matrix(3);
        let s = m.select(&["b"]).unwrap();
        assert_eq!(s.rows[2], vec![7.0]);
        assert_eq!(m.select(&["zzz"]).unwrap_err(), FeatureError::UnknownFeature("zzz".into()));
    }
}
