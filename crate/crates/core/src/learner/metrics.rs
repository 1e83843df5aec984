use serde::{Deserialize, Serialize};

use super::{LearnError, Result, MOS_MAX, MOS_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mse: f64,
    pub rmse: f64,
    /// `None` when the targets have zero variance.
    pub r2: Option<f64>,
    pub mae: f64,
}

pub fn evaluate(predictions: &[f64], targets: &[f64]) -> Result<EvalMetrics> {
    if predictions.len() != targets.len() {
        return Err(LearnError::LengthMismatch {
            predictions: predictions.len(),
            targets: targets.len(),
        });
    }
    if targets.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    let n = targets.len() as f64;
    let mut sse = 0.0;
    let mut sae = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        sse += (p - t).powi(2);
        sae += (p - t).abs();
    }
    let mean = targets.iter().sum::<f64>() / n;
    let sst: f64 = targets.iter().map(|t| (t - mean).powi(2)).sum();
    let mse = sse / n;
    Ok(EvalMetrics {
        mse,
        rmse: mse.sqrt(),
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
        mae: sae / n,
    })
}

/// Maps MOS onto `[0, 1]`.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| (v - MOS_MIN) / (MOS_MAX - MOS_MIN))
        .collect()
}
