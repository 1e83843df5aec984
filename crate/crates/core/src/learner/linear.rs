//! Ordinary least squares on internally standardized columns.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LearnError, Result};
use crate::features::FeatureMatrix;

/// Singular values below this fraction of the largest mark the design as
/// rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    /// One per feature, on the original (unstandardized) scale.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row_raw(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }
}

/// Fits `y = b0 + sum(b_j x_j)`. Constant columns get a zero coefficient.
/// A rank-deficient design fails with `SingularDesign` unless `ridge`
/// gives a positive penalty, applied on the standardized scale.
pub fn fit_linear(train: &FeatureMatrix, ridge: Option<f64>) -> Result<LinearModel> {
    let n = train.len();
    let p = train.n_features();
    if n == 0 {
        return Err(LearnError::EmptyTrain);
    }
    if n <= p {
        return Err(LearnError::InsufficientRows { rows: n, features: p });
    }
    if let Some(l) = ridge {
        if !(l.is_finite() && l > 0.0) {
            return Err(LearnError::BadParams(format!("ridge penalty {l}")));
        }
    }

    let y_mean = train.target.iter().sum::<f64>() / n as f64;
    let mut kept = Vec::new();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for j in 0..p {
        let mean = train.column(j).sum::<f64>() / n as f64;
        let var = train.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std > 0.0 && std.is_finite() {
            kept.push(j);
            means.push(mean);
            stds.push(std);
        }
    }

    let mut coefficients = vec![0.0; p];
    if !kept.is_empty() {
        let k = kept.len();
        let z = DMatrix::from_fn(n, k, |i, c| (train.rows[i][kept[c]] - means[c]) / stds[c]);
        let yc = DVector::from_iterator(n, train.target.iter().map(|y| y - y_mean));

        let svd = z.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let beta = if smin > RANK_TOLERANCE * smax {
            svd.solve(&yc, 0.0).map_err(|_| LearnError::SingularDesign)?
        } else if let Some(l) = ridge {
            let mut gram = z.transpose() * &z;
            for d in 0..k {
                gram[(d, d)] += l * n as f64;
            }
            let rhs = z.transpose() * &yc;
            gram.cholesky()
                .ok_or(LearnError::SingularDesign)?
                .solve(&rhs)
        } else {
            return Err(LearnError::SingularDesign);
        };

        for (c, &j) in kept.iter().enumerate() {
            coefficients[j] = beta[c] / stds[c];
        }
    }

    let intercept = y_mean
        - kept
            .iter()
            .enumerate()
            .map(|(c, &j)| coefficients[j] * means[c])
            .sum::<f64>();

    Ok(LinearModel {
        feature_names: train.feature_names.clone(),
        coefficients,
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: &[&str], rows: Vec<Vec<f64>>, y: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix::new(cols.iter().map(|s| s.to_string()).collect(), rows, y)
    }

    #[test]
    fn recovers_exact_line() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        let m = fit_linear(&matrix(&["x"], rows, y), None).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-9);
        assert!((m.intercept - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_target_gives_zero_slopes() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let m = fit_linear(&matrix(&["a", "b"], rows, vec![3.25; 8]), None).unwrap();
        assert_eq!(m.coefficients, vec![0.0, 0.0]);
        assert_eq!(m.intercept, 3.25);
    }

    #[test]
    fn constant_column_is_ignored() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![7.0, i as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| 0.5 * i as f64 + 2.0).collect();
        let m = fit_linear(&matrix(&["c", "x"], rows, y), None).unwrap();
        assert_eq!(m.coefficients[0], 0.0);
        assert!((m.coefficients[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn collinear_needs_ridge() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let x = matrix(&["a", "b"], rows, y);
        assert!(matches!(fit_linear(&x, None), Err(LearnError::SingularDesign)));
        let m = fit_linear(&x, Some(1e-6)).unwrap();
        assert!(m.coefficients.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn too_few_rows() {
        let x = matrix(&["a", "b"], vec![vec![1.0, 2.0], vec![2.0, 1.0]], vec![1.0, 2.0]);
        assert!(matches!(
            fit_linear(&x, None),
            Err(LearnError::InsufficientRows { rows: 2, features: 2 })
        ));
    }
}
