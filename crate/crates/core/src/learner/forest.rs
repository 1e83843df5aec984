//! Random forest regression.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Tree, TreeBuilder, TreeParams};
use super::{LearnError, Result};
use crate::features::FeatureMatrix;
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Share of features drawn as split candidates at each node.
    pub max_features_fraction: f64,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 600,
            max_depth: 48,
            max_features_fraction: 0.58,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    /// `ceil(fraction * n_features)`, at least one.
    pub fn n_candidates(&self, n_features: usize) -> usize {
        // guard against products such as 0.58 * 50 = 29.000000000000004
        let raw = self.max_features_fraction * n_features as f64 - 1e-9;
        (raw.ceil() as usize).clamp(1, n_features.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(LearnError::BadParams("n_estimators must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(LearnError::BadParams("max_depth must be at least 1".into()));
        }
        if !(self.max_features_fraction > 0.0 && self.max_features_fraction <= 1.0) {
            return Err(LearnError::BadParams(format!(
                "max_features_fraction {} must lie in (0, 1]",
                self.max_features_fraction
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(LearnError::BadParams("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub feature_names: Vec<String>,
    pub params: ForestParams,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Mean of the tree outputs, unclamped. A running mean keeps identical
    /// tree outputs exact.
    pub fn predict_row_raw(&self, row: &[f64]) -> f64 {
        let mut mean = 0.0;
        for (k, t) in self.trees.iter().enumerate() {
            mean += (t.predict(row) - mean) / (k + 1) as f64;
        }
        mean
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }
}

/// Grows `n_estimators` trees. Tree `t` draws its bootstrap sample and
/// candidate features from a stream derived from `(seed, t)`, so results do
/// not depend on build order.
pub fn fit_forest(train: &FeatureMatrix, params: &ForestParams) -> Result<ForestModel> {
    params.validate()?;
    let n = train.len();
    if n == 0 {
        return Err(LearnError::EmptyTrain);
    }
    let f = train.n_features();
    let columns: Vec<Vec<f64>> = (0..f).map(|j| train.column(j).collect()).collect();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        n_candidates: params.n_candidates(f),
        min_samples_leaf: params.min_samples_leaf,
    };

    let mut trees = Vec::with_capacity(params.n_estimators);
    for t in 0..params.n_estimators {
        let mut rng = rng_for(params.seed, "forest-tree", t as u64);
        let mut samples: Vec<u32> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n as u32)).collect()
        } else {
            (0..n as u32).collect()
        };
        trees.push(TreeBuilder::new(&columns, &train.target, tree_params, &mut rng).build(&mut samples));
    }
    log::debug!("grew {} trees on {} rows", trees.len(), n);

    Ok(ForestModel {
        feature_names: train.feature_names.clone(),
        params: *params,
        trees,
    })
}
