//! MOS regressors: an ordinary least squares baseline and a random forest
//! of CART trees. Predictions are clamped to the MOS range `[1, 5]`.

mod forest;
mod linear;
mod metrics;
mod persist;
mod tree;

pub use forest::{fit_forest, ForestModel, ForestParams};
pub use linear::{fit_linear, LinearModel};
pub use metrics::{evaluate, min_max_normalize, EvalMetrics};
pub use persist::{load_model, save_model, FOREST_MAGIC, FOREST_FORMAT_VERSION};
pub use tree::{Tree, TreeNode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;

pub const MOS_MIN: f64 = 1.0;
pub const MOS_MAX: f64 = 5.0;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training set is empty")]
    EmptyTrain,
    #[error("need more rows ({rows}) than features ({features})")]
    InsufficientRows { rows: usize, features: usize },
    #[error("design matrix is singular; retry with a ridge penalty")]
    SingularDesign,
    #[error("model expects features {expected:?}, input has {got:?}")]
    FeatureMismatch { expected: Vec<String>, got: Vec<String> },
    #[error("{predictions} predictions for {targets} targets")]
    LengthMismatch { predictions: usize, targets: usize },
    #[error("nothing to evaluate")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    BadParams(String),
    #[error("model file is malformed: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = LearnError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    Forest(ForestModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub values: Vec<f64>,
    /// Raw outputs that fell outside `[1, 5]` before clamping.
    pub clamped: usize,
}

pub fn clamp_mos(v: f64) -> f64 {
    v.clamp(MOS_MIN, MOS_MAX)
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::Forest(_) => "random_forest",
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Linear(m) => &m.feature_names,
            Model::Forest(m) => &m.feature_names,
        }
    }

    pub fn predict_row_raw(&self, row: &[f64]) -> f64 {
        match self {
            Model::Linear(m) => m.predict_row_raw(row),
            Model::Forest(m) => m.predict_row_raw(row),
        }
    }

    /// Predicts every row. If the matrix has extra or reordered columns it
    /// is projected onto the model's features first.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Predictions> {
        let projected;
        let x = if x.feature_names == self.feature_names() {
            x
        } else {
            let names: Vec<&str> = self.feature_names().iter().map(String::as_str).collect();
            projected = x.select(&names).map_err(|_| LearnError::FeatureMismatch {
                expected: self.feature_names().to_vec(),
                got: x.feature_names.clone(),
            })?;
            &projected
        };
        let mut clamped = 0;
        let values = x
            .rows
            .iter()
            .map(|r| {
                let raw = self.predict_row_raw(r);
                let v = clamp_mos(raw);
                if v != raw {
                    clamped += 1;
                }
                v
            })
            .collect();
        Ok(Predictions { values, clamped })
    }
}

impl From<LinearModel> for Model {
    fn from(m: LinearModel) -> Self {
        Model::Linear(m)
    }
}

impl From<ForestModel> for Model {
    fn from(m: ForestModel) -> Self {
        Model::Forest(m)
    }
}
