//! Black-box predictors.
//!
//! Anything implementing [`Predictor`] can be explained. Two models ship with
//! the crate: [`LinearModel`], a weighted sum of per-feature utilities whose
//! importances are known analytically, and [`RandomForest`], a small CART
//! ensemble used for the tabular experiments.

mod forest;
mod linear;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, FeatureSchema, Instance};

pub use forest::{train_random_forest, ForestParams, RandomForest, SplitSpec, TrainingReport};
pub use linear::{LinearModel, UtilityTransform};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("cannot train: {0}")]
    Training(String),
    #[error("cannot read or write model file {path}: {message}")]
    Persistence { path: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// One probability per class, summing to one.
    Classification,
    /// Outputs already on a `[0, 1]` utility scale.
    Utility,
    /// Unbounded outputs; explanations need an explicit utility map.
    Regression,
}

/// A model to explain. Implementations must be pure and safe to call from
/// several threads at once.
pub trait Predictor: Send + Sync {
    fn schema(&self) -> &FeatureSchema;

    fn output_names(&self) -> Vec<String>;

    fn task(&self) -> Task;

    /// Evaluates without validating `x` against the schema.
    fn predict_values(&self, x: &[f64]) -> Vec<f64>;

    fn n_outputs(&self) -> usize {
        self.output_names().len()
    }
}

/// Validates `x` against the model's schema, then evaluates.
pub fn predict<P: Predictor + ?Sized>(model: &P, x: &Instance) -> Result<Vec<f64>, ModelError> {
    model.schema().validate(x.values())?;
    Ok(model.predict_values(x.values()))
}

pub const MODEL_FORMAT: &str = "ciu-model/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SavedModel {
    RandomForest(RandomForest),
    Linear(LinearModel),
}

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    format: String,
    model: SavedModel,
}

impl SavedModel {
    pub fn predictor(&self) -> &dyn Predictor {
        match self {
            SavedModel::RandomForest(m) => m,
            SavedModel::Linear(m) => m,
        }
    }

    pub fn to_json(&self) -> String {
        let env = ModelEnvelope {
            format: MODEL_FORMAT.to_string(),
            model: self.clone(),
        };
        serde_json::to_string(&env).expect("models serialize to JSON")
    }

    pub fn from_json(text: &str) -> Result<SavedModel, ModelError> {
        let env: ModelEnvelope = serde_json::from_str(text)
            .map_err(|e| ModelError::Invalid(format!("not a model file: {e}")))?;
        if env.format != MODEL_FORMAT {
            return Err(ModelError::Invalid(format!(
                "unsupported model format `{}`",
                env.format
            )));
        }
        Ok(env.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| ModelError::Persistence {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SavedModel, ModelError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ModelError::Persistence {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        SavedModel::from_json(&text)
    }
}
