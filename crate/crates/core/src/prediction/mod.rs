//! Emotion predictors trained against a gold standard: LT (linear, tanh) and
//! SLTS (Sinc, linear, tanh, Sinc), where both Sinc layers learn their own
//! cutoff.

mod model;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::DiffError;
use crate::metrics::MetricError;
use crate::modelio::ModelIoError;

pub use model::{PredictorModel, PREDICTOR_KIND};
pub use train::{
    compare_targets, evaluate, evaluate_variant, train_predictor, write_comparison_csv, write_predictions_csv,
    EvaluationRow, PredictorEpoch, TrainedPredictor, VariantResult,
};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("no {0} recordings")]
    MissingPartition(&'static str),
    #[error("training diverged at epoch {epoch} on `{recording}`: loss {loss}")]
    Diverged { epoch: usize, recording: String, loss: f64 },
    #[error("degenerate trace at epoch {epoch} on `{recording}`: {source}")]
    Degenerate {
        epoch: usize,
        recording: String,
        #[source]
        source: DiffError,
    },
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "LT")]
    Lt,
    #[serde(rename = "SLTS")]
    Slts,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Lt => "LT",
            Variant::Slts => "SLTS",
        })
    }
}

impl FromStr for Variant {
    type Err = PredictError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "LT" => Ok(Variant::Lt),
            "SLTS" => Ok(Variant::Slts),
            other => Err(PredictError::Input(format!("unknown variant `{other}` (expected LT or SLTS)"))),
        }
    }
}

/// Which gold standard a predictor is trained and scored against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetGs {
    /// Plain average of the annotations.
    Baseline,
    /// Output of a trained aligner.
    Generated,
}

impl fmt::Display for TargetGs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetGs::Baseline => "baseline",
            TargetGs::Generated => "generated",
        })
    }
}

impl FromStr for TargetGs {
    type Err = PredictError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(TargetGs::Baseline),
            "generated" => Ok(TargetGs::Generated),
            other => Err(PredictError::Input(format!(
                "unknown gold standard `{other}` (expected baseline or generated)"
            ))),
        }
    }
}
