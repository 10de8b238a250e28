//! Tandem gold-standard generation: a shared bidirectional GRU corrects each
//! annotation trace, softmax weights fuse the corrections into a gold
//! standard, and a frame-wise linear predictor maps features onto it. All
//! three are trained together on
//!
//! `L = [1 - mean_n CrossCCC(original_n, corrected_n)] + [1 - CCC(prediction, gs)]`.

mod model;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::DiffError;
use crate::metrics::{LagGrid, MetricError};
use crate::modelio::ModelIoError;
use crate::trace::TraceSequence;

pub use model::{AlignerModel, LossTerms, ALIGNER_KIND};
pub use train::{
    align_recordings, generate_gold_standard, train_aligner, train_aligner_observed, write_gs_csv, AlignedRecording, EpochStats, TrainedAligner,
};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("no {0} recordings")]
    MissingPartition(&'static str),
    #[error("expected {expected} annotators, got {found}")]
    AnnotatorCount { expected: usize, found: usize },
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

/// Optimization settings shared by the aligner and the predictors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub lag_step_s: f64,
    pub max_lag_s: f64,
    pub hidden_size: usize,
    pub seed: u64,
    pub runs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            max_epochs: 250,
            patience: 10,
            lag_step_s: 0.1,
            max_lag_s: 10.0,
            hidden_size: 128,
            seed: 0,
            runs: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        let bad = |m: &str| Err(AlignError::Config(m.to_string()));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.max_epochs == 0 || self.patience == 0 || self.hidden_size == 0 || self.runs == 0 {
            return bad("max_epochs, patience, hidden_size and runs must be positive");
        }
        if self.patience >= self.max_epochs {
            return bad("patience must be smaller than max_epochs");
        }
        if !(self.lag_step_s > 0.0) || !(self.max_lag_s >= 0.0) {
            return bad("lag grid needs step > 0 and max >= 0");
        }
        Ok(())
    }

    pub fn lag_grid(&self, sample_rate: f64) -> Result<LagGrid, AlignError> {
        Ok(LagGrid::new(self.lag_step_s, self.max_lag_s, sample_rate)?)
    }

    /// Seed of the `run`-th repetition.
    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }
}

/// Corrected traces, their fusion, and the feature-side prediction for one
/// recording. `gold_standard` is exactly the fusion of `corrected`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignerOutput {
    pub corrected: Vec<Vec<f64>>,
    pub gold_standard: TraceSequence,
    pub prediction: TraceSequence,
}
