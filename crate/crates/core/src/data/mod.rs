//! Corpus preparation: resampling, standardization, MFB features, the
//! synthetic generator, and the on-disk formats.

mod corpus;
mod mfb;
mod resample;
mod standardize;
mod synth;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::trace::{AnnotationSet, FeatureMatrix};

pub use corpus::{
    load_corpus, read_annotations_csv, read_features_csv, read_truth_csv, write_annotations_csv, write_corpus,
    write_features_csv, write_truth_csv, LoadFailure, LoadReport, MANIFEST_NAME,
};
pub use mfb::{extract_mfb, filter_centers, frame_count, hz_to_mel, mel_to_hz, read_wav, N_FILTERS};
pub use resample::resample_linear;
pub use standardize::{standardize, Standardizer};
pub use synth::{generate_synthetic, DelayProfile, DelaySegment, SynthSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{what} too short ({len} samples)")]
    TooShort { what: &'static str, len: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{0}")]
    Load(LoadReport),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Partition {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Test => "test",
        })
    }
}

impl FromStr for Partition {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Partition::Train),
            "dev" | "devel" | "development" => Ok(Partition::Dev),
            "test" => Ok(Partition::Test),
            other => Err(DataError::Invalid(format!("unknown partition `{other}`"))),
        }
    }
}

/// Known generating signal of a synthetic recording.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub latent: Vec<f64>,
    /// Per annotator, the true delay in seconds at every sample.
    pub delays: Vec<Vec<f64>>,
}

/// One recording with features and annotations at a common rate and length.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub id: String,
    pub partition: Partition,
    pub features: FeatureMatrix,
    pub annotations: AnnotationSet,
    pub truth: Option<GroundTruth>,
}

impl Recording {
    pub fn sample_rate(&self) -> f64 {
        self.features.frame_rate
    }

    pub fn len(&self) -> usize {
        self.features.frames()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
