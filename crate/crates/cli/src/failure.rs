//! Error classification into process exit codes.

use std::fmt::Display;
use std::path::Path;

use gsalign::alignment::AlignError;
use gsalign::data::DataError;
use gsalign::modelio::ModelIoError;
use gsalign::prediction::PredictError;

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;
pub const EXIT_MISSING_GS: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }

    pub fn invalid(msg: impl Display) -> Self {
        Failure::new(EXIT_INVALID, anyhow::anyhow!("{msg}"))
    }

    pub fn missing_gs(msg: impl Display) -> Self {
        Failure::new(EXIT_MISSING_GS, anyhow::anyhow!("{msg}"))
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::new(EXIT_OTHER, anyhow::anyhow!("{}: {e}", path.display()))
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::new(EXIT_INVALID, e)
    }
}

impl From<AlignError> for Failure {
    fn from(e: AlignError) -> Self {
        let code = match e {
            AlignError::Diverged { .. } | AlignError::Degenerate { .. } => EXIT_DIVERGED,
            AlignError::Config(_) | AlignError::Input(_) | AlignError::MissingPartition(_) | AlignError::AnnotatorCount { .. } => {
                EXIT_INVALID
            }
            _ => EXIT_OTHER,
        };
        Failure::new(code, e)
    }
}

impl From<PredictError> for Failure {
    fn from(e: PredictError) -> Self {
        let code = match e {
            PredictError::Diverged { .. } | PredictError::Degenerate { .. } => EXIT_DIVERGED,
            PredictError::Config(_) | PredictError::Input(_) | PredictError::MissingPartition(_) => EXIT_INVALID,
            _ => EXIT_OTHER,
        };
        Failure::new(code, e)
    }
}

impl From<ModelIoError> for Failure {
    fn from(e: ModelIoError) -> Self {
        Failure::new(EXIT_OTHER, e)
    }
}
