//! Joint annotation correction and gold-standard generation for continuous
//! emotion traces.
//!
//! The crate is layered bottom-up:
//!
//! - [`diffcore`]: reverse-mode autodiff, the GRU scan and Adam.
//! - [`metrics`]: CCC, Pearson, Cross-CCC, pairwise Cronbach's alpha and
//!   the Fisher r-to-z comparison.
//! - [`layers`]: linear, bidirectional GRU, Sinc low-pass and softmax fusion.
//! - [`alignment`]: the corrector/predictor tandem and its joint loss.
//! - [`prediction`]: the LT and SLTS emotion predictors.
//! - [`data`]: resampling, standardization, MFB features, corpus I/O and a
//!   synthetic multi-annotator generator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod data;
pub mod diffcore;
pub mod layers;
pub mod metrics;
pub mod modelio;
pub mod prediction;
pub mod trace;

pub use trace::{AnnotationSet, FeatureMatrix, TraceError, TraceSequence};
