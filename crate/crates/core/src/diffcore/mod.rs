//! Reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! Parameters live in a [`ParamStore`]. Each forward pass records onto a
//! fresh [`Tape`]; [`Tape::backward`] accumulates gradients into the store
//! and [`Adam::step`] consumes and clears them.
//!
//! ```
//! use gsalign::diffcore::{Adam, ParamStore, Tape};
//!
//! let mut store = ParamStore::new();
//! let w = store.add("w", &[3], vec![0.1, 0.2, 0.3]).unwrap();
//! let mut tape = Tape::new();
//! let wv = tape.param(&store, w);
//! let x = tape.constant(&[3], vec![1.0, 2.0, 3.0]).unwrap();
//! let prod = tape.mul(wv, x).unwrap();
//! let loss = tape.sum(prod);
//! tape.backward(loss, &mut store).unwrap();
//! assert_eq!(store.get(w).grad().unwrap(), &[1.0, 2.0, 3.0]);
//! Adam::new(1e-3).step(&mut store).unwrap();
//! ```

mod adam;
pub mod conv;
mod gru;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::Adam;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{ParamId, ParamStore, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("non-finite gradient in parameter `{param}` at index {index}")]
    NonFiniteGradient { param: String, index: usize },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("{0}")]
    InvalidArgument(String),
}

/// Overflow-safe logistic function.
pub fn sigmoid(x: f64) -> f64 {
    tape::sigmoid_f64(x)
}
