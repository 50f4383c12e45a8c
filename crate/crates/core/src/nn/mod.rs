//! Numeric kernel: LSTM cells, softmax head, dropout, ADAM and the
//! two-layer language model built from them.

mod adam;
mod dropout;
mod gradcheck;
mod lstm;
mod matrix;
mod model;
mod scalar;
mod softmax;

use thiserror::Error;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use dropout::{dropout, dropout_mask};
pub use gradcheck::{builtin_grad_check, tiny_check_model, grad_check, grad_check_with, GradCheckOptions, GradCheckReport};
pub use lstm::{
    lstm_cell_backward, lstm_cell_forward, CellGradients, CellInput, LstmCache, LstmGrads,
    LstmLayerParams, LstmState,
};
pub use matrix::Matrix;
pub use model::{Domain, LstmModel, ModelGrads, ModelHyper, WindowTrace};
pub use scalar::{Precision, Scalar};
pub use softmax::{softmax_in_place, softmax_xent_backward, softmax_xent_forward, SoftmaxLayerParams};

pub(crate) use scalar::sigmoid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("cache was produced for a {cache_input}x{cache_hidden} cell but params are {params_input}x{params_hidden}")]
    StaleCache {
        cache_input: usize,
        cache_hidden: usize,
        params_input: usize,
        params_hidden: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite gradient (training diverged)")]
    NonFiniteGradient,
    #[error("sample must contain at least one token")]
    EmptySample,
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), NnError> {
    if expected == actual {
        Ok(())
    } else {
        Err(NnError::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}

pub(crate) fn check_finite<F: Scalar>(what: &'static str, v: &[F]) -> Result<(), NnError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFinite { what })
    }
}
