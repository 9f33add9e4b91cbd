//! STORN: generative RNN over `x`, trending-prior RNN over `z`, and a causal
//! recognition RNN, all with diagonal Gaussian heads.

mod gaussian;
mod inference;
mod model;

pub use gaussian::{
    bound_logvar, gaussian_kl, gaussian_logpdf, kl_elements, log_mean_exp, logpdf_elements, reparameterize,
    sample_latent, GaussianParams, LOGVAR_BOUND,
};
pub use inference::{
    ElboBreakdown, FilterRun, ImportanceEstimate, PredictMode, PredictiveGaussian, SequenceGraph, StepTerms,
};
pub use model::{Component, FilterState, ModelDims, NoiseStream, StornModel};

use thiserror::Error;

use crate::autodiff::GraphError;

/// Sample paths used for the bound during training.
pub const TRAIN_SAMPLES: usize = 1;
/// Sample paths used for the bound when scoring.
pub const SCORE_SAMPLES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("step {step}: expected {expected} values, got {got}")]
    RowDim { step: usize, expected: usize, got: usize },
    #[error("length mismatch: x has {x} steps, z has {z}")]
    LengthMismatch { x: usize, z: usize },
    #[error("non-finite {what}{}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NonFinite { step: Option<usize>, what: &'static str },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("bad model checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
