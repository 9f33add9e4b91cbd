//! Reverse-mode automatic differentiation over small dense arrays.
//!
//! Graphs are built per evaluation (define-by-run). All arithmetic is in
//! double precision.

mod array;
mod check;
mod graph;
mod params;

pub use array::Array;
pub use check::{check_gradients, GradCheckReport, LeafCheck};
pub use graph::{Graph, NodeId, Primitive, LOG_FLOOR};
pub use params::{Checkpoint, ParameterStore, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

pub(crate) use params::{format_values, parse_values};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("shape mismatch in {tag}: {shapes:?}")]
    Shape { tag: Primitive, shapes: Vec<Vec<usize>> },
    #[error("leaf {0:?} is not bound to a value")]
    UnboundLeaf(String),
    #[error("backward requires a scalar root, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("node #{0} has not been evaluated; run forward first")]
    NotEvaluated(usize),
    #[error("node #{0} is not a leaf")]
    NotALeaf(usize),
    #[error("cannot bind {name:?}: expected shape {expected:?}, got {got:?}")]
    BindShape { name: String, expected: Vec<usize>, got: Vec<usize> },
    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),
    #[error("duplicate parameter {0:?}")]
    DuplicateParameter(String),
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
}

#[cfg(test)]
mod tests;
