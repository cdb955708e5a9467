//! Causal decoupling for out-of-distribution node classification.
//!
//! The library has three layers:
//!
//! - [`numerics`]: dense matrices, a reverse-mode differentiation tape, and
//!   an Adam optimizer — enough to train small MLPs and graph-convolution
//!   backbones in full `f64`.
//! - [`graph`] / [`scmgen`] / [`splits`]: graph containers and propagation,
//!   a structural-causal-model generator for synthetic graphs with
//!   controllable distribution shifts, and the soft label-leaveout split.
//! - [`model`] / [`diagnostics`] / [`harness`]: the dual causal decomposition
//!   training pipeline with background counterfactual effect estimation, an
//!   ERM baseline, Hotelling T² shift diagnostics, and the experiment runner
//!   behind the `decaf` CLI.
//!
//! Everything is deterministic given a seed; training is single-threaded.

pub mod diagnostics;
pub mod graph;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod scmgen;
pub mod splits;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numeric error: non-finite value at tape node {node}")]
    NonFinite { node: usize },
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("singular system in Hotelling T² even after ridging")]
    Singular,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error in {file} at line {line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Wrap an error with the pipeline stage it came from.
    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
