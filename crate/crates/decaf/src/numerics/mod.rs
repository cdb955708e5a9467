//! Dense matrix algebra, a reverse-mode differentiation tape, and Adam.

mod adam;
mod matrix;
mod tape;

pub use adam::{adam_step, AdamState};
pub use matrix::Matrix;
pub use tape::{
    evaluate_with_gradients, softmax_cross_entropy, softmax_rows, NodeId, SparseConst, Tape,
};
