//! Two-layer ReLU perceptron used by every learned component except the
//! linear neighborhood encoder.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numerics::{Matrix, NodeId, Tape};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

impl Mlp {
    /// He-style initialization of the hidden layer; the output layer starts
    /// at `output_scale` times a standard normal (zero makes the network's
    /// initial output identically zero, which several stages rely on).
    pub fn init(
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        output_scale: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let s1 = (2.0 / in_dim as f64).sqrt();
        let w1 = Matrix::from_fn(in_dim, hidden, |_, _| {
            s1 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
        });
        let s2 = output_scale * (2.0 / hidden as f64).sqrt();
        let w2 = Matrix::from_fn(hidden, out_dim, |_, _| {
            s2 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
        });
        Mlp {
            w1,
            b1: Matrix::zeros(1, hidden),
            w2,
            b2: Matrix::zeros(1, out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.w2.cols()
    }

    pub fn params(&self) -> Vec<Matrix> {
        vec![self.w1.clone(), self.b1.clone(), self.w2.clone(), self.b2.clone()]
    }

    pub fn set_params(&mut self, params: &[Matrix]) {
        self.w1 = params[0].clone();
        self.b1 = params[1].clone();
        self.w2 = params[2].clone();
        self.b2 = params[3].clone();
    }

    /// Register this network's forward pass on a tape. `param_ids` must be
    /// the four tape nodes holding w1, b1, w2, b2 in order.
    pub fn forward_on_tape(&self, tape: &mut Tape, x: NodeId, param_ids: &[NodeId]) -> Result<NodeId> {
        let pre = tape.matmul(x, param_ids[0])?;
        let pre = tape.add_row_broadcast(pre, param_ids[1])?;
        let hidden = tape.relu(pre);
        let out = tape.matmul(hidden, param_ids[2])?;
        tape.add_row_broadcast(out, param_ids[3])
    }

    /// Plain inference without a tape.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut hidden = x.matmul(&self.w1)?;
        for i in 0..hidden.rows() {
            for (v, b) in hidden.row_mut(i).iter_mut().zip(self.b1.row(0)) {
                *v = (*v + b).max(0.0);
            }
        }
        let mut out = hidden.matmul(&self.w2)?;
        for i in 0..out.rows() {
            for (v, b) in out.row_mut(i).iter_mut().zip(self.b2.row(0)) {
                *v += b;
            }
        }
        Ok(out)
    }
}

/// Deterministic RNG for weight initialization.
#[cfg(test)]
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}
