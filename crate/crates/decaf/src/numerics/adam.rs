//! Adam with coupled L2 weight decay (decay added into the gradient).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::Matrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    first_moment: Vec<Matrix>,
    second_moment: Vec<Matrix>,
    step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl AdamState {
    /// Accumulators are allocated to match `params` shapes.
    pub fn new(params: &[Matrix], learning_rate: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Matrix> = params
            .iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect();
        AdamState {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One Adam update in place. Weight decay is coupled: `g ← g + wd·θ`.
pub fn adam_step(params: &mut [Matrix], grads: &[Matrix], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::shape("adam parameter/gradient count"));
    }
    for ((p, g), (m, v)) in params.iter().zip(grads).zip(
        state
            .first_moment
            .iter()
            .zip(state.second_moment.iter()),
    ) {
        if p.shape() != g.shape() || p.shape() != m.shape() || p.shape() != v.shape() {
            return Err(Error::shape("adam accumulator shape"));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(
        state
            .first_moment
            .iter_mut()
            .zip(state.second_moment.iter_mut()),
    ) {
        for i in 0..p.values().len() {
            let grad = g.values()[i] + state.weight_decay * p.values()[i];
            let mi = state.beta1 * m.values()[i] + (1.0 - state.beta1) * grad;
            let vi = state.beta2 * v.values()[i] + (1.0 - state.beta2) * grad * grad;
            m.values_mut()[i] = mi;
            v.values_mut()[i] = vi;
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            p.values_mut()[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut params = vec![Matrix::from_vec(1, 2, vec![0.3, -0.7]).unwrap()];
        let grads = vec![Matrix::zeros(1, 2)];
        let mut state = AdamState::new(&params, 1e-3, 0.0);
        let before = params.clone();
        adam_step(&mut params, &grads, &mut state).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        // Scalar param 0, grad 1, lr 1e-3: bias-corrected m̂ = v̂ = 1 so the
        // update is -lr·1/(1 + ε) ≈ -1e-3.
        let mut params = vec![Matrix::zeros(1, 1)];
        let grads = vec![Matrix::from_vec(1, 1, vec![1.0]).unwrap()];
        let mut state = AdamState::new(&params, 1e-3, 0.0);
        adam_step(&mut params, &grads, &mut state).unwrap();
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((params[0].get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn deterministic_updates() {
        let run = || {
            let mut params = vec![Matrix::from_vec(2, 2, vec![0.1, 0.2, -0.3, 0.4]).unwrap()];
            let grads = vec![Matrix::from_vec(2, 2, vec![0.5, -0.1, 0.9, 0.0]).unwrap()];
            let mut state = AdamState::new(&params, 1e-3, 1e-5);
            for _ in 0..10 {
                adam_step(&mut params, &grads, &mut state).unwrap();
            }
            params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut params = vec![Matrix::zeros(1, 2)];
        let grads = vec![Matrix::zeros(2, 1)];
        let mut state = AdamState::new(&params, 1e-3, 0.0);
        assert!(adam_step(&mut params, &grads, &mut state).is_err());
    }
}
