use serde::{Deserialize, Serialize};

/// Adam moment estimates for a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(num_params: usize) -> Self {
        Self {
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update in place. Weight decay is coupled: the
/// gradient used is `g + weight_decay * theta`.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    learning_rate: f64,
    weight_decay: f64,
) {
    assert_eq!(params.len(), grads.len(), "parameter/gradient length mismatch");
    assert_eq!(params.len(), state.first_moment.len(), "optimizer state length mismatch");
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        let g = g + weight_decay * *p;
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![0.3, -1.2, 4.0];
        let orig = p.clone();
        let mut s = OptimizerState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut s, 1e-3, 0.0);
        assert_eq!(p, orig);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let g = [2.5, -0.01, 300.0];
        let mut p = vec![0.0; 3];
        let mut s = OptimizerState::new(3);
        let lr = 1e-2;
        adam_step(&mut p, &g, &mut s, lr, 0.0);
        for (pi, gi) in p.iter().zip(g) {
            let expected = -lr * gi / (gi.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15);
            assert!((pi.abs() - lr).abs() < 1e-6 * lr / gi.abs().min(1.0));
        }
    }

    #[test]
    fn weight_decay_is_added_to_gradient() {
        let mut a = vec![2.0];
        let mut b = vec![2.0];
        let (mut sa, mut sb) = (OptimizerState::new(1), OptimizerState::new(1));
        adam_step(&mut a, &[0.5], &mut sa, 1e-3, 0.1);
        adam_step(&mut b, &[0.5 + 0.1 * 2.0], &mut sb, 1e-3, 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn quadratic_descends_monotonically() {
        // f(theta) = theta^2, gradient 2 theta
        let mut theta = vec![1.0f64];
        let mut s = OptimizerState::new(1);
        let mut prev = theta[0].abs();
        for _ in 0..10 {
            let g = [2.0 * theta[0]];
            adam_step(&mut theta, &g, &mut s, 0.1, 0.0);
            assert!(theta[0].abs() < prev, "{} !< {prev}", theta[0].abs());
            prev = theta[0].abs();
        }
    }
}
