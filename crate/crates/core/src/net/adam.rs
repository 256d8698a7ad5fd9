//! Bias-corrected adaptive-moment (Adam) update.

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len] }
    }
}

/// One update at 1-based `step`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64, step: u64) {
    assert!(step >= 1, "adam step counter starts at 1");
    assert!(
        params.len() == grads.len() && grads.len() == state.m.len() && state.m.len() == state.v.len(),
        "adam: parameter, gradient and moment lengths differ"
    );
    let c1 = 1.0 - ADAM_BETA1.powf(step as f64);
    let c2 = 1.0 - ADAM_BETA2.powf(step as f64);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gradient_from_rest_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 1e-3, 1);
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(s, AdamState::new(2));
    }

    #[test]
    fn zero_gradient_decays_moments() {
        let mut p = vec![0.0];
        let mut s = AdamState { m: vec![0.5], v: vec![0.25] };
        adam_step(&mut p, &[0.0], &mut s, 1e-3, 3);
        assert_eq!(s.m[0], 0.5 * ADAM_BETA1);
        assert_eq!(s.v[0], 0.25 * ADAM_BETA2);
    }

    #[test]
    fn first_step_matches_hand_formula() {
        let lr = 0.01;
        for g in [3.0, -0.2, 1e-6] {
            let mut p = vec![0.0];
            let mut s = AdamState::new(1);
            adam_step(&mut p, &[g], &mut s, lr, 1);
            // m_hat = g, v_hat = g^2
            let expected = -lr * g / (g.abs() + ADAM_EPSILON);
            assert_abs_diff_eq!(p[0], expected, epsilon = 1e-12 * lr);
        }
    }

    #[test]
    fn constant_gradient_steps_have_magnitude_lr() {
        let lr = 1e-3;
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let mut prev = 0.0;
        for step in 1..=500 {
            adam_step(&mut p, &[0.7], &mut s, lr, step);
            let delta = p[0] - prev;
            prev = p[0];
            assert_abs_diff_eq!(delta, -lr * 0.7 / (0.7 + ADAM_EPSILON), epsilon = 1e-12);
        }
    }
}
