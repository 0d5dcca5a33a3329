//! Adam optimizer with bias correction.

use super::ModelParams;
use crate::error::{Error, Result};

/// First/second moment accumulators mirroring the parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let shapes: Vec<usize> = params.tensor_slices().iter().map(|s| s.len()).collect();
        AdamState {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update:
/// `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let grad_slices = grads.tensor_slices();
    {
        // reject non-finite gradients before touching any state
        for (t, g) in grad_slices.iter().enumerate() {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in tensor {t} at index {i}"
                )));
            }
        }
    }
    let mut param_slices = params.tensor_slices_mut();
    if param_slices.len() != grad_slices.len() || param_slices.len() != state.m.len() {
        return Err(Error::Shape(
            "optimizer state misaligned with parameters".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for ((p, g), (m, v)) in param_slices
        .iter_mut()
        .zip(&grad_slices)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        if p.len() != g.len() {
            return Err(Error::Shape("gradient tensor shape mismatch".into()));
        }
        for i in 0..p.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{LayerParams, NetworkSpec};

    fn scalar_params(w: f64) -> ModelParams {
        let spec = NetworkSpec::parse("FC1").unwrap();
        let mut p = ModelParams::init(&spec, &[1], 0).unwrap();
        if let LayerParams::Fc { weight, .. } = &mut p.layers[0] {
            weight[[0, 0]] = w;
        }
        p
    }

    #[test]
    fn first_step_is_a_sign_update() {
        let mut params = scalar_params(0.5);
        let mut grads = params.zeros_like();
        if let LayerParams::Fc { weight, .. } = &mut grads.layers[0] {
            weight[[0, 0]] = 0.2;
        }
        let mut state = AdamState::new(&params);
        let lr = 0.01;
        adam_step(&mut params, &grads, &mut state, lr).unwrap();
        let w = match &params.layers[0] {
            LayerParams::Fc { weight, .. } => weight[[0, 0]],
            _ => unreachable!(),
        };
        // first-step update is -lr * g / (|g| + eps) ~ -lr
        assert!((w - (0.5 - lr)).abs() < 1e-8, "w = {w}");
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut params = scalar_params(0.7);
        let before = params.clone();
        let grads = params.zeros_like();
        let mut state = AdamState::new(&params);
        for _ in 0..50 {
            adam_step(&mut params, &grads, &mut state, 0.01).unwrap();
        }
        assert_eq!(params, before);
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let run = || {
            let mut params = scalar_params(0.3);
            let mut state = AdamState::new(&params);
            for k in 0..20 {
                let mut grads = params.zeros_like();
                if let LayerParams::Fc { weight, bias } = &mut grads.layers[0] {
                    weight[[0, 0]] = ((k as f64) * 0.37).sin();
                    bias[0] = ((k as f64) * 0.11).cos();
                }
                adam_step(&mut params, &grads, &mut state, 0.005).unwrap();
            }
            params
        };
        let (a, b) = (run(), run());
        for (x, y) in a.tensor_slices().iter().zip(b.tensor_slices().iter()) {
            for (u, w) in x.iter().zip(y.iter()) {
                assert_eq!(u.to_bits(), w.to_bits());
            }
        }
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut params = scalar_params(0.1);
        let mut grads = params.zeros_like();
        if let LayerParams::Fc { weight, .. } = &mut grads.layers[0] {
            weight[[0, 0]] = f64::NAN;
        }
        let mut state = AdamState::new(&params);
        let err = adam_step(&mut params, &grads, &mut state, 0.01).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert_eq!(state.step_count(), 0);
    }
}
