use serde::{Deserialize, Serialize};

use crate::numerics::Tensor2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for a list of tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor2>,
    pub v: Vec<Tensor2>,
    pub step: u64,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor2>) -> Self {
        let m: Vec<Tensor2> = params
            .into_iter()
            .map(|p| Tensor2::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            v: m.clone(),
            m,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step(params: &mut [&mut Tensor2], grads: &[Tensor2], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].values();
        let m = state.m[i].values_mut();
        for (mk, &gk) in m.iter_mut().zip(g) {
            *mk = cfg.beta1 * *mk + (1.0 - cfg.beta1) * gk;
        }
        let v = state.v[i].values_mut();
        for (vk, &gk) in v.iter_mut().zip(g) {
            *vk = cfg.beta2 * *vk + (1.0 - cfg.beta2) * gk * gk;
        }
        let (m, v) = (state.m[i].values(), state.v[i].values());
        for ((pk, &mk), &vk) in p.values_mut().iter_mut().zip(m).zip(v) {
            let mhat = mk / c1;
            let vhat = vk / c2;
            *pk -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = Tensor2::row_vector(vec![0.5, -1.0]);
        let before = p.clone();
        let mut st = AdamState::new([&p]);
        for _ in 0..5 {
            adam_step(&mut [&mut p], &[Tensor2::zeros(1, 2)], &mut st, &AdamConfig::default());
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_has_magnitude_lr() {
        // m1 = 0.1, v1 = 0.001; bias-corrected both equal g = 1, so the step is lr / (1 + eps)
        let mut p = Tensor2::row_vector(vec![0.0]);
        let mut st = AdamState::new([&p]);
        let cfg = AdamConfig::default();
        adam_step(&mut [&mut p], &[Tensor2::row_vector(vec![1.0])], &mut st, &cfg);
        let expected = -cfg.lr / (1.0 + cfg.eps);
        assert!((p.values()[0] - expected).abs() < 1e-15, "{}", p.values()[0]);
    }

    #[test]
    fn constant_gradient_moves_against_sign() {
        let mut p = Tensor2::row_vector(vec![0.0, 0.0]);
        let mut st = AdamState::new([&p]);
        let g = Tensor2::row_vector(vec![2.5, -0.01]);
        for _ in 0..100 {
            adam_step(&mut [&mut p], std::slice::from_ref(&g), &mut st, &AdamConfig::default());
        }
        assert!(p.values()[0] < -0.09);
        assert!(p.values()[1] > 0.09);
    }
}
