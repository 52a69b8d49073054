use std::collections::BTreeMap;

use ndarray::{ArrayD, Zip};

use super::params::ParamStore;
use super::tape::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    pub m: BTreeMap<String, Tensor>,
    pub v: BTreeMap<String, Tensor>,
}

impl Default for AdamState {
    fn default() -> Self {
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One bias-corrected Adam update of every trainable parameter, using the
/// gradients accumulated in the store. `lr_of` gives the step size per
/// parameter name.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState, lr_of: impl Fn(&str) -> f64) {
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    for (name, p) in store.iter_mut() {
        if !p.trainable {
            continue;
        }
        let lr = lr_of(name);
        let m = state
            .m
            .entry(name.to_string())
            .or_insert_with(|| ArrayD::zeros(p.value.raw_dim()));
        let v = state
            .v
            .entry(name.to_string())
            .or_insert_with(|| ArrayD::zeros(p.value.raw_dim()));
        Zip::from(&mut p.value)
            .and(&p.grad)
            .and(m)
            .and(v)
            .for_each(|w, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            });
    }
}
