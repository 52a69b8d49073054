//! Feed-forward descriptor regressor and the PaiNN message-passing network.

mod linear;
mod mlp;
mod painn;

use std::f64::consts::PI;

use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::Stream;
use crate::tensor::{ParamStore, Tape, TensorError, Var};

pub use linear::LinearRegressor;
pub use mlp::{hidden_widths, Activation, Mlp, MlpConfig};
pub use painn::{CutoffFn, Painn, PainnBatch, PainnConfig, PainnState, Readout, DEFAULT_MAX_Z};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("no embedding for atomic number {z} (table covers 0..={max_z})")]
    UnknownElement { z: u32, max_z: u32 },
    #[error("expected input dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid network setting: {0}")]
    InvalidConfig(String),
    #[error("empty batch")]
    EmptyBatch,
}

/// A trainable regressor that maps a batch of inputs to one prediction each.
pub trait Network {
    type Input;

    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;

    /// Predictions of shape `[batch]`.
    fn forward<'t>(
        &mut self,
        tape: &'t Tape,
        batch: &[&Self::Input],
        train: bool,
        rng: &mut Stream,
    ) -> Result<Var<'t>, NetError>;

    /// Serializable description used to rebuild the same architecture.
    fn architecture(&self) -> serde_json::Value;

    /// Ordered (earliest first) groups of parameter names for layer-wise learning rates.
    fn layer_groups(&self) -> Vec<(String, Vec<String>)>;

    /// Eval-mode predictions for inputs in chunks of `batch_size`.
    fn predict(
        &mut self,
        inputs: &[&Self::Input],
        batch_size: usize,
    ) -> Result<Vec<f64>, NetError> {
        let mut out = Vec::with_capacity(inputs.len());
        let mut rng = crate::rng::stream(0, "eval", 0);
        for chunk in inputs.chunks(batch_size.max(1)) {
            let tape = Tape::new();
            let y = self.forward(&tape, chunk, false, &mut rng)?;
            out.extend(y.value().iter().copied());
        }
        Ok(out)
    }
}

/// 0.5·(cos(πr/r_cut) + 1) inside the cutoff, 0 outside.
pub fn cosine_cutoff(r: f64, r_cut: f64) -> f64 {
    if r < r_cut {
        0.5 * ((PI * r / r_cut).cos() + 1.0)
    } else {
        0.0
    }
}

/// Gaussians centered on `n_rbf` equally spaced points of [0, r_cut], with
/// γ = 1/(2Δμ²).
pub fn gaussian_rbf(r: f64, n_rbf: usize, r_cut: f64) -> Vec<f64> {
    if n_rbf == 1 {
        return vec![(-0.5 * r * r / (r_cut * r_cut)).exp()];
    }
    let spacing = r_cut / (n_rbf - 1) as f64;
    let gamma = 1.0 / (2.0 * spacing * spacing);
    (0..n_rbf)
        .map(|k| {
            let d = r - k as f64 * spacing;
            (-gamma * d * d).exp()
        })
        .collect()
}

/// Dense layer weights (stored as in × out) drawn uniformly from ±1/√fan_in, zero bias.
pub(crate) fn init_linear(
    store: &mut ParamStore,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    bias: bool,
    rng: &mut Stream,
) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let w = ArrayD::from_shape_fn(IxDyn(&[fan_in, fan_out]), |_| {
        rng.random_range(-bound..bound)
    });
    store.insert(format!("{prefix}.weight"), w, true);
    if bias {
        store.insert(
            format!("{prefix}.bias"),
            ArrayD::zeros(IxDyn(&[fan_out])),
            true,
        );
    }
}

pub(crate) fn init_embedding(
    store: &mut ParamStore,
    name: &str,
    rows: usize,
    width: usize,
    rng: &mut Stream,
) {
    let scale = 1.0 / (width as f64).sqrt();
    let e = ArrayD::from_shape_fn(IxDyn(&[rows, width]), |_| {
        scale * rng.sample::<f64, _>(StandardNormal)
    });
    store.insert(name, e, true);
}

pub(crate) fn dense<'t>(
    tape: &'t Tape,
    store: &ParamStore,
    prefix: &str,
    x: Var<'t>,
) -> Result<Var<'t>, TensorError> {
    let w = tape.param(store, &format!("{prefix}.weight"))?;
    let bias_name = format!("{prefix}.bias");
    let b = if store.contains(&bias_name) {
        Some(tape.param(store, &bias_name)?)
    } else {
        None
    };
    x.linear(w, b)
}
