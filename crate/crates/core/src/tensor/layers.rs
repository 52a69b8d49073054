use ndarray::{ArrayD, IxDyn};
use rand::Rng;

use super::params::ParamStore;
use super::tape::{Tape, TensorError, Var};
use crate::rng::Stream;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// Inverted dropout: in training, zeroes each entry with probability `p` and
/// scales survivors by 1/(1−p). Identity otherwise.
pub fn dropout<'t>(
    x: Var<'t>,
    p: f64,
    train: bool,
    rng: &mut Stream,
) -> Result<Var<'t>, TensorError> {
    if !(0.0..1.0).contains(&p) {
        return Err(TensorError::Invalid {
            op: "dropout",
            message: format!("p = {p} outside [0, 1)"),
        });
    }
    if !train || p == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - p);
    let shape = x.shape();
    let mask = ArrayD::from_shape_fn(IxDyn(&shape), |_| {
        if rng.random::<f64>() >= p {
            keep
        } else {
            0.0
        }
    });
    x.mul(x.tape().constant(mask))
}

/// Registers weight/bias/running statistics for a batch-norm layer of width `f`.
pub fn batch_norm_init(store: &mut ParamStore, prefix: &str, f: usize) {
    store.insert(format!("{prefix}.weight"), ArrayD::ones(IxDyn(&[f])), true);
    store.insert(format!("{prefix}.bias"), ArrayD::zeros(IxDyn(&[f])), true);
    store.insert(
        format!("{prefix}.running_mean"),
        ArrayD::zeros(IxDyn(&[f])),
        false,
    );
    store.insert(
        format!("{prefix}.running_var"),
        ArrayD::ones(IxDyn(&[f])),
        false,
    );
}

/// Per-feature normalization of a (batch, features) input. Training mode uses
/// batch statistics and updates the running estimates in the store; eval
/// mode uses the running estimates.
pub fn batch_norm<'t>(
    tape: &'t Tape,
    x: Var<'t>,
    store: &mut ParamStore,
    prefix: &str,
    train: bool,
) -> Result<Var<'t>, TensorError> {
    let shape = x.shape();
    if shape.len() != 2 {
        return Err(TensorError::Shape {
            op: "batch_norm",
            shapes: format!("{shape:?} (expected rank 2)"),
        });
    }
    let gamma = tape.param(store, &format!("{prefix}.weight"))?;
    let beta = tape.param(store, &format!("{prefix}.bias"))?;
    if gamma.shape() != [shape[1]] {
        return Err(TensorError::Shape {
            op: "batch_norm",
            shapes: format!("{shape:?} and {:?}", gamma.shape()),
        });
    }
    let xhat = if train {
        let b = shape[0];
        let mean = x.mean_axis(0)?;
        let centered = x.sub(mean)?;
        let var = centered.square().mean_axis(0)?;
        let unbiased = if b > 1 {
            b as f64 / (b as f64 - 1.0)
        } else {
            1.0
        };
        let (mv, vv) = (mean.value().clone(), var.value().clone());
        update_running(store, &format!("{prefix}.running_mean"), &mv);
        update_running(store, &format!("{prefix}.running_var"), &(vv * unbiased));
        centered.mul(var.add_scalar(BN_EPS).powf(-0.5))?
    } else {
        let rm = store
            .value(&format!("{prefix}.running_mean"))
            .ok_or_else(|| TensorError::UnknownParam(format!("{prefix}.running_mean")))?;
        let rv = store
            .value(&format!("{prefix}.running_var"))
            .ok_or_else(|| TensorError::UnknownParam(format!("{prefix}.running_var")))?;
        let inv = rv.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        x.sub(tape.constant(rm.clone()))?.mul(tape.constant(inv))?
    };
    xhat.mul(gamma)?.add(beta)
}

fn update_running(store: &mut ParamStore, name: &str, batch: &ArrayD<f64>) {
    if let Some(p) = store.get_mut(name) {
        p.value.zip_mut_with(batch, |r, &b| {
            *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b
        });
    }
}

/// Mean squared error over all entries.
pub fn mse<'t>(pred: Var<'t>, target: Var<'t>) -> Result<Var<'t>, TensorError> {
    Ok(pred.sub(target)?.square().mean())
}
