//! Central finite-difference gradient checks.

use super::params::ParamStore;
use super::tape::{Tape, Tensor, TensorError, Var};

/// |a − b| / max(|a|, |b|, floor). The floor keeps entries whose true
/// gradient is near zero from being judged on pure round-off.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub n_checked: usize,
}

/// Compares the taped gradient of a scalar function of `inputs` against
/// central differences with step `h`.
pub fn check_inputs<F>(inputs: &[Tensor], h: f64, f: F) -> Result<GradCheck, TensorError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, TensorError>,
{
    let eval = |xs: &[Tensor]| -> Result<f64, TensorError> {
        let tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
        Ok(f(&tape, &vars)?.item())
    };
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let loss = f(&tape, &vars)?;
    let grads = tape.backward(loss)?;
    let mut worst = 0.0f64;
    let mut n = 0;
    let inputs: Vec<Tensor> = inputs
        .iter()
        .map(|x| x.as_standard_layout().into_owned())
        .collect();
    let mut work = inputs.clone();
    for (k, v) in vars.iter().enumerate() {
        let analytic = match grads.wrt(*v) {
            Some(g) => g.as_standard_layout().into_owned(),
            None => Tensor::zeros(inputs[k].raw_dim()),
        };
        for i in 0..inputs[k].len() {
            let orig = inputs[k].as_slice_memory_order().unwrap()[i];
            work[k].as_slice_memory_order_mut().unwrap()[i] = orig + h;
            let fp = eval(&work)?;
            work[k].as_slice_memory_order_mut().unwrap()[i] = orig - h;
            let fm = eval(&work)?;
            work[k].as_slice_memory_order_mut().unwrap()[i] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic.as_slice_memory_order().unwrap()[i];
            worst = worst.max(relative_error(a, numeric, REL_FLOOR));
            n += 1;
        }
    }
    Ok(GradCheck {
        max_rel_err: worst,
        n_checked: n,
    })
}

/// Same check over every trainable entry of a parameter store. `f` builds
/// the scalar loss from the store on a fresh tape.
pub fn check_params<F>(store: &mut ParamStore, h: f64, mut f: F) -> Result<GradCheck, TensorError>
where
    F: for<'t> FnMut(&'t Tape, &mut ParamStore) -> Result<Var<'t>, TensorError>,
{
    store.zero_grad();
    {
        let tape = Tape::new();
        let loss = f(&tape, store)?;
        tape.backward(loss)?.accumulate_into(store);
    }
    let names: Vec<String> = store
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(n, _)| n.to_string())
        .collect();
    let mut worst = 0.0f64;
    let mut n = 0;
    for name in names {
        let len = store.get(&name).unwrap().value.len();
        for i in 0..len {
            let set = |s: &mut ParamStore, x: f64| {
                s.get_mut(&name)
                    .unwrap()
                    .value
                    .as_slice_memory_order_mut()
                    .unwrap()[i] = x
            };
            let p = store.get(&name).unwrap();
            let orig = p.value.as_slice_memory_order().unwrap()[i];
            let analytic = p.grad.as_slice_memory_order().unwrap()[i];
            set(store, orig + h);
            let fp = {
                let tape = Tape::new();
                f(&tape, store)?.item()
            };
            set(store, orig - h);
            let fm = {
                let tape = Tape::new();
                f(&tape, store)?.item()
            };
            set(store, orig);
            let numeric = (fp - fm) / (2.0 * h);
            worst = worst.max(relative_error(analytic, numeric, REL_FLOOR));
            n += 1;
        }
    }
    Ok(GradCheck {
        max_rel_err: worst,
        n_checked: n,
    })
}
