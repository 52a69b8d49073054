use std::rc::Rc;

use molt_core::chemdata::Molecule;
use molt_core::nets::{Mlp, MlpConfig, NetError, Network, Painn, PainnBatch, PainnConfig};
use molt_core::rng::{stream, Stream};
use molt_core::tensor::gradcheck::{check_inputs, check_params};
use molt_core::tensor::{
    batch_norm, batch_norm_init, concat, dropout, mse, ParamStore, Tape, Tensor, TensorError, Var,
};
use ndarray::{ArrayD, IxDyn};
use rand::Rng;

use crate::{ensure, Outcome};

const H: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn tensor(rng: &mut Stream, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    ArrayD::from_shape_fn(IxDyn(shape), |_| rng.random_range(lo..hi))
}

/// Contracts `y` with fixed random weights so every output entry matters.
fn project<'t>(y: Var<'t>) -> Result<Var<'t>, TensorError> {
    let mut rng = stream(77, "project", y.shape().iter().product::<usize>() as u64);
    let w = tensor(&mut rng, &y.shape(), -1.0, 1.0);
    let t = y.tape();
    Ok(y.mul(t.constant(w))?.sum())
}

fn net_err(e: NetError) -> TensorError {
    match e {
        NetError::Tensor(t) => t,
        other => TensorError::Invalid {
            op: "network",
            message: other.to_string(),
        },
    }
}

type Check = (&'static str, f64);

fn op(
    name: &'static str,
    inputs: Vec<Tensor>,
    f: impl for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, TensorError>,
) -> Result<Check, String> {
    let r = check_inputs(&inputs, H, f).map_err(|e| format!("{name}: {e}"))?;
    Ok((name, r.max_rel_err))
}

fn op_checks() -> Result<Vec<Check>, String> {
    let mut rng = stream(5, "gradient-inputs", 0);
    let mut t = |shape: &[usize]| tensor(&mut rng, shape, -1.5, 1.5);
    let (a, b, row, c) = (t(&[3, 4]), t(&[3, 4]), t(&[4]), t(&[4, 2]));
    let (tall, d, w, bias) = (t(&[5, 2]), t(&[2, 3]), t(&[4, 3]), t(&[3]));
    let mut rng = stream(5, "gradient-inputs", 1);
    let positive = tensor(&mut rng, &[3, 4], 0.5, 2.0);
    let bn_in = tensor(&mut rng, &[6, 3], -2.0, 2.0);
    let gather = Rc::new(vec![2usize, 0, 2, 1]);
    let scatter = Rc::new(vec![1usize, 0, 1, 2, 0]);

    Ok(vec![
        op("add", vec![a.clone(), b.clone()], |_, v| {
            project(v[0].add(v[1])?)
        })?,
        op("add broadcast", vec![a.clone(), row.clone()], |_, v| {
            project(v[0].add(v[1])?)
        })?,
        op("sub", vec![a.clone(), b.clone()], |_, v| {
            project(v[0].sub(v[1])?)
        })?,
        op("sub broadcast", vec![a.clone(), row.clone()], |_, v| {
            project(v[0].sub(v[1])?)
        })?,
        op("mul", vec![a.clone(), b.clone()], |_, v| {
            project(v[0].mul(v[1])?)
        })?,
        op("mul broadcast", vec![a.clone(), row.clone()], |_, v| {
            project(v[0].mul(v[1])?)
        })?,
        op("scale", vec![a.clone()], |_, v| project(v[0].scale(-1.7)))?,
        op("add_scalar", vec![a.clone()], |_, v| {
            project(v[0].add_scalar(0.3))
        })?,
        op("neg", vec![a.clone()], |_, v| project(v[0].neg()))?,
        op("powf", vec![positive.clone()], |_, v| {
            project(v[0].powf(-0.5))
        })?,
        op("powf cube", vec![a.clone()], |_, v| project(v[0].powf(3.0)))?,
        op("square", vec![a.clone()], |_, v| project(v[0].square()))?,
        op("sigmoid", vec![a.clone()], |_, v| project(v[0].sigmoid()))?,
        op("swish", vec![a.clone()], |_, v| project(v[0].swish()))?,
        op("matmul", vec![a.clone(), c.clone()], |_, v| {
            project(v[0].matmul(v[1])?)
        })?,
        op("reshape", vec![a.clone()], |_, v| {
            project(v[0].reshape(&[2, 6])?)
        })?,
        op("narrow", vec![a.clone()], |_, v| {
            project(v[0].narrow(1, 1, 2)?)
        })?,
        op("sum_axis", vec![a.clone()], |_, v| {
            project(v[0].sum_axis(0)?)
        })?,
        op("mean_axis", vec![a.clone()], |_, v| {
            project(v[0].mean_axis(1)?)
        })?,
        op("sum", vec![a.clone()], |_, v| Ok(v[0].sum().square()))?,
        op("mean", vec![a.clone()], |_, v| Ok(v[0].mean().square()))?,
        op("index_select", vec![a.clone()], move |_, v| {
            project(v[0].index_select(gather.clone())?)
        })?,
        op("scatter_add", vec![tall.clone()], move |_, v| {
            project(v[0].scatter_add(scatter.clone(), 3)?)
        })?,
        op("l2_norm", vec![a.clone()], |_, v| project(v[0].l2_norm(1)?))?,
        op("dot", vec![a.clone(), b.clone()], |_, v| {
            project(v[0].dot(v[1], 1)?)
        })?,
        op(
            "linear",
            vec![a.clone(), w.clone(), bias.clone()],
            |_, v| project(v[0].linear(v[1], Some(v[2]))?),
        )?,
        op("linear no bias", vec![a.clone(), w.clone()], |_, v| {
            project(v[0].linear(v[1], None)?)
        })?,
        op("concat", vec![tall.clone(), d.clone()], |_, v| {
            project(concat(&[v[0].reshape(&[2, 5])?, v[1]], 1)?)
        })?,
        op("dropout", vec![a.clone()], |_, v| {
            let mut rng = stream(9, "dropout", 0);
            project(dropout(v[0], 0.3, true, &mut rng)?)
        })?,
        op("batch_norm", vec![bn_in], |tape, v| {
            let mut store = ParamStore::new();
            batch_norm_init(&mut store, "bn", 3);
            project(batch_norm(tape, v[0], &mut store, "bn", true)?)
        })?,
        op("mse", vec![a.clone(), b.clone()], |_, v| mse(v[0], v[1]))?,
    ])
}

fn mlp_check() -> Result<Check, String> {
    let mut net = Mlp::new(MlpConfig::new(12), 5).map_err(|e| e.to_string())?;
    let mut rng = stream(6, "mlp-rows", 0);
    let rows: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..12).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let targets: Vec<f64> = (0..6).map(|i| i as f64 * 0.3 - 0.7).collect();
    let cfg = net.config.clone();
    let r = check_params(&mut net.params, H, |tape, store| {
        let mut m = Mlp {
            config: cfg.clone(),
            params: std::mem::take(store),
        };
        let refs: Vec<&Vec<f64>> = rows.iter().collect();
        let pred = m.forward(tape, &refs, true, &mut stream(9, "dropout", 0));
        *store = m.params;
        let target = tape.constant(ndarray::Array1::from(targets.clone()).into_dyn());
        mse(pred.map_err(net_err)?, target)
    })
    .map_err(|e| e.to_string())?;
    Ok(("mlp", r.max_rel_err))
}

fn painn_check() -> Result<Check, String> {
    let mol = Molecule::new(
        "four",
        vec![6, 8, 1, 1],
        vec![
            [0.0, 0.0, 0.0],
            [1.21, 0.1, -0.05],
            [-0.6, 0.93, 0.2],
            [-0.55, -0.9, 0.35],
        ],
    )
    .unwrap();
    let cfg = PainnConfig {
        r_cut: 4.0,
        n_rbf: 8,
        n_atom_basis: 8,
        n_interactions: 2,
        max_z: 10,
        ..PainnConfig::default()
    };
    let mut net = Painn::new(cfg.clone(), 8).map_err(|e| e.to_string())?;
    let graph = PainnBatch::new(&[&mol], &cfg).map_err(|e| e.to_string())?;
    let r = check_params(&mut net.params, H, |tape, store| {
        let m = Painn {
            config: cfg.clone(),
            params: std::mem::take(store),
        };
        let y = m.forward_graph(tape, &graph);
        *store = m.params;
        mse(y.map_err(net_err)?, tape.scalar(0.7))
    })
    .map_err(|e| e.to_string())?;
    Ok(("painn", r.max_rel_err))
}

pub fn run() -> Outcome {
    let mut checks = op_checks()?;
    checks.push(mlp_check()?);
    checks.push(painn_check()?);
    let worst = checks
        .iter()
        .copied()
        .fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let bad: Vec<String> = checks
        .iter()
        .filter(|c| !(c.1 < TOL))
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect();
    ensure(bad.is_empty(), || {
        format!("rel err above {TOL:e}: {}", bad.join(", "))
    })?;
    Ok(format!(
        "{} checks, worst rel err {:.1e} ({})",
        checks.len(),
        worst.1,
        worst.0
    ))
}
