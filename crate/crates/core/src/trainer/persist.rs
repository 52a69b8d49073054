//! Checkpoint layouts for the models that are not parameter stores.

use ndarray::{Array1, Array2};
use serde_json::json;

use super::checkpoint::{CheckpointError, ModelCheckpoint, NamedTensor, Provenance};
use crate::descriptors::PcaModel;
use crate::gboost::{GboostModel, Node, RegressionTree};
use crate::krr::KrrModel;
use crate::transfer::LabelScaler;

fn expect_kind(c: &ModelCheckpoint, kind: &str) -> Result<serde_json::Value, CheckpointError> {
    let arch = c.architecture_json()?;
    match arch.get("model").and_then(|m| m.as_str()) {
        Some(k) if k == kind => Ok(arch),
        other => Err(CheckpointError::ArchitectureMismatch(format!(
            "expected a {kind} checkpoint, found {other:?}"
        ))),
    }
}

fn f64s<'a>(
    c: &'a ModelCheckpoint,
    name: &str,
) -> Result<(&'a [usize], &'a [f64]), CheckpointError> {
    let t = c.tensor(name)?;
    let v = t
        .as_f64()
        .ok_or_else(|| CheckpointError::Malformed(format!("'{name}' is not f64")))?;
    Ok((&t.shape, v))
}

fn i64s<'a>(c: &'a ModelCheckpoint, name: &str) -> Result<&'a [i64], CheckpointError> {
    c.tensor(name)?
        .as_i64()
        .ok_or_else(|| CheckpointError::Malformed(format!("'{name}' is not i64")))
}

fn matrix(c: &ModelCheckpoint, name: &str) -> Result<Array2<f64>, CheckpointError> {
    let (shape, v) = f64s(c, name)?;
    if shape.len() != 2 {
        return Err(CheckpointError::Malformed(format!(
            "'{name}' should be a matrix"
        )));
    }
    Array2::from_shape_vec((shape[0], shape[1]), v.to_vec())
        .map_err(|e| CheckpointError::Malformed(e.to_string()))
}

fn vector(c: &ModelCheckpoint, name: &str) -> Result<Array1<f64>, CheckpointError> {
    Ok(Array1::from(f64s(c, name)?.1.to_vec()))
}

/// Dual coefficients plus the stored training matrix.
pub fn krr_checkpoint(model: &KrrModel, provenance: Provenance) -> ModelCheckpoint {
    let mut c = ModelCheckpoint::new(&json!({ "model": "krr" }), model.scaler.clone(), provenance);
    let (m, d) = model.train_x.dim();
    c.tensors.insert(
        "train_x".into(),
        NamedTensor::f64(vec![m, d], model.train_x.iter().copied().collect()),
    );
    c.tensors.insert(
        "dual_coeffs".into(),
        NamedTensor::f64(vec![m], model.dual_coeffs.to_vec()),
    );
    c.tensors
        .insert("alpha".into(), NamedTensor::f64(vec![1], vec![model.alpha]));
    c
}

pub fn krr_from_checkpoint(c: &ModelCheckpoint) -> Result<KrrModel, CheckpointError> {
    expect_kind(c, "krr")?;
    let train_x = matrix(c, "train_x")?;
    let dual_coeffs = vector(c, "dual_coeffs")?;
    if dual_coeffs.len() != train_x.nrows() {
        return Err(CheckpointError::Malformed(
            "dual coefficient count differs from training rows".into(),
        ));
    }
    Ok(KrrModel {
        alpha: f64s(c, "alpha")?.1[0],
        train_x,
        dual_coeffs,
        scaler: c.scaler.clone(),
    })
}

/// Trees as flat node arrays. `feature = -1` marks a leaf, whose value sits
/// in `nodes.value`; splits keep their threshold there.
pub fn gboost_checkpoint(model: &GboostModel, provenance: Provenance) -> ModelCheckpoint {
    let arch = json!({ "model": "gboost", "n_features": model.n_features });
    let mut c = ModelCheckpoint::new(&arch, LabelScaler::identity(), provenance);
    let mut offsets = vec![0i64];
    let mut depths = Vec::new();
    let (mut feature, mut left, mut right, mut value) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for tree in &model.trees {
        for node in &tree.nodes {
            match *node {
                Node::Split {
                    feature: f,
                    threshold,
                    left: l,
                    right: r,
                } => {
                    feature.push(f as i64);
                    left.push(l as i64);
                    right.push(r as i64);
                    value.push(threshold);
                }
                Node::Leaf { value: v } => {
                    feature.push(-1);
                    left.push(-1);
                    right.push(-1);
                    value.push(v);
                }
            }
        }
        offsets.push(feature.len() as i64);
        depths.push(tree.max_depth as i64);
    }
    let n = feature.len();
    c.tensors.insert(
        "base_value".into(),
        NamedTensor::f64(vec![1], vec![model.base_value]),
    );
    c.tensors.insert(
        "learning_rate".into(),
        NamedTensor::f64(vec![1], vec![model.learning_rate]),
    );
    c.tensors.insert(
        "trees.offsets".into(),
        NamedTensor::i64(vec![offsets.len()], offsets),
    );
    c.tensors.insert(
        "trees.max_depth".into(),
        NamedTensor::i64(vec![depths.len()], depths),
    );
    c.tensors
        .insert("nodes.feature".into(), NamedTensor::i64(vec![n], feature));
    c.tensors
        .insert("nodes.left".into(), NamedTensor::i64(vec![n], left));
    c.tensors
        .insert("nodes.right".into(), NamedTensor::i64(vec![n], right));
    c.tensors
        .insert("nodes.value".into(), NamedTensor::f64(vec![n], value));
    c
}

pub fn gboost_from_checkpoint(c: &ModelCheckpoint) -> Result<GboostModel, CheckpointError> {
    let arch = expect_kind(c, "gboost")?;
    let n_features = arch["n_features"]
        .as_u64()
        .ok_or_else(|| CheckpointError::Malformed("n_features".into()))?
        as usize;
    let offsets = i64s(c, "trees.offsets")?;
    let depths = i64s(c, "trees.max_depth")?;
    let (feature, left, right) = (
        i64s(c, "nodes.feature")?,
        i64s(c, "nodes.left")?,
        i64s(c, "nodes.right")?,
    );
    let value = f64s(c, "nodes.value")?.1;
    let n = feature.len();
    let bad = |m: &str| CheckpointError::Malformed(m.to_string());
    if left.len() != n || right.len() != n || value.len() != n || offsets.len() != depths.len() + 1
    {
        return Err(bad("tree arrays have inconsistent lengths"));
    }
    let mut trees = Vec::with_capacity(depths.len());
    for (t, w) in offsets.windows(2).enumerate() {
        let (a, b) = (w[0] as usize, w[1] as usize);
        if a >= b || b > n {
            return Err(bad("tree offsets out of range"));
        }
        let size = b - a;
        let child = |k: i64| -> Result<usize, CheckpointError> {
            usize::try_from(k)
                .ok()
                .filter(|&k| k < size)
                .ok_or_else(|| bad("child index out of range"))
        };
        let mut nodes = Vec::with_capacity(size);
        for i in a..b {
            nodes.push(if feature[i] < 0 {
                Node::Leaf { value: value[i] }
            } else {
                let f = feature[i] as usize;
                if f >= n_features {
                    return Err(bad("split feature out of range"));
                }
                Node::Split {
                    feature: f,
                    threshold: value[i],
                    left: child(left[i])?,
                    right: child(right[i])?,
                }
            });
        }
        trees.push(RegressionTree {
            nodes,
            max_depth: depths[t] as usize,
        });
    }
    Ok(GboostModel {
        base_value: f64s(c, "base_value")?.1[0],
        learning_rate: f64s(c, "learning_rate")?.1[0],
        trees,
        n_features,
    })
}

pub fn pca_checkpoint(model: &PcaModel, provenance: Provenance) -> ModelCheckpoint {
    let arch = json!({ "model": "pca", "zero_variance": model.zero_variance });
    let mut c = ModelCheckpoint::new(&arch, LabelScaler::identity(), provenance);
    let (k, d) = model.components.dim();
    c.tensors.insert(
        "mean".into(),
        NamedTensor::f64(vec![d], model.mean.to_vec()),
    );
    c.tensors.insert(
        "components".into(),
        NamedTensor::f64(vec![k, d], model.components.iter().copied().collect()),
    );
    c.tensors.insert(
        "explained_variance".into(),
        NamedTensor::f64(vec![k], model.explained_variance.to_vec()),
    );
    c.tensors.insert(
        "retained_fraction".into(),
        NamedTensor::f64(vec![1], vec![model.retained_fraction]),
    );
    c
}

pub fn pca_from_checkpoint(c: &ModelCheckpoint) -> Result<PcaModel, CheckpointError> {
    let arch = expect_kind(c, "pca")?;
    let components = matrix(c, "components")?;
    let mean = vector(c, "mean")?;
    if components.ncols() != mean.len() {
        return Err(CheckpointError::Malformed(
            "component width differs from mean length".into(),
        ));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance: vector(c, "explained_variance")?,
        retained_fraction: f64s(c, "retained_fraction")?.1[0],
        zero_variance: arch["zero_variance"].as_bool().unwrap_or(false),
    })
}
