//! Kernel ridge regression with the cosine kernel.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::transfer::{LabelScaler, ScalerError};

pub const DEFAULT_ALPHA: f64 = 1.12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KrrError {
    #[error("row {0} has zero norm; the cosine kernel is undefined for it")]
    ZeroNormRow(usize),
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} training rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("no training rows")]
    Empty,
    #[error("alpha must be finite and non-negative, got {0}")]
    BadAlpha(f64),
    #[error("kernel system is singular at alpha = {0}; use alpha > 0")]
    Singular(f64),
    #[error(transparent)]
    Scaler(#[from] ScalerError),
}

fn row_norms(x: ArrayView2<f64>) -> Result<Vec<f64>, KrrError> {
    x.rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let n = r.dot(&r).sqrt();
            if n > 0.0 && n.is_finite() {
                Ok(n)
            } else {
                Err(KrrError::ZeroNormRow(i))
            }
        })
        .collect()
}

/// `K_ij = <x_i, y_j> / (|x_i| |y_j|)`.
pub fn cosine_kernel(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Array2<f64>, KrrError> {
    if x.ncols() != y.ncols() {
        return Err(KrrError::DimensionMismatch {
            expected: x.ncols(),
            found: y.ncols(),
        });
    }
    let nx = row_norms(x)?;
    let ny = row_norms(y)?;
    let mut k = x.dot(&y.t());
    for ((i, j), v) in k.indexed_iter_mut() {
        *v = (*v / (nx[i] * ny[j])).clamp(-1.0, 1.0);
    }
    Ok(k)
}

/// Trained model. `dual_coeffs` solve `(K + alpha I) a = z` where `z` are
/// the training labels standardized by `scaler`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    pub alpha: f64,
    pub train_x: Array2<f64>,
    pub dual_coeffs: Array1<f64>,
    pub scaler: LabelScaler,
}

/// Solves `(K + alpha I) a = y` by Cholesky, falling back to pivoted LU.
pub fn solve_regularized(
    kernel: &Array2<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
) -> Result<Array1<f64>, KrrError> {
    let m = kernel.nrows();
    let a = DMatrix::from_fn(m, m, |i, j| {
        kernel[(i, j)] + if i == j { alpha } else { 0.0 }
    });
    let b = DVector::from_iterator(m, y.iter().copied());
    let solution = match a.clone().cholesky() {
        Some(ch) => Some(ch.solve(&b)),
        None => a.clone().lu().solve(&b),
    };
    let x = solution.ok_or(KrrError::Singular(alpha))?;
    let residual = (&a * &x - &b).norm();
    if !x.iter().all(|v| v.is_finite()) || residual > 1e-8 * (1.0 + b.norm()) {
        return Err(KrrError::Singular(alpha));
    }
    Ok(Array1::from_iter(x.iter().copied()))
}

pub fn krr_fit(x: ArrayView2<f64>, y: ArrayView1<f64>, alpha: f64) -> Result<KrrModel, KrrError> {
    if x.nrows() == 0 {
        return Err(KrrError::Empty);
    }
    if x.nrows() != y.len() {
        return Err(KrrError::LabelCount {
            rows: x.nrows(),
            labels: y.len(),
        });
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(KrrError::BadAlpha(alpha));
    }
    let labels: Vec<f64> = y.to_vec();
    let scaler = if labels.len() >= 2 {
        LabelScaler::fit(&labels)?
    } else {
        LabelScaler::shift_only(labels[0])
    };
    let z = Array1::from(scaler.apply_all(&labels));
    let kernel = cosine_kernel(x, x)?;
    let dual_coeffs = solve_regularized(&kernel, z.view(), alpha)?;
    Ok(KrrModel {
        alpha,
        train_x: x.to_owned(),
        dual_coeffs,
        scaler,
    })
}

pub fn krr_predict(model: &KrrModel, query: ArrayView2<f64>) -> Result<Array1<f64>, KrrError> {
    if query.ncols() != model.train_x.ncols() {
        return Err(KrrError::DimensionMismatch {
            expected: model.train_x.ncols(),
            found: query.ncols(),
        });
    }
    let k = cosine_kernel(query, model.train_x.view())?;
    let z = k.dot(&model.dual_coeffs);
    Ok(z.mapv(|v| model.scaler.invert(v)))
}
