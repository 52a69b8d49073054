//! Principal component compression of descriptor matrices.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{DescriptorError, DescriptorKind, DescriptorMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `k x D`, orthonormal rows.
    pub components: Array2<f64>,
    /// Descending sample variances along each component.
    pub explained_variance: Array1<f64>,
    pub retained_fraction: f64,
    /// Set when the fit data had no variance at all.
    pub zero_variance: bool,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fits the smallest number of leading components whose cumulative variance
/// reaches `retained_fraction` of the total.
///
/// Components come from the SVD of the centered data; each is oriented so that
/// its largest-magnitude entry is positive.
pub fn pca_fit(x: ArrayView2<f64>, retained_fraction: f64) -> Result<PcaModel, DescriptorError> {
    let (m, d) = x.dim();
    if m < 2 {
        return Err(DescriptorError::TooFewRows(m));
    }
    if !(retained_fraction > 0.0 && retained_fraction <= 1.0) {
        return Err(DescriptorError::InvalidParams(format!(
            "retained fraction {retained_fraction} is outside (0, 1]"
        )));
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = &x - &mean;
    let total: f64 = centered.iter().map(|v| v * v).sum::<f64>() / (m - 1) as f64;

    if total == 0.0 {
        let mut components = Array2::zeros((1, d));
        components[(0, 0)] = 1.0;
        return Ok(PcaModel {
            mean,
            components,
            explained_variance: Array1::zeros(1),
            retained_fraction,
            zero_variance: true,
        });
    }

    let mat = DMatrix::from_row_iterator(m, d, centered.iter().copied());
    let svd = mat.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let variances: Vec<f64> = order
        .iter()
        .map(|&i| svd.singular_values[i].powi(2) / (m - 1) as f64)
        .collect();

    let max_k = (m - 1).min(d).max(1);
    let target = retained_fraction * total * (1.0 - 1e-12);
    let mut k = 0;
    let mut cumulative = 0.0;
    while k < max_k {
        cumulative += variances[k];
        k += 1;
        if cumulative >= target {
            break;
        }
    }

    let mut components = Array2::zeros((k, d));
    for (row, &i) in order.iter().take(k).enumerate() {
        let mut pivot = 0;
        for j in 0..d {
            if v_t[(i, j)].abs() > v_t[(i, pivot)].abs() {
                pivot = j;
            }
        }
        let sign = if v_t[(i, pivot)] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components[(row, j)] = sign * v_t[(i, j)];
        }
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance: Array1::from(variances[..k].to_vec()),
        retained_fraction,
        zero_variance: false,
    })
}

/// Projects rows onto the components: `(X - mean) C^T`.
pub fn pca_transform(model: &PcaModel, x: ArrayView2<f64>) -> Result<Array2<f64>, DescriptorError> {
    if x.ncols() != model.input_dim() {
        return Err(DescriptorError::DimensionMismatch {
            expected: model.input_dim(),
            found: x.ncols(),
        });
    }
    Ok((&x - &model.mean).dot(&model.components.t()))
}

pub fn pca_transform_matrix(
    model: &PcaModel,
    x: &DescriptorMatrix,
) -> Result<DescriptorMatrix, DescriptorError> {
    let rows = pca_transform(model, x.rows.view())?;
    let labels = (0..model.n_components())
        .map(|i| format!("pca:{i}"))
        .collect();
    DescriptorMatrix::new(rows, labels, DescriptorKind::Pca)
}
