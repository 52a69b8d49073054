//! Squared-loss gradient boosting over depth-limited CART regression trees.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GboostError {
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} rows but {targets} targets")]
    TargetCount { rows: usize, targets: usize },
    #[error("no training rows")]
    Empty,
    #[error("invalid boosting setting: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GboostConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
}

fn default_min_leaf() -> usize {
    1
}

impl Default for GboostConfig {
    fn default() -> Self {
        GboostConfig {
            n_estimators: 295,
            learning_rate: 0.059,
            max_depth: 4,
            min_leaf: 1,
        }
    }
}

impl GboostConfig {
    pub fn validate(&self) -> Result<(), GboostError> {
        if self.n_estimators == 0 {
            return Err(GboostError::InvalidConfig(
                "n_estimators must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(GboostError::InvalidConfig(
                "learning_rate must be in (0, 1]".into(),
            ));
        }
        if self.min_leaf == 0 {
            return Err(GboostError::InvalidConfig("min_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Flat node array; node 0 is the root. Samples with `x[feature] < threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
    pub max_depth: usize,
}

impl RegressionTree {
    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] < threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Relative size (against the node's sum of squared targets) below which two
/// gains count as tied. Splits that produce the same partition along different
/// features have equal gains that differ only by rounding.
const TIE_TOLERANCE: f64 = 1e-12;

impl SplitCandidate {
    /// Candidates are visited in ascending (feature, threshold) order, so a
    /// later one must beat the incumbent by more than `tol`; ties stay with the
    /// lower feature index, then the lower threshold.
    fn better_than(&self, incumbent: &SplitCandidate, tol: f64) -> bool {
        self.gain > incumbent.gain + tol
    }
}

/// Best variance-reducing split of `samples` along one feature, scanning the
/// midpoints of consecutive distinct values in ascending order. `sorted` is
/// the presorted row order of that feature over the whole data set.
fn best_split_for_feature(
    x: ArrayView2<f64>,
    targets: &[f64],
    feature: usize,
    sorted: &[usize],
    in_node: &[bool],
    n_node: usize,
    sum_node: f64,
    min_leaf: usize,
    tol: f64,
) -> Option<SplitCandidate> {
    let parent = sum_node * sum_node / n_node as f64;
    let mut best: Option<SplitCandidate> = None;
    let mut n_left = 0usize;
    let mut sum_left = 0.0;
    let mut prev: Option<f64> = None;
    for &row in sorted.iter().filter(|&&r| in_node[r]) {
        let v = x[(row, feature)];
        if let Some(p) = prev {
            if v > p && n_left >= min_leaf && n_node - n_left >= min_leaf {
                let n_right = n_node - n_left;
                let sum_right = sum_node - sum_left;
                let gain = sum_left * sum_left / n_left as f64
                    + sum_right * sum_right / n_right as f64
                    - parent;
                let threshold = 0.5 * (p + v);
                let cand = SplitCandidate {
                    feature,
                    threshold,
                    gain,
                };
                if best.is_none_or(|b| cand.better_than(&b, tol)) {
                    best = Some(cand);
                }
            }
        }
        n_left += 1;
        sum_left += targets[row];
        prev = Some(v);
    }
    best
}

fn presort(x: ArrayView2<f64>) -> Vec<Vec<usize>> {
    (0..x.ncols())
        .into_par_iter()
        .map(|f| {
            let mut idx: Vec<usize> = (0..x.nrows()).collect();
            idx.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

struct TreeBuilder<'a> {
    x: ArrayView2<'a, f64>,
    targets: &'a [f64],
    sorted: &'a [Vec<usize>],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, samples: &[usize], depth: usize) -> usize {
        let n = samples.len();
        let sum: f64 = samples.iter().map(|&i| self.targets[i]).sum();
        let mean = sum / n as f64;
        let index = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean });

        let zero_variance = samples
            .iter()
            .all(|&i| self.targets[i] == self.targets[samples[0]]);
        if depth >= self.max_depth || n < 2 * self.min_leaf || zero_variance {
            return index;
        }

        let mut in_node = vec![false; self.x.nrows()];
        for &i in samples {
            in_node[i] = true;
        }
        let tol = TIE_TOLERANCE
            * samples
                .iter()
                .map(|&i| self.targets[i].powi(2))
                .sum::<f64>();
        let per_feature: Vec<Option<SplitCandidate>> = (0..self.x.ncols())
            .into_par_iter()
            .map(|f| {
                best_split_for_feature(
                    self.x,
                    self.targets,
                    f,
                    &self.sorted[f],
                    &in_node,
                    n,
                    sum,
                    self.min_leaf,
                    tol,
                )
            })
            .collect();
        let mut best: Option<SplitCandidate> = None;
        for cand in per_feature.into_iter().flatten() {
            if best.is_none_or(|b| cand.better_than(&b, tol)) {
                best = Some(cand);
            }
        }
        let Some(best) = best else { return index };
        if best.gain <= tol {
            return index;
        }

        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.x[(i, best.feature)] < best.threshold);
        let l = self.build(&left, depth + 1);
        let r = self.build(&right, depth + 1);
        self.nodes[index] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        index
    }
}

/// Greedy CART fit of `targets` with variance-reduction splits.
pub fn fit_tree(
    x: ArrayView2<f64>,
    targets: &[f64],
    max_depth: usize,
    min_leaf: usize,
) -> Result<RegressionTree, GboostError> {
    let sorted = presort(x);
    fit_tree_presorted(x, targets, &sorted, max_depth, min_leaf)
}

fn fit_tree_presorted(
    x: ArrayView2<f64>,
    targets: &[f64],
    sorted: &[Vec<usize>],
    max_depth: usize,
    min_leaf: usize,
) -> Result<RegressionTree, GboostError> {
    if x.nrows() == 0 {
        return Err(GboostError::Empty);
    }
    if x.nrows() != targets.len() {
        return Err(GboostError::TargetCount {
            rows: x.nrows(),
            targets: targets.len(),
        });
    }
    let mut builder = TreeBuilder {
        x,
        targets,
        sorted,
        max_depth,
        min_leaf: min_leaf.max(1),
        nodes: Vec::new(),
    };
    let all: Vec<usize> = (0..x.nrows()).collect();
    builder.build(&all, 0);
    Ok(RegressionTree {
        nodes: builder.nodes,
        max_depth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GboostModel {
    pub base_value: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    pub n_features: usize,
}

impl GboostModel {
    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        self.base_value
            + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }
}

pub fn gboost_fit(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    config: &GboostConfig,
) -> Result<GboostModel, GboostError> {
    gboost_fit_traced(x, y, config, |_, _| {})
}

/// Like [`gboost_fit`], calling `on_step(t, current_predictions)` after each tree.
pub fn gboost_fit_traced(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    config: &GboostConfig,
    mut on_step: impl FnMut(usize, &[f64]),
) -> Result<GboostModel, GboostError> {
    config.validate()?;
    if x.nrows() == 0 {
        return Err(GboostError::Empty);
    }
    if x.nrows() != y.len() {
        return Err(GboostError::TargetCount {
            rows: x.nrows(),
            targets: y.len(),
        });
    }
    let m = x.nrows();
    let base_value = y.sum() / m as f64;
    let mut prediction = vec![base_value; m];
    let sorted = presort(x);
    let mut trees = Vec::with_capacity(config.n_estimators);
    let mut residual = vec![0.0; m];
    for t in 0..config.n_estimators {
        for i in 0..m {
            residual[i] = y[i] - prediction[i];
        }
        let tree = fit_tree_presorted(x, &residual, &sorted, config.max_depth, config.min_leaf)?;
        for (i, p) in prediction.iter_mut().enumerate() {
            *p += config.learning_rate * tree.predict_row(x.row(i));
        }
        trees.push(tree);
        on_step(t, &prediction);
    }
    Ok(GboostModel {
        base_value,
        learning_rate: config.learning_rate,
        trees,
        n_features: x.ncols(),
    })
}

pub fn gboost_predict(
    model: &GboostModel,
    query: ArrayView2<f64>,
) -> Result<Array1<f64>, GboostError> {
    if query.ncols() != model.n_features {
        return Err(GboostError::DimensionMismatch {
            expected: model.n_features,
            found: query.ncols(),
        });
    }
    Ok(query
        .rows()
        .into_iter()
        .map(|r| model.predict_row(r))
        .collect())
}
