//! Each model component against a slow, independent recomputation.

use std::f64::consts::PI;

use molt_core::chemdata::synthetic::random_molecule;
use molt_core::chemdata::Molecule;
use molt_core::descriptors::special::real_spherical_harmonics;
use molt_core::descriptors::{pca_fit, pca_transform, SoapCalculator, SoapParams};
use molt_core::gboost::{fit_tree, gboost_fit, gboost_predict, GboostConfig, Node, RegressionTree};
use molt_core::krr::{krr_fit, krr_predict};
use molt_core::rng::{stream, Stream};
use molt_core::tensor::{adam_step, AdamState, ParamStore};
use ndarray::{Array1, Array2, ArrayD, IxDyn};
use rand::Rng;

use crate::{ensure, Outcome};

fn uniform(rng: &mut Stream, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(f64::abs).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- SOAP

/// Gauss-Legendre nodes and weights on [a, b] by Newton iteration on P_n.
fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        x[i] = 0.5 * (b - a) * z + 0.5 * (b + a);
        w[i] = (b - a) / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `c[s][n][lm] = ∫ g_nl(r) Y_lm(r̂) ρ_s(r) d³r` over the ball of radius `r_cut`,
/// with the density built directly from Gaussians on a 3-D product grid.
fn soap_by_quadrature(calc: &SoapCalculator, mol: &Molecule, center: usize) -> Vec<f64> {
    let p = calc.params();
    let n_lm = (p.l_max + 1) * (p.l_max + 1);
    let n_s = p.species.len();
    let o = mol.positions[center];
    let mut neighbors: Vec<(usize, [f64; 3], f64)> = Vec::new();
    for (j, q) in mol.positions.iter().enumerate() {
        let d = [q[0] - o[0], q[1] - o[1], q[2] - o[2]];
        let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if r < p.r_cut {
            let s = p
                .species
                .iter()
                .position(|&z| z == mol.atomic_numbers[j])
                .unwrap();
            let fcut = 0.5 * ((PI * r / p.r_cut).cos() + 1.0);
            neighbors.push((s, d, fcut));
        }
    }

    let (rs, rw) = gauss_legendre(200, 0.0, p.r_cut);
    let (cts, ctw) = gauss_legendre(120, -1.0, 1.0);
    let n_phi = 240;
    let mut dirs = Vec::with_capacity(cts.len() * n_phi);
    for (&ct, &wt) in cts.iter().zip(&ctw) {
        let st = (1.0 - ct * ct).sqrt();
        for k in 0..n_phi {
            let phi = 2.0 * PI * k as f64 / n_phi as f64;
            let u = [st * phi.cos(), st * phi.sin(), ct];
            let y = real_spherical_harmonics(p.l_max, u);
            dirs.push((u, wt * 2.0 * PI / n_phi as f64, y));
        }
    }

    let inv = 1.0 / (2.0 * p.sigma * p.sigma);
    let mut c = vec![0.0; n_s * p.n_max * n_lm];
    let mut ang = vec![0.0; n_s * n_lm];
    let mut rho = vec![0.0; n_s];
    for (&r, &wr) in rs.iter().zip(&rw) {
        ang.iter_mut().for_each(|v| *v = 0.0);
        for (u, wa, y) in &dirs {
            rho.iter_mut().for_each(|v| *v = 0.0);
            for (s, d, fcut) in &neighbors {
                let e = [r * u[0] - d[0], r * u[1] - d[1], r * u[2] - d[2]];
                rho[*s] += fcut * (-(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]) * inv).exp();
            }
            for s in 0..n_s {
                let f = wa * rho[s];
                for lm in 0..n_lm {
                    ang[s * n_lm + lm] += f * y[lm];
                }
            }
        }
        for s in 0..n_s {
            for n in 0..p.n_max {
                for l in 0..=p.l_max {
                    let g = wr * r * r * calc.basis().evaluate(n, l, r);
                    for lm in l * l..(l + 1) * (l + 1) {
                        c[(s * p.n_max + n) * n_lm + lm] += g * ang[s * n_lm + lm];
                    }
                }
            }
        }
    }
    c
}

fn soap_oracle() -> Result<String, String> {
    let mut worst = 0.0f64;
    let settings = [(5.0, 5, 5, 0.5), (4.0, 4, 6, 1.0)];
    for (k, &(r_cut, n_max, l_max, sigma)) in settings.iter().enumerate() {
        let params = SoapParams::new(r_cut, n_max, l_max, sigma, vec![1, 6, 8]).unwrap();
        let calc = SoapCalculator::new(params).unwrap();
        let mut rng = stream(13, "soap-oracle", k as u64);
        let co = Molecule::new("co", vec![6, 8], vec![[0.0; 3], [0.31, -0.52, 1.02]]).unwrap();
        let cases = [
            (co, vec![0, 1]),
            (random_molecule(&mut rng, "q", 7, &[1, 6, 8]), vec![0, 3]),
        ];
        for (mol, centers) in &cases {
            for &center in centers {
                let fast = calc.expansion_coefficients(mol, center).unwrap();
                let slow = soap_by_quadrature(&calc, mol, center);
                let scale = max_abs(slow.iter().copied());
                let err = max_abs(fast.iter().zip(&slow).map(|(a, b)| a - b)) / scale;
                worst = worst.max(err);
            }
        }
    }
    ensure(worst < 1e-6, || {
        format!("soap coefficients off by {worst:.1e} (relative)")
    })?;
    Ok(format!("soap {worst:.1e}"))
}

// ---------------------------------------------------------------- KRR

/// Inverse by Gauss-Jordan elimination with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                for j in 0..n {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn krr_oracle() -> Result<String, String> {
    let mut worst = 0.0f64;
    for (k, alpha) in [1.12, 0.05].into_iter().enumerate() {
        let mut rng = stream(17, "krr-oracle", k as u64);
        let x = uniform(&mut rng, 14, 6, -0.2, 1.0);
        let q = uniform(&mut rng, 5, 6, -0.2, 1.0);
        let y: Vec<f64> = (0..14).map(|_| rng.random_range(-3.0..5.0)).collect();
        let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        let qrows: Vec<Vec<f64>> = q.rows().into_iter().map(|r| r.to_vec()).collect();

        let m = y.len() as f64;
        let mu = y.iter().sum::<f64>() / m;
        let sd = (y.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m).sqrt();
        let z: Vec<f64> = y.iter().map(|v| (v - mu) / sd).collect();
        let system: Vec<Vec<f64>> = rows
            .iter()
            .enumerate()
            .map(|(i, a)| {
                rows.iter()
                    .enumerate()
                    .map(|(j, b)| cosine(a, b) + if i == j { alpha } else { 0.0 })
                    .collect()
            })
            .collect();
        let inv = invert(system);
        let coeffs: Vec<f64> = inv
            .iter()
            .map(|r| r.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect();
        let pred: Vec<f64> = qrows
            .iter()
            .map(|qr| {
                mu + sd
                    * rows
                        .iter()
                        .zip(&coeffs)
                        .map(|(r, c)| cosine(qr, r) * c)
                        .sum::<f64>()
            })
            .collect();

        let model = krr_fit(x.view(), Array1::from(y.clone()).view(), alpha).unwrap();
        let fast = krr_predict(&model, q.view()).unwrap();
        let ce = max_abs(model.dual_coeffs.iter().zip(&coeffs).map(|(a, b)| a - b))
            / max_abs(coeffs.iter().copied());
        let pe =
            max_abs(fast.iter().zip(&pred).map(|(a, b)| a - b)) / max_abs(pred.iter().copied());
        worst = worst.max(ce).max(pe);
    }
    ensure(worst < 1e-10, || {
        format!("krr off by {worst:.1e} (relative)")
    })?;
    Ok(format!("krr {worst:.1e}"))
}

// ---------------------------------------------------------------- trees

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sse(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|y| (y - m).powi(2)).sum()
}

/// Recursive CART with every candidate split scored by its summed squared
/// error. Node layout follows depth-first, left-first order.
fn exhaustive_tree(x: &Array2<f64>, y: &[f64], max_depth: usize, min_leaf: usize) -> Vec<Node> {
    fn grow(
        x: &Array2<f64>,
        y: &[f64],
        rows: &[usize],
        depth: usize,
        max_depth: usize,
        min_leaf: usize,
        out: &mut Vec<Node>,
    ) -> usize {
        let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        let index = out.len();
        out.push(Node::Leaf { value: mean(&ys) });
        if depth >= max_depth || rows.len() < 2 * min_leaf || ys.iter().all(|&v| v == ys[0]) {
            return index;
        }
        let parent = sse(&ys);
        // gains closer than this are ties, which go to the earlier candidate
        let tol = 1e-12 * ys.iter().map(|v| v * v).sum::<f64>();
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..x.ncols() {
            let mut values: Vec<f64> = rows.iter().map(|&i| x[(i, f)]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for pair in values.windows(2) {
                let t = 0.5 * (pair[0] + pair[1]);
                let (l, r): (Vec<f64>, Vec<f64>) = {
                    let l = rows
                        .iter()
                        .filter(|&&i| x[(i, f)] < t)
                        .map(|&i| y[i])
                        .collect();
                    let r = rows
                        .iter()
                        .filter(|&&i| x[(i, f)] >= t)
                        .map(|&i| y[i])
                        .collect();
                    (l, r)
                };
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let cost = sse(&l) + sse(&r);
                if best.is_none_or(|(c, _, _)| cost < c - tol) {
                    best = Some((cost, f, t));
                }
            }
        }
        let Some((cost, f, t)) = best else {
            return index;
        };
        if parent - cost <= tol {
            return index;
        }
        let left: Vec<usize> = rows.iter().copied().filter(|&i| x[(i, f)] < t).collect();
        let right: Vec<usize> = rows.iter().copied().filter(|&i| x[(i, f)] >= t).collect();
        let l = grow(x, y, &left, depth + 1, max_depth, min_leaf, out);
        let r = grow(x, y, &right, depth + 1, max_depth, min_leaf, out);
        out[index] = Node::Split {
            feature: f,
            threshold: t,
            left: l,
            right: r,
        };
        index
    }
    let mut out = Vec::new();
    let all: Vec<usize> = (0..x.nrows()).collect();
    grow(x, y, &all, 0, max_depth, min_leaf, &mut out);
    out
}

fn predict_nodes(nodes: &[Node], row: &[f64]) -> f64 {
    let mut i = 0;
    loop {
        match nodes[i] {
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
                }
            }
        }
    }
}

/// Splits must match exactly; leaf means within 1e-12 of each other.
fn same_tree(fast: &RegressionTree, slow: &[Node]) -> Result<(), String> {
    ensure(fast.nodes.len() == slow.len(), || {
        format!(
            "{} nodes vs {} by enumeration",
            fast.nodes.len(),
            slow.len()
        )
    })?;
    for (i, (a, b)) in fast.nodes.iter().zip(slow).enumerate() {
        let ok = match (a, b) {
            (Node::Leaf { value: u }, Node::Leaf { value: v }) => {
                (u - v).abs() <= 1e-12 * (1.0 + v.abs())
            }
            (Node::Split { .. }, Node::Split { .. }) => a == b,
            _ => false,
        };
        ensure(ok, || format!("node {i}: {a:?} vs {b:?}"))?;
    }
    Ok(())
}

fn tree_data(seed: u64, rows: usize) -> (Array2<f64>, Vec<f64>) {
    let mut rng = stream(seed, "tree-oracle", 0);
    let mut x = uniform(&mut rng, rows, 5, -1.0, 1.0);
    // a coarse column exercises repeated values
    for i in 0..rows {
        x[(i, 2)] = rng.random_range(0..4) as f64;
    }
    let y = (0..rows)
        .map(|i| {
            (3.0 * x[(i, 0)]).sin() + 0.5 * x[(i, 2)] - x[(i, 4)].powi(2)
                + rng.random_range(-0.1..0.1)
        })
        .collect();
    (x, y)
}

fn tree_oracle() -> Result<String, String> {
    let mut checked = 0;
    for seed in 0..6u64 {
        let (x, y) = tree_data(seed, 40);
        for (depth, min_leaf) in [(1, 1), (3, 1), (4, 3)] {
            let fast = fit_tree(x.view(), &y, depth, min_leaf).unwrap();
            same_tree(&fast, &exhaustive_tree(&x, &y, depth, min_leaf))
                .map_err(|e| format!("tree seed {seed} depth {depth}: {e}"))?;
            checked += 1;
        }
    }
    Ok(format!("trees {checked}/{checked} identical"))
}

fn gboost_oracle() -> Result<String, String> {
    let (x, y) = tree_data(99, 50);
    let (q, _) = tree_data(100, 10);
    let cfg = GboostConfig {
        n_estimators: 25,
        learning_rate: 0.1,
        max_depth: 3,
        min_leaf: 1,
    };
    let model = gboost_fit(x.view(), Array1::from(y.clone()).view(), &cfg).unwrap();

    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let base = mean(&y);
    let mut fitted = vec![base; y.len()];
    let mut trees = Vec::new();
    for t in 0..cfg.n_estimators {
        let residual: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let nodes = exhaustive_tree(&x, &residual, cfg.max_depth, cfg.min_leaf);
        same_tree(&model.trees[t], &nodes).map_err(|e| format!("boosting round {t}: {e}"))?;
        for (f, r) in fitted.iter_mut().zip(&rows) {
            *f += cfg.learning_rate * predict_nodes(&nodes, r);
        }
        trees.push(nodes);
    }
    let predict = |r: &[f64]| {
        trees.iter().fold(base, |acc, nodes| {
            acc + cfg.learning_rate * predict_nodes(nodes, r)
        })
    };
    let mut worst = 0.0f64;
    for m in [&x, &q] {
        let fast = gboost_predict(&model, m.view()).unwrap();
        for (i, r) in m.rows().into_iter().enumerate() {
            let slow = predict(&r.to_vec());
            worst = worst.max((fast[i] - slow).abs() / (1.0 + slow.abs()));
        }
    }
    ensure(worst < 1e-12, || {
        format!("gboost predictions off by {worst:.1e}")
    })?;
    Ok(format!("gboost {worst:.1e}"))
}

// ---------------------------------------------------------------- PCA

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, descending.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (values, vectors)
}

fn pca_oracle() -> Result<String, String> {
    let mut rng = stream(23, "pca-oracle", 0);
    let (m, d) = (60, 6);
    let latent = uniform(&mut rng, m, d, -1.0, 1.0);
    let mix = uniform(&mut rng, d, d, -1.0, 1.0);
    let scales = [4.0, 2.5, 1.5, 0.8, 0.3, 0.1];
    let mut x = Array2::zeros((m, d));
    for i in 0..m {
        for j in 0..d {
            x[(i, j)] = 3.0
                + (0..d)
                    .map(|k| scales[k] * latent[(i, k)] * mix[(k, j)])
                    .sum::<f64>();
        }
    }
    let mu: Vec<f64> = (0..d).map(|j| x.column(j).sum() / m as f64).collect();
    let cov: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    (0..m)
                        .map(|i| (x[(i, a)] - mu[a]) * (x[(i, b)] - mu[b]))
                        .sum::<f64>()
                        / (m - 1) as f64
                })
                .collect()
        })
        .collect();
    let (values, vectors) = jacobi_eigen(cov);
    let total: f64 = values.iter().sum();

    let retained = 0.99;
    let model = pca_fit(x.view(), retained).unwrap();
    let mut k = 0;
    let mut acc = 0.0;
    while acc < retained * total {
        acc += values[k];
        k += 1;
    }
    ensure(model.n_components() == k, || {
        format!("{} components, expected {k}", model.n_components())
    })?;

    let mut worst = 0.0f64;
    for c in 0..k {
        worst = worst.max((model.explained_variance[c] - values[c]).abs() / values[0]);
        let row = model.components.row(c);
        let sign = if row.iter().zip(&vectors[c]).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
            -1.0
        } else {
            1.0
        };
        worst = worst.max(max_abs(
            row.iter().zip(&vectors[c]).map(|(a, b)| a - sign * b),
        ));
    }
    let projected = pca_transform(&model, x.view()).unwrap();
    for i in 0..m {
        for c in 0..k {
            let slow: f64 = (0..d)
                .map(|j| (x[(i, j)] - mu[j]) * model.components[(c, j)])
                .sum();
            worst = worst.max((projected[(i, c)] - slow).abs() / values[0].sqrt());
        }
    }
    ensure(worst < 1e-8, || format!("pca off by {worst:.1e}"))?;
    Ok(format!("pca {worst:.1e}"))
}

// ---------------------------------------------------------------- Adam

fn adam_oracle() -> Result<String, String> {
    let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8f64, 1e-2);
    let mut store = ParamStore::new();
    let init = [0.5, -1.0, 2.0, 0.0, 3.0];
    store.insert(
        "w",
        ArrayD::from_shape_vec(IxDyn(&[5]), init.to_vec()).unwrap(),
        true,
    );
    let mut state = AdamState::new();
    let (mut w, mut m, mut v) = (init.to_vec(), vec![0.0; 5], vec![0.0; 5]);
    let mut worst = 0.0f64;
    for step in 1..=20 {
        let g: Vec<f64> = w
            .iter()
            .enumerate()
            .map(|(i, x)| (x - i as f64).sin() * (step as f64).sqrt())
            .collect();
        store.get_mut("w").unwrap().grad = ArrayD::from_shape_vec(IxDyn(&[5]), g.clone()).unwrap();
        adam_step(&mut store, &mut state, |_| lr);
        for i in 0..5 {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - b1.powi(step));
            let v_hat = v[i] / (1.0 - b2.powi(step));
            w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        let fast = store.value("w").unwrap();
        worst = worst.max(max_abs(fast.iter().zip(&w).map(|(a, b)| a - b)));
    }
    ensure(worst < 1e-12, || format!("adam off by {worst:.1e}"))?;
    Ok(format!("adam {worst:.1e}"))
}

pub fn run() -> Outcome {
    let parts = [
        soap_oracle()?,
        krr_oracle()?,
        tree_oracle()?,
        gboost_oracle()?,
        pca_oracle()?,
        adam_oracle()?,
    ];
    Ok(parts.join(", "))
}
