//! SOAP power spectrum.
//!
//! The neighbor density of each species is a sum of Gaussians of width
//! `sigma`, weighted by the cosine cutoff of the neighbor distance. It is
//! expanded on `g_nl(r) Y_lm(r)` where `g_nl` are Gaussian-type orbitals
//! `r^l exp(-a_k r^2)` orthonormalized on `[0, r_cut]`. The angular integral is
//! done in closed form with modified spherical Bessel functions, leaving a
//! one-dimensional radial integral evaluated by Gauss-Legendre quadrature.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::special::{
    gauss_legendre_interval, lm_index, real_spherical_harmonics, scaled_modified_spherical_bessel,
};
use super::DescriptorError;
use crate::chemdata::Molecule;
use crate::nets::cosine_cutoff;

/// Decay threshold of the widest primitive Gaussian at its reference radius.
const GTO_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoapParams {
    pub r_cut: f64,
    pub n_max: usize,
    pub l_max: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub species: Vec<u32>,
}

fn default_sigma() -> f64 {
    1.0
}

impl SoapParams {
    pub fn new(
        r_cut: f64,
        n_max: usize,
        l_max: usize,
        sigma: f64,
        species: Vec<u32>,
    ) -> Result<Self, DescriptorError> {
        let p = SoapParams {
            r_cut,
            n_max,
            l_max,
            sigma,
            species,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DescriptorError> {
        let bad = |m: &str| Err(DescriptorError::InvalidParams(m.to_string()));
        if !(self.r_cut > 0.0 && self.r_cut.is_finite()) {
            return bad("r_cut must be positive");
        }
        if !(1..=12).contains(&self.n_max) {
            return bad("n_max must be in 1..=12");
        }
        if self.l_max > 12 {
            return bad("l_max must be in 0..=12");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if self.species.is_empty() {
            return bad("species must be non-empty");
        }
        if self.species.windows(2).any(|w| w[0] >= w[1]) {
            return bad("species must be sorted and unique");
        }
        Ok(())
    }

    /// Number of `(Z1 <= Z2, n, n', l)` entries.
    pub fn dimension(&self) -> usize {
        let s = self.species.len();
        let n = self.n_max;
        let same = n * (n + 1) / 2;
        let cross = n * n;
        (s * same + s * (s - 1) / 2 * cross) * (self.l_max + 1)
    }

    /// Labels `soap:Z1-Z2:n{n}:n{n'}:l{l}` in storage order.
    pub fn column_labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dimension());
        self.for_each_column(|a, b, n1, n2, l| {
            out.push(format!(
                "soap:{}-{}:n{}:n{}:l{}",
                self.species[a], self.species[b], n1, n2, l
            ));
        });
        out
    }

    fn for_each_column(&self, mut f: impl FnMut(usize, usize, usize, usize, usize)) {
        let s = self.species.len();
        for a in 0..s {
            for b in a..s {
                for n1 in 0..self.n_max {
                    let n2_start = if a == b { n1 } else { 0 };
                    for n2 in n2_start..self.n_max {
                        for l in 0..=self.l_max {
                            f(a, b, n1, n2, l);
                        }
                    }
                }
            }
        }
    }
}

/// Orthonormal GTO radial basis tabulated on a quadrature grid over `[0, r_cut]`.
#[derive(Debug, Clone)]
pub struct RadialBasis {
    pub n_max: usize,
    pub l_max: usize,
    pub r_cut: f64,
    pub alphas: Vec<f64>,
    /// `coefficients[l]` is the `n_max x n_max` matrix `beta[n][k]`.
    pub coefficients: Vec<DMatrix<f64>>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `values[l][n * nodes + q] = g_nl(r_q)`
    values: Vec<Vec<f64>>,
}

fn inverse_sqrt(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|e: f64| 1.0 / e.sqrt()));
    &eig.eigenvectors * inv * eig.eigenvectors.transpose()
}

fn radial_table(
    beta: &DMatrix<f64>,
    nodes: &[f64],
    primitive: &dyn Fn(usize, f64) -> f64,
) -> Vec<f64> {
    let n_max = beta.nrows();
    let mut table = vec![0.0; n_max * nodes.len()];
    for (q, &r) in nodes.iter().enumerate() {
        for n in 0..n_max {
            table[n * nodes.len() + q] = (0..n_max).map(|k| beta[(n, k)] * primitive(k, r)).sum();
        }
    }
    table
}

impl RadialBasis {
    pub fn new(params: &SoapParams) -> Result<Self, DescriptorError> {
        params.validate()?;
        let n_max = params.n_max;
        let r_cut = params.r_cut;
        let reference: Vec<f64> = if n_max == 1 {
            vec![r_cut.min(1.0)]
        } else if r_cut > 1.0 {
            (0..n_max)
                .map(|k| 1.0 + (r_cut - 1.0) * k as f64 / (n_max - 1) as f64)
                .collect()
        } else {
            (0..n_max)
                .map(|k| r_cut * (k + 1) as f64 / n_max as f64)
                .collect()
        };
        let alphas: Vec<f64> = reference
            .iter()
            .map(|r| -GTO_THRESHOLD.ln() / (r * r))
            .collect();

        let alpha_max = alphas.iter().cloned().fold(0.0, f64::max);
        let narrowest = params.sigma.min(1.0 / (2.0 * alpha_max).sqrt());
        let n_quad = ((8.0 * r_cut / narrowest).ceil() as usize + 48).clamp(96, 800);
        let (nodes, weights) = gauss_legendre_interval(n_quad, 0.0, r_cut);

        let mut coefficients = Vec::with_capacity(params.l_max + 1);
        let mut values = Vec::with_capacity(params.l_max + 1);
        for l in 0..=params.l_max {
            let primitive = |k: usize, r: f64| r.powi(l as i32) * (-alphas[k] * r * r).exp();
            let mut overlap = DMatrix::<f64>::zeros(n_max, n_max);
            for (&r, &w) in nodes.iter().zip(&weights) {
                for i in 0..n_max {
                    let pi = primitive(i, r);
                    for j in 0..=i {
                        overlap[(i, j)] += w * r * r * pi * primitive(j, r);
                    }
                }
            }
            for i in 0..n_max {
                for j in 0..i {
                    overlap[(j, i)] = overlap[(i, j)];
                }
            }
            let eig = SymmetricEigen::new(overlap);
            let max_ev = eig.eigenvalues.max();
            if eig.eigenvalues.iter().any(|&e| !(e > max_ev * 1e-300)) {
                return Err(DescriptorError::InvalidParams(format!(
                    "radial basis overlap is numerically singular for l = {l}; reduce n_max"
                )));
            }
            let mut beta = inverse_sqrt(&eig);
            let mut table = radial_table(&beta, &nodes, &primitive);
            // The overlap of Gaussians is badly conditioned, so one pass leaves
            // errors of order cond·eps; a second pass on the tabulated
            // functions (now well conditioned) removes them.
            let mut residual = DMatrix::<f64>::zeros(n_max, n_max);
            for (q, (&r, &w)) in nodes.iter().zip(&weights).enumerate() {
                for a in 0..n_max {
                    for b in 0..n_max {
                        residual[(a, b)] +=
                            w * r * r * table[a * nodes.len() + q] * table[b * nodes.len() + q];
                    }
                }
            }
            beta = inverse_sqrt(&SymmetricEigen::new(residual)) * beta;
            table = radial_table(&beta, &nodes, &primitive);
            coefficients.push(beta);
            values.push(table);
        }
        Ok(RadialBasis {
            n_max,
            l_max: params.l_max,
            r_cut,
            alphas,
            coefficients,
            nodes,
            weights,
            values,
        })
    }

    /// Evaluates `g_nl(r)` directly from the primitive expansion.
    pub fn evaluate(&self, n: usize, l: usize, r: f64) -> f64 {
        let beta = &self.coefficients[l];
        (0..self.n_max)
            .map(|k| beta[(n, k)] * r.powi(l as i32) * (-self.alphas[k] * r * r).exp())
            .sum()
    }

    pub fn quadrature(&self) -> (&[f64], &[f64]) {
        (&self.nodes, &self.weights)
    }
}

/// Precomputed state for evaluating SOAP vectors with one parameter set.
#[derive(Debug, Clone)]
pub struct SoapCalculator {
    params: SoapParams,
    basis: RadialBasis,
}

impl SoapCalculator {
    pub fn new(params: SoapParams) -> Result<Self, DescriptorError> {
        let basis = RadialBasis::new(&params)?;
        Ok(SoapCalculator { params, basis })
    }

    pub fn params(&self) -> &SoapParams {
        &self.params
    }

    pub fn basis(&self) -> &RadialBasis {
        &self.basis
    }

    fn species_index(&self, z: u32) -> Result<usize, DescriptorError> {
        self.params
            .species
            .binary_search(&z)
            .map_err(|_| DescriptorError::UndeclaredSpecies(z))
    }

    /// Expansion coefficients `c[species][n][lm]` flattened as
    /// `((s * n_max) + n) * (l_max+1)^2 + lm` around atom `center`.
    pub fn expansion_coefficients(
        &self,
        mol: &Molecule,
        center: usize,
    ) -> Result<Vec<f64>, DescriptorError> {
        if center >= mol.len() {
            return Err(DescriptorError::CenterOutOfRange {
                center,
                atoms: mol.len(),
            });
        }
        let species_idx: Vec<usize> = mol
            .atomic_numbers
            .iter()
            .map(|&z| self.species_index(z))
            .collect::<Result<_, _>>()?;

        let p = &self.params;
        let n_lm = (p.l_max + 1) * (p.l_max + 1);
        let n_max = p.n_max;
        let mut coeffs = vec![0.0; p.species.len() * n_max * n_lm];
        let (nodes, weights) = self.basis.quadrature();
        let n_quad = nodes.len();
        let inv_two_sigma2 = 1.0 / (2.0 * p.sigma * p.sigma);
        let inv_sigma2 = 1.0 / (p.sigma * p.sigma);
        let mut bessel = vec![0.0; p.l_max + 1];
        let mut radial = vec![0.0; n_max * (p.l_max + 1)];

        let origin = mol.positions[center];
        for (j, pos) in mol.positions.iter().enumerate() {
            let d = [pos[0] - origin[0], pos[1] - origin[1], pos[2] - origin[2]];
            let rj = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if rj >= p.r_cut {
                continue;
            }
            let weight = 4.0 * PI * cosine_cutoff(rj, p.r_cut);
            let l_top = if rj < 1e-12 { 0 } else { p.l_max };

            radial.iter_mut().for_each(|v| *v = 0.0);
            for q in 0..n_quad {
                let r = nodes[q];
                let gauss = (-(r - rj) * (r - rj) * inv_two_sigma2).exp();
                if gauss < 1e-20 {
                    continue;
                }
                let x = r * rj * inv_sigma2;
                scaled_modified_spherical_bessel(l_top, x, &mut bessel);
                let base = weights[q] * r * r * gauss;
                for l in 0..=l_top {
                    let f = base * bessel[l];
                    let table = &self.basis.values[l];
                    for n in 0..n_max {
                        radial[l * n_max + n] += f * table[n * n_quad + q];
                    }
                }
            }

            let ylm = if rj < 1e-12 {
                let mut y = vec![0.0; n_lm];
                y[0] = 0.5 / PI.sqrt();
                y
            } else {
                real_spherical_harmonics(p.l_max, d)
            };
            let s = species_idx[j];
            for n in 0..n_max {
                let row = &mut coeffs[(s * n_max + n) * n_lm..(s * n_max + n + 1) * n_lm];
                for l in 0..=l_top {
                    let rad = weight * radial[l * n_max + n];
                    for m in -(l as i64)..=l as i64 {
                        let lm = lm_index(l, m);
                        row[lm] += rad * ylm[lm];
                    }
                }
            }
        }
        Ok(coeffs)
    }

    /// Power spectrum of atom `center`, in [`SoapParams::column_labels`] order.
    pub fn atomic(&self, mol: &Molecule, center: usize) -> Result<Vec<f64>, DescriptorError> {
        let c = self.expansion_coefficients(mol, center)?;
        let p = &self.params;
        let n_lm = (p.l_max + 1) * (p.l_max + 1);
        let n_max = p.n_max;
        let prefactor: Vec<f64> = (0..=p.l_max)
            .map(|l| PI * (8.0 / (2 * l + 1) as f64).sqrt())
            .collect();
        let mut out = Vec::with_capacity(p.dimension());
        p.for_each_column(|a, b, n1, n2, l| {
            let ca = &c[(a * n_max + n1) * n_lm..];
            let cb = &c[(b * n_max + n2) * n_lm..];
            let mut acc = 0.0;
            for m in -(l as i64)..=l as i64 {
                let lm = lm_index(l, m);
                acc += ca[lm] * cb[lm];
            }
            out.push(prefactor[l] * acc);
        });
        Ok(out)
    }

    /// Mean of the atomic power spectra over all atoms.
    pub fn molecular(&self, mol: &Molecule) -> Result<Vec<f64>, DescriptorError> {
        if mol.is_empty() {
            return Err(DescriptorError::EmptyMolecule(mol.id.clone()));
        }
        let mut acc = vec![0.0; self.params.dimension()];
        for i in 0..mol.len() {
            for (a, v) in acc.iter_mut().zip(self.atomic(mol, i)?) {
                *a += v;
            }
        }
        let inv = 1.0 / mol.len() as f64;
        acc.iter_mut().for_each(|v| *v *= inv);
        Ok(acc)
    }
}

pub fn soap_atomic(
    mol: &Molecule,
    params: &SoapParams,
    center: usize,
) -> Result<Vec<f64>, DescriptorError> {
    SoapCalculator::new(params.clone())?.atomic(mol, center)
}

pub fn soap_molecular(mol: &Molecule, params: &SoapParams) -> Result<Vec<f64>, DescriptorError> {
    SoapCalculator::new(params.clone())?.molecular(mol)
}
