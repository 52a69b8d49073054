use serde::{Deserialize, Serialize};

use super::elements;

/// A molecular structure: atomic numbers and Cartesian positions in Å.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub id: String,
    pub atomic_numbers: Vec<u32>,
    pub positions: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MoleculeError {
    #[error("{atoms} atomic numbers but {positions} positions")]
    LengthMismatch { atoms: usize, positions: usize },
    #[error("atom {index} has invalid atomic number {z}")]
    InvalidAtomicNumber { index: usize, z: u32 },
    #[error("atom {index} has a non-finite coordinate")]
    NonFinitePosition { index: usize },
}

impl Molecule {
    pub fn new(
        id: impl Into<String>,
        atomic_numbers: Vec<u32>,
        positions: Vec<[f64; 3]>,
    ) -> Result<Self, MoleculeError> {
        if atomic_numbers.len() != positions.len() {
            return Err(MoleculeError::LengthMismatch {
                atoms: atomic_numbers.len(),
                positions: positions.len(),
            });
        }
        for (index, &z) in atomic_numbers.iter().enumerate() {
            if z == 0 || z > elements::MAX_Z {
                return Err(MoleculeError::InvalidAtomicNumber { index, z });
            }
        }
        for (index, p) in positions.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(MoleculeError::NonFinitePosition { index });
            }
        }
        Ok(Molecule {
            id: id.into(),
            atomic_numbers,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.atomic_numbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atomic_numbers.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(&self.positions[i], &self.positions[j])
    }

    pub fn contains_element(&self, z: u32) -> bool {
        self.atomic_numbers.contains(&z)
    }

    /// Chemical formula in Hill-like order of appearance, e.g. `C4H4S`.
    pub fn formula(&self) -> String {
        let mut counts: Vec<(u32, usize)> = Vec::new();
        for &z in &self.atomic_numbers {
            match counts.iter_mut().find(|(zz, _)| *zz == z) {
                Some((_, n)) => *n += 1,
                None => counts.push((z, 1)),
            }
        }
        counts
            .iter()
            .map(|&(z, n)| {
                let s = elements::symbol(z).unwrap_or("?");
                if n == 1 {
                    s.to_string()
                } else {
                    format!("{s}{n}")
                }
            })
            .collect()
    }

    /// Applies `x -> R x + t` to every position.
    pub fn transformed(&self, rotation: &[[f64; 3]; 3], translation: [f64; 3]) -> Molecule {
        let positions = self
            .positions
            .iter()
            .map(|p| {
                let mut q = [0.0; 3];
                for (a, qa) in q.iter_mut().enumerate() {
                    *qa = rotation[a][0] * p[0]
                        + rotation[a][1] * p[1]
                        + rotation[a][2] * p[2]
                        + translation[a];
                }
                q
            })
            .collect();
        Molecule {
            id: self.id.clone(),
            atomic_numbers: self.atomic_numbers.clone(),
            positions,
        }
    }

    /// Reorders atoms so that new atom `k` is old atom `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Molecule {
        Molecule {
            id: self.id.clone(),
            atomic_numbers: order.iter().map(|&i| self.atomic_numbers[i]).collect(),
            positions: order.iter().map(|&i| self.positions[i]).collect(),
        }
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
