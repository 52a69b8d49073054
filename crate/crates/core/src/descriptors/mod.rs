//! SOAP power spectra, simple composition descriptors and PCA compression.

pub mod pca;
pub mod simple;
pub mod soap;
pub mod special;

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chemdata::Molecule;

pub use pca::{pca_fit, pca_transform, pca_transform_matrix, PcaModel};
pub use simple::{simple_descriptor_labels, simple_descriptors, DEFAULT_CC_BOND_CUT};
pub use soap::{soap_atomic, soap_molecular, RadialBasis, SoapCalculator, SoapParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DescriptorError {
    #[error("invalid descriptor parameters: {0}")]
    InvalidParams(String),
    #[error("element Z={0} is not in the declared species list")]
    UndeclaredSpecies(u32),
    #[error("center index {center} out of range for {atoms} atoms")]
    CenterOutOfRange { center: usize, atoms: usize },
    #[error("molecule '{0}' has no atoms")]
    EmptyMolecule(String),
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("descriptor matrix has a non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorKind {
    SoapAtomic,
    SoapMolecular,
    Sd,
    /// Molecular SOAP with the simple descriptors appended.
    SoapSd,
    Pca,
}

/// Row-per-sample feature matrix with one label per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorMatrix {
    pub rows: Array2<f64>,
    pub column_labels: Vec<String>,
    pub kind: DescriptorKind,
}

impl DescriptorMatrix {
    pub fn new(
        rows: Array2<f64>,
        column_labels: Vec<String>,
        kind: DescriptorKind,
    ) -> Result<Self, DescriptorError> {
        if column_labels.len() != rows.ncols() {
            return Err(DescriptorError::DimensionMismatch {
                expected: rows.ncols(),
                found: column_labels.len(),
            });
        }
        if let Some(((row, col), _)) = rows.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(DescriptorError::NonFinite { row, col });
        }
        Ok(DescriptorMatrix {
            rows,
            column_labels,
            kind,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.rows.ncols()
    }

    /// Header of column labels, then one line per row with round-trip exact numbers.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.column_labels.join(","))?;
        let mut line = String::new();
        for row in self.rows.rows() {
            line.clear();
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), DescriptorError> {
        let file = std::fs::File::create(path)
            .map_err(|e| DescriptorError::Io(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| DescriptorError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read_csv(text: &str, kind: DescriptorKind) -> Result<Self, DescriptorError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| DescriptorError::Io("empty descriptor file".into()))?;
        let labels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut data = Vec::new();
        let mut n = 0;
        for (i, line) in lines.enumerate() {
            let values: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| DescriptorError::Io(format!("row {}: {e}", i + 1)))?;
            if values.len() != labels.len() {
                return Err(DescriptorError::DimensionMismatch {
                    expected: labels.len(),
                    found: values.len(),
                });
            }
            data.extend(values);
            n += 1;
        }
        let rows = Array2::from_shape_vec((n, labels.len()), data).expect("shape checked");
        DescriptorMatrix::new(rows, labels, kind)
    }
}

/// Settings for the simple-descriptor block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdSettings {
    pub species_universe: Vec<u32>,
    pub cc_bond_cut: f64,
}

/// Molecular SOAP rows (optionally with the simple descriptors appended),
/// computed in parallel with rows in input order.
pub fn featurize<'a, I>(
    molecules: I,
    soap: &SoapCalculator,
    sd: Option<&SdSettings>,
) -> Result<DescriptorMatrix, DescriptorError>
where
    I: IntoIterator<Item = &'a Molecule>,
{
    let mols: Vec<&Molecule> = molecules.into_iter().collect();
    let rows: Vec<Vec<f64>> = mols
        .par_iter()
        .map(|m| {
            let mut v = soap.molecular(m)?;
            if let Some(sd) = sd {
                v.extend(simple_descriptors(m, &sd.species_universe, sd.cc_bond_cut));
            }
            Ok(v)
        })
        .collect::<Result<_, DescriptorError>>()?;
    let mut labels = soap.params().column_labels();
    let kind = match sd {
        Some(sd) => {
            labels.extend(simple_descriptor_labels(&sd.species_universe));
            DescriptorKind::SoapSd
        }
        None => DescriptorKind::SoapMolecular,
    };
    let d = labels.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let rows = Array2::from_shape_vec((mols.len(), d), flat).expect("consistent row width");
    DescriptorMatrix::new(rows, labels, kind)
}
