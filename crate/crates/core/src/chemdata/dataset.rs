use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::molecule::Molecule;
use super::xyz::{self, XyzError};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "eV")]
    ElectronVolt,
    #[serde(rename = "kcal/mol")]
    KcalPerMol,
    #[serde(rename = "dimensionless")]
    Dimensionless,
}

impl Unit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::ElectronVolt => "eV",
            Unit::KcalPerMol => "kcal/mol",
            Unit::Dimensionless => "dimensionless",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "eV" | "ev" => Ok(Unit::ElectronVolt),
            "kcal/mol" => Ok(Unit::KcalPerMol),
            "dimensionless" | "" => Ok(Unit::Dimensionless),
            other => Err(DataError::UnknownUnit(other.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Xyz { path: PathBuf, source: XyzError },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("no structure file for labeled id '{id}' (expected {path})")]
    MissingStructure { id: String, path: PathBuf },
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error("unparseable label '{text}' for id '{id}'")]
    BadLabel { id: String, text: String },
    #[error("unknown unit '{0}' (expected eV, kcal/mol or dimensionless)")]
    UnknownUnit(String),
    #[error("split fractions sum to {0}, which exceeds 1")]
    FractionSum(f64),
    #[error("split fraction {0} is outside [0, 1]")]
    BadFraction(f64),
    #[error("dataset is empty")]
    Empty,
    #[error("split needs {needed} entries but the dataset has {available}")]
    InfeasibleSplit { needed: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub molecule: Molecule,
    pub label: f64,
}

/// Molecules with scalar labels sharing one unit; ids are unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub unit: Unit,
    entries: Vec<Entry>,
}

impl LabeledDataset {
    pub fn new(unit: Unit, entries: Vec<Entry>) -> Result<Self, DataError> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.molecule.id.as_str()) {
                return Err(DataError::DuplicateId(e.molecule.id.clone()));
            }
            if !e.label.is_finite() {
                return Err(DataError::BadLabel {
                    id: e.molecule.id.clone(),
                    text: e.label.to_string(),
                });
            }
        }
        Ok(LabeledDataset { unit, entries })
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn molecules(&self) -> impl Iterator<Item = &Molecule> {
        self.entries.iter().map(|e| &e.molecule)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries
            .iter()
            .map(|e| e.molecule.id.as_str())
            .collect()
    }

    /// Subset by position; indices must be distinct.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            unit: self.unit,
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
        }
    }

    /// Same structures with labels replaced, e.g. by their z-scores.
    pub fn with_labels(&self, labels: &[f64]) -> LabeledDataset {
        assert_eq!(
            labels.len(),
            self.len(),
            "label count must match dataset size"
        );
        LabeledDataset {
            unit: self.unit,
            entries: self
                .entries
                .iter()
                .zip(labels)
                .map(|(e, &label)| Entry {
                    molecule: e.molecule.clone(),
                    label,
                })
                .collect(),
        }
    }

    /// Sorted set of atomic numbers present.
    pub fn species(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self
            .molecules()
            .flat_map(|m| m.atomic_numbers.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    /// SHA-256 over ids, labels and unit; used as checkpoint provenance.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.unit.as_str().as_bytes());
        for e in &self.entries {
            h.update((e.molecule.id.len() as u64).to_le_bytes());
            h.update(e.molecule.id.as_bytes());
            h.update(e.label.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Reads `id,label` rows from a CSV with that exact header.
pub fn read_labels(path: &Path) -> Result<Vec<(String, f64)>, DataError> {
    let csv_err = |message: String| DataError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => DataError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => csv_err(e.to_string()),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "label" {
        return Err(csv_err(format!(
            "expected header 'id,label', found '{}'",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(e.to_string()))?;
        let id = record.get(0).unwrap_or("").to_string();
        let text = record.get(1).unwrap_or("");
        let label = match text.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                return Err(DataError::BadLabel {
                    id,
                    text: text.to_string(),
                })
            }
        };
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateId(id));
        }
        rows.push((id, label));
    }
    Ok(rows)
}

pub fn write_labels(path: &Path, rows: &[(String, f64)]) -> Result<(), DataError> {
    let mut text = String::from("id,label\n");
    for (id, label) in rows {
        text.push_str(&format!("{id},{label}\n"));
    }
    std::fs::write(path, text).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_xyz_file(path: &Path) -> Result<Molecule, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    xyz::parse_xyz(&text).map_err(|source| DataError::Xyz {
        path: path.to_path_buf(),
        source,
    })
}

/// Joins `labels_file` rows with `<structure_dir>/<id>.xyz`, preserving CSV order.
pub fn load_dataset(
    structure_dir: &Path,
    labels_file: &Path,
    unit: Unit,
) -> Result<LabeledDataset, DataError> {
    if !structure_dir.is_dir() {
        return Err(DataError::Io {
            path: structure_dir.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "structure directory not found",
            ),
        });
    }
    let rows = read_labels(labels_file)?;
    let mut entries = Vec::with_capacity(rows.len());
    for (id, label) in rows {
        let path = structure_dir.join(format!("{id}.xyz"));
        if !path.is_file() {
            return Err(DataError::MissingStructure { id, path });
        }
        let mut molecule = read_xyz_file(&path)?;
        molecule.id = id;
        entries.push(Entry { molecule, label });
    }
    LabeledDataset::new(unit, entries)
}

/// Train/validation/test fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self, DataError> {
        let spec = SplitSpec {
            train,
            val,
            test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        for f in [self.train, self.val, self.test] {
            if !(0.0..=1.0).contains(&f) {
                return Err(DataError::BadFraction(f));
            }
        }
        let sum = self.train + self.val + self.test;
        if sum > 1.0 + 1e-12 {
            return Err(DataError::FractionSum(sum));
        }
        Ok(())
    }

    fn covers_everything(&self) -> bool {
        self.train + self.val + self.test >= 1.0 - 1e-12
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: LabeledDataset,
    pub val: LabeledDataset,
    pub test: LabeledDataset,
}

/// Entry positions ordered by id, then shuffled with the split seed. Depends
/// only on the ids, never on the order entries were read in.
fn shuffled_by_id(ds: &LabeledDataset, seed: u64, tag: &str) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by(|&a, &b| ds.entries[a].molecule.id.cmp(&ds.entries[b].molecule.id));
    order.shuffle(&mut rng::stream(seed, tag, 0));
    order
}

/// Seeded uniform split. Validation and test get `floor(f * N)` entries; when
/// the fractions sum to one the training split absorbs the remainder,
/// otherwise it gets `floor(f_train * N)` and the rest is left out.
pub fn split_dataset(ds: &LabeledDataset, spec: &SplitSpec) -> Result<Splits, DataError> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(DataError::Empty);
    }
    let n = ds.len();
    let n_val = (spec.val * n as f64).floor() as usize;
    let n_test = (spec.test * n as f64).floor() as usize;
    let n_train = if spec.covers_everything() {
        n - n_val - n_test
    } else {
        ((spec.train * n as f64).floor() as usize).min(n - n_val - n_test)
    };
    split_by_counts(ds, n_train, n_val, n_test, spec.seed)
}

/// Split with explicit sizes, as used for pre-training corpora.
pub fn split_by_counts(
    ds: &LabeledDataset,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    seed: u64,
) -> Result<Splits, DataError> {
    let needed = n_train + n_val + n_test;
    if needed > ds.len() {
        return Err(DataError::InfeasibleSplit {
            needed,
            available: ds.len(),
        });
    }
    let order = shuffled_by_id(ds, seed, "split");
    let test = ds.subset(&order[..n_test]);
    let val = ds.subset(&order[n_test..n_test + n_val]);
    let train = ds.subset(&order[n_test + n_val..needed]);
    Ok(Splits { train, val, test })
}

/// Keeps molecules with no forbidden element and at least one atom of every
/// required element, in their original order.
pub fn filter_by_elements(
    ds: &LabeledDataset,
    forbidden: &[u32],
    required: &[u32],
) -> LabeledDataset {
    let entries = ds
        .entries
        .iter()
        .filter(|e| {
            let m = &e.molecule;
            !forbidden.iter().any(|&z| m.contains_element(z))
                && required.iter().all(|&z| m.contains_element(z))
        })
        .cloned()
        .collect();
    LabeledDataset {
        unit: ds.unit,
        entries,
    }
}
