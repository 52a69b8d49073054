//! Structure and label ingestion, deterministic splits and element filters.

pub mod dataset;
pub mod elements;
pub mod molecule;
pub mod synthetic;
pub mod xyz;

pub use dataset::{
    filter_by_elements, load_dataset, read_labels, read_xyz_file, split_by_counts, split_dataset,
    write_labels, DataError, Entry, LabeledDataset, SplitSpec, Splits, Unit,
};
pub use molecule::{Molecule, MoleculeError};
pub use xyz::{parse_xyz, write_xyz, XyzError};
