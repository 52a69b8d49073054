use std::fmt;

use molt_core::chemdata::DataError;
use molt_core::descriptors::DescriptorError;
use molt_core::nets::NetError;
use molt_core::trainer::{CheckpointError, TrainError};
use molt_core::transfer::TransferError;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration (exit 2).
    Config(String),
    /// Missing or unreadable inputs (exit 3).
    Data(String),
    /// Training or other runtime failure (exit 4).
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Run(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::FractionSum(_) | DataError::BadFraction(_) | DataError::UnknownUnit(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DescriptorError> for CliError {
    fn from(e: DescriptorError) -> Self {
        match e {
            DescriptorError::InvalidParams(_) => CliError::Config(e.to_string()),
            DescriptorError::UndeclaredSpecies(_) | DescriptorError::EmptyMolecule(_) => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::ArchitectureMismatch(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::UnknownElement { .. } => CliError::Data(e.to_string()),
            NetError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Net(n) => n.into(),
            TrainError::InvalidConfig(_) | TrainError::EmptySet(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<TransferError> for CliError {
    fn from(e: TransferError) -> Self {
        match e {
            TransferError::Data(d) => d.into(),
            TransferError::Checkpoint(c) => c.into(),
            TransferError::Train(t) => t.into(),
            TransferError::Net(n) => n.into(),
            TransferError::Architecture(_)
            | TransferError::InvalidSetting(_)
            | TransferError::SizeExceedsPool { .. } => CliError::Config(e.to_string()),
            TransferError::EmptySplit(_) => {
                CliError::Config(format!("{e}; adjust the split fractions or counts"))
            }
            TransferError::LengthMismatch(..)
            | TransferError::ConstantPredictor
            | TransferError::TooFewPoints(_) => CliError::Data(e.to_string()),
            _ => CliError::Run(e.to_string()),
        }
    }
}

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Run(format!("{}: {e}", path.display()))
}
