//! Label alignment, cheap-label calibration, pre-training, fine-tuning and learning curves.

mod calibrate;
mod curve;
mod discriminative;
mod pipeline;
mod scaler;
pub mod synthetic;

pub use calibrate::{linear_calibrate, CalibrationFit};
pub use curve::{curve_csv, curve_svg, learning_curve, nested_subset, CurvePoint};
pub use discriminative::{
    assign_discriminative_lrs, discriminative_multipliers, DEFAULT_BASE_LR, DEFAULT_FACTOR,
};
pub use pipeline::{
    finetune, finetune_multi_seed, fit_and_evaluate, painn_from_checkpoint, predict_original,
    pretrain, pretrain_on_splits, select_best, test_metrics, train_from_scratch, FinetuneOutcome,
    PretrainOutcome, PretrainSpec,
};
pub use scaler::{LabelScaler, ScalerError};

use crate::chemdata::DataError;
use crate::nets::NetError;
use crate::trainer::{CheckpointError, MetricError, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum TransferError {
    #[error(transparent)]
    Scaler(#[from] ScalerError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0} cheap labels but {1} reference labels")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("cheap labels are constant; calibration is undefined")]
    ConstantPredictor,
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("requested training size {size} exceeds the pool of {pool}")]
    SizeExceedsPool { size: usize, pool: usize },
    #[error("architecture mismatch: {0}")]
    Architecture(String),
    #[error("{0}")]
    InvalidSetting(String),
}
