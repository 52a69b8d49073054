//! Mini-batch training with plateau decay and early stopping, metrics,
//! multi-seed aggregation and the checkpoint container.

mod checkpoint;
mod persist;
mod report;

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{Array1, IxDyn};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::nets::{NetError, Network};
use crate::rng::stream;
use crate::tensor::{adam_step, mse, AdamState, ParamStore, Tape};

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError,
    ModelCheckpoint, NamedTensor, Provenance, TensorData, MAGIC,
};
pub use persist::{
    gboost_checkpoint, gboost_from_checkpoint, krr_checkpoint, krr_from_checkpoint, pca_checkpoint,
    pca_from_checkpoint,
};
pub use report::{aggregate, multi_seed, run_pool, EpochRecord, MultiSeedReport, RunReport};

/// Minimum decrease of the validation loss that counts as progress.
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Mse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub lr_decay_factor: f64,
    pub lr_decay_patience: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-4,
            batch_size: 10,
            max_epochs: 200,
            lr_decay_factor: 0.5,
            lr_decay_patience: 5,
            early_stop_patience: 30,
            seed: 0,
            loss: Loss::Mse,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return bad("lr_decay_factor must be in (0, 1)");
        }
        if self.lr_decay_patience == 0 || self.early_stop_patience == 0 {
            return bad("patiences must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("empty {0} set")]
    EmptySet(&'static str),
    #[error("{inputs} inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("invalid training setting: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("loss became non-finite at epoch {0}")]
    Diverged(usize),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("metrics need at least one value")]
    Empty,
    #[error("{0} predictions but {1} targets")]
    LengthMismatch(usize, usize),
}

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<(), MetricError> {
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    check_lengths(pred, truth)?;
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    check_lengths(pred, truth)?;
    Ok((pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / pred.len() as f64)
        .sqrt())
}

/// Inputs with (already normalized) regression targets.
pub struct Samples<'a, I> {
    pub inputs: Vec<&'a I>,
    pub targets: Vec<f64>,
}

impl<'a, I> Samples<'a, I> {
    pub fn new(inputs: Vec<&'a I>, targets: Vec<f64>) -> Result<Self, TrainError> {
        if inputs.len() != targets.len() {
            return Err(TrainError::LengthMismatch {
                inputs: inputs.len(),
                targets: targets.len(),
            });
        }
        Ok(Samples { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Per-parameter learning-rate multipliers; names not listed use 1.
pub type LrMultipliers = BTreeMap<String, f64>;

/// Mean squared error of eval-mode predictions.
pub fn evaluate_loss<N: Network>(
    model: &mut N,
    data: &Samples<N::Input>,
    batch_size: usize,
) -> Result<f64, TrainError> {
    let pred = model.predict(&data.inputs, batch_size)?;
    Ok(pred
        .iter()
        .zip(&data.targets)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / pred.len() as f64)
}

/// Trains in place and leaves the model at its best-validation parameters.
///
/// The snapshot follows the lowest validation loss seen; only decreases
/// larger than [`IMPROVEMENT_THRESHOLD`] reset the decay and stopping
/// counters.
pub fn train<N: Network>(
    model: &mut N,
    train_set: &Samples<N::Input>,
    val_set: &Samples<N::Input>,
    config: &TrainConfig,
    lr_multipliers: &LrMultipliers,
) -> Result<RunReport, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptySet("training"));
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptySet("validation"));
    }
    let started = Instant::now();
    let mut report = RunReport {
        seed: config.seed,
        ..RunReport::default()
    };
    if config.max_epochs == 0 {
        report.wall_seconds = started.elapsed().as_secs_f64();
        return Ok(report);
    }

    let mut adam = AdamState::new();
    let mut lr = config.lr;
    let mut best_loss = f64::INFINITY;
    let mut best_params: Option<ParamStore> = None;
    let mut reference = f64::INFINITY;
    let mut since_improvement = 0usize;
    let mut since_decay = 0usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0u64;

    for epoch in 1..=config.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut stream(config.seed, "shuffle", epoch as u64));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let inputs: Vec<&N::Input> = chunk.iter().map(|&i| train_set.inputs[i]).collect();
            let targets = Array1::from_iter(chunk.iter().map(|&i| train_set.targets[i]))
                .into_shape_with_order(IxDyn(&[chunk.len()]))
                .unwrap();
            let tape = Tape::new();
            let mut dropout_rng = stream(config.seed, "dropout", step);
            let pred = model.forward(&tape, &inputs, true, &mut dropout_rng)?;
            let loss = mse(pred, tape.constant(targets)).map_err(NetError::from)?;
            let value = loss.item();
            if !value.is_finite() {
                return Err(TrainError::Diverged(epoch));
            }
            loss_sum += value * chunk.len() as f64;
            let grads = tape.backward(loss).map_err(NetError::from)?;
            let params = model.params_mut();
            params.zero_grad();
            grads.accumulate_into(params);
            adam_step(params, &mut adam, |name| {
                lr * lr_multipliers.get(name).copied().unwrap_or(1.0)
            });
            step += 1;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_loss = evaluate_loss(model, val_set, config.batch_size)?;
        if !val_loss.is_finite() {
            return Err(TrainError::Diverged(epoch));
        }
        report.trace.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
        });

        if val_loss < best_loss {
            best_loss = val_loss;
            report.best_epoch = epoch;
            best_params = Some(model.params().clone());
        }
        if val_loss < reference - IMPROVEMENT_THRESHOLD {
            reference = val_loss;
            since_improvement = 0;
            since_decay = 0;
        } else {
            since_improvement += 1;
            since_decay += 1;
            if since_decay >= config.lr_decay_patience {
                lr *= config.lr_decay_factor;
                since_decay = 0;
            }
            if since_improvement >= config.early_stop_patience {
                break;
            }
        }
    }
    if let Some(best) = best_params {
        *model.params_mut() = best;
    }
    report.wall_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}
