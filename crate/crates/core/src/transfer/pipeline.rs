use serde::{Deserialize, Serialize};

use super::discriminative::discriminative_multipliers;
use super::{LabelScaler, TransferError};
use crate::chemdata::{split_by_counts, LabeledDataset, Splits};
use crate::nets::{Network, Painn, PainnConfig};
use crate::trainer::{
    mae, multi_seed, rmse, train, LrMultipliers, ModelCheckpoint, Provenance, RunReport, Samples,
    TrainConfig,
};

/// Eval batch size for predictions; has no effect on results.
const PREDICT_BATCH: usize = 32;

/// Trains `model` on z-scored labels and fills the report's test metrics
/// in original units.
pub fn fit_and_evaluate(
    model: &mut Painn,
    splits: &Splits,
    scaler: &LabelScaler,
    config: &TrainConfig,
    multipliers: &LrMultipliers,
) -> Result<RunReport, TransferError> {
    let z = |ds: &LabeledDataset| scaler.apply_all(&ds.labels());
    let train_set = Samples::new(splits.train.molecules().collect(), z(&splits.train))?;
    let val_set = Samples::new(splits.val.molecules().collect(), z(&splits.val))?;
    let mut report = train(model, &train_set, &val_set, config, multipliers)?;
    let (mae_v, rmse_v) = test_metrics(model, &splits.test, scaler)?;
    report.test_mae = mae_v;
    report.test_rmse = rmse_v;
    Ok(report)
}

/// Predictions in original label units.
pub fn predict_original(
    model: &mut Painn,
    ds: &LabeledDataset,
    scaler: &LabelScaler,
) -> Result<Vec<f64>, TransferError> {
    let inputs: Vec<_> = ds.molecules().collect();
    Ok(scaler.invert_all(&model.predict(&inputs, PREDICT_BATCH)?))
}

pub fn test_metrics(
    model: &mut Painn,
    test: &LabeledDataset,
    scaler: &LabelScaler,
) -> Result<(f64, f64), TransferError> {
    if test.is_empty() {
        return Err(TransferError::EmptySplit("test"));
    }
    let pred = predict_original(model, test, scaler)?;
    let truth = test.labels();
    Ok((mae(&pred, &truth)?, rmse(&pred, &truth)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Seed of the single split shared by all runs.
    pub split_seed: u64,
    pub n_seeds: usize,
    /// First model seed; runs use `seed0 .. seed0 + n_seeds`.
    pub seed0: u64,
    pub epochs: usize,
}

pub struct PretrainOutcome {
    pub model: Painn,
    pub checkpoint: ModelCheckpoint,
    pub scaler: LabelScaler,
    pub runs: Vec<RunReport>,
    pub selected: usize,
}

/// Index of the smallest value; the earliest wins ties.
pub fn select_best(test_maes: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in test_maes.iter().enumerate() {
        if best.is_none_or(|b| v < test_maes[b]) {
            best = Some(i);
        }
    }
    best
}

/// Trains `n_seeds` models on one split of the cheaply labeled corpus and
/// keeps the one with the lowest test-subset MAE.
pub fn pretrain(
    corpus: &LabeledDataset,
    model_config: &PainnConfig,
    train_config: &TrainConfig,
    spec: &PretrainSpec,
    jobs: Option<usize>,
) -> Result<PretrainOutcome, TransferError> {
    let splits = split_by_counts(
        corpus,
        spec.n_train,
        spec.n_val,
        spec.n_test,
        spec.split_seed,
    )?;
    pretrain_on_splits(
        &splits,
        &corpus.content_hash(),
        model_config,
        train_config,
        spec,
        jobs,
    )
}

/// [`pretrain`] on an existing split; `spec`'s counts and split seed are ignored.
pub fn pretrain_on_splits(
    splits: &Splits,
    dataset_hash: &str,
    model_config: &PainnConfig,
    train_config: &TrainConfig,
    spec: &PretrainSpec,
    jobs: Option<usize>,
) -> Result<PretrainOutcome, TransferError> {
    if spec.n_seeds == 0 {
        return Err(TransferError::InvalidSetting("n_seeds must be >= 1".into()));
    }
    check_splits(splits)?;
    let unit = splits.train.unit.as_str();
    let scaler = LabelScaler::fit(&splits.train.labels())?.with_unit(unit);
    let runner = |seed: u64| -> Result<(RunReport, Painn), TransferError> {
        let mut model = Painn::new(model_config.clone(), seed)?;
        let cfg = TrainConfig {
            seed,
            max_epochs: spec.epochs,
            ..train_config.clone()
        };
        let report = fit_and_evaluate(&mut model, splits, &scaler, &cfg, &LrMultipliers::new())?;
        Ok((report, model))
    };
    let seeds: Vec<u64> = (0..spec.n_seeds as u64).map(|i| spec.seed0 + i).collect();
    let results: Vec<Result<(RunReport, Painn), TransferError>> =
        crate::trainer::run_pool(jobs, || {
            use rayon::prelude::*;
            seeds.par_iter().map(|&s| runner(s)).collect()
        });
    let mut runs = Vec::new();
    let mut models = Vec::new();
    for r in results {
        let (report, model) = r?;
        runs.push(report);
        models.push(model);
    }
    let maes: Vec<f64> = runs.iter().map(|r| r.test_mae).collect();
    let selected = select_best(&maes).expect("at least one run");
    let model = models.swap_remove(selected);
    let provenance = Provenance {
        seed: runs[selected].seed,
        epochs: runs[selected].trace.len(),
        dataset_hash: dataset_hash.to_string(),
        unit: unit.to_string(),
    };
    let checkpoint = ModelCheckpoint::new(&model.architecture(), scaler.clone(), provenance)
        .with_params(&model.params);
    Ok(PretrainOutcome {
        model,
        checkpoint,
        scaler,
        runs,
        selected,
    })
}

/// Rebuilds a PaiNN from a checkpoint, optionally requiring a given architecture.
pub fn painn_from_checkpoint(
    checkpoint: &ModelCheckpoint,
    expected: Option<&PainnConfig>,
) -> Result<Painn, TransferError> {
    let arch = checkpoint.architecture_json()?;
    if arch.get("model").and_then(|m| m.as_str()) != Some("painn") {
        return Err(TransferError::Architecture(format!(
            "checkpoint holds a {:?} model, not painn",
            arch.get("model")
        )));
    }
    let config: PainnConfig = serde_json::from_value(arch["config"].clone())
        .map_err(|e| TransferError::Architecture(format!("unreadable painn settings: {e}")))?;
    if let Some(exp) = expected {
        if exp != &config {
            return Err(TransferError::Architecture(format!(
                "checkpoint was built with {config:?}, expected {exp:?}"
            )));
        }
    }
    let mut model = Painn::new(config, 0)?;
    checkpoint.load_params(&mut model.params)?;
    Ok(model)
}

pub struct FinetuneOutcome {
    pub model: Painn,
    pub scaler: LabelScaler,
    pub report: RunReport,
}

/// Re-trains every pre-trained weight on the target data. Labels are
/// z-scored with a scaler fit on the fine-tuning training split only.
pub fn finetune(
    checkpoint: &ModelCheckpoint,
    splits: &Splits,
    train_config: &TrainConfig,
    discriminative: bool,
    factor: f64,
) -> Result<FinetuneOutcome, TransferError> {
    let mut model = painn_from_checkpoint(checkpoint, None)?;
    check_splits(splits)?;
    let scaler = LabelScaler::fit(&splits.train.labels())?.with_unit(splits.train.unit.as_str());
    let multipliers = if discriminative {
        discriminative_multipliers(&model, train_config.lr, factor)
    } else {
        LrMultipliers::new()
    };
    let report = fit_and_evaluate(&mut model, splits, &scaler, train_config, &multipliers)?;
    Ok(FinetuneOutcome {
        model,
        scaler,
        report,
    })
}

/// Same protocol as [`finetune`] starting from a fresh initialization.
pub fn train_from_scratch(
    model_config: &PainnConfig,
    splits: &Splits,
    train_config: &TrainConfig,
    init_seed: u64,
) -> Result<FinetuneOutcome, TransferError> {
    check_splits(splits)?;
    let mut model = Painn::new(model_config.clone(), init_seed)?;
    let scaler = LabelScaler::fit(&splits.train.labels())?.with_unit(splits.train.unit.as_str());
    let report = fit_and_evaluate(
        &mut model,
        splits,
        &scaler,
        train_config,
        &LrMultipliers::new(),
    )?;
    Ok(FinetuneOutcome {
        model,
        scaler,
        report,
    })
}

fn check_splits(splits: &Splits) -> Result<(), TransferError> {
    for (name, ds) in [
        ("train", &splits.train),
        ("validation", &splits.val),
        ("test", &splits.test),
    ] {
        if ds.is_empty() {
            return Err(TransferError::EmptySplit(name));
        }
    }
    Ok(())
}

/// Five-run (or `n_runs`) fine-tuning summary with model seeds `seed0..`.
pub fn finetune_multi_seed(
    checkpoint: &ModelCheckpoint,
    splits: &Splits,
    train_config: &TrainConfig,
    discriminative: bool,
    factor: f64,
    seed0: u64,
    n_runs: usize,
    jobs: Option<usize>,
) -> Result<crate::trainer::MultiSeedReport, TransferError> {
    multi_seed(seed0, n_runs, jobs, |seed| {
        let cfg = TrainConfig {
            seed,
            ..train_config.clone()
        };
        finetune(checkpoint, splits, &cfg, discriminative, factor).map(|o| o.report)
    })
}
