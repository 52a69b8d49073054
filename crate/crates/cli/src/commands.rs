use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use molt_core::chemdata::elements::parse_element_list;
use molt_core::chemdata::{
    filter_by_elements, load_dataset, read_labels, split_by_counts, split_dataset, write_labels,
    LabeledDataset, Splits,
};
use molt_core::descriptors::{
    featurize, pca_fit, pca_transform, pca_transform_matrix, PcaModel, SdSettings, SoapCalculator,
};
use molt_core::gboost::{gboost_fit, gboost_predict};
use molt_core::krr::{krr_fit, krr_predict};
use molt_core::nets::{Mlp, MlpConfig, Network, Painn};
use molt_core::trainer::{
    gboost_checkpoint, krr_checkpoint, load_checkpoint, mae, pca_checkpoint, rmse, run_pool,
    save_checkpoint, train, LrMultipliers, ModelCheckpoint, MultiSeedReport, Provenance, RunReport,
    Samples, TrainConfig,
};
use molt_core::transfer::{
    curve_csv, curve_svg, finetune, learning_curve, linear_calibrate, painn_from_checkpoint,
    pretrain, pretrain_on_splits, train_from_scratch, LabelScaler, PretrainSpec, TransferError,
};
use ndarray::{concatenate, Array2, Axis as NdAxis};

use crate::config::{Arm, Axis, DataSection, ExperimentConfig, FeatureKind};
use crate::error::{io_error, CliError};

pub struct Context {
    pub cfg: ExperimentConfig,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Krr,
    Gboost,
    Mlp,
    Painn,
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn save(ckpt: &ModelCheckpoint, path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    save_checkpoint(ckpt, path).map_err(|e| CliError::Run(e.to_string()))
}

/// Short decimal form for console output: at most ten decimals, trailing zeros dropped.
pub fn short(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn load(data: &DataSection) -> Result<LabeledDataset, CliError> {
    Ok(load_dataset(
        data.structures()?,
        &data.labels,
        data.unit()?,
    )?)
}

impl Context {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn provenance(&self, seed: u64, epochs: usize, ds: &LabeledDataset) -> Provenance {
        Provenance {
            seed,
            epochs,
            dataset_hash: ds.content_hash(),
            unit: ds.unit.as_str().to_string(),
        }
    }

    fn soap(&self) -> Result<SoapCalculator, CliError> {
        Ok(SoapCalculator::new(self.cfg.soap()?.clone())?)
    }

    fn sd_settings(&self, soap: &SoapCalculator) -> Option<SdSettings> {
        (self.cfg.descriptor.kind == FeatureKind::SoapSd).then(|| SdSettings {
            species_universe: soap.params().species.clone(),
            cc_bond_cut: self.cfg.descriptor.cc_bond_cut,
        })
    }

    fn model_seeds(&self) -> Vec<u64> {
        (0..self.cfg.n_runs as u64)
            .map(|i| self.cfg.seed + i)
            .collect()
    }

    fn write_traces(&self, dir: &str, runs: &[RunReport]) -> Result<(), CliError> {
        for r in runs {
            write_text(
                &self.out(&format!("{dir}/seed-{}.csv", r.seed)),
                &r.trace_csv(),
            )?;
        }
        Ok(())
    }
}

/// Runs `f` for every seed on the job pool and returns the results in seed order.
fn per_seed<T: Send>(
    seeds: &[u64],
    jobs: Option<usize>,
    f: impl Fn(u64) -> Result<T, CliError> + Sync,
) -> Result<Vec<T>, CliError> {
    use rayon::prelude::*;
    run_pool(jobs, || seeds.par_iter().map(|&s| f(s)).collect::<Vec<_>>())
        .into_iter()
        .collect()
}

/// Index of the run with the lowest validation loss; the earliest seed wins ties.
fn best_by_validation(runs: &[RunReport]) -> usize {
    let key = |r: &RunReport| r.best_val_loss().unwrap_or(f64::INFINITY);
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if key(r) < key(&runs[best]) {
            best = i;
        }
    }
    best
}

pub fn featurize_cmd(ctx: &Context) -> Result<(), CliError> {
    let ds = load(ctx.cfg.data()?)?;
    let soap = ctx.soap()?;
    let mut matrix = featurize(ds.molecules(), &soap, ctx.sd_settings(&soap).as_ref())?;
    if ctx.cfg.descriptor.kind == FeatureKind::Pca {
        let model = pca_fit(matrix.rows.view(), ctx.cfg.descriptor.pca_retained)?;
        matrix = pca_transform_matrix(&model, &matrix)?;
        save(
            &pca_checkpoint(&model, ctx.provenance(ctx.cfg.seed, 0, &ds)),
            &ctx.out("pca.mltc"),
        )?;
    }
    let path = ctx.out("descriptors.csv");
    let mut buf = Vec::new();
    matrix.write_csv(&mut buf).map_err(|e| io_error(&path, e))?;
    write_text(&path, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
    println!(
        "wrote {} rows x {} columns to {}",
        matrix.nrows(),
        matrix.ncols(),
        path.display()
    );
    Ok(())
}

struct SplitFeatures {
    train: Array2<f64>,
    val: Array2<f64>,
    test: Array2<f64>,
    pca: Option<PcaModel>,
}

fn split_features(ctx: &Context, splits: &Splits) -> Result<SplitFeatures, CliError> {
    let soap = ctx.soap()?;
    let sd = ctx.sd_settings(&soap);
    let rows = |ds: &LabeledDataset| -> Result<Array2<f64>, CliError> {
        Ok(featurize(ds.molecules(), &soap, sd.as_ref())?.rows)
    };
    let (mut train, mut val, mut test) = (
        rows(&splits.train)?,
        rows(&splits.val)?,
        rows(&splits.test)?,
    );
    let mut pca = None;
    if ctx.cfg.descriptor.kind == FeatureKind::Pca {
        // Fit on the training split only so that no test information leaks in.
        let model = pca_fit(train.view(), ctx.cfg.descriptor.pca_retained)?;
        train = pca_transform(&model, train.view())?;
        val = pca_transform(&model, val.view())?;
        test = pca_transform(&model, test.view())?;
        pca = Some(model);
    }
    Ok(SplitFeatures {
        train,
        val,
        test,
        pca,
    })
}

fn to_rows(x: &Array2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn train_cmd(ctx: &Context, model: ModelKind) -> Result<(), CliError> {
    let ds = load(ctx.cfg.data()?)?;
    let splits = split_dataset(&ds, &ctx.cfg.split_spec()?)?;
    if splits.train.is_empty() || splits.test.is_empty() {
        return Err(CliError::Config(
            "training and test splits must both be non-empty".into(),
        ));
    }
    let test_y = splits.test.labels();
    let summary;
    let checkpoint;
    match model {
        ModelKind::Krr | ModelKind::Gboost => {
            // Deterministic fits have no early stopping, so validation rows are used for fitting.
            let f = split_features(ctx, &splits)?;
            let x = concatenate(NdAxis(0), &[f.train.view(), f.val.view()]).expect("equal widths");
            let y: ndarray::Array1<f64> = splits
                .train
                .labels()
                .into_iter()
                .chain(splits.val.labels())
                .collect();
            let prov = ctx.provenance(ctx.cfg.seed, 0, &ds);
            let pred = if model == ModelKind::Krr {
                let m = krr_fit(x.view(), y.view(), ctx.cfg.krr.alpha)
                    .map_err(|e| CliError::Run(e.to_string()))?;
                checkpoint = krr_checkpoint(&m, prov.clone());
                krr_predict(&m, f.test.view()).map_err(|e| CliError::Run(e.to_string()))?
            } else {
                let m = gboost_fit(x.view(), y.view(), &ctx.cfg.gboost)
                    .map_err(|e| CliError::Run(e.to_string()))?;
                checkpoint = gboost_checkpoint(&m, prov.clone());
                gboost_predict(&m, f.test.view()).map_err(|e| CliError::Run(e.to_string()))?
            };
            if let Some(p) = &f.pca {
                save(&pca_checkpoint(p, prov), &ctx.out("pca.mltc"))?;
            }
            let pred = pred.to_vec();
            let report = RunReport {
                seed: ctx.cfg.seed,
                test_mae: mae(&pred, &test_y).map_err(|e| CliError::Run(e.to_string()))?,
                test_rmse: rmse(&pred, &test_y).map_err(|e| CliError::Run(e.to_string()))?,
                ..RunReport::default()
            };
            summary = MultiSeedReport::from_runs(vec![report]);
        }
        ModelKind::Mlp => {
            let f = split_features(ctx, &splits)?;
            let (train_x, val_x, test_x) = (to_rows(&f.train), to_rows(&f.val), to_rows(&f.test));
            let scaler = LabelScaler::fit(&splits.train.labels())
                .map_err(|e| CliError::Data(e.to_string()))?;
            let train_set = Samples::new(
                train_x.iter().collect(),
                scaler.apply_all(&splits.train.labels()),
            )?;
            let val_set = Samples::new(
                val_x.iter().collect(),
                scaler.apply_all(&splits.val.labels()),
            )?;
            let mcfg = MlpConfig {
                input_dim: f.train.ncols(),
                n_layers: ctx.cfg.mlp.n_layers,
                dropout_p: ctx.cfg.mlp.dropout_p,
                activation: ctx.cfg.mlp.activation,
                lr: ctx.cfg.mlp.lr,
            };
            let test_refs: Vec<&Vec<f64>> = test_x.iter().collect();
            let results = per_seed(&ctx.model_seeds(), ctx.jobs, |seed| {
                let mut net = Mlp::new(mcfg.clone(), seed)?;
                let tcfg = TrainConfig {
                    seed,
                    lr: mcfg.lr,
                    ..ctx.cfg.train.clone()
                };
                let mut report =
                    train(&mut net, &train_set, &val_set, &tcfg, &LrMultipliers::new())?;
                let pred = scaler.invert_all(&net.predict(&test_refs, 64)?);
                report.test_mae = mae(&pred, &test_y).map_err(|e| CliError::Run(e.to_string()))?;
                report.test_rmse =
                    rmse(&pred, &test_y).map_err(|e| CliError::Run(e.to_string()))?;
                Ok((report, net))
            })?;
            let (runs, nets): (Vec<RunReport>, Vec<Mlp>) = results.into_iter().unzip();
            let best = best_by_validation(&runs);
            checkpoint = ModelCheckpoint::new(
                &nets[best].architecture(),
                scaler.with_unit(ds.unit.as_str()),
                ctx.provenance(runs[best].seed, runs[best].trace.len(), &ds),
            )
            .with_params(&nets[best].params);
            if let Some(p) = &f.pca {
                save(
                    &pca_checkpoint(p, ctx.provenance(ctx.cfg.seed, 0, &ds)),
                    &ctx.out("pca.mltc"),
                )?;
            }
            ctx.write_traces("traces", &runs)?;
            summary = MultiSeedReport::from_runs(runs);
        }
        ModelKind::Painn => {
            let scaler = LabelScaler::fit(&splits.train.labels())
                .map_err(|e| CliError::Data(e.to_string()))?
                .with_unit(ds.unit.as_str());
            let results = per_seed(&ctx.model_seeds(), ctx.jobs, |seed| {
                let mut net = Painn::new(ctx.cfg.painn.clone(), seed)?;
                let tcfg = TrainConfig {
                    seed,
                    ..ctx.cfg.train.clone()
                };
                let report = molt_core::transfer::fit_and_evaluate(
                    &mut net,
                    &splits,
                    &scaler,
                    &tcfg,
                    &LrMultipliers::new(),
                )?;
                Ok((report, net))
            })?;
            let (runs, nets): (Vec<RunReport>, Vec<Painn>) = results.into_iter().unzip();
            let best = best_by_validation(&runs);
            checkpoint = ModelCheckpoint::new(
                &nets[best].architecture(),
                scaler,
                ctx.provenance(runs[best].seed, runs[best].trace.len(), &ds),
            )
            .with_params(&nets[best].params);
            ctx.write_traces("traces", &runs)?;
            summary = MultiSeedReport::from_runs(runs);
        }
    }
    write_text(&ctx.out("summary.csv"), &summary.summary_csv())?;
    save(&checkpoint, &ctx.out("model.mltc"))?;
    println!(
        "test MAE {} ± {} ({} run(s)); wrote {}",
        short(summary.mae_mean),
        short(summary.mae_std),
        summary.runs.len(),
        ctx.cfg.output_dir.display()
    );
    Ok(())
}

fn pretrain_spec(ctx: &Context) -> Result<PretrainSpec, CliError> {
    let p = ctx
        .cfg
        .pretrain
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [pretrain] section".into()))?;
    Ok(PretrainSpec {
        n_train: p.n_train,
        n_val: p.n_val,
        n_test: p.n_test,
        split_seed: ctx.cfg.seed,
        n_seeds: p.n_seeds,
        seed0: ctx.cfg.seed,
        epochs: p.epochs,
    })
}

fn runs_csv(runs: &[RunReport], selected: usize) -> String {
    let mut s = String::from("run,seed,epochs,best_epoch,test_mae,test_rmse,selected\n");
    for (i, r) in runs.iter().enumerate() {
        writeln!(
            s,
            "{i},{},{},{},{},{},{}",
            r.seed,
            r.trace.len(),
            r.best_epoch,
            r.test_mae,
            r.test_rmse,
            i == selected
        )
        .unwrap();
    }
    s
}

pub fn pretrain_cmd(ctx: &Context) -> Result<(), CliError> {
    let corpus = load(ctx.cfg.data()?)?;
    let spec = pretrain_spec(ctx)?;
    let out = pretrain(&corpus, &ctx.cfg.painn, &ctx.cfg.train, &spec, ctx.jobs)?;
    write_text(
        &ctx.out("pretrain_runs.csv"),
        &runs_csv(&out.runs, out.selected),
    )?;
    ctx.write_traces("pretrain_traces", &out.runs)?;
    save(&out.checkpoint, &ctx.out("pretrained.mltc"))?;
    let chosen = &out.runs[out.selected];
    println!(
        "selected seed {} with test-subset MAE {}",
        chosen.seed,
        short(chosen.test_mae)
    );
    Ok(())
}

fn finetune_settings(
    ctx: &Context,
    flag_checkpoint: Option<&Path>,
) -> Result<(ModelCheckpoint, bool, f64), CliError> {
    let section = ctx.cfg.finetune.as_ref();
    let path = flag_checkpoint
        .map(Path::to_path_buf)
        .or_else(|| section.and_then(|f| f.checkpoint.clone()))
        .ok_or_else(|| {
            CliError::Config("no checkpoint given ([finetune] checkpoint or --checkpoint)".into())
        })?;
    let ckpt = load_checkpoint(&path)?;
    // The configured architecture must be the one stored in the checkpoint.
    painn_from_checkpoint(&ckpt, Some(&ctx.cfg.painn))?;
    let discriminative = section.is_some_and(|f| f.discriminative);
    let factor = section.map_or(molt_core::transfer::DEFAULT_FACTOR, |f| f.factor);
    Ok((ckpt, discriminative, factor))
}

pub fn finetune_cmd(ctx: &Context, flag_checkpoint: Option<&Path>) -> Result<(), CliError> {
    let ds = load(ctx.cfg.data()?)?;
    let splits = split_dataset(&ds, &ctx.cfg.split_spec()?)?;
    let (ckpt, discriminative, factor) = finetune_settings(ctx, flag_checkpoint)?;
    let results = per_seed(&ctx.model_seeds(), ctx.jobs, |seed| {
        let tcfg = TrainConfig {
            seed,
            ..ctx.cfg.train.clone()
        };
        Ok(finetune(&ckpt, &splits, &tcfg, discriminative, factor)?)
    })?;
    let runs: Vec<RunReport> = results.iter().map(|o| o.report.clone()).collect();
    let best = &results[best_by_validation(&runs)];
    let mut provenance = ctx.provenance(best.report.seed, best.report.trace.len(), &ds);
    provenance.dataset_hash = format!(
        "{}+{}",
        ckpt.provenance.dataset_hash, provenance.dataset_hash
    );
    let out_ckpt =
        ModelCheckpoint::new(&best.model.architecture(), best.scaler.clone(), provenance)
            .with_params(&best.model.params);
    ctx.write_traces("traces", &runs)?;
    let summary = MultiSeedReport::from_runs(runs);
    write_text(&ctx.out("summary.csv"), &summary.summary_csv())?;
    save(&out_ckpt, &ctx.out("finetuned.mltc"))?;
    println!(
        "fine-tuned test MAE {} ± {} over {} run(s)",
        short(summary.mae_mean),
        short(summary.mae_std),
        summary.runs.len()
    );
    Ok(())
}

pub fn curve_cmd(
    ctx: &Context,
    plot: bool,
    flag_checkpoint: Option<&Path>,
) -> Result<(), CliError> {
    let curve = ctx
        .cfg
        .curve
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [curve] section".into()))?;
    let ds = load(ctx.cfg.data()?)?;
    let splits = split_dataset(&ds, &ctx.cfg.split_spec()?)?;
    let n_runs = ctx.cfg.n_runs;
    let seed0 = ctx.cfg.seed;
    let painn = &ctx.cfg.painn;
    let mut series = Vec::new();
    let x_label;
    match curve.axis {
        Axis::Finetune => {
            x_label = "fine-tuning examples";
            let pool = &splits.train;
            let subsplits = |subset: &[usize]| Splits {
                train: pool.subset(subset),
                val: splits.val.clone(),
                test: splits.test.clone(),
            };
            for &arm in &curve.arms {
                let points = match arm {
                    Arm::Scratch => learning_curve(
                        pool.len(),
                        &curve.sizes,
                        n_runs,
                        seed0,
                        ctx.jobs,
                        |subset, seed| {
                            let tcfg = TrainConfig {
                                seed,
                                ..ctx.cfg.train.clone()
                            };
                            Ok(train_from_scratch(painn, &subsplits(subset), &tcfg, seed)?.report)
                        },
                    )?,
                    Arm::Finetune => {
                        let (ckpt, discriminative, factor) =
                            finetune_settings(ctx, flag_checkpoint)?;
                        learning_curve(
                            pool.len(),
                            &curve.sizes,
                            n_runs,
                            seed0,
                            ctx.jobs,
                            |subset, seed| {
                                let tcfg = TrainConfig {
                                    seed,
                                    ..ctx.cfg.train.clone()
                                };
                                Ok(finetune(
                                    &ckpt,
                                    &subsplits(subset),
                                    &tcfg,
                                    discriminative,
                                    factor,
                                )?
                                .report)
                            },
                        )?
                    }
                };
                series.push((arm.name().to_string(), points));
            }
        }
        Axis::Pretrain => {
            x_label = "pre-training examples";
            let corpus = load(curve.pretrain_data.as_ref().expect("validated"))?;
            let spec = pretrain_spec(ctx)?;
            let pre = split_by_counts(
                &corpus,
                spec.n_train,
                spec.n_val,
                spec.n_test,
                spec.split_seed,
            )?;
            let hash = corpus.content_hash();
            let (discriminative, factor) = ctx
                .cfg
                .finetune
                .as_ref()
                .map_or((false, molt_core::transfer::DEFAULT_FACTOR), |f| {
                    (f.discriminative, f.factor)
                });
            let points = learning_curve(
                pre.train.len(),
                &curve.sizes,
                n_runs,
                seed0,
                ctx.jobs,
                |subset, seed| {
                    let pre_splits = Splits {
                        train: pre.train.subset(subset),
                        val: pre.val.clone(),
                        test: pre.test.clone(),
                    };
                    let pspec = PretrainSpec {
                        seed0: seed,
                        ..spec
                    };
                    let outcome = pretrain_on_splits(
                        &pre_splits,
                        &hash,
                        painn,
                        &ctx.cfg.train,
                        &pspec,
                        Some(1),
                    )?;
                    let tcfg = TrainConfig {
                        seed,
                        ..ctx.cfg.train.clone()
                    };
                    Ok::<_, TransferError>(
                        finetune(&outcome.checkpoint, &splits, &tcfg, discriminative, factor)?
                            .report,
                    )
                },
            )?;
            series.push(("finetune".to_string(), points));
        }
    }
    write_text(&ctx.out("curve.csv"), &curve_csv(&series))?;
    if plot {
        write_text(
            &ctx.out("curve.svg"),
            &curve_svg(&series, x_label, &format!("test MAE ({})", ds.unit)),
        )?;
    }
    println!(
        "wrote {} curve point(s) to {}",
        series.iter().map(|s| s.1.len()).sum::<usize>(),
        ctx.out("curve.csv").display()
    );
    Ok(())
}

pub fn calibrate_cmd(ctx: &Context, flag_cheap: Option<&Path>) -> Result<(), CliError> {
    let data = ctx.cfg.data()?;
    let cheap_path = flag_cheap
        .map(Path::to_path_buf)
        .or_else(|| ctx.cfg.calibrate.as_ref().map(|c| c.cheap_labels.clone()))
        .ok_or_else(|| {
            CliError::Config(
                "no cheap labels given ([calibrate] cheap_labels or --cheap-labels)".into(),
            )
        })?;
    let truth = read_labels(&data.labels)?;
    let cheap: std::collections::HashMap<String, f64> =
        read_labels(&cheap_path)?.into_iter().collect();
    let mut x = Vec::with_capacity(truth.len());
    for (id, _) in &truth {
        let v = cheap.get(id).ok_or_else(|| {
            CliError::Data(format!(
                "{}: no cheap label for id '{id}'",
                cheap_path.display()
            ))
        })?;
        x.push(*v);
    }
    let y: Vec<f64> = truth.iter().map(|(_, v)| *v).collect();
    let fit = linear_calibrate(&x, &y)?;
    write_text(
        &ctx.out("calibration.csv"),
        &format!("a,b,fit_mae\n{},{},{}\n", fit.a, fit.b, fit.fit_mae),
    )?;
    let corrected: Vec<(String, f64)> = truth
        .iter()
        .zip(&x)
        .map(|((id, _), &c)| (id.clone(), fit.apply(c)))
        .collect();
    let path = ctx.out("calibrated_labels.csv");
    write_text(&path, "")?;
    write_labels(&path, &corrected)?;
    println!(
        "a = {}, b = {}, mae = {}",
        short(fit.a),
        short(fit.b),
        short(fit.fit_mae)
    );
    Ok(())
}

pub fn filter_cmd(
    ctx: &Context,
    forbidden: Option<&str>,
    required: Option<&str>,
) -> Result<(), CliError> {
    let parse = |s: &str| parse_element_list(s).map_err(CliError::Config);
    let forbidden = parse(forbidden.unwrap_or(&ctx.cfg.filter.forbidden))?;
    let required = parse(required.unwrap_or(&ctx.cfg.filter.required))?;
    let ds = load(ctx.cfg.data()?)?;
    let kept = filter_by_elements(&ds, &forbidden, &required);
    let rows: Vec<(String, f64)> = kept
        .entries()
        .iter()
        .map(|e| (e.molecule.id.clone(), e.label))
        .collect();
    let path = ctx.out("filtered.csv");
    write_text(&path, "")?;
    write_labels(&path, &rows)?;
    println!("kept {} of {} structures", kept.len(), ds.len());
    Ok(())
}
