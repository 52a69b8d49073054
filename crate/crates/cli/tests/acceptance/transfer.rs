//! Desk-scale transfer experiment on synthetic labels.
//!
//! 512 pre-training molecules carry the reference property f; 32 target
//! molecules carry 1.8·f − 0.4 plus Gaussian noise of 5 % of std(f). The
//! selected pre-trained model is fine-tuned on 16 target molecules and
//! compared with training from scratch on the same 16, for five split seeds.

use molt_core::chemdata::split_by_counts;
use molt_core::nets::PainnConfig;
use molt_core::trainer::TrainConfig;
use molt_core::transfer::synthetic::transfer_fixture;
use molt_core::transfer::{finetune, pretrain, train_from_scratch, PretrainSpec};

use crate::{ensure, Outcome};

/// Pinned after the first verified run: 5 of 5 seeds won there.
const MIN_WINS: usize = 4;
const FINE_SEEDS: u64 = 5;

pub fn run() -> Outcome {
    let fx = transfer_fixture(7, 512, 32, 1.8, -0.4, 0.05);
    let model = PainnConfig {
        r_cut: 4.0,
        n_rbf: 12,
        n_atom_basis: 16,
        n_interactions: 2,
        ..PainnConfig::default()
    };
    let spec = PretrainSpec {
        n_train: 448,
        n_val: 32,
        n_test: 32,
        split_seed: 1,
        n_seeds: 3,
        seed0: 0,
        epochs: 40,
    };
    let pre_cfg = TrainConfig {
        lr: 2e-3,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let pre = pretrain(&fx.pretrain, &model, &pre_cfg, &spec, None).map_err(|e| e.to_string())?;
    let pre_maes: Vec<f64> = pre.runs.iter().map(|r| r.test_mae).collect();
    ensure(
        pre_maes.iter().all(|&m| pre_maes[pre.selected] <= m),
        || {
            format!(
                "selected run {} is not the best of {pre_maes:?}",
                pre.selected
            )
        },
    )?;

    let mut wins = 0;
    let mut pairs = Vec::new();
    for s in 0..FINE_SEEDS {
        let splits =
            split_by_counts(&fx.finetune, 16, 4, 12, 100 + s).map_err(|e| e.to_string())?;
        let cfg = TrainConfig {
            seed: s,
            lr: 5e-4,
            batch_size: 4,
            max_epochs: 100,
            ..TrainConfig::default()
        };
        let tuned =
            finetune(&pre.checkpoint, &splits, &cfg, false, 5.0).map_err(|e| e.to_string())?;
        let scratch_cfg = TrainConfig { lr: 2e-3, ..cfg };
        let scratch =
            train_from_scratch(&model, &splits, &scratch_cfg, s).map_err(|e| e.to_string())?;
        let (a, b) = (tuned.report.test_mae, scratch.report.test_mae);
        if a < b {
            wins += 1;
        }
        pairs.push(format!("{a:.3}/{b:.3}"));
    }
    let detail = format!(
        "fine-tuned beat scratch on {wins}/{FINE_SEEDS} seeds (test MAE fine-tuned/scratch: {}; \
         pre-training MAEs {:.3?}, noise sd {:.3})",
        pairs.join(" "),
        pre_maes,
        fx.noise_sd
    );
    ensure(wins >= MIN_WINS, || detail.clone())?;
    Ok(detail)
}
