use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub trace: Vec<EpochRecord>,
    /// 1-based; 0 when no epoch ran.
    pub best_epoch: usize,
    pub test_mae: f64,
    pub test_rmse: f64,
    pub wall_seconds: f64,
}

impl Default for RunReport {
    fn default() -> Self {
        RunReport {
            seed: 0,
            trace: Vec::new(),
            best_epoch: 0,
            test_mae: f64::NAN,
            test_rmse: f64::NAN,
            wall_seconds: 0.0,
        }
    }
}

impl RunReport {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.trace.iter().map(|r| r.val_loss).reduce(f64::min)
    }

    /// `epoch,train_loss,val_loss,lr` rows. Timing is left out so reruns compare equal.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,lr\n");
        for r in &self.trace {
            writeln!(s, "{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.lr).unwrap();
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "seed,epochs,best_epoch,test_mae,test_rmse\n{},{},{},{},{}\n",
            self.seed,
            self.trace.len(),
            self.best_epoch,
            self.test_mae,
            self.test_rmse
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeedReport {
    pub runs: Vec<RunReport>,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
}

impl MultiSeedReport {
    pub fn from_runs(runs: Vec<RunReport>) -> Self {
        let maes: Vec<f64> = runs.iter().map(|r| r.test_mae).collect();
        let rmses: Vec<f64> = runs.iter().map(|r| r.test_rmse).collect();
        let (mae_mean, mae_std) = aggregate(&maes);
        let (rmse_mean, rmse_std) = aggregate(&rmses);
        MultiSeedReport {
            runs,
            mae_mean,
            mae_std,
            rmse_mean,
            rmse_std,
        }
    }

    /// One row per run followed by `mean` and `std` rows.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("run,seed,epochs,best_epoch,test_mae,test_rmse\n");
        for (i, r) in self.runs.iter().enumerate() {
            writeln!(
                s,
                "{i},{},{},{},{},{}",
                r.seed,
                r.trace.len(),
                r.best_epoch,
                r.test_mae,
                r.test_rmse
            )
            .unwrap();
        }
        writeln!(s, "mean,,,,{},{}", self.mae_mean, self.rmse_mean).unwrap();
        writeln!(s, "std,,,,{},{}", self.mae_std, self.rmse_std).unwrap();
        s
    }
}

/// Mean and population standard deviation.
pub fn aggregate(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs `runner` for seeds `seed0 .. seed0 + n_runs`, concurrently on up to
/// `jobs` threads (all cores when `None`). Results are joined in seed order,
/// and the first failing seed's error is returned.
pub fn multi_seed<E, F>(
    seed0: u64,
    n_runs: usize,
    jobs: Option<usize>,
    runner: F,
) -> Result<MultiSeedReport, E>
where
    E: Send,
    F: Fn(u64) -> Result<RunReport, E> + Sync,
{
    let seeds: Vec<u64> = (0..n_runs as u64).map(|i| seed0 + i).collect();
    let results: Vec<Result<RunReport, E>> =
        run_pool(jobs, || seeds.par_iter().map(|&s| runner(s)).collect());
    let runs = results.into_iter().collect::<Result<Vec<_>, E>>()?;
    Ok(MultiSeedReport::from_runs(runs))
}

/// Executes `f` on a pool of `jobs` threads, or inline for `Some(1)`.
pub fn run_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match jobs {
        Some(n) if n >= 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}
