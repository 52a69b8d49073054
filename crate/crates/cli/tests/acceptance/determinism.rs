use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use molt_core::chemdata::{write_labels, write_xyz, Molecule};
use molt_core::trainer::{multi_seed, RunReport};
use molt_core::transfer::synthetic::transfer_fixture;

use crate::{ensure, Outcome};

const SOAP: &str = "[soap]\nr_cut = 3.5\nn_max = 3\nl_max = 2\nsigma = 0.5\nspecies = [1, 6, 8]\n";
const PAINN: &str = "[painn]\nr_cut = 4.0\nn_rbf = 6\nn_atom_basis = 6\nn_interactions = 2\n";

fn write_set(dir: &Path, name: &str, n: usize, seed: u64) {
    let fx = transfer_fixture(seed, n, 0, 1.0, 0.0, 0.0);
    let xyz = dir.join(format!("{name}-xyz"));
    std::fs::create_dir_all(&xyz).unwrap();
    let mols: Vec<&Molecule> = fx.pretrain.molecules().collect();
    let mut rows = Vec::new();
    for (m, y) in mols.iter().zip(fx.pretrain.labels()) {
        std::fs::write(xyz.join(format!("{}.xyz", m.id)), write_xyz(m)).unwrap();
        rows.push((m.id.clone(), y));
    }
    write_labels(&dir.join(format!("{name}.csv")), &rows).unwrap();
}

/// Config `<name>.toml` writing to `out-<name>`; `top` holds top-level keys.
fn config(dir: &Path, name: &str, data: &str, top: &str, tables: &str) -> PathBuf {
    let text = format!(
        "seed = 3\noutput_dir = \"out-{name}\"\n{top}[data]\nstructures = \"{data}-xyz\"\n\
         labels = \"{data}.csv\"\n{SOAP}{tables}"
    );
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

fn snapshot(dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return;
    };
    for e in entries {
        let p = e.unwrap().path();
        if p.is_dir() {
            snapshot(&p, out);
        } else {
            out.insert(p.clone(), std::fs::read(&p).unwrap());
        }
    }
}

/// Runs the command twice from a clean output directory and compares
/// stdout, exit status and every file written.
fn twice(dir: &Path, out_dir: &str, args: &[&str]) -> Result<usize, String> {
    let mut results = Vec::new();
    for _ in 0..2 {
        let out = dir.join(out_dir);
        let _ = std::fs::remove_dir_all(&out);
        let o = Command::new(env!("CARGO_BIN_EXE_molt"))
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(o.status.success(), || {
            format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr))
        })?;
        let mut files = BTreeMap::new();
        snapshot(&out, &mut files);
        ensure(!files.is_empty(), || {
            format!("{args:?} wrote nothing to {out_dir}")
        })?;
        results.push((o.stdout, files));
    }
    ensure(results[0] == results[1], || {
        format!("{args:?} differs between runs")
    })?;
    Ok(results[0].1.len())
}

pub fn run() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    write_set(dir, "cheap", 30, 7);
    write_set(dir, "fine", 30, 8);
    let train = "[train]\nmax_epochs = 2\nbatch_size = 4\n";
    let split = "[split]\ntrain = 0.6\nval = 0.2\ntest = 0.2\n";

    let feat = config(dir, "feat", "fine", "", "");
    let sd = config(dir, "sd", "fine", "", "[descriptor]\nkind = \"soap+sd\"\n");
    let pca = config(
        dir,
        "pca",
        "fine",
        "",
        "[descriptor]\nkind = \"pca\"\npca_retained = 0.9\n",
    );
    let models = config(
        dir,
        "models",
        "fine",
        "n_runs = 2\n",
        &format!("{PAINN}{train}{split}[gboost]\nn_estimators = 20\nlearning_rate = 0.1\nmax_depth = 2\n"),
    );
    let pre = config(
        dir,
        "pre",
        "cheap",
        "",
        &format!("{PAINN}{train}[pretrain]\nn_train = 20\nn_val = 5\nn_test = 5\nn_seeds = 2\nepochs = 2\n"),
    );
    let fine = config(
        dir,
        "tune",
        "fine",
        "n_runs = 2\n",
        &format!(
            "{PAINN}{train}{split}[finetune]\ncheckpoint = \"pretrained.mltc\"\n\
             [curve]\nsizes = [4, 8]\narms = [\"scratch\", \"finetune\"]\n"
        ),
    );
    let axis = config(
        dir,
        "axis",
        "fine",
        "n_runs = 1\n",
        &format!(
            "{PAINN}{train}{split}[pretrain]\nn_train = 16\nn_val = 4\nn_test = 4\nn_seeds = 1\nepochs = 1\n\
             [curve]\nsizes = [8, 16]\naxis = \"pretrain\"\n[curve.pretrain_data]\n\
             structures = \"cheap-xyz\"\nlabels = \"cheap.csv\"\n"
        ),
    );
    let filter = config(
        dir,
        "filter",
        "fine",
        "",
        "[filter]\nforbidden = \"Se\"\nrequired = \"O\"\n",
    );
    let cheap_rows: Vec<(String, f64)> = (0..30)
        .map(|i| (format!("pre-{i:04}"), 0.1 * i as f64))
        .collect();
    let truth_rows: Vec<(String, f64)> = cheap_rows
        .iter()
        .map(|(id, y)| (id.clone(), 1.5 * y - 0.2 + (y * 7.0).sin() * 0.01))
        .collect();
    write_labels(&dir.join("cal-cheap.csv"), &cheap_rows).unwrap();
    write_labels(&dir.join("cal-truth.csv"), &truth_rows).unwrap();
    let calibrate = dir.join("cal.toml");
    std::fs::write(
        &calibrate,
        "output_dir = \"out-cal\"\n[data]\nlabels = \"cal-truth.csv\"\n[calibrate]\ncheap_labels = \"cal-cheap.csv\"\n",
    )
    .unwrap();

    let s = |p: &PathBuf| p.to_str().unwrap().to_string();
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("out-feat", vec!["featurize".into(), "-c".into(), s(&feat)]),
        ("out-sd", vec!["featurize".into(), "-c".into(), s(&sd)]),
        ("out-pca", vec!["featurize".into(), "-c".into(), s(&pca)]),
        (
            "out-models",
            vec![
                "train".into(),
                "--model".into(),
                "krr".into(),
                "-c".into(),
                s(&models),
            ],
        ),
        (
            "out-models",
            vec![
                "train".into(),
                "--model".into(),
                "gboost".into(),
                "-c".into(),
                s(&models),
            ],
        ),
        (
            "out-models",
            vec![
                "train".into(),
                "--model".into(),
                "mlp".into(),
                "-c".into(),
                s(&models),
            ],
        ),
        (
            "out-models",
            vec![
                "train".into(),
                "--model".into(),
                "painn".into(),
                "-c".into(),
                s(&models),
            ],
        ),
        ("out-pre", vec!["pretrain".into(), "-c".into(), s(&pre)]),
    ];
    let mut report = Vec::new();
    for (out, args) in &runs {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let n = twice(dir, out, &refs)?;
        report.push(format!("{} {}", refs[0], n));
    }
    // the fine-tuning runs read the checkpoint from a location outside their output
    std::fs::copy(
        dir.join("out-pre/pretrained.mltc"),
        dir.join("pretrained.mltc"),
    )
    .unwrap();
    let later: Vec<(&str, Vec<String>)> = vec![
        ("out-tune", vec!["finetune".into(), "-c".into(), s(&fine)]),
        (
            "out-tune",
            vec![
                "finetune".into(),
                "-c".into(),
                s(&fine),
                "--discriminative".into(),
            ],
        ),
        (
            "out-tune",
            vec!["curve".into(), "-c".into(), s(&fine), "--plot".into()],
        ),
        ("out-axis", vec!["curve".into(), "-c".into(), s(&axis)]),
        (
            "out-cal",
            vec!["calibrate".into(), "-c".into(), s(&calibrate)],
        ),
        ("out-filter", vec!["filter".into(), "-c".into(), s(&filter)]),
    ];
    for (out, args) in &later {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let n = twice(dir, out, &refs)?;
        report.push(format!("{} {}", refs[0], n));
    }

    let stub = multi_seed(0, 5, None, |seed| {
        Ok::<_, String>(RunReport {
            seed,
            test_mae: 0.125,
            test_rmse: 0.25,
            ..RunReport::default()
        })
    })?;
    ensure(stub.mae_std == 0.0 && stub.rmse_std == 0.0, || {
        format!(
            "seed-independent stub has std {} / {}",
            stub.mae_std, stub.rmse_std
        )
    })?;
    Ok(format!(
        "{} command runs byte-identical (files per run: {}); stub std 0",
        runs.len() + later.len(),
        report.join(", ")
    ))
}
