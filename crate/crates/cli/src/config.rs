//! Experiment configuration file (TOML). Unknown keys are rejected and every
//! section is validated when the file is loaded.

use std::path::{Path, PathBuf};

use molt_core::chemdata::{SplitSpec, Unit};
use molt_core::descriptors::SoapParams;
use molt_core::gboost::GboostConfig;
use molt_core::krr::DEFAULT_ALPHA;
use molt_core::nets::{Activation, PainnConfig};
use molt_core::trainer::TrainConfig;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream (splits, initialization, shuffling, dropout, subsets).
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub data: Option<DataSection>,
    #[serde(default)]
    pub split: SplitSection,
    pub soap: Option<SoapParams>,
    #[serde(default)]
    pub descriptor: DescriptorSection,
    #[serde(default)]
    pub krr: KrrSection,
    #[serde(default)]
    pub gboost: GboostConfig,
    #[serde(default)]
    pub mlp: MlpSection,
    #[serde(default)]
    pub painn: PainnConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Number of seeds for neural-network runs.
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    pub pretrain: Option<PretrainSection>,
    pub finetune: Option<FinetuneSection>,
    pub curve: Option<CurveSection>,
    pub calibrate: Option<CalibrateSection>,
    #[serde(default)]
    pub filter: FilterSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_runs() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Directory holding `<id>.xyz` files; only `calibrate` can do without it.
    pub structures: Option<PathBuf>,
    /// `id,label` CSV.
    pub labels: PathBuf,
    #[serde(default = "default_unit")]
    pub unit: String,
}

fn default_unit() -> String {
    "dimensionless".into()
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum FeatureKind {
    #[serde(rename = "soap")]
    Soap,
    #[serde(rename = "soap+sd")]
    SoapSd,
    #[serde(rename = "pca")]
    Pca,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescriptorSection {
    pub kind: FeatureKind,
    /// Variance fraction kept by PCA.
    pub pca_retained: f64,
    /// C–C bond length cut for the simple descriptors (Å).
    pub cc_bond_cut: f64,
}

impl Default for DescriptorSection {
    fn default() -> Self {
        DescriptorSection {
            kind: FeatureKind::Soap,
            pca_retained: 0.99,
            cc_bond_cut: molt_core::descriptors::DEFAULT_CC_BOND_CUT,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KrrSection {
    pub alpha: f64,
}

impl Default for KrrSection {
    fn default() -> Self {
        KrrSection {
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// MLP settings; the input width comes from the descriptors.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpSection {
    pub n_layers: usize,
    pub dropout_p: f64,
    pub activation: Activation,
    /// Replaces `train.lr` for MLP runs.
    pub lr: f64,
}

impl Default for MlpSection {
    fn default() -> Self {
        let d = molt_core::nets::MlpConfig::new(1);
        MlpSection {
            n_layers: d.n_layers,
            dropout_p: d.dropout_p,
            activation: d.activation,
            lr: d.lr,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainSection {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    #[serde(default = "default_pretrain_seeds")]
    pub n_seeds: usize,
    #[serde(default = "default_pretrain_epochs")]
    pub epochs: usize,
}

fn default_pretrain_seeds() -> usize {
    3
}

fn default_pretrain_epochs() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneSection {
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub discriminative: bool,
    #[serde(default = "default_factor")]
    pub factor: f64,
}

fn default_factor() -> f64 {
    molt_core::transfer::DEFAULT_FACTOR
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Scratch,
    Finetune,
}

impl Arm {
    pub fn name(self) -> &'static str {
        match self {
            Arm::Scratch => "scratch",
            Arm::Finetune => "finetune",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Vary the number of fine-tuning examples.
    Finetune,
    /// Vary the size of the pre-training corpus (a fresh pre-training per size).
    Pretrain,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    pub sizes: Vec<usize>,
    #[serde(default = "default_arms")]
    pub arms: Vec<Arm>,
    #[serde(default = "default_axis")]
    pub axis: Axis,
    /// Pre-training corpus for the `pretrain` axis.
    pub pretrain_data: Option<DataSection>,
}

fn default_arms() -> Vec<Arm> {
    vec![Arm::Scratch]
}

fn default_axis() -> Axis {
    Axis::Finetune
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    /// `id,label` CSV of cheap labels; the reference labels are `data.labels`.
    pub cheap_labels: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    /// Comma-separated element symbols, e.g. "As,Se,Br,Te,I".
    pub forbidden: String,
    pub required: String,
}

impl ExperimentConfig {
    /// Parses and validates `path`. Relative paths inside the file are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        let fix_data = |d: &mut DataSection| {
            if let Some(s) = d.structures.as_mut() {
                fix(s);
            }
            fix(&mut d.labels);
        };
        if let Some(d) = self.data.as_mut() {
            fix_data(d);
        }
        if let Some(d) = self.curve.as_mut().and_then(|c| c.pretrain_data.as_mut()) {
            fix_data(d);
        }
        if let Some(p) = self.finetune.as_mut().and_then(|f| f.checkpoint.as_mut()) {
            fix(p);
        }
        if let Some(c) = self.calibrate.as_mut() {
            fix(&mut c.cheap_labels);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(d) = &self.data {
            d.unit()?;
        }
        self.split_spec()?;
        if let Some(s) = &self.soap {
            s.validate()
                .map_err(|e| CliError::Config(format!("[soap] {e}")))?;
        }
        let d = &self.descriptor;
        if !(d.pca_retained > 0.0 && d.pca_retained <= 1.0) {
            return bad(format!(
                "[descriptor] pca_retained must be in (0, 1], got {}",
                d.pca_retained
            ));
        }
        if !(d.cc_bond_cut > 0.0) {
            return bad("[descriptor] cc_bond_cut must be positive".into());
        }
        if !(self.krr.alpha >= 0.0 && self.krr.alpha.is_finite()) {
            return bad(format!(
                "[krr] alpha must be finite and >= 0, got {}",
                self.krr.alpha
            ));
        }
        self.gboost
            .validate()
            .map_err(|e| CliError::Config(format!("[gboost] {e}")))?;
        let mlp = molt_core::nets::MlpConfig {
            input_dim: 1,
            n_layers: self.mlp.n_layers,
            dropout_p: self.mlp.dropout_p,
            activation: self.mlp.activation,
            lr: self.mlp.lr,
        };
        mlp.validate()
            .map_err(|e| CliError::Config(format!("[mlp] {e}")))?;
        self.painn
            .validate()
            .map_err(|e| CliError::Config(format!("[painn] {e}")))?;
        self.train
            .validate()
            .map_err(|e| CliError::Config(format!("[train] {e}")))?;
        if self.n_runs == 0 {
            return bad("n_runs must be >= 1".into());
        }
        if let Some(p) = &self.pretrain {
            if p.n_seeds == 0 || p.n_train == 0 || p.n_val == 0 || p.n_test == 0 {
                return bad("[pretrain] counts and n_seeds must all be >= 1".into());
            }
        }
        if let Some(f) = &self.finetune {
            if !(f.factor >= 1.0 && f.factor.is_finite()) {
                return bad(format!("[finetune] factor must be >= 1, got {}", f.factor));
            }
        }
        if let Some(c) = &self.curve {
            c.validate()?;
        }
        molt_core::chemdata::elements::parse_element_list(&self.filter.forbidden)
            .and(molt_core::chemdata::elements::parse_element_list(
                &self.filter.required,
            ))
            .map_err(|e| CliError::Config(format!("[filter] {e}")))?;
        Ok(())
    }

    pub fn split_spec(&self) -> Result<SplitSpec, CliError> {
        let s = self.split;
        SplitSpec::new(s.train, s.val, s.test, self.seed)
            .map_err(|e| CliError::Config(format!("[split] {e}")))
    }

    pub fn data(&self) -> Result<&DataSection, CliError> {
        self.data
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [data] section".into()))
    }

    pub fn soap(&self) -> Result<&SoapParams, CliError> {
        self.soap
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [soap] section".into()))
    }
}

impl CurveSection {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(CliError::Config(
                "[curve] sizes must be a non-empty list of positive integers".into(),
            ));
        }
        if self.arms.is_empty() {
            return Err(CliError::Config("[curve] arms must not be empty".into()));
        }
        if self.axis == Axis::Pretrain && self.pretrain_data.is_none() {
            return Err(CliError::Config(
                "[curve] the pretrain axis needs a pretrain_data section".into(),
            ));
        }
        Ok(())
    }
}

impl DataSection {
    pub fn structures(&self) -> Result<&Path, CliError> {
        self.structures.as_deref().ok_or_else(|| {
            CliError::Config("[data] structures is required for this command".into())
        })
    }

    pub fn unit(&self) -> Result<Unit, CliError> {
        self.unit
            .parse()
            .map_err(|e| CliError::Config(format!("[data] {e}")))
    }
}
