use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use super::{dense, init_linear, NetError, Network};
use crate::rng::{stream, Stream};
use crate::tensor::{batch_norm, batch_norm_init, dropout, ParamStore, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Swish,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub input_dim: usize,
    #[serde(default = "default_layers")]
    pub n_layers: usize,
    #[serde(default = "default_dropout")]
    pub dropout_p: f64,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_lr")]
    pub lr: f64,
}

fn default_layers() -> usize {
    2
}
fn default_dropout() -> f64 {
    0.3
}
fn default_activation() -> Activation {
    Activation::Swish
}
fn default_lr() -> f64 {
    0.0086
}

impl MlpConfig {
    pub fn new(input_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            n_layers: 2,
            dropout_p: 0.3,
            activation: Activation::Swish,
            lr: 0.0086,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_dim == 0 {
            return Err(NetError::InvalidConfig("input_dim must be >= 1".into()));
        }
        if self.n_layers == 0 {
            return Err(NetError::InvalidConfig("n_layers must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(NetError::InvalidConfig(format!(
                "dropout_p = {} outside [0, 1)",
                self.dropout_p
            )));
        }
        if !(self.lr > 0.0) {
            return Err(NetError::InvalidConfig("lr must be positive".into()));
        }
        Ok(())
    }
}

/// Widths of the hidden layers: input_dim halved once per layer, floored at 8.
pub fn hidden_widths(input_dim: usize, n_layers: usize) -> Vec<usize> {
    (1..=n_layers)
        .map(|i| (input_dim >> i.min(63)).max(8))
        .collect()
}

/// Dense → batch norm → swish per hidden layer, dropout after the first, linear output.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub config: MlpConfig,
    pub params: ParamStore,
}

impl Mlp {
    pub fn new(config: MlpConfig, seed: u64) -> Result<Self, NetError> {
        config.validate()?;
        let mut rng = stream(seed, "mlp-init", 0);
        let mut params = ParamStore::new();
        let mut fan_in = config.input_dim;
        for (i, w) in hidden_widths(config.input_dim, config.n_layers)
            .into_iter()
            .enumerate()
        {
            init_linear(
                &mut params,
                &format!("layers.{i}.linear"),
                fan_in,
                w,
                true,
                &mut rng,
            );
            batch_norm_init(&mut params, &format!("layers.{i}.bn"), w);
            fan_in = w;
        }
        init_linear(&mut params, "output", fan_in, 1, true, &mut rng);
        Ok(Mlp { config, params })
    }
}

impl Network for Mlp {
    type Input = Vec<f64>;

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn forward<'t>(
        &mut self,
        tape: &'t Tape,
        batch: &[&Vec<f64>],
        train: bool,
        rng: &mut Stream,
    ) -> Result<Var<'t>, NetError> {
        if batch.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        let d = self.config.input_dim;
        if let Some(bad) = batch.iter().find(|r| r.len() != d) {
            return Err(NetError::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let flat: Vec<f64> = batch.iter().flat_map(|r| r.iter().copied()).collect();
        let mut h = tape.constant(
            ArrayD::from_shape_vec(IxDyn(&[batch.len(), d]), flat).expect("row lengths checked"),
        );
        for i in 0..self.config.n_layers {
            h = dense(tape, &self.params, &format!("layers.{i}.linear"), h)?;
            h = batch_norm(tape, h, &mut self.params, &format!("layers.{i}.bn"), train)?;
            h = h.swish();
            if i == 0 {
                h = dropout(h, self.config.dropout_p, train, rng)?;
            }
        }
        let y = dense(tape, &self.params, "output", h)?;
        Ok(y.reshape(&[batch.len()])?)
    }

    fn architecture(&self) -> serde_json::Value {
        serde_json::json!({ "model": "mlp", "config": self.config })
    }

    fn layer_groups(&self) -> Vec<(String, Vec<String>)> {
        let mut groups: Vec<(String, Vec<String>)> = (0..self.config.n_layers)
            .map(|i| {
                let prefix = format!("layers.{i}.");
                (
                    format!("layers.{i}"),
                    self.params
                        .names()
                        .filter(|n| n.starts_with(&prefix))
                        .map(String::from)
                        .collect(),
                )
            })
            .collect();
        groups.push((
            "output".into(),
            vec!["output.bias".into(), "output.weight".into()],
        ));
        groups
    }
}
