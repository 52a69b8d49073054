use ndarray::{ArrayD, IxDyn};

use super::{dense, init_linear, NetError, Network};
use crate::rng::{stream, Stream};
use crate::tensor::{ParamStore, Tape, Var};

/// y = x·w + b; a baseline and a convenient fixture for the training loop.
#[derive(Debug, Clone)]
pub struct LinearRegressor {
    pub input_dim: usize,
    pub params: ParamStore,
}

impl LinearRegressor {
    pub fn new(input_dim: usize, seed: u64) -> Self {
        let mut params = ParamStore::new();
        init_linear(
            &mut params,
            "linear",
            input_dim,
            1,
            true,
            &mut stream(seed, "linear-init", 0),
        );
        LinearRegressor { input_dim, params }
    }

    pub fn zeroed(input_dim: usize) -> Self {
        let mut m = Self::new(input_dim, 0);
        m.params.get_mut("linear.weight").unwrap().value.fill(0.0);
        m
    }
}

impl Network for LinearRegressor {
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
        _train: bool,
        _rng: &mut Stream,
    ) -> Result<Var<'t>, NetError> {
        if batch.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        if let Some(bad) = batch.iter().find(|r| r.len() != self.input_dim) {
            return Err(NetError::DimensionMismatch {
                expected: self.input_dim,
                found: bad.len(),
            });
        }
        let flat: Vec<f64> = batch.iter().flat_map(|r| r.iter().copied()).collect();
        let x = tape
            .constant(ArrayD::from_shape_vec(IxDyn(&[batch.len(), self.input_dim]), flat).unwrap());
        Ok(dense(tape, &self.params, "linear", x)?.reshape(&[batch.len()])?)
    }

    fn architecture(&self) -> serde_json::Value {
        serde_json::json!({ "model": "linear", "input_dim": self.input_dim })
    }

    fn layer_groups(&self) -> Vec<(String, Vec<String>)> {
        vec![(
            "linear".into(),
            vec!["linear.bias".into(), "linear.weight".into()],
        )]
    }
}
