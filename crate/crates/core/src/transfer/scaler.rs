use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScalerError {
    #[error("need at least 2 labels to fit a scaler, got {0}")]
    TooFew(usize),
    #[error("zero label variance")]
    ZeroVariance,
    #[error("non-finite label")]
    NonFinite,
}

/// z = (y − mu) / sigma with the population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScaler {
    pub mu: f64,
    pub sigma: f64,
    #[serde(default)]
    pub unit: String,
}

impl LabelScaler {
    pub fn fit(labels: &[f64]) -> Result<Self, ScalerError> {
        if labels.len() < 2 {
            return Err(ScalerError::TooFew(labels.len()));
        }
        if labels.iter().any(|y| !y.is_finite()) {
            return Err(ScalerError::NonFinite);
        }
        let n = labels.len() as f64;
        let mu = labels.iter().sum::<f64>() / n;
        let var = labels.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / n;
        let sigma = var.sqrt();
        if sigma == 0.0 || sigma <= 1e-300 {
            return Err(ScalerError::ZeroVariance);
        }
        Ok(LabelScaler {
            mu,
            sigma,
            unit: String::new(),
        })
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    /// Centering without rescaling.
    pub fn shift_only(mu: f64) -> Self {
        LabelScaler {
            mu,
            sigma: 1.0,
            unit: String::new(),
        }
    }

    pub fn identity() -> Self {
        Self::shift_only(0.0)
    }

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.mu) / self.sigma
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.sigma + self.mu
    }

    pub fn apply_all(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.apply(v)).collect()
    }

    pub fn invert_all(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&v| self.invert(v)).collect()
    }
}
