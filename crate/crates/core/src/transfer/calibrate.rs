use serde::{Deserialize, Serialize};

use super::TransferError;

/// y_true ≈ a·y_cheap + b by ordinary least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub a: f64,
    pub b: f64,
    /// MAE of the calibrated cheap labels, in the units of `y_true`.
    pub fit_mae: f64,
}

impl CalibrationFit {
    pub fn apply(&self, y_cheap: f64) -> f64 {
        self.a * y_cheap + self.b
    }
}

pub fn linear_calibrate(y_cheap: &[f64], y_true: &[f64]) -> Result<CalibrationFit, TransferError> {
    if y_cheap.len() != y_true.len() {
        return Err(TransferError::LengthMismatch(y_cheap.len(), y_true.len()));
    }
    if y_cheap.len() < 2 {
        return Err(TransferError::TooFewPoints(y_cheap.len()));
    }
    let n = y_cheap.len() as f64;
    let mx = y_cheap.iter().sum::<f64>() / n;
    let my = y_true.iter().sum::<f64>() / n;
    let sxx: f64 = y_cheap.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(TransferError::ConstantPredictor);
    }
    let sxy: f64 = y_cheap
        .iter()
        .zip(y_true)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let fit_mae = y_cheap
        .iter()
        .zip(y_true)
        .map(|(x, y)| (a * x + b - y).abs())
        .sum::<f64>()
        / n;
    Ok(CalibrationFit { a, b, fit_mae })
}
