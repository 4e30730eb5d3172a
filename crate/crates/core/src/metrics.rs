//! Squared-error metrics shared by training reports and experiments.

use crate::error::{Error, Result};
use crate::math;
use crate::Regressor;

/// `Σ (y_i − F_i)²`.
pub fn sum_squared_error(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    if targets.len() != predictions.len() {
        return Err(Error::Arity { expected: targets.len(), got: predictions.len() });
    }
    Ok(targets.iter().zip(predictions).map(|(y, f)| (y - f) * (y - f)).sum())
}

pub fn mse(targets: &[f64], predictions: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::Empty);
    }
    Ok(sum_squared_error(targets, predictions)? / targets.len() as f64)
}

/// Mean squared error of `model` over a dataset.
pub fn model_mse<M: Regressor + ?Sized>(model: &M, data: &crate::Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty);
    }
    let mut sse = 0.0;
    for (x, y) in data.features.rows().zip(&data.targets) {
        let e = y - model.predict(x)?;
        sse += e * e;
    }
    Ok(sse / data.len() as f64)
}

/// Sample mean and standard error of the mean (zero for a single value).
pub fn mean_and_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, math::sqrt(var / n)))
}
