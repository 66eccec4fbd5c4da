//! Rolling one-step forecasting.
//!
//! The model is fitted on a training prefix and then walks the test
//! stretch: at each step the MAP tree (refreshed or frozen), the MAP
//! parameters at the current context's leaf, and the conditional mean give
//! the point forecast, after which the realised value is folded in. Each
//! step costs a constant number of node updates plus one pass over the
//! observed-context tree.

use std::time::Instant;

use serde::Serialize;

use crate::ar;
use crate::error::{CtarError, Result};
use crate::inference::{InferenceState, ModelConfig};

/// One test-set step.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastStep {
    /// Index into the original series.
    pub index: usize,
    pub forecast: f64,
    pub actual: f64,
    pub squared_error: f64,
    /// Leaf labels of the tree used at this step, for drift inspection.
    pub map_leaves: Vec<String>,
    pub elapsed_ms: f64,
}

/// Rolling forecast outcome.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastReport {
    pub n_train: usize,
    pub n_test: usize,
    pub refit: bool,
    pub mse: f64,
    pub steps: Vec<ForecastStep>,
}

/// Mean squared error between forecasts and actuals.
pub fn mse(forecasts: &[f64], actuals: &[f64]) -> Result<f64> {
    if forecasts.len() != actuals.len() {
        return Err(CtarError::InvalidInput(format!(
            "{} forecasts but {} actuals",
            forecasts.len(),
            actuals.len()
        )));
    }
    if forecasts.is_empty() {
        return Err(CtarError::InvalidInput("no forecasts to score".into()));
    }
    let sum: f64 = forecasts
        .iter()
        .zip(actuals)
        .map(|(f, a)| (f - a) * (f - a))
        .sum();
    Ok(sum / forecasts.len() as f64)
}

/// Walk the test split with one-step forecasts, updating the model with
/// every realised value. `refit` recomputes the MAP tree at each step;
/// otherwise the training-time MAP tree is frozen (its leaf parameters
/// still track the growing data).
pub fn rolling_forecast(
    series: &[f64],
    split_fraction: f64,
    config: &ModelConfig,
    refit: bool,
) -> Result<ForecastReport> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(CtarError::Config(format!(
            "split fraction must be in (0, 1), got {split_fraction}"
        )));
    }
    let n_train = (split_fraction * series.len() as f64).floor() as usize;
    let need = config.conditioning_len();
    if n_train < need + 1 {
        return Err(CtarError::InvalidInput(format!(
            "training split of {n_train} samples is too small: need at least {}",
            need + 1
        )));
    }
    if n_train >= series.len() {
        return Err(CtarError::InvalidInput(
            "empty test split".into(),
        ));
    }

    let mut state = InferenceState::from_series(config.clone(), &series[..n_train])?;
    let frozen = state.map_tree()?.tree;
    let mut steps = Vec::with_capacity(series.len() - n_train);
    for (index, &actual) in series.iter().enumerate().skip(n_train) {
        let started = Instant::now();
        let tree = if refit {
            state.map_tree()?.tree
        } else {
            frozen.clone()
        };
        let ctx = state.current_context();
        let leaf = tree.context_of(&ctx)?;
        let stats = state.leaf_stats(&leaf);
        let (phi, _) = ar::map_params(&stats, config.hyper())?;
        let forecast = ar::predict_mean(&phi, &state.current_regressor())?;
        state.update(actual)?;
        let err = forecast - actual;
        steps.push(ForecastStep {
            index,
            forecast,
            actual,
            squared_error: err * err,
            map_leaves: tree.leaf_labels(),
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }

    let forecasts: Vec<f64> = steps.iter().map(|s| s.forecast).collect();
    let actuals: Vec<f64> = steps.iter().map(|s| s.actual).collect();
    let mse = mse(&forecasts, &actuals)?;
    Ok(ForecastReport {
        n_train,
        n_test: steps.len(),
        refit,
        mse,
        steps,
    })
}
