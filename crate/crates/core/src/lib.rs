//! Context-tree autoregressive mixture models for real-valued time series.
//!
//! A quantiser maps recent samples to a discrete context; a proper m-ary
//! context tree turns contexts into a small set of states; each state
//! carries its own AR(p) model with a conjugate normal-inverse-gamma prior.
//! The posterior over the entire tree class is tractable: this crate
//! computes the exact evidence, the MAP tree (and the top-k trees) with
//! exact posterior probabilities, closed-form leaf posteriors, sequential
//! updates in constant time per sample, evidence-based hyperparameter
//! tuning, simulation, and rolling one-step forecasting.

pub mod ar;
pub mod error;
pub mod forecast;
pub mod inference;
pub mod quantiser;
pub mod tree;
pub mod tuning;

pub use ar::{log_pe, log_pe_known_var, map_params, posterior, predict_mean, ArHyper, ArPosterior, SuffStats};
pub use error::{CtarError, Result};
pub use forecast::{mse, rolling_forecast, ForecastReport, ForecastStep};
pub use inference::{
    brute_force_evidence, brute_force_scores, InferenceState, MapResult, ModelConfig, TreeReport,
};
pub use quantiser::{threshold_grid, threshold_grid_exhaustive, Quantiser, Symbol};
pub use tree::{count_trees, default_beta, enumerate_trees, path_label, ContextTree, Tmax};
pub use tuning::{
    select_hyper, select_hyper_over, HyperSpec, LeafParams, MuPrior, SigmaPrior, TreeArModel,
    TuneConfig, TuneEntry, TuneResult,
};
