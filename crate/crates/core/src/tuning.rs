//! Hyperparameter selection by evidence maximisation, and simulation from
//! a fully specified tree-AR model.
//!
//! The quantiser thresholds and the AR order carry uniform priors one
//! level above everything else, so their posterior is proportional to the
//! evidence: every candidate pair is scored with the exact evidence on a
//! common stretch of the series and the highest wins.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{CtarError, Result};
use crate::inference::{InferenceState, ModelConfig};
use crate::quantiser::Quantiser;
use crate::tree::{default_beta, path_label, ContextTree, Path};
use crate::ar::ArHyper;

/// Prior specification that can be instantiated for any AR order, so the
/// order itself can be tuned.
#[derive(Debug, Clone)]
pub struct HyperSpec {
    pub intercept: bool,
    pub tau: f64,
    pub lambda: f64,
    pub mu: MuPrior,
    pub sigma: SigmaPrior,
}

#[derive(Debug, Clone)]
pub enum MuPrior {
    /// Constant vector `c * 1`.
    Constant(f64),
    /// Explicit mean vector; pins the regressor dimension.
    Vector(Vec<f64>),
}

#[derive(Debug, Clone)]
pub enum SigmaPrior {
    /// `s * I` for any dimension.
    ScaledIdentity(f64),
    /// Explicit scale matrix; pins the regressor dimension.
    Full(DMatrix<f64>),
}

impl HyperSpec {
    /// Weakly informative defaults: zero mean, identity scale, `tau = 2`,
    /// `lambda = 1`.
    pub fn default_spec(intercept: bool) -> Self {
        Self {
            intercept,
            tau: 2.0,
            lambda: 1.0,
            mu: MuPrior::Constant(0.0),
            sigma: SigmaPrior::ScaledIdentity(1.0),
        }
    }

    /// Instantiate for a given AR order.
    pub fn build(&self, order: usize) -> Result<ArHyper> {
        let q = order + usize::from(self.intercept);
        let mu = match &self.mu {
            MuPrior::Constant(c) => DVector::from_element(q, *c),
            MuPrior::Vector(v) => {
                if v.len() != q {
                    return Err(CtarError::Config(format!(
                        "prior mean has dimension {}, but order {order} needs {q}",
                        v.len()
                    )));
                }
                DVector::from_vec(v.clone())
            }
        };
        let sigma = match &self.sigma {
            SigmaPrior::ScaledIdentity(s) => {
                if !(s.is_finite() && *s > 0.0) {
                    return Err(CtarError::Config(format!(
                        "prior scale must be > 0, got {s}"
                    )));
                }
                DMatrix::identity(q, q) * *s
            }
            SigmaPrior::Full(mat) => {
                if mat.nrows() != q || mat.ncols() != q {
                    return Err(CtarError::Config(format!(
                        "prior scale matrix is {}x{}, but order {order} needs {q}x{q}",
                        mat.nrows(),
                        mat.ncols()
                    )));
                }
                mat.clone()
            }
        };
        ArHyper::new(order, self.intercept, mu, sigma, self.tau, self.lambda)
    }

    /// Whether this spec can be instantiated for any order (needed when the
    /// order itself is tuned).
    pub fn is_order_free(&self) -> bool {
        matches!(self.mu, MuPrior::Constant(_)) && matches!(self.sigma, SigmaPrior::ScaledIdentity(_))
    }
}

/// Tuning configuration: tree depth, prior parameter (`None` picks the
/// default for the alphabet), and the leaf-prior spec.
#[derive(Debug, Clone)]
pub struct TuneConfig {
    pub depth: usize,
    pub beta: Option<f64>,
    pub prior: HyperSpec,
}

/// One scored candidate. `log_evidence` is `None` when the candidate
/// failed to evaluate.
#[derive(Debug, Clone, Serialize)]
pub struct TuneEntry {
    pub thresholds: Vec<f64>,
    pub order: usize,
    pub log_evidence: Option<f64>,
}

/// Outcome of evidence-based tuning.
#[derive(Debug, Clone, Serialize)]
pub struct TuneResult {
    pub thresholds: Vec<f64>,
    pub order: usize,
    pub table: Vec<TuneEntry>,
}

/// Score every `(thresholds, order)` pair for `order` in `1..=p_max` and
/// return the argmax. Ties prefer the smaller order, then lexicographically
/// smaller thresholds.
pub fn select_hyper(
    series: &[f64],
    threshold_candidates: &[Vec<f64>],
    p_max: usize,
    cfg: &TuneConfig,
) -> Result<TuneResult> {
    if p_max < 1 {
        return Err(CtarError::Config("p_max must be >= 1".into()));
    }
    let orders: Vec<usize> = (1..=p_max).collect();
    select_hyper_over(series, threshold_candidates, &orders, cfg)
}

/// As [`select_hyper`] with an explicit list of orders to try.
///
/// Every candidate is scored on the same likelihood support: the first
/// `max(depth, max order)` samples condition all of them.
pub fn select_hyper_over(
    series: &[f64],
    threshold_candidates: &[Vec<f64>],
    orders: &[usize],
    cfg: &TuneConfig,
) -> Result<TuneResult> {
    if threshold_candidates.is_empty() {
        return Err(CtarError::Tuning("no threshold candidates".into()));
    }
    if orders.is_empty() {
        return Err(CtarError::Tuning("no orders to try".into()));
    }
    let width = threshold_candidates[0].len();
    if threshold_candidates.iter().any(|c| c.len() != width) {
        return Err(CtarError::Config(
            "threshold candidates have mixed alphabet sizes".into(),
        ));
    }
    if orders.len() > 1 && !cfg.prior.is_order_free() {
        return Err(CtarError::Config(
            "tuning the order requires a scalar prior mean and scaled-identity prior scale".into(),
        ));
    }
    let m = width + 1;
    let beta = cfg.beta.unwrap_or_else(|| default_beta(m));
    let max_order = *orders.iter().max().expect("non-empty");
    let common = cfg.depth.max(max_order);
    if series.len() <= common {
        return Err(CtarError::Tuning(format!(
            "series of length {} leaves no samples after {common} conditioning ones",
            series.len()
        )));
    }

    let mut table = Vec::with_capacity(threshold_candidates.len() * orders.len());
    for thresholds in threshold_candidates {
        for &order in orders {
            let log_evidence = score_candidate(series, thresholds, order, beta, common, cfg).ok();
            table.push(TuneEntry {
                thresholds: thresholds.clone(),
                order,
                log_evidence,
            });
        }
    }

    let best = table
        .iter()
        .filter(|e| e.log_evidence.is_some())
        .max_by(|a, b| {
            let (ea, eb) = (a.log_evidence.unwrap(), b.log_evidence.unwrap());
            ea.partial_cmp(&eb)
                .unwrap_or(std::cmp::Ordering::Equal)
                // on ties prefer the smaller order, then smaller thresholds
                .then_with(|| b.order.cmp(&a.order))
                .then_with(|| {
                    cmp_lex(&b.thresholds, &a.thresholds)
                })
        })
        .ok_or_else(|| CtarError::Tuning("every candidate failed to evaluate".into()))?;

    Ok(TuneResult {
        thresholds: best.thresholds.clone(),
        order: best.order,
        table,
    })
}

fn cmp_lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(ord) => return ord,
        }
    }
    a.len().cmp(&b.len())
}

fn score_candidate(
    series: &[f64],
    thresholds: &[f64],
    order: usize,
    beta: f64,
    common_conditioning: usize,
    cfg: &TuneConfig,
) -> Result<f64> {
    let quantiser = Quantiser::new(thresholds.to_vec())?;
    let hyper = cfg.prior.build(order)?;
    let config = ModelConfig::new(quantiser, cfg.depth, beta, hyper)?;
    let mut state = InferenceState::new(config, &series[..common_conditioning])?;
    for &x in &series[common_conditioning..] {
        state.update(x)?;
    }
    state.log_evidence()
}

/// Per-leaf generator parameters.
#[derive(Debug, Clone, Serialize)]
pub struct LeafParams {
    /// Coefficients in regressor order: lags most recent first, intercept
    /// last when present.
    pub phi: Vec<f64>,
    pub sigma2: f64,
}

/// A fully specified tree-AR generator: tree, quantiser, and one AR model
/// per leaf. Simulation is deterministic given the seed.
#[derive(Debug, Clone)]
pub struct TreeArModel {
    tree: ContextTree,
    quantiser: Quantiser,
    order: usize,
    intercept: bool,
    leaves: HashMap<Path, LeafParams>,
    burn_in: Option<usize>,
}

impl TreeArModel {
    pub fn new(
        tree: ContextTree,
        quantiser: Quantiser,
        order: usize,
        intercept: bool,
        leaf_params: Vec<(String, LeafParams)>,
    ) -> Result<Self> {
        if quantiser.alphabet_size() != tree.m() {
            return Err(CtarError::Config(format!(
                "quantiser alphabet {} does not match tree alphabet {}",
                quantiser.alphabet_size(),
                tree.m()
            )));
        }
        if order == 0 {
            return Err(CtarError::Config("AR order must be >= 1".into()));
        }
        let q = order + usize::from(intercept);
        let mut leaves = HashMap::with_capacity(leaf_params.len());
        for (label, params) in leaf_params {
            if params.phi.len() != q {
                return Err(CtarError::Config(format!(
                    "leaf {label:?} has {} coefficients, expected {q}",
                    params.phi.len()
                )));
            }
            if !(params.sigma2.is_finite() && params.sigma2 > 0.0) {
                return Err(CtarError::Config(format!(
                    "leaf {label:?} must have sigma2 > 0, got {}",
                    params.sigma2
                )));
            }
            let path = label_to_path(&label, tree.m())?;
            leaves.insert(path, params);
        }
        for leaf in tree.leaves() {
            if !leaves.contains_key(&leaf) {
                return Err(CtarError::Config(format!(
                    "no parameters for leaf {:?}",
                    path_label(&leaf)
                )));
            }
        }
        Ok(Self {
            tree,
            quantiser,
            order,
            intercept,
            leaves,
            burn_in: None,
        })
    }

    /// Override the default burn-in of `10 * max(depth, order)` samples.
    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    pub fn tree(&self) -> &ContextTree {
        &self.tree
    }

    pub fn quantiser(&self) -> &Quantiser {
        &self.quantiser
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn intercept(&self) -> bool {
        self.intercept
    }

    pub fn leaf_params(&self, path: &[crate::quantiser::Symbol]) -> Option<&LeafParams> {
        self.leaves.get(path)
    }

    /// History needed before the first draw.
    pub fn max_lag(&self) -> usize {
        self.tree.depth().max(self.order)
    }

    /// Conditional mean of the next sample given a history (most recent
    /// last); the oracle point forecast of the generator itself.
    pub fn true_forecast(&self, history: &[f64]) -> Result<f64> {
        let (params, xt) = self.step_params(history)?;
        Ok(params.phi.iter().zip(&xt).map(|(p, x)| p * x).sum())
    }

    fn step_params(&self, history: &[f64]) -> Result<(&LeafParams, Vec<f64>)> {
        let lag = self.max_lag();
        if history.len() < lag {
            return Err(CtarError::InvalidInput(format!(
                "history of length {} is shorter than the required lag {lag}",
                history.len()
            )));
        }
        let depth = self.tree.depth();
        let mut ctx = Vec::with_capacity(depth);
        for k in 1..=depth {
            ctx.push(self.quantiser.quantize(history[history.len() - k])?);
        }
        let leaf = self.tree.context_of(&ctx)?;
        let params = self
            .leaves
            .get(&leaf)
            .ok_or_else(|| CtarError::Config(format!("no parameters for leaf {leaf:?}")))?;
        let q = self.order + usize::from(self.intercept);
        let mut xt = Vec::with_capacity(q);
        for k in 1..=self.order {
            xt.push(history[history.len() - k]);
        }
        if self.intercept {
            xt.push(1.0);
        }
        Ok((params, xt))
    }

    /// Draw `n` samples. The initial history is `init` (its trailing
    /// `max_lag` values) or zeros, and a burn-in stretch is discarded so the
    /// output does not depend on the transient.
    pub fn simulate(&self, n: usize, seed: u64, init: Option<&[f64]>) -> Result<Vec<f64>> {
        let lag = self.max_lag();
        let mut history: Vec<f64> = match init {
            Some(values) => {
                if values.len() < lag {
                    return Err(CtarError::InvalidInput(format!(
                        "init provides {} samples, need at least {lag}",
                        values.len()
                    )));
                }
                values[values.len() - lag..].to_vec()
            }
            None => vec![0.0; lag],
        };
        let burn = self.burn_in.unwrap_or(10 * lag);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut out = Vec::with_capacity(burn + n);
        for _ in 0..burn + n {
            let (params, xt) = self.step_params(&history)?;
            let mean: f64 = params.phi.iter().zip(&xt).map(|(p, x)| p * x).sum();
            let x = mean + params.sigma2.sqrt() * normal.sample(&mut rng);
            history.push(x);
            if history.len() > lag.max(1) {
                history.remove(0);
            }
            out.push(x);
        }
        Ok(out.split_off(burn))
    }
}

fn label_to_path(label: &str, m: usize) -> Result<Path> {
    let mut path = Path::with_capacity(label.len());
    for ch in label.chars() {
        let d = ch
            .to_digit(10)
            .ok_or_else(|| CtarError::Config(format!("bad symbol '{ch}' in leaf label {label:?}")))?;
        if d as usize >= m {
            return Err(CtarError::Config(format!(
                "symbol {d} out of range for alphabet size {m} in leaf label {label:?}"
            )));
        }
        path.push(d as crate::quantiser::Symbol);
    }
    Ok(path)
}
