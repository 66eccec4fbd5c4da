//! AR(p) leaf-model mathematics.
//!
//! Each discrete state (tree leaf) carries an AR(p) model
//! `x_n = phi' xt_{n-1} + e_n`, `e_n ~ N(0, sigma2)`, with a conjugate
//! normal-inverse-gamma prior: `sigma2 ~ Inv-Gamma(tau, lambda)` and
//! `phi | sigma2 ~ N(mu_o, sigma2 * Sigma_o)`. Everything downstream is a
//! function of the per-state sufficient statistics
//! `{count, s1 = sum x_i^2, s2 = sum x_i xt_{i-1}, S3 = sum xt xt'}`:
//! the marginal likelihood of the data assigned to the state (in log
//! domain), the posterior of `(phi, sigma2)`, and the MAP estimates.
//!
//! All probability arithmetic stays in natural logs; the marginal
//! likelihood underflows `f64` for a few hundred samples otherwise.

use nalgebra::{Cholesky, DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::error::{CtarError, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// Prior hyperparameters for the AR(p) leaf model.
///
/// The regressor has dimension `q = p` or `p + 1` when an intercept is
/// included (constant 1 appended after the lagged values). Derived
/// quantities used by every likelihood evaluation are cached at
/// construction.
#[derive(Debug, Clone)]
pub struct ArHyper {
    order: usize,
    intercept: bool,
    mu_o: DVector<f64>,
    sigma_o: DMatrix<f64>,
    tau: f64,
    lambda: f64,
    // cached: inverse prior scale, its action on mu_o, the quadratic form
    // mu' Sigma_o^{-1} mu, and ln det Sigma_o
    sigma_o_inv: DMatrix<f64>,
    sigma_o_inv_mu: DVector<f64>,
    mu_quad: f64,
    ln_det_sigma_o: f64,
}

impl ArHyper {
    pub fn new(
        order: usize,
        intercept: bool,
        mu_o: DVector<f64>,
        sigma_o: DMatrix<f64>,
        tau: f64,
        lambda: f64,
    ) -> Result<Self> {
        if order == 0 {
            return Err(CtarError::Config("AR order must be >= 1".into()));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(CtarError::Config(format!("tau must be > 0, got {tau}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(CtarError::Config(format!(
                "lambda must be > 0, got {lambda}"
            )));
        }
        let q = order + usize::from(intercept);
        if mu_o.len() != q {
            return Err(CtarError::Config(format!(
                "mu_o has dimension {}, expected {q}",
                mu_o.len()
            )));
        }
        if sigma_o.nrows() != q || sigma_o.ncols() != q {
            return Err(CtarError::Config(format!(
                "Sigma_o is {}x{}, expected {q}x{q}",
                sigma_o.nrows(),
                sigma_o.ncols()
            )));
        }
        let scale = sigma_o.amax().max(1.0);
        for i in 0..q {
            for j in 0..i {
                if (sigma_o[(i, j)] - sigma_o[(j, i)]).abs() > 1e-10 * scale {
                    return Err(CtarError::Config("Sigma_o is not symmetric".into()));
                }
            }
        }
        let chol = Cholesky::new(sigma_o.clone())
            .ok_or_else(|| CtarError::Config("Sigma_o is not positive definite".into()))?;
        let ln_det_sigma_o = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let sigma_o_inv = chol.inverse();
        let sigma_o_inv_mu = &sigma_o_inv * &mu_o;
        let mu_quad = mu_o.dot(&sigma_o_inv_mu);
        Ok(Self {
            order,
            intercept,
            mu_o,
            sigma_o,
            tau,
            lambda,
            sigma_o_inv,
            sigma_o_inv_mu,
            mu_quad,
            ln_det_sigma_o,
        })
    }

    /// Weakly informative default: `mu_o = 0`, `Sigma_o = I`, `tau = 2`,
    /// `lambda = 1`.
    pub fn default_for_order(order: usize, intercept: bool) -> Result<Self> {
        let q = order + usize::from(intercept);
        Self::new(
            order,
            intercept,
            DVector::zeros(q),
            DMatrix::identity(q, q),
            2.0,
            1.0,
        )
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn intercept(&self) -> bool {
        self.intercept
    }

    /// Regressor dimension `q`.
    pub fn dim(&self) -> usize {
        self.order + usize::from(self.intercept)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu_o(&self) -> &DVector<f64> {
        &self.mu_o
    }

    pub fn sigma_o(&self) -> &DMatrix<f64> {
        &self.sigma_o
    }

    /// Regressor for predicting `series[i]`: the `p` preceding samples,
    /// most recent first, with a trailing constant 1 when the intercept is
    /// enabled. `i == series.len()` gives the regressor for the next,
    /// not-yet-observed sample.
    pub fn regressor(&self, series: &[f64], i: usize) -> Result<DVector<f64>> {
        if i < self.order {
            return Err(CtarError::InvalidInput(format!(
                "index {i} has fewer than {} preceding samples",
                self.order
            )));
        }
        if i > series.len() {
            return Err(CtarError::InvalidInput(format!(
                "index {i} beyond series of length {}",
                series.len()
            )));
        }
        let mut xt = DVector::zeros(self.dim());
        for k in 0..self.order {
            xt[k] = series[i - 1 - k];
        }
        if self.intercept {
            xt[self.order] = 1.0;
        }
        Ok(xt)
    }
}

/// Sufficient statistics of the samples assigned to one state.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    count: usize,
    s1: f64,
    s2: DVector<f64>,
    s3: DMatrix<f64>,
}

impl SuffStats {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            s1: 0.0,
            s2: DVector::zeros(dim),
            s3: DMatrix::zeros(dim, dim),
        }
    }

    /// Fold one observation `(x, xt)` into the sums.
    pub fn update(&mut self, x: f64, xt: &DVector<f64>) {
        assert_eq!(xt.len(), self.s2.len(), "regressor dimension mismatch");
        self.count += 1;
        self.s1 += x * x;
        for i in 0..xt.len() {
            self.s2[i] += x * xt[i];
            for j in 0..xt.len() {
                self.s3[(i, j)] += xt[i] * xt[j];
            }
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn dim(&self) -> usize {
        self.s2.len()
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }

    pub fn s2(&self) -> &DVector<f64> {
        &self.s2
    }

    pub fn s3(&self) -> &DMatrix<f64> {
        &self.s3
    }
}

fn check_dim(stats: &SuffStats, hyper: &ArHyper) -> Result<()> {
    if stats.dim() != hyper.dim() {
        return Err(CtarError::Config(format!(
            "statistics dimension {} does not match hyperparameter dimension {}",
            stats.dim(),
            hyper.dim()
        )));
    }
    Ok(())
}

/// Factor of the posterior precision: `A = S3 + Sigma_o^{-1}`.
fn posterior_precision(stats: &SuffStats, hyper: &ArHyper) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let a = stats.s3() + &hyper.sigma_o_inv;
    Cholesky::new(a).ok_or_else(|| {
        CtarError::Numerical("S3 + Sigma_o^{-1} is not positive definite".into())
    })
}

fn ln_det(chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Completed-square residual `D_s`, clamped to zero inside a small negative
/// window; values below the window are a numerical inconsistency.
fn residual(stats: &SuffStats, hyper: &ArHyper, chol: &Cholesky<f64, nalgebra::Dyn>) -> Result<f64> {
    let b = stats.s2() + &hyper.sigma_o_inv_mu;
    let solved = chol.solve(&b);
    let d = stats.s1() + hyper.mu_quad - b.dot(&solved);
    if d >= 0.0 {
        return Ok(d);
    }
    if d >= -1e-8 * (1.0 + stats.s1().abs()) {
        return Ok(0.0);
    }
    Err(CtarError::Numerical(format!(
        "negative completed-square residual {d} exceeds the rounding window"
    )))
}

/// Log marginal likelihood of the samples behind `stats`, with `phi` and
/// `sigma2` integrated out against the normal-inverse-gamma prior.
///
/// Empty statistics give `ln 1 = 0`.
pub fn log_pe(stats: &SuffStats, hyper: &ArHyper) -> Result<f64> {
    if stats.is_empty() {
        return Ok(0.0);
    }
    check_dim(stats, hyper)?;
    let n = stats.count() as f64;
    let chol = posterior_precision(stats, hyper)?;
    let d_s = residual(stats, hyper, &chol)?;
    // det(I + Sigma_o S3) = det Sigma_o * det(S3 + Sigma_o^{-1})
    let ln_c = 0.5 * n * LN_2PI + 0.5 * (hyper.ln_det_sigma_o + ln_det(&chol));
    Ok(-ln_c + ln_gamma(hyper.tau + 0.5 * n) - ln_gamma(hyper.tau) + hyper.tau * hyper.lambda.ln()
        - (hyper.tau + 0.5 * n) * (hyper.lambda + 0.5 * d_s).ln())
}

/// Log marginal likelihood when the noise variance is known: the prior on
/// the coefficients is `N(mu_o, Sigma_o)` (not scaled by `sigma2`).
pub fn log_pe_known_var(stats: &SuffStats, hyper: &ArHyper, sigma2: f64) -> Result<f64> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(CtarError::Config(format!(
            "sigma2 must be > 0, got {sigma2}"
        )));
    }
    if stats.is_empty() {
        return Ok(0.0);
    }
    check_dim(stats, hyper)?;
    let n = stats.count() as f64;
    let q = hyper.dim() as f64;
    let a = stats.s3() + sigma2 * &hyper.sigma_o_inv;
    let chol = Cholesky::new(a).ok_or_else(|| {
        CtarError::Numerical("S3 + sigma2 Sigma_o^{-1} is not positive definite".into())
    })?;
    let b = stats.s2() + sigma2 * &hyper.sigma_o_inv_mu;
    let solved = chol.solve(&b);
    let mut e_s = stats.s1() + sigma2 * hyper.mu_quad - b.dot(&solved);
    if e_s < 0.0 {
        if e_s < -1e-8 * (1.0 + stats.s1().abs()) {
            return Err(CtarError::Numerical(format!(
                "negative completed-square residual {e_s} exceeds the rounding window"
            )));
        }
        e_s = 0.0;
    }
    // det(I + Sigma_o S3 / sigma2) = det Sigma_o * sigma2^{-q} * det(S3 + sigma2 Sigma_o^{-1})
    let ln_det_term = hyper.ln_det_sigma_o - q * sigma2.ln() + ln_det(&chol);
    Ok(-0.5 * n * (LN_2PI + sigma2.ln()) - 0.5 * ln_det_term - 0.5 * e_s / sigma2)
}

/// Conjugate posterior of the leaf parameters: inverse-gamma for `sigma2`
/// and a multivariate t for the coefficients.
#[derive(Debug, Clone)]
pub struct ArPosterior {
    /// Inverse-gamma shape `tau + count/2`.
    pub shape: f64,
    /// Inverse-gamma scale `lambda + D_s/2`.
    pub scale: f64,
    /// Degrees of freedom of the coefficient t-distribution, `2 tau + count`.
    pub nu: f64,
    /// Posterior mean of the coefficients.
    pub mean: DVector<f64>,
    /// Scale matrix of the coefficient t-distribution.
    pub scale_matrix: DMatrix<f64>,
}

impl ArPosterior {
    /// Log density of the inverse-gamma posterior for `sigma2`.
    pub fn sigma2_log_density(&self, sigma2: f64) -> f64 {
        if sigma2 <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.shape * self.scale.ln() - ln_gamma(self.shape)
            - (self.shape + 1.0) * sigma2.ln()
            - self.scale / sigma2
    }

    /// Mode of the inverse-gamma posterior for `sigma2`.
    pub fn sigma2_mode(&self) -> f64 {
        self.scale / (self.shape + 1.0)
    }

    /// Log density of the multivariate-t posterior for the coefficients.
    pub fn coef_log_density(&self, phi: &DVector<f64>) -> Result<f64> {
        let q = self.mean.len();
        if phi.len() != q {
            return Err(CtarError::Config(format!(
                "coefficient vector has dimension {}, expected {q}",
                phi.len()
            )));
        }
        let chol = Cholesky::new(self.scale_matrix.clone())
            .ok_or_else(|| CtarError::Numerical("scale matrix is not positive definite".into()))?;
        let diff = phi - &self.mean;
        let quad = diff.dot(&chol.solve(&diff));
        let qf = q as f64;
        Ok(ln_gamma(0.5 * (self.nu + qf)) - ln_gamma(0.5 * self.nu)
            - 0.5 * qf * (self.nu * std::f64::consts::PI).ln()
            - 0.5 * ln_det(&chol)
            - 0.5 * (self.nu + qf) * (quad / self.nu).ln_1p())
    }
}

/// Posterior of the leaf parameters given the statistics. Empty statistics
/// return the prior exactly.
pub fn posterior(stats: &SuffStats, hyper: &ArHyper) -> Result<ArPosterior> {
    check_dim(stats, hyper)?;
    if stats.is_empty() {
        return Ok(ArPosterior {
            shape: hyper.tau,
            scale: hyper.lambda,
            nu: 2.0 * hyper.tau,
            mean: hyper.mu_o.clone(),
            scale_matrix: (hyper.lambda / hyper.tau) * &hyper.sigma_o,
        });
    }
    let n = stats.count() as f64;
    let chol = posterior_precision(stats, hyper)?;
    let d_s = residual(stats, hyper, &chol)?;
    let b = stats.s2() + &hyper.sigma_o_inv_mu;
    let mean = chol.solve(&b);
    let factor = (2.0 * hyper.lambda + d_s) / (2.0 * hyper.tau + n);
    let scale_matrix = factor * chol.inverse();
    Ok(ArPosterior {
        shape: hyper.tau + 0.5 * n,
        scale: hyper.lambda + 0.5 * d_s,
        nu: 2.0 * hyper.tau + n,
        mean,
        scale_matrix,
    })
}

/// MAP estimates `(phi_hat, sigma2_hat)` of the leaf parameters.
pub fn map_params(stats: &SuffStats, hyper: &ArHyper) -> Result<(DVector<f64>, f64)> {
    check_dim(stats, hyper)?;
    if stats.is_empty() {
        return Ok((hyper.mu_o.clone(), hyper.lambda / (hyper.tau + 1.0)));
    }
    let n = stats.count() as f64;
    let chol = posterior_precision(stats, hyper)?;
    let d_s = residual(stats, hyper, &chol)?;
    let b = stats.s2() + &hyper.sigma_o_inv_mu;
    let phi_hat = chol.solve(&b);
    let sigma2_hat = (2.0 * hyper.lambda + d_s) / (2.0 * hyper.tau + n + 2.0);
    Ok((phi_hat, sigma2_hat))
}

/// Point forecast: the conditional mean `phi' xt`.
pub fn predict_mean(phi: &DVector<f64>, xt: &DVector<f64>) -> Result<f64> {
    if phi.len() != xt.len() {
        return Err(CtarError::Config(format!(
            "coefficient dimension {} does not match regressor dimension {}",
            phi.len(),
            xt.len()
        )));
    }
    Ok(phi.dot(xt))
}
