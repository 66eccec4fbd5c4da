//! Shared helpers for the integration tests: an adaptive-Simpson
//! quadrature stack that stays independent of the library's closed forms,
//! and the reference generator used by the simulated-recovery and
//! forecasting checks.

use ctar::{ContextTree, LeafParams, Quantiser, TreeArModel};

const LN_2PI: f64 = 1.8378770664093453;

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson over [a, b] with forced initial panelling so narrow
/// interior peaks cannot hide from the error estimate.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * h;
        let hi = lo + h;
        let mid = 0.5 * (lo + hi);
        let (fa, fm, fb) = (f(lo), f(mid), f(hi));
        let whole = simpson(fa, fm, fb, lo, hi);
        total += adaptive(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 42);
    }
    total
}

// Lanczos approximation, locally implemented so the oracle does not share
// the library's special-function path.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn log_normal_density(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - 0.5 * (x - mean) * (x - mean) / var
}

pub fn log_inv_gamma_density(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Scalar AR observation set for the order-1 oracles.
#[derive(Debug, Clone)]
pub struct ScalarInstance {
    pub xs: Vec<f64>,
    pub xts: Vec<f64>,
    pub tau: f64,
    pub lambda: f64,
    pub mu0: f64,
    pub s0: f64,
}

impl ScalarInstance {
    /// Joint log integrand of the defining double integral at (phi, sigma2):
    /// likelihood times both prior factors.
    pub fn log_integrand(&self, phi: f64, sigma2: f64) -> f64 {
        let mut lp = log_inv_gamma_density(sigma2, self.tau, self.lambda);
        lp += log_normal_density(phi, self.mu0, sigma2 * self.s0);
        for (x, xt) in self.xs.iter().zip(&self.xts) {
            lp += log_normal_density(*x, phi * xt, sigma2);
        }
        lp
    }

    fn curvature(&self) -> f64 {
        self.xts.iter().map(|t| t * t).sum::<f64>() + 1.0 / self.s0
    }

    fn phi_center(&self) -> f64 {
        let s2: f64 = self.xs.iter().zip(&self.xts).map(|(x, t)| x * t).sum();
        (s2 + self.mu0 / self.s0) / self.curvature()
    }

    /// Marginal likelihood by nested adaptive quadrature over
    /// (phi, ln sigma2). Independent of every library formula.
    pub fn log_marginal_quadrature(&self) -> f64 {
        let kappa = self.curvature();
        let center = self.phi_center();
        let s1: f64 = self.xs.iter().map(|x| x * x).sum();
        let n = self.xs.len() as f64;
        let sigma2_hat = (2.0 * self.lambda + s1) / (2.0 * self.tau + n + 2.0);
        let offset = self.log_integrand(center, sigma2_hat);
        let outer = |u: f64| -> f64 {
            let sigma2 = u.exp();
            let sd = (sigma2 / kappa).sqrt();
            let inner = |phi: f64| (self.log_integrand(phi, sigma2) - offset).min(700.0).exp();
            // jacobian of the ln sigma2 substitution
            integrate(&inner, center - 35.0 * sd, center + 35.0 * sd, 6, 1e-11) * sigma2
        };
        let lo = (1e-7_f64).ln();
        let hi = (1e7_f64).ln();
        offset + integrate(&outer, lo, hi, 16, 1e-11).ln()
    }

    /// Normaliser of likelihood x prior over a (phi, sigma2) box, by nested
    /// quadrature in the original coordinates.
    pub fn box_integral(
        &self,
        phi_lo: f64,
        phi_hi: f64,
        s2_lo: f64,
        s2_hi: f64,
        offset: f64,
    ) -> f64 {
        let outer = |u: f64| -> f64 {
            let sigma2 = u.exp();
            let inner = |phi: f64| (self.log_integrand(phi, sigma2) - offset).min(700.0).exp();
            integrate(&inner, phi_lo, phi_hi, 8, 1e-12) * sigma2
        };
        integrate(&outer, s2_lo.ln(), s2_hi.ln(), 16, 1e-12)
    }
}

/// The reference tree-AR generator shipped with the repo: the depth-2
/// binary tree with leaves {1, 01, 00}, threshold zero, AR(2) leaves.
pub fn reference_generator() -> TreeArModel {
    let tree = ContextTree::from_leaf_labels(2, &["1", "01", "00"]).unwrap();
    let quantiser = Quantiser::new(vec![0.0]).unwrap();
    TreeArModel::new(
        tree,
        quantiser,
        2,
        false,
        reference_leaf_params(),
    )
    .unwrap()
}

/// Leaf parameters of the reference generator.
pub fn reference_leaf_params() -> Vec<(String, LeafParams)> {
    vec![
        (
            "1".to_string(),
            LeafParams {
                phi: vec![0.6, -0.2],
                sigma2: 0.15,
            },
        ),
        (
            "01".to_string(),
            LeafParams {
                phi: vec![0.2, -0.4],
                sigma2: 0.08,
            },
        ),
        (
            "00".to_string(),
            LeafParams {
                phi: vec![-0.25, 0.3],
                sigma2: 0.05,
            },
        ),
    ]
}
