//! Acceptance suite: one test per shipping criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them all).

mod common;

use std::time::Instant;

use common::{integrate, log_inv_gamma_density, log_normal_density, reference_generator, ScalarInstance};
use ctar::{
    brute_force_scores, default_beta, enumerate_trees, log_pe, log_pe_known_var, map_params,
    posterior, rolling_forecast, ArHyper, ContextTree, InferenceState, ModelConfig, Quantiser,
    SuffStats,
};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn criterion(number: u32, name: &str, body: impl FnOnce() -> Result<String, String>) {
    match body() {
        Ok(detail) => println!("ACCEPTANCE {number} ({name}): PASS - {detail}"),
        Err(msg) => {
            println!("ACCEPTANCE {number} ({name}): FAIL - {msg}");
            panic!("acceptance criterion {number} failed: {msg}");
        }
    }
}

fn gaussian_series(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn grid_config(m: usize, depth: usize, order: usize) -> ModelConfig {
    let thresholds = match m {
        2 => vec![0.0],
        3 => vec![-0.4, 0.4],
        _ => unreachable!("grid uses binary and ternary alphabets"),
    };
    ModelConfig::with_default_beta(
        Quantiser::new(thresholds).unwrap(),
        depth,
        ArHyper::default_for_order(order, false).unwrap(),
    )
    .unwrap()
}

fn reference_config() -> ModelConfig {
    ModelConfig::with_default_beta(
        Quantiser::new(vec![0.0]).unwrap(),
        2,
        ArHyper::default_for_order(2, false).unwrap(),
    )
    .unwrap()
}

#[test]
fn criterion_1_evidence_recursion_equals_enumeration() {
    criterion(1, "evidence recursion equals enumeration", || {
        let started = Instant::now();
        let mut instances = 0usize;
        let mut worst: f64 = 0.0;
        for m in [2usize, 3] {
            for depth in [0usize, 1, 2] {
                for seed in 0..50u64 {
                    let n = 20 + (seed as usize % 31); // lengths 20..=50
                    let order = 1 + (seed as usize % 2);
                    let cfg = grid_config(m, depth, order);
                    let series = gaussian_series(seed * 131 + m as u64 * 7 + depth as u64, n);
                    let state = InferenceState::from_series(cfg.clone(), &series)
                        .map_err(|e| e.to_string())?;
                    let fast = state.log_evidence().map_err(|e| e.to_string())?;
                    let brute =
                        ctar::brute_force_evidence(&series, &cfg).map_err(|e| e.to_string())?;
                    let rel = (fast - brute).abs() / brute.abs().max(1.0);
                    worst = worst.max(rel);
                    if rel > 1e-10 {
                        return Err(format!(
                            "m={m} depth={depth} seed={seed}: recursion {fast} vs enumeration {brute} (rel {rel:.2e})"
                        ));
                    }
                    instances += 1;
                }
            }
        }
        let elapsed = started.elapsed().as_secs_f64();
        if elapsed >= 60.0 {
            return Err(format!("took {elapsed:.1}s (budget 60s)"));
        }
        Ok(format!(
            "{instances} instances, worst rel err {worst:.2e}, {elapsed:.1}s"
        ))
    });
}

#[test]
fn criterion_2_map_and_topk_match_enumeration() {
    criterion(2, "MAP and top-k match enumeration ranking", || {
        let mut instances = 0usize;
        for m in [2usize, 3] {
            for depth in [0usize, 1, 2] {
                for seed in 0..50u64 {
                    let n = 20 + (seed as usize % 31);
                    let order = 1 + (seed as usize % 2);
                    let cfg = grid_config(m, depth, order);
                    let series = gaussian_series(seed * 977 + m as u64 * 13 + depth as u64, n);
                    let state = InferenceState::from_series(cfg.clone(), &series)
                        .map_err(|e| e.to_string())?;
                    let mut brute =
                        brute_force_scores(&series, &cfg).map_err(|e| e.to_string())?;
                    brute.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());

                    let map = state.map_tree().map_err(|e| e.to_string())?;
                    let map_score = map.log_prior + map.log_marginal;
                    let best = brute[0].1;
                    if (map_score - best).abs() > 1e-10 * best.abs().max(1.0) {
                        return Err(format!(
                            "m={m} depth={depth} seed={seed}: MAP score {map_score} vs enumeration best {best}"
                        ));
                    }
                    let tie = brute.len() > 1 && (brute[1].1 - best).abs() < 1e-11 * best.abs().max(1.0);
                    if !tie && map.tree != brute[0].0 {
                        return Err(format!(
                            "m={m} depth={depth} seed={seed}: MAP tree {:?} vs enumeration argmax {:?}",
                            map.tree.leaf_labels(),
                            brute[0].0.leaf_labels()
                        ));
                    }

                    let k = 5.min(brute.len());
                    let top = state.top_k(5).map_err(|e| e.to_string())?;
                    if top.len() != k {
                        return Err(format!(
                            "m={m} depth={depth} seed={seed}: top-k returned {} trees, expected {k}",
                            top.len()
                        ));
                    }
                    for (rank, res) in top.iter().enumerate() {
                        let got = res.log_prior + res.log_marginal;
                        let want = brute[rank].1;
                        if (got - want).abs() > 1e-10 * want.abs().max(1.0) {
                            return Err(format!(
                                "m={m} depth={depth} seed={seed} rank {rank}: score {got} vs {want}"
                            ));
                        }
                        // strict tree equality away from ties
                        let sep = |a: f64, b: f64| (a - b).abs() > 1e-9 * a.abs().max(1.0);
                        let isolated = (rank == 0 || sep(brute[rank - 1].1, want))
                            && (rank + 1 >= brute.len() || sep(want, brute[rank + 1].1));
                        if isolated && res.tree != brute[rank].0 {
                            return Err(format!(
                                "m={m} depth={depth} seed={seed} rank {rank}: tree mismatch"
                            ));
                        }
                    }
                    instances += 1;
                }
            }
        }
        Ok(format!("{instances} instances, k <= 5, ranking exact"))
    });
}

#[test]
fn criterion_3_marginal_likelihood_quadrature() {
    criterion(3, "closed-form marginal likelihood vs quadrature", || {
        let mut worst_quad: f64 = 0.0;
        for seed in 0..20u64 {
            let n = 1 + (seed as usize % 5);
            let inst = scalar_instance(seed, n);
            let hyper = scalar_hyper(&inst);
            let implemented = log_pe(&scalar_stats(&inst), &hyper).map_err(|e| e.to_string())?;
            let quadrature = inst.log_marginal_quadrature();
            let rel = (implemented - quadrature).exp_m1().abs();
            worst_quad = worst_quad.max(rel);
            if rel > 1e-4 {
                return Err(format!(
                    "seed {seed}: implementation {implemented} vs quadrature {quadrature} (rel {rel:.2e})"
                ));
            }
        }
        let mut worst_kv: f64 = 0.0;
        for seed in 0..8u64 {
            let n = 1 + (seed as usize % 4);
            let inst = scalar_instance(900 + seed, n);
            let stats = scalar_stats(&inst);
            let hyper = scalar_hyper(&inst);
            let full = log_pe(&stats, &hyper).map_err(|e| e.to_string())?;
            let integrand = |u: f64| -> f64 {
                let sigma2 = u.exp();
                let scaled = ArHyper::new(
                    1,
                    false,
                    DVector::from_element(1, inst.mu0),
                    DMatrix::from_element(1, 1, inst.s0 * sigma2),
                    inst.tau,
                    inst.lambda,
                )
                .unwrap();
                let lp = log_pe_known_var(&stats, &scaled, sigma2).unwrap()
                    + log_inv_gamma_density(sigma2, inst.tau, inst.lambda);
                (lp - full).min(700.0).exp() * sigma2
            };
            let ratio = integrate(&integrand, (1e-8_f64).ln(), (1e8_f64).ln(), 24, 1e-12);
            worst_kv = worst_kv.max((ratio - 1.0).abs());
            if (ratio - 1.0).abs() > 1e-6 {
                return Err(format!(
                    "seed {seed}: known-variance identity ratio {ratio}"
                ));
            }
        }
        Ok(format!(
            "20 quadrature instances (worst rel {worst_quad:.2e}), known-variance identity (worst {worst_kv:.2e})"
        ))
    });
}

#[test]
fn criterion_4_posterior_matches_grid_oracle() {
    criterion(4, "posterior matches grid-normalised likelihood x prior", || {
        // empty data: posterior is exactly the prior
        let hyper = ArHyper::default_for_order(2, true).map_err(|e| e.to_string())?;
        let empty = posterior(&SuffStats::new(3), &hyper).map_err(|e| e.to_string())?;
        if empty.shape != hyper.tau()
            || empty.scale != hyper.lambda()
            || empty.mean != *hyper.mu_o()
            || empty.scale_matrix != (hyper.lambda() / hyper.tau()) * hyper.sigma_o()
        {
            return Err("empty-data posterior differs from the prior".into());
        }

        let mut worst: f64 = 0.0;
        for seed in [0u64, 5, 11] {
            let inst = scalar_instance(300 + seed, 3 + seed as usize % 3);
            let hyper = scalar_hyper(&inst);
            let stats = scalar_stats(&inst);
            let post = posterior(&stats, &hyper).map_err(|e| e.to_string())?;
            let log_z = inst.log_marginal_quadrature();
            let a_inv = post.scale_matrix[(0, 0)] * post.nu / (2.0 * post.scale);
            let mean = post.mean[0];
            let sd = (post.scale_matrix[(0, 0)] * post.nu / (post.nu - 2.0)).sqrt();
            let mode = post.sigma2_mode();
            for i in 0..15 {
                for j in 0..15 {
                    let phi = mean - 4.0 * sd + 8.0 * sd * i as f64 / 14.0;
                    let sigma2 = mode * (0.25 + 5.75 * j as f64 / 14.0);
                    let oracle = (inst.log_integrand(phi, sigma2) - log_z).exp();
                    let implemented = (post.sigma2_log_density(sigma2)
                        + log_normal_density(phi, mean, sigma2 * a_inv))
                    .exp();
                    let diff = (oracle - implemented).abs();
                    worst = worst.max(diff);
                    if diff > 1e-6 {
                        return Err(format!(
                            "seed {seed} at ({phi:.3}, {sigma2:.3}): oracle {oracle} vs implementation {implemented}"
                        ));
                    }
                }
            }

            // MAP estimates against the grid
            let (phi_map, sigma2_map) = map_params(&stats, &hyper).map_err(|e| e.to_string())?;
            if phi_map != post.mean {
                return Err("coefficient MAP differs from posterior mean".into());
            }
            let lo = sigma2_map * 0.5;
            let hi = sigma2_map * 2.0;
            let steps = 40_000usize;
            let delta = (hi - lo) / steps as f64;
            let mut best = lo;
            let mut best_val = f64::NEG_INFINITY;
            for k in 0..=steps {
                let s = lo + k as f64 * delta;
                let v = post.sigma2_log_density(s);
                if v > best_val {
                    best_val = v;
                    best = s;
                }
            }
            if (best - sigma2_map).abs() > delta {
                return Err(format!(
                    "seed {seed}: variance MAP {sigma2_map} vs grid argmax {best} (resolution {delta:.2e})"
                ));
            }
        }
        Ok(format!(
            "joint density worst abs err {worst:.2e}; MAP estimates on-grid; empty-data exact"
        ))
    });
}

#[test]
fn criterion_5_posterior_concentration_on_simulated_data() {
    criterion(5, "posterior concentrates on the generating tree", || {
        let started = Instant::now();
        let generator = reference_generator();
        let truth = generator.tree().clone();
        let seeds = 20u64;
        let mut fractions = Vec::new();
        let mut posteriors_at_500 = Vec::new();
        for n in [100usize, 300, 500] {
            let mut hits = 0usize;
            for seed in 0..seeds {
                let series = generator
                    .simulate(n, seed, None)
                    .map_err(|e| e.to_string())?;
                let state = InferenceState::from_series(reference_config(), &series)
                    .map_err(|e| e.to_string())?;
                let map = state.map_tree().map_err(|e| e.to_string())?;
                if map.tree == truth {
                    hits += 1;
                    if n == 500 {
                        posteriors_at_500.push(map.log_posterior.exp());
                    }
                }
            }
            fractions.push(hits as f64 / seeds as f64);
        }
        if !(fractions[0] <= fractions[1] && fractions[1] <= fractions[2]) {
            return Err(format!("recovery fraction not nondecreasing: {fractions:?}"));
        }
        if fractions[2] < 0.9 {
            return Err(format!(
                "recovery at n=500 is {:.2}, need >= 0.9",
                fractions[2]
            ));
        }
        posteriors_at_500.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = posteriors_at_500[posteriors_at_500.len() / 2];
        if median < 0.9 {
            return Err(format!("median MAP posterior at n=500 is {median:.3}"));
        }
        let elapsed = started.elapsed().as_secs_f64();
        if elapsed >= 120.0 {
            return Err(format!("took {elapsed:.1}s (budget 120s)"));
        }
        Ok(format!(
            "recovery {:?} over n = 100/300/500, median posterior {median:.3} at 500, {elapsed:.1}s",
            fractions
        ))
    });
}

#[test]
fn criterion_6_sequential_equals_batch() {
    criterion(6, "sequential updates equal batch rebuild", || {
        for (m, depth, order) in [(2usize, 2usize, 2usize), (3, 1, 1), (2, 0, 1), (2, 3, 1)] {
            let cfg = grid_config(m, depth, order);
            let series = gaussian_series(404 + (m + depth + order) as u64, 90);
            let batch =
                InferenceState::from_series(cfg.clone(), &series).map_err(|e| e.to_string())?;
            let need = cfg.conditioning_len();
            let mut seq = InferenceState::new(cfg, &series[..need]).map_err(|e| e.to_string())?;
            for &x in &series[need..] {
                seq.update(x).map_err(|e| e.to_string())?;
            }
            if batch.tmax().len() != seq.tmax().len() {
                return Err(format!(
                    "m={m} depth={depth}: node counts differ ({} vs {})",
                    batch.tmax().len(),
                    seq.tmax().len()
                ));
            }
            for (path, node) in batch.tmax().iter() {
                let other = seq
                    .tmax()
                    .node(path)
                    .ok_or_else(|| format!("node {path:?} missing after sequential build"))?;
                if node.stats != other.stats {
                    return Err(format!("statistics differ at node {path:?}"));
                }
                if (node.log_pe - other.log_pe).abs() > 1e-12 {
                    return Err(format!("cached likelihood differs at node {path:?}"));
                }
            }
            let (eb, es) = (
                batch.log_evidence().map_err(|e| e.to_string())?,
                seq.log_evidence().map_err(|e| e.to_string())?,
            );
            if (eb - es).abs() > 1e-12 * eb.abs().max(1.0) {
                return Err(format!("evidence differs: batch {eb} vs sequential {es}"));
            }
            let (tb, ts) = (
                batch.map_tree().map_err(|e| e.to_string())?,
                seq.map_tree().map_err(|e| e.to_string())?,
            );
            if tb.tree != ts.tree {
                return Err("MAP trees differ between batch and sequential builds".into());
            }
        }
        Ok("node statistics, evidence, and MAP tree identical across 4 configurations".into())
    });
}

#[test]
fn criterion_7_linear_complexity() {
    criterion(7, "linear complexity and constant-time updates", || {
        let cfg = grid_config(2, 5, 2);
        let series = gaussian_series(777, 20_000);
        let need = cfg.conditioning_len();

        let build = |n: usize| -> Result<f64, String> {
            let mut state =
                InferenceState::new(cfg.clone(), &series[..need]).map_err(|e| e.to_string())?;
            let started = Instant::now();
            for &x in &series[need..n] {
                state.update(x).map_err(|e| e.to_string())?;
            }
            let elapsed = started.elapsed().as_secs_f64();
            state.log_evidence().map_err(|e| e.to_string())?;
            Ok(elapsed)
        };

        let mut grow_ratios = Vec::new();
        let mut update_ratios = Vec::new();
        for _ in 0..3 {
            let t_half = build(10_000)?;
            let t_full = build(20_000)?;
            grow_ratios.push(t_full / t_half);

            // chunked per-update cost, early vs late in one stream
            let mut state =
                InferenceState::new(cfg.clone(), &series[..need]).map_err(|e| e.to_string())?;
            let mut early = 0.0;
            let mut late = 0.0;
            for (i, &x) in series[need..].iter().enumerate() {
                let span = (1_000..3_000).contains(&i) || (17_000..19_000).contains(&i);
                if span {
                    let started = Instant::now();
                    state.update(x).map_err(|e| e.to_string())?;
                    let dt = started.elapsed().as_secs_f64();
                    if i < 3_000 {
                        early += dt;
                    } else {
                        late += dt;
                    }
                } else {
                    state.update(x).map_err(|e| e.to_string())?;
                }
            }
            update_ratios.push(late / early);
        }
        grow_ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        update_ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let grow = grow_ratios[1];
        let per_update = update_ratios[1];
        if grow > 2.5 {
            return Err(format!("doubling n multiplies build time by {grow:.2} (> 2.5)"));
        }
        if per_update > 1.5 {
            return Err(format!(
                "late-stream updates cost {per_update:.2}x early ones (> 1.5)"
            ));
        }
        Ok(format!(
            "time(2n)/time(n) = {grow:.2}, late/early per-update = {per_update:.2} (medians of 3)"
        ))
    });
}

#[test]
fn criterion_8_prior_and_posterior_normalisation() {
    criterion(8, "prior and tree posterior normalise to one", || {
        for m in 2..=3usize {
            for depth in 0..=3usize {
                let beta = default_beta(m);
                let total: f64 = enumerate_trees(depth, m)
                    .map_err(|e| e.to_string())?
                    .iter()
                    .map(|t| t.log_prior(beta, depth).unwrap().exp())
                    .sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(format!("prior over m={m} depth={depth} sums to {total}"));
                }
            }
        }
        for (m, depth) in [(2usize, 1usize), (2, 2), (3, 1), (3, 2)] {
            let cfg = grid_config(m, depth, 1);
            let series = gaussian_series(808 + (m * 10 + depth) as u64, 40);
            let state =
                InferenceState::from_series(cfg, &series).map_err(|e| e.to_string())?;
            let total: f64 = enumerate_trees(depth, m)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|t| state.tree_log_posterior(t).unwrap().exp())
                .sum();
            if (total - 1.0).abs() > 1e-10 {
                return Err(format!(
                    "tree posterior over m={m} depth={depth} sums to {total}"
                ));
            }
        }
        Ok("prior exact to 1e-12 (m <= 3, depth <= 3); posteriors exact to 1e-10".into())
    });
}

#[test]
fn criterion_9_forecasting_tracks_the_oracle() {
    criterion(9, "rolling forecast tracks the true-model oracle", || {
        let generator = reference_generator();
        let mut details = Vec::new();
        for seed in [1u64, 2, 3] {
            let series = generator
                .simulate(1_000, seed, None)
                .map_err(|e| e.to_string())?;
            let report = rolling_forecast(&series, 0.5, &reference_config(), true)
                .map_err(|e| e.to_string())?;
            let mut se = 0.0;
            for t in report.n_train..series.len() {
                let f = generator
                    .true_forecast(&series[..t])
                    .map_err(|e| e.to_string())?;
                se += (f - series[t]) * (f - series[t]);
            }
            let oracle_mse = se / report.n_test as f64;
            let ratio = report.mse / oracle_mse;
            if !(0.9..=1.1).contains(&ratio) {
                return Err(format!(
                    "seed {seed}: model MSE {:.5} vs oracle {oracle_mse:.5} (ratio {ratio:.3})",
                    report.mse
                ));
            }
            details.push(format!("{ratio:.3}"));
        }
        Ok(format!("MSE ratio vs oracle on 3 paths: {}", details.join(", ")))
    });
}

// scalar-instance helpers shared by criteria 3 and 4

fn scalar_instance(seed: u64, n: usize) -> ScalarInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let taus = [1.5, 2.0, 3.0];
    let lambdas = [0.5, 1.0, 2.0];
    let mus = [0.0, 0.3];
    let s0s = [0.7, 1.0, 1.7];
    ScalarInstance {
        xs: (0..n)
            .map(|_| 1.3 * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        xts: (0..n)
            .map(|_| 1.1 * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        tau: taus[seed as usize % taus.len()],
        lambda: lambdas[(seed as usize / 3) % lambdas.len()],
        mu0: mus[seed as usize % mus.len()],
        s0: s0s[(seed as usize / 2) % s0s.len()],
    }
}

fn scalar_hyper(inst: &ScalarInstance) -> ArHyper {
    ArHyper::new(
        1,
        false,
        DVector::from_element(1, inst.mu0),
        DMatrix::from_element(1, 1, inst.s0),
        inst.tau,
        inst.lambda,
    )
    .unwrap()
}

fn scalar_stats(inst: &ScalarInstance) -> SuffStats {
    let mut stats = SuffStats::new(1);
    for (x, xt) in inst.xs.iter().zip(&inst.xts) {
        stats.update(*x, &DVector::from_element(1, *xt));
    }
    stats
}
