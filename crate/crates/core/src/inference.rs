//! Exact Bayesian inference over context trees.
//!
//! The model class is huge (doubly exponential in the depth bound) but the
//! posterior factorises along the observed-context tree, so three
//! bottom-up recursions give exact answers in time linear in the data:
//!
//! - evidence: each node mixes "stop here" against the product of its
//!   children (log-sum-exp), and the root value is the normalising
//!   constant of the posterior over trees and parameters;
//! - MAP tree: the same recursion with max in place of sum, followed by a
//!   top-down prune wherever stopping wins;
//! - top-k trees: each node keeps its k best (choice, child-ranks)
//!   candidates, combining children through lazy ranked cross-products.
//!
//! `InferenceState` carries the observed-context tree plus a ring buffer of
//! recent samples, so a new observation touches exactly `depth + 1` nodes.
//! A brute-force enumeration over all trees backs the recursions as a test
//! oracle for small depths.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use nalgebra::DVector;
use serde::Serialize;

use crate::ar::{self, ArHyper, SuffStats};
use crate::error::{CtarError, Result};
use crate::quantiser::{Quantiser, Symbol};
use crate::tree::{path_label, ContextTree, Path, Tmax};

/// Model configuration: quantiser, maximum context depth, tree prior
/// parameter, and the leaf-model hyperparameters.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    quantiser: Quantiser,
    depth: usize,
    beta: f64,
    hyper: ArHyper,
}

impl ModelConfig {
    pub fn new(quantiser: Quantiser, depth: usize, beta: f64, hyper: ArHyper) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(CtarError::Config(format!(
                "beta must be in (0, 1), got {beta}"
            )));
        }
        if beta < 0.5 {
            log::warn!(
                "beta = {beta} is below 1/2: the MAP-tree optimality guarantee no longer applies"
            );
        }
        Ok(Self {
            quantiser,
            depth,
            beta,
            hyper,
        })
    }

    /// Configuration with the default prior parameter `1 - 2^{-(m-1)}`.
    pub fn with_default_beta(quantiser: Quantiser, depth: usize, hyper: ArHyper) -> Result<Self> {
        let beta = crate::tree::default_beta(quantiser.alphabet_size());
        Self::new(quantiser, depth, beta, hyper)
    }

    pub fn quantiser(&self) -> &Quantiser {
        &self.quantiser
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn hyper(&self) -> &ArHyper {
        &self.hyper
    }

    pub fn alphabet_size(&self) -> usize {
        self.quantiser.alphabet_size()
    }

    /// Samples consumed as conditioning before the likelihood starts: the
    /// context needs `depth` and the regressor needs `order`.
    pub fn conditioning_len(&self) -> usize {
        self.depth.max(self.hyper.order())
    }
}

/// A tree with its posterior score decomposition.
#[derive(Debug, Clone)]
pub struct MapResult {
    pub tree: ContextTree,
    pub log_prior: f64,
    /// Sum of per-leaf log marginal likelihoods.
    pub log_marginal: f64,
    /// `log_prior + log_marginal - log_evidence`.
    pub log_posterior: f64,
}

/// Inference state over a growing series: the observed-context tree with
/// per-node statistics plus the recent-sample buffer.
///
/// Updates are single-writer; queries between updates may run concurrently.
#[derive(Debug, Clone)]
pub struct InferenceState {
    config: ModelConfig,
    tmax: Tmax,
    raw: VecDeque<f64>,
    syms: VecDeque<Symbol>,
    n: usize,
}

impl InferenceState {
    /// Start from conditioning samples only. `init` must supply at least
    /// `max(depth, order)` values; only that many trailing values are kept.
    pub fn new(config: ModelConfig, init: &[f64]) -> Result<Self> {
        let need = config.conditioning_len();
        if init.len() < need {
            return Err(CtarError::InvalidInput(format!(
                "need {need} conditioning samples, got {}",
                init.len()
            )));
        }
        let tail = &init[init.len() - need..];
        let mut raw = VecDeque::with_capacity(need + 1);
        let mut syms = VecDeque::with_capacity(config.depth + 1);
        for &x in tail {
            if !x.is_finite() {
                return Err(CtarError::InvalidInput(format!(
                    "non-finite conditioning sample {x}"
                )));
            }
            raw.push_back(x);
        }
        for &x in &tail[need - config.depth..] {
            syms.push_back(config.quantiser.quantize(x)?);
        }
        let tmax = Tmax::new(config.alphabet_size(), config.depth, config.hyper.dim());
        Ok(Self {
            config,
            tmax,
            raw,
            syms,
            n: 0,
        })
    }

    /// Batch build: the leading `max(depth, order)` samples condition the
    /// model and the rest are folded in, with one likelihood evaluation per
    /// node at the end.
    pub fn from_series(config: ModelConfig, series: &[f64]) -> Result<Self> {
        let need = config.conditioning_len();
        if series.len() < need {
            return Err(CtarError::InvalidInput(format!(
                "series of length {} is shorter than the {need} conditioning samples",
                series.len()
            )));
        }
        let symbols = config.quantiser.quantize_series(series)?;
        let mut state = Self::new(config, &series[..need])?;
        let depth = state.config.depth;
        let mut ctx = vec![0 as Symbol; depth];
        for i in need..series.len() {
            for (k, slot) in ctx.iter_mut().enumerate() {
                *slot = symbols[i - 1 - k];
            }
            let xt = state.config.hyper.regressor(series, i)?;
            state.tmax.record(&ctx, series[i], &xt)?;
            state.n += 1;
        }
        // refresh the per-node likelihood cache in one pass
        let hyper = state.config.hyper.clone();
        let paths: Vec<Path> = state.tmax.iter().map(|(p, _)| p.clone()).collect();
        for path in paths {
            let node = state.tmax.node_mut(&path).expect("path just listed");
            node.log_pe = ar::log_pe(&node.stats, &hyper)?;
        }
        // ring buffers reflect the end of the series
        state.raw.clear();
        for &x in &series[series.len() - need..] {
            state.raw.push_back(x);
        }
        state.syms.clear();
        for &s in &symbols[symbols.len() - depth..] {
            state.syms.push_back(s);
        }
        Ok(state)
    }

    /// Fold in one new sample: exactly `depth + 1` nodes are touched and
    /// their cached likelihoods refreshed.
    pub fn update(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(CtarError::InvalidInput(format!("non-finite sample {x}")));
        }
        let ctx = self.current_context();
        let xt = self.current_regressor();
        let touched = self.tmax.record(&ctx, x, &xt)?;
        let hyper = self.config.hyper.clone();
        for path in &touched {
            let node = self.tmax.node_mut(path).expect("touched node exists");
            node.log_pe = ar::log_pe(&node.stats, &hyper)?;
        }
        self.raw.push_back(x);
        if self.raw.len() > self.config.conditioning_len() {
            self.raw.pop_front();
        }
        if self.config.depth > 0 {
            self.syms.push_back(self.config.quantiser.quantize(x)?);
            if self.syms.len() > self.config.depth {
                self.syms.pop_front();
            }
        }
        self.n += 1;
        Ok(())
    }

    /// Number of samples folded into the likelihood.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tmax(&self) -> &Tmax {
        &self.tmax
    }

    /// Context of the next (not yet observed) sample, most recent symbol
    /// first.
    pub fn current_context(&self) -> Vec<Symbol> {
        self.syms.iter().rev().copied().collect()
    }

    /// Regressor of the next sample.
    pub fn current_regressor(&self) -> DVector<f64> {
        let hyper = &self.config.hyper;
        let mut xt = DVector::zeros(hyper.dim());
        for k in 0..hyper.order() {
            xt[k] = self.raw[self.raw.len() - 1 - k];
        }
        if hyper.intercept() {
            xt[hyper.order()] = 1.0;
        }
        xt
    }

    /// Statistics of the node at `path`; empty statistics when the context
    /// was never observed.
    pub fn leaf_stats(&self, path: &[Symbol]) -> SuffStats {
        self.tmax
            .node(path)
            .map(|n| n.stats.clone())
            .unwrap_or_else(|| SuffStats::new(self.config.hyper.dim()))
    }

    fn require_data(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CtarError::InvalidInput(
                "no samples beyond the conditioning prefix".into(),
            ));
        }
        Ok(())
    }

    /// Log evidence: the exact normalising constant of the posterior, with
    /// trees and leaf parameters integrated out.
    ///
    /// Bottom-up: depth-bound nodes keep their own log marginal, inner
    /// nodes mix stopping against the product over children; contexts never
    /// observed contribute probability one.
    pub fn log_evidence(&self) -> Result<f64> {
        self.require_data()?;
        let depth = self.config.depth;
        let ln_beta = self.config.beta.ln();
        let ln_1mb = (1.0 - self.config.beta).ln();
        let mut weighted: HashMap<&Path, f64> = HashMap::with_capacity(self.tmax.len());
        for level in self.tmax.paths_by_depth_desc() {
            for path in level {
                let node = self.tmax.node(path).expect("listed node exists");
                let value = if path.len() == depth {
                    node.log_pe
                } else {
                    let mut children = 0.0;
                    let mut child = path.clone();
                    for j in 0..self.config.alphabet_size() {
                        child.push(j as Symbol);
                        children += weighted.get(&child).copied().unwrap_or(0.0);
                        child.pop();
                    }
                    log_sum_exp2(ln_beta + node.log_pe, ln_1mb + children)
                };
                weighted.insert(path, value);
            }
        }
        Ok(*weighted.get(&Path::new()).expect("root always present"))
    }

    /// Log maximal score of an entirely unobserved subtree rooted at each
    /// depth. At the bound it is 0; above, stopping (`ln beta`) competes
    /// with splitting into further unobserved nodes. For `beta >= 1/2`
    /// stopping always wins.
    fn empty_pm(&self) -> Vec<f64> {
        let depth = self.config.depth;
        let m = self.config.alphabet_size() as f64;
        let ln_beta = self.config.beta.ln();
        let ln_1mb = (1.0 - self.config.beta).ln();
        let mut e = vec![0.0; depth + 1];
        for d in (0..depth).rev() {
            e[d] = ln_beta.max(ln_1mb + m * e[d + 1]);
        }
        e
    }

    fn log_pm_map(&self, empty: &[f64]) -> HashMap<&Path, f64> {
        let depth = self.config.depth;
        let ln_beta = self.config.beta.ln();
        let ln_1mb = (1.0 - self.config.beta).ln();
        let mut maximal: HashMap<&Path, f64> = HashMap::with_capacity(self.tmax.len());
        for level in self.tmax.paths_by_depth_desc() {
            for path in level {
                let node = self.tmax.node(path).expect("listed node exists");
                let value = if path.len() == depth {
                    node.log_pe
                } else {
                    let mut children = 0.0;
                    let mut child = path.clone();
                    for j in 0..self.config.alphabet_size() {
                        child.push(j as Symbol);
                        children += maximal
                            .get(&child)
                            .copied()
                            .unwrap_or(empty[path.len() + 1]);
                        child.pop();
                    }
                    (ln_beta + node.log_pe).max(ln_1mb + children)
                };
                maximal.insert(path, value);
            }
        }
        maximal
    }

    /// The a-posteriori most likely tree, with its exact posterior.
    ///
    /// Ties between stopping and splitting resolve to the smaller tree.
    pub fn map_tree(&self) -> Result<MapResult> {
        self.require_data()?;
        let empty = self.empty_pm();
        let maximal = self.log_pm_map(&empty);
        let mut leaves = Vec::new();
        self.extract_map(&Path::new(), &maximal, &empty, &mut leaves);
        let tree = ContextTree::from_leaves(self.config.alphabet_size(), leaves)?;
        self.score_tree(tree)
    }

    fn extract_map(
        &self,
        path: &Path,
        maximal: &HashMap<&Path, f64>,
        empty: &[f64],
        leaves: &mut Vec<Path>,
    ) {
        let depth = self.config.depth;
        let d = path.len();
        if d == depth {
            leaves.push(path.clone());
            return;
        }
        let node = self.tmax.node(path).expect("extraction visits observed nodes");
        let ln_beta = self.config.beta.ln();
        let ln_1mb = (1.0 - self.config.beta).ln();
        let mut children = 0.0;
        for j in 0..self.config.alphabet_size() {
            let mut child = path.clone();
            child.push(j as Symbol);
            children += maximal.get(&child).copied().unwrap_or(empty[d + 1]);
        }
        if ln_beta + node.log_pe >= ln_1mb + children {
            leaves.push(path.clone());
            return;
        }
        for j in 0..self.config.alphabet_size() {
            let mut child = path.clone();
            child.push(j as Symbol);
            if self.tmax.node(&child).is_some() {
                self.extract_map(&child, maximal, empty, leaves);
            } else {
                self.extract_empty(child, empty, leaves);
            }
        }
    }

    fn extract_empty(&self, path: Path, empty: &[f64], leaves: &mut Vec<Path>) {
        let d = path.len();
        if d == self.config.depth {
            leaves.push(path);
            return;
        }
        let ln_beta = self.config.beta.ln();
        let ln_1mb = (1.0 - self.config.beta).ln();
        let m = self.config.alphabet_size() as f64;
        if ln_beta >= ln_1mb + m * empty[d + 1] {
            leaves.push(path);
            return;
        }
        for j in 0..self.config.alphabet_size() {
            let mut child = path.clone();
            child.push(j as Symbol);
            self.extract_empty(child, empty, leaves);
        }
    }

    /// Score an arbitrary tree of the class: prior, per-leaf marginals, and
    /// posterior against the evidence.
    pub fn score_tree(&self, tree: ContextTree) -> Result<MapResult> {
        let log_prior = tree.log_prior(self.config.beta, self.config.depth)?;
        let log_marginal: f64 = tree
            .leaves()
            .iter()
            .map(|leaf| self.tmax.node(leaf).map(|n| n.log_pe).unwrap_or(0.0))
            .sum();
        let log_posterior = log_prior + log_marginal - self.log_evidence()?;
        Ok(MapResult {
            tree,
            log_prior,
            log_marginal,
            log_posterior,
        })
    }

    /// Log posterior probability of a given tree.
    pub fn tree_log_posterior(&self, tree: &ContextTree) -> Result<f64> {
        if tree.m() != self.config.alphabet_size() {
            return Err(CtarError::Structure(format!(
                "tree alphabet {} does not match model alphabet {}",
                tree.m(),
                self.config.alphabet_size()
            )));
        }
        Ok(self.score_tree(tree.clone())?.log_posterior)
    }

    /// The `k` a-posteriori most likely trees, in descending posterior
    /// order. Asking for more trees than the class holds returns them all.
    pub fn top_k(&self, k: usize) -> Result<Vec<MapResult>> {
        self.require_data()?;
        if k == 0 {
            return Err(CtarError::InvalidInput("k must be >= 1".into()));
        }
        let depth = self.config.depth;
        let m = self.config.alphabet_size();
        let ln_beta = self.config.beta.ln();
        let ln_1mb = (1.0 - self.config.beta).ln();

        // ranked candidates for entirely unobserved subtrees, per depth
        let mut empty_lists: Vec<Vec<Cand>> = vec![Vec::new(); depth + 1];
        empty_lists[depth] = vec![Cand {
            score: 0.0,
            choice: Choice::Leaf,
        }];
        for d in (0..depth).rev() {
            let children: Vec<&[Cand]> = (0..m).map(|_| empty_lists[d + 1].as_slice()).collect();
            let mut cands = vec![Cand {
                score: ln_beta,
                choice: Choice::Leaf,
            }];
            for (score, ranks) in top_k_sums(&children, k) {
                cands.push(Cand {
                    score: ln_1mb + score,
                    choice: Choice::Split(ranks),
                });
            }
            sort_truncate(&mut cands, k);
            empty_lists[d] = cands;
        }

        // ranked candidates for observed nodes, deepest level first
        let mut lists: HashMap<&Path, Vec<Cand>> = HashMap::with_capacity(self.tmax.len());
        for level in self.tmax.paths_by_depth_desc() {
            for path in level {
                let node = self.tmax.node(path).expect("listed node exists");
                let d = path.len();
                let mut cands = if d == depth {
                    vec![Cand {
                        score: node.log_pe,
                        choice: Choice::Leaf,
                    }]
                } else {
                    let mut child_lists: Vec<&[Cand]> = Vec::with_capacity(m);
                    let mut child = path.clone();
                    for j in 0..m {
                        child.push(j as Symbol);
                        child_lists.push(match lists.get(&child) {
                            Some(list) => list.as_slice(),
                            None => empty_lists[d + 1].as_slice(),
                        });
                        child.pop();
                    }
                    let mut cands = vec![Cand {
                        score: ln_beta + node.log_pe,
                        choice: Choice::Leaf,
                    }];
                    for (score, ranks) in top_k_sums(&child_lists, k) {
                        cands.push(Cand {
                            score: ln_1mb + score,
                            choice: Choice::Split(ranks),
                        });
                    }
                    cands
                };
                sort_truncate(&mut cands, k);
                lists.insert(path, cands);
            }
        }

        let root = Path::new();
        let root_list = lists.get(&root).expect("root always present").clone();
        let mut results = Vec::with_capacity(root_list.len());
        for rank in 0..root_list.len().min(k) {
            let mut leaves = Vec::new();
            self.collect_topk_leaves(NodeRef::Observed(&root), rank, &lists, &empty_lists, &mut leaves);
            let tree = ContextTree::from_leaves(m, leaves)?;
            results.push(self.score_tree(tree)?);
        }
        results.sort_by(|a, b| cmp_desc(a.log_posterior, b.log_posterior));
        Ok(results)
    }

    fn collect_topk_leaves(
        &self,
        node: NodeRef<'_>,
        rank: usize,
        lists: &HashMap<&Path, Vec<Cand>>,
        empty_lists: &[Vec<Cand>],
        leaves: &mut Vec<Path>,
    ) {
        let (path, cand) = match node {
            NodeRef::Observed(path) => (path.clone(), &lists[path][rank]),
            NodeRef::Empty(path) => {
                let cand = &empty_lists[path.len()][rank];
                (path, cand)
            }
        };
        match &cand.choice {
            Choice::Leaf => leaves.push(path),
            Choice::Split(ranks) => {
                for (j, &child_rank) in ranks.iter().enumerate() {
                    let mut child = path.clone();
                    child.push(j as Symbol);
                    if let Some((stored, _)) = lists.get_key_value(&child) {
                        self.collect_topk_leaves(
                            NodeRef::Observed(stored),
                            child_rank,
                            lists,
                            empty_lists,
                            leaves,
                        );
                    } else {
                        self.collect_topk_leaves(
                            NodeRef::Empty(child),
                            child_rank,
                            lists,
                            empty_lists,
                            leaves,
                        );
                    }
                }
            }
        }
    }
}

enum NodeRef<'a> {
    Observed(&'a Path),
    Empty(Path),
}

#[derive(Debug, Clone)]
struct Cand {
    score: f64,
    choice: Choice,
}

#[derive(Debug, Clone)]
enum Choice {
    Leaf,
    Split(Vec<usize>),
}

fn cmp_desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Stable sort by descending score, keeping at most `k`. Stability means a
/// leaf candidate inserted ahead of equally scored splits stays ahead, so
/// ties prune.
fn sort_truncate(cands: &mut Vec<Cand>, k: usize) {
    cands.sort_by(|a, b| cmp_desc(a.score, b.score));
    cands.truncate(k);
}

struct HeapItem {
    score: f64,
    ranks: Vec<usize>,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.score == other.score && self.ranks == other.ranks
    }
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on score; rank vector as a deterministic tie-break
        self.score
            .partial_cmp(&other.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.ranks.cmp(&self.ranks))
    }
}

/// Top-k combinations of one candidate per list, ranked by summed score,
/// explored best-first without materialising the full cross-product.
fn top_k_sums(lists: &[&[Cand]], k: usize) -> Vec<(f64, Vec<usize>)> {
    if lists.iter().any(|l| l.is_empty()) {
        return Vec::new();
    }
    let start: Vec<usize> = vec![0; lists.len()];
    let score_of = |ranks: &[usize]| -> f64 {
        ranks
            .iter()
            .zip(lists)
            .map(|(&r, list)| list[r].score)
            .sum()
    };
    let mut heap = BinaryHeap::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    seen.insert(start.clone());
    heap.push(HeapItem {
        score: score_of(&start),
        ranks: start,
    });
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let Some(item) = heap.pop() else { break };
        for j in 0..lists.len() {
            if item.ranks[j] + 1 < lists[j].len() {
                let mut next = item.ranks.clone();
                next[j] += 1;
                if seen.insert(next.clone()) {
                    heap.push(HeapItem {
                        score: score_of(&next),
                        ranks: next,
                    });
                }
            }
        }
        out.push((item.score, item.ranks));
    }
    out
}

fn log_sum_exp2(a: f64, b: f64) -> f64 {
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Unnormalised log posterior score of every tree in the class, by direct
/// enumeration: each tree routes every sample to its leaf and accumulates
/// statistics independently of the recursion machinery. Oracle for small
/// depths; guarded like tree enumeration.
pub fn brute_force_scores(
    series: &[f64],
    config: &ModelConfig,
) -> Result<Vec<(ContextTree, f64)>> {
    let need = config.conditioning_len();
    if series.len() <= need {
        return Err(CtarError::InvalidInput(format!(
            "series of length {} has no samples beyond the {need} conditioning ones",
            series.len()
        )));
    }
    let symbols = config.quantiser().quantize_series(series)?;
    let trees = crate::tree::enumerate_trees(config.depth(), config.alphabet_size())?;
    let mut ctx = vec![0 as Symbol; config.depth()];
    let mut out = Vec::with_capacity(trees.len());
    for tree in trees {
        let mut stats: HashMap<Path, SuffStats> = HashMap::new();
        for i in need..series.len() {
            for (k, slot) in ctx.iter_mut().enumerate() {
                *slot = symbols[i - 1 - k];
            }
            let leaf = tree.context_of(&ctx)?;
            let xt = config.hyper().regressor(series, i)?;
            stats
                .entry(leaf)
                .or_insert_with(|| SuffStats::new(config.hyper().dim()))
                .update(series[i], &xt);
        }
        let mut score = tree.log_prior(config.beta(), config.depth())?;
        for leaf_stats in stats.values() {
            score += ar::log_pe(leaf_stats, config.hyper())?;
        }
        out.push((tree, score));
    }
    Ok(out)
}

/// Log evidence by brute-force enumeration over the whole tree class.
pub fn brute_force_evidence(series: &[f64], config: &ModelConfig) -> Result<f64> {
    let scores = brute_force_scores(series, config)?;
    Ok(log_sum_exp(
        &scores.iter().map(|(_, s)| *s).collect::<Vec<_>>(),
    ))
}

/// One node of the serialised tree report.
#[derive(Debug, Clone, Serialize)]
pub struct TreeNodeReport {
    pub path: String,
    pub is_leaf: bool,
    pub count: usize,
    pub log_pe: f64,
}

/// Machine-readable tree summary with stable field order.
#[derive(Debug, Clone, Serialize)]
pub struct TreeReport {
    pub m: usize,
    #[serde(rename = "D")]
    pub depth: usize,
    pub beta: f64,
    pub nodes: Vec<TreeNodeReport>,
    pub map_posterior: f64,
}

impl TreeReport {
    /// Report every node of `result.tree`, annotated with the statistics it
    /// holds in the inference state (zero for unobserved contexts).
    pub fn new(result: &MapResult, state: &InferenceState) -> Self {
        let leaves: HashSet<Path> = result.tree.leaves().into_iter().collect();
        let mut paths: Vec<(Path, bool)> = Vec::new();
        // every prefix of a leaf is a node of the tree
        let mut seen: HashSet<Path> = HashSet::new();
        for leaf in &leaves {
            for d in 0..=leaf.len() {
                let p = leaf[..d].to_vec();
                if seen.insert(p.clone()) {
                    let is_leaf = leaves.contains(&p);
                    paths.push((p, is_leaf));
                }
            }
        }
        paths.sort_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));
        let nodes = paths
            .into_iter()
            .map(|(path, is_leaf)| {
                let (count, log_pe) = state
                    .tmax()
                    .node(&path)
                    .map(|n| (n.stats.count(), n.log_pe))
                    .unwrap_or((0, 0.0));
                TreeNodeReport {
                    path: path_label(&path),
                    is_leaf,
                    count,
                    log_pe,
                }
            })
            .collect();
        Self {
            m: result.tree.m(),
            depth: state.config().depth(),
            beta: state.config().beta(),
            nodes,
            map_posterior: result.log_posterior.exp(),
        }
    }
}
