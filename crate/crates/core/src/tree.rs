//! Proper m-ary context trees and the observed-context tree.
//!
//! A context is a string of quantised recent samples, most recent first, so
//! the leaf `01` matches a past whose latest symbol quantises to 0 and the
//! one before it to 1. A tree is *proper* when every internal node has
//! exactly m children; its leaves form the discrete state set. `Tmax` is
//! the tree grown to exactly the contexts observed in the data plus all
//! their suffixes, with per-node sufficient statistics.

use std::collections::HashMap;

use crate::ar::SuffStats;
use crate::error::{CtarError, Result};
use crate::quantiser::Symbol;

/// Node path from the root, most recent symbol first.
pub type Path = Vec<Symbol>;

/// Render a path as a label string, e.g. `[0, 1]` -> "01".
pub fn path_label(path: &[Symbol]) -> String {
    path.iter().map(|s| s.to_string()).collect()
}

fn parse_label(label: &str, m: usize) -> Result<Path> {
    let mut path = Vec::with_capacity(label.len());
    for ch in label.chars() {
        let d = ch
            .to_digit(10)
            .ok_or_else(|| CtarError::Structure(format!("bad symbol '{ch}' in label {label:?}")))?;
        if d as usize >= m {
            return Err(CtarError::Structure(format!(
                "symbol {d} out of range for alphabet size {m} in label {label:?}"
            )));
        }
        path.push(d as Symbol);
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Shape {
    Leaf,
    Split(Vec<Shape>),
}

impl Shape {
    fn num_leaves(&self) -> usize {
        match self {
            Shape::Leaf => 1,
            Shape::Split(children) => children.iter().map(Shape::num_leaves).sum(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            Shape::Leaf => 0,
            Shape::Split(children) => 1 + children.iter().map(Shape::depth).max().unwrap_or(0),
        }
    }

    fn leaves_at_depth(&self, d: usize) -> usize {
        match self {
            Shape::Leaf => usize::from(d == 0),
            Shape::Split(children) => {
                if d == 0 {
                    0
                } else {
                    children.iter().map(|c| c.leaves_at_depth(d - 1)).sum()
                }
            }
        }
    }

    fn collect_leaves(&self, prefix: &mut Path, out: &mut Vec<Path>) {
        match self {
            Shape::Leaf => out.push(prefix.clone()),
            Shape::Split(children) => {
                for (j, child) in children.iter().enumerate() {
                    prefix.push(j as Symbol);
                    child.collect_leaves(prefix, out);
                    prefix.pop();
                }
            }
        }
    }
}

/// A proper m-ary context tree. Proper by construction: split nodes always
/// carry exactly m children.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContextTree {
    m: usize,
    root: Shape,
}

impl ContextTree {
    /// The single-state tree: the root is the only leaf.
    pub fn root_only(m: usize) -> Self {
        Self {
            m,
            root: Shape::Leaf,
        }
    }

    /// Reconstruct a proper tree from its leaf labels (digit strings).
    pub fn from_leaf_labels<S: AsRef<str>>(m: usize, labels: &[S]) -> Result<Self> {
        let mut paths = Vec::with_capacity(labels.len());
        for label in labels {
            paths.push(parse_label(label.as_ref(), m)?);
        }
        Self::from_leaves(m, paths)
    }

    /// Reconstruct a proper tree from its leaf paths.
    pub fn from_leaves(m: usize, paths: Vec<Path>) -> Result<Self> {
        if m < 2 {
            return Err(CtarError::Structure("alphabet size must be >= 2".into()));
        }
        if paths.is_empty() {
            return Err(CtarError::Structure("no leaves given".into()));
        }
        for path in &paths {
            for &s in path {
                if s as usize >= m {
                    return Err(CtarError::Structure(format!(
                        "symbol {s} out of range for alphabet size {m}"
                    )));
                }
            }
        }
        let root = Self::assemble(&paths, &Vec::new(), m)?;
        Ok(Self { m, root })
    }

    fn assemble(paths: &[Path], at: &Path, m: usize) -> Result<Shape> {
        let here = paths.iter().filter(|p| *p == at).count();
        if here > 1 {
            return Err(CtarError::Structure(format!(
                "duplicate leaf {:?}",
                path_label(at)
            )));
        }
        let below = paths
            .iter()
            .filter(|p| p.len() > at.len() && p.starts_with(at))
            .count();
        if here == 1 {
            if below > 0 {
                return Err(CtarError::Structure(format!(
                    "leaf {:?} has deeper leaves under it",
                    path_label(at)
                )));
            }
            return Ok(Shape::Leaf);
        }
        if below == 0 {
            return Err(CtarError::Structure(format!(
                "node {:?} has no leaves below it: tree is not proper",
                path_label(at)
            )));
        }
        let mut children = Vec::with_capacity(m);
        for j in 0..m {
            let mut next = at.clone();
            next.push(j as Symbol);
            children.push(Self::assemble(paths, &next, m)?);
        }
        Ok(Shape::Split(children))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of leaves, `|T|`.
    pub fn num_leaves(&self) -> usize {
        self.root.num_leaves()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn leaves_at_depth(&self, d: usize) -> usize {
        self.root.leaves_at_depth(d)
    }

    pub fn is_root_only(&self) -> bool {
        matches!(self.root, Shape::Leaf)
    }

    /// Leaf paths in lexicographic order.
    pub fn leaves(&self) -> Vec<Path> {
        let mut out = Vec::with_capacity(self.num_leaves());
        self.root.collect_leaves(&mut Vec::new(), &mut out);
        out
    }

    /// Leaf labels in lexicographic order.
    pub fn leaf_labels(&self) -> Vec<String> {
        self.leaves().iter().map(|p| path_label(p)).collect()
    }

    /// The unique leaf that is a suffix of the given past (most recent
    /// symbol first). Errors when the past is shorter than the matching
    /// branch.
    pub fn context_of(&self, past: &[Symbol]) -> Result<Path> {
        let mut node = &self.root;
        let mut path = Path::new();
        loop {
            match node {
                Shape::Leaf => return Ok(path),
                Shape::Split(children) => {
                    let Some(&sym) = past.get(path.len()) else {
                        return Err(CtarError::InvalidInput(format!(
                            "past of length {} is too short to resolve a context below {:?}",
                            past.len(),
                            path_label(&path)
                        )));
                    };
                    if sym as usize >= self.m {
                        return Err(CtarError::InvalidInput(format!(
                            "symbol {sym} out of range for alphabet size {}",
                            self.m
                        )));
                    }
                    path.push(sym);
                    node = &children[sym as usize];
                }
            }
        }
    }

    /// Log prior probability under the branching prior with parameter
    /// `beta`: `(|T|-1) ln alpha + (|T| - L_D(T)) ln beta`, with
    /// `alpha = (1-beta)^{1/(m-1)}`, over trees of maximum depth
    /// `max_depth`.
    pub fn log_prior(&self, beta: f64, max_depth: usize) -> Result<f64> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(CtarError::Config(format!(
                "beta must be in (0, 1), got {beta}"
            )));
        }
        if self.depth() > max_depth {
            return Err(CtarError::Structure(format!(
                "tree depth {} exceeds maximum depth {max_depth}",
                self.depth()
            )));
        }
        let leaves = self.num_leaves() as f64;
        let at_max = self.leaves_at_depth(max_depth) as f64;
        let ln_alpha = (1.0 - beta).ln() / (self.m - 1) as f64;
        Ok((leaves - 1.0) * ln_alpha + (leaves - at_max) * beta.ln())
    }
}

/// Default prior branching parameter, `1 - 2^{-(m-1)}`.
pub fn default_beta(m: usize) -> f64 {
    1.0 - 0.5_f64.powi(m as i32 - 1)
}

/// Number of proper m-ary trees of depth at most `depth`, saturating.
pub fn count_trees(depth: usize, m: usize) -> u64 {
    let mut count: u64 = 1;
    for _ in 0..depth {
        count = count
            .saturating_pow(m as u32)
            .saturating_add(1);
    }
    count
}

const ENUMERATION_GUARD: u64 = 1_000_000;

/// Exhaustive enumeration of all proper m-ary trees of depth at most
/// `depth`; guarded to a million trees. Intended for small depths.
pub fn enumerate_trees(depth: usize, m: usize) -> Result<Vec<ContextTree>> {
    if m < 2 {
        return Err(CtarError::Structure("alphabet size must be >= 2".into()));
    }
    let total = count_trees(depth, m);
    if total > ENUMERATION_GUARD {
        return Err(CtarError::Capacity(format!(
            "class of trees with depth {depth}, alphabet {m} has {total} members (> {ENUMERATION_GUARD})"
        )));
    }
    let shapes = enumerate_shapes(depth, m);
    Ok(shapes
        .into_iter()
        .map(|root| ContextTree { m, root })
        .collect())
}

fn enumerate_shapes(depth: usize, m: usize) -> Vec<Shape> {
    if depth == 0 {
        return vec![Shape::Leaf];
    }
    let inner = enumerate_shapes(depth - 1, m);
    let mut out = vec![Shape::Leaf];
    let mut combo = vec![0usize; m];
    loop {
        out.push(Shape::Split(
            combo.iter().map(|&i| inner[i].clone()).collect(),
        ));
        let mut pos = m;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            combo[pos] += 1;
            if combo[pos] < inner.len() {
                break;
            }
            combo[pos] = 0;
        }
    }
}

/// Per-node payload of the observed-context tree.
#[derive(Debug, Clone)]
pub struct NodeStats {
    pub stats: SuffStats,
    /// Cached log marginal likelihood of the node's samples.
    pub log_pe: f64,
}

impl NodeStats {
    fn new(dim: usize) -> Self {
        Self {
            stats: SuffStats::new(dim),
            log_pe: 0.0,
        }
    }
}

/// The tree of observed contexts: every context of length 0..=depth seen in
/// the data, hash-addressed by path. Leaves sit at the maximum depth; the
/// number of nodes grows with the observed contexts, not with `m^depth`.
#[derive(Debug, Clone)]
pub struct Tmax {
    m: usize,
    depth: usize,
    dim: usize,
    nodes: HashMap<Path, NodeStats>,
}

impl Tmax {
    /// Empty tree holding only the root.
    pub fn new(m: usize, depth: usize, dim: usize) -> Self {
        let mut nodes = HashMap::new();
        nodes.insert(Path::new(), NodeStats::new(dim));
        Self {
            m,
            depth,
            dim,
            nodes,
        }
    }

    /// Structure-only build from a symbol sequence. `symbols` holds the
    /// `depth` conditioning symbols followed by the `n` observed ones; each
    /// observation inserts its full context path and bumps the membership
    /// count of the `depth + 1` nodes along it.
    pub fn from_symbols(symbols: &[Symbol], depth: usize, m: usize) -> Result<Self> {
        if symbols.len() < depth + 1 {
            return Err(CtarError::InvalidInput(format!(
                "need at least {} symbols ({} conditioning + 1), got {}",
                depth + 1,
                depth,
                symbols.len()
            )));
        }
        let mut tmax = Self::new(m, depth, 0);
        let zero = nalgebra::DVector::zeros(0);
        for i in depth..symbols.len() {
            let mut ctx = Path::with_capacity(depth);
            for k in 1..=depth {
                ctx.push(symbols[i - k]);
            }
            tmax.record(&ctx, 0.0, &zero)?;
        }
        Ok(tmax)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn node(&self, path: &[Symbol]) -> Option<&NodeStats> {
        self.nodes.get(path)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Path, &NodeStats)> {
        self.nodes.iter()
    }

    /// Fold one observation into the `depth + 1` nodes on its context
    /// path, creating missing nodes. Returns the paths touched so callers
    /// can refresh cached per-node quantities.
    pub fn record(&mut self, ctx: &[Symbol], x: f64, xt: &nalgebra::DVector<f64>) -> Result<Vec<Path>> {
        if ctx.len() != self.depth {
            return Err(CtarError::InvalidInput(format!(
                "context has length {}, expected {}",
                ctx.len(),
                self.depth
            )));
        }
        for &s in ctx {
            if s as usize >= self.m {
                return Err(CtarError::InvalidInput(format!(
                    "symbol {s} out of range for alphabet size {}",
                    self.m
                )));
            }
        }
        let mut touched = Vec::with_capacity(self.depth + 1);
        for d in 0..=self.depth {
            let path = ctx[..d].to_vec();
            let node = self
                .nodes
                .entry(path.clone())
                .or_insert_with(|| NodeStats::new(self.dim));
            node.stats.update(x, xt);
            touched.push(path);
        }
        Ok(touched)
    }

    pub fn node_mut(&mut self, path: &[Symbol]) -> Option<&mut NodeStats> {
        self.nodes.get_mut(path)
    }

    /// Paths grouped by depth, deepest first; the iteration order used by
    /// the bottom-up recursions.
    pub fn paths_by_depth_desc(&self) -> Vec<Vec<&Path>> {
        let mut buckets: Vec<Vec<&Path>> = vec![Vec::new(); self.depth + 1];
        for path in self.nodes.keys() {
            buckets[path.len()].push(path);
        }
        buckets.reverse();
        buckets
    }
}
