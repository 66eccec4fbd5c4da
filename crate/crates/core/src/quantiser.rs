//! Threshold quantisers mapping real samples to a finite alphabet.
//!
//! A quantiser with thresholds `c_1 < ... < c_{m-1}` maps a real `x` to the
//! number of thresholds strictly below it, so the alphabet is `{0, ..., m-1}`
//! and a value equal to a threshold falls in the lower bin. Candidate
//! threshold sets for tuning are drawn from evenly spaced quantiles of the
//! data between the 10th and 90th percentiles.

use crate::error::{CtarError, Result};

/// Discrete symbol produced by a quantiser.
pub type Symbol = u8;

/// Largest supported alphabet size. Keeps context labels single-digit.
pub const MAX_ALPHABET: usize = 10;

/// Monotone threshold quantiser over a finite alphabet.
///
/// Immutable after construction; shared reads are safe.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantiser {
    thresholds: Vec<f64>,
}

impl Quantiser {
    /// Build a quantiser from strictly increasing thresholds.
    /// The alphabet size is `thresholds.len() + 1`.
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(CtarError::Config(
                "quantiser needs at least one threshold (alphabet size >= 2)".into(),
            ));
        }
        if thresholds.len() + 1 > MAX_ALPHABET {
            return Err(CtarError::Config(format!(
                "alphabet size {} exceeds the supported maximum {}",
                thresholds.len() + 1,
                MAX_ALPHABET
            )));
        }
        for (i, c) in thresholds.iter().enumerate() {
            if !c.is_finite() {
                return Err(CtarError::Config(format!("threshold {i} is not finite")));
            }
            if i > 0 && thresholds[i - 1] >= *c {
                return Err(CtarError::Config(format!(
                    "thresholds must be strictly increasing: c_{} = {} >= c_{} = {}",
                    i,
                    thresholds[i - 1],
                    i + 1,
                    c
                )));
            }
        }
        Ok(Self { thresholds })
    }

    pub fn alphabet_size(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Map `x` to the number of thresholds strictly below it.
    /// Values equal to a threshold fall in the lower bin.
    pub fn quantize(&self, x: f64) -> Result<Symbol> {
        if !x.is_finite() {
            return Err(CtarError::InvalidInput(format!(
                "cannot quantise non-finite sample {x}"
            )));
        }
        Ok(self.thresholds.iter().filter(|&&c| x > c).count() as Symbol)
    }

    /// Quantise a whole series; errors carry the offending index.
    pub fn quantize_series(&self, series: &[f64]) -> Result<Vec<Symbol>> {
        series
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                self.quantize(x).map_err(|_| {
                    CtarError::InvalidInput(format!("non-finite sample {x} at index {i}"))
                })
            })
            .collect()
    }
}

/// Linear-interpolation quantile of `sorted` (ascending) at level `p` in [0, 1].
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let w = h - lo as f64;
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

/// Evenly spaced quantile levels between the 10th and 90th percentiles.
fn grid_levels(grid_points: usize) -> Vec<f64> {
    if grid_points == 1 {
        return vec![0.5];
    }
    (0..grid_points)
        .map(|i| 0.1 + 0.8 * i as f64 / (grid_points - 1) as f64)
        .collect()
}

fn grid_values(series: &[f64], grid_points: usize) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(CtarError::InvalidInput("empty series".into()));
    }
    if grid_points == 0 {
        return Err(CtarError::Config("grid_points must be >= 1".into()));
    }
    let mut sorted: Vec<f64> = series.to_vec();
    if sorted.iter().any(|x| !x.is_finite()) {
        return Err(CtarError::InvalidInput(
            "series contains non-finite values".into(),
        ));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(CtarError::Config(
            "constant series: quantile grid is degenerate".into(),
        ));
    }
    let mut values: Vec<f64> = grid_levels(grid_points)
        .iter()
        .map(|&p| quantile_sorted(&sorted, p))
        .collect();
    values.dedup();
    Ok(values)
}

/// Candidate threshold sets for an `m`-ary quantiser, drawn from evenly
/// spaced quantiles of the series between the 10th and 90th percentiles.
///
/// For `m = 2` each grid value is a candidate on its own. For `m = 3` on a
/// centred series (grid straddles zero) the candidates are symmetric pairs
/// `(-c, c)`; otherwise, and for larger `m`, all strictly increasing
/// `(m-1)`-subsets of the grid are returned (see
/// [`threshold_grid_exhaustive`]).
pub fn threshold_grid(series: &[f64], m: usize, grid_points: usize) -> Result<Vec<Vec<f64>>> {
    if m < 2 {
        return Err(CtarError::Config("alphabet size must be >= 2".into()));
    }
    let values = grid_values(series, grid_points)?;
    if m == 2 {
        return Ok(values.into_iter().map(|c| vec![c]).collect());
    }
    if m == 3 {
        let centred = values.first().map(|v| *v < 0.0).unwrap_or(false)
            && values.last().map(|v| *v > 0.0).unwrap_or(false);
        if centred {
            let mut cs: Vec<f64> = values.iter().map(|v| v.abs()).filter(|c| *c > 0.0).collect();
            cs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cs.dedup();
            let pairs: Vec<Vec<f64>> = cs.into_iter().map(|c| vec![-c, c]).collect();
            if !pairs.is_empty() {
                return Ok(pairs);
            }
        }
    }
    increasing_subsets(&values, m)
}

/// All strictly increasing `(m-1)`-subsets of the quantile grid; the
/// exhaustive search mode for multi-threshold quantisers.
pub fn threshold_grid_exhaustive(
    series: &[f64],
    m: usize,
    grid_points: usize,
) -> Result<Vec<Vec<f64>>> {
    if m < 2 {
        return Err(CtarError::Config("alphabet size must be >= 2".into()));
    }
    let values = grid_values(series, grid_points)?;
    if m == 2 {
        return Ok(values.into_iter().map(|c| vec![c]).collect());
    }
    increasing_subsets(&values, m)
}

fn increasing_subsets(values: &[f64], m: usize) -> Result<Vec<Vec<f64>>> {
    let k = m - 1;
    if values.len() < k {
        return Err(CtarError::Config(format!(
            "quantile grid has only {} distinct values; {} needed for an {}-ary quantiser",
            values.len(),
            k,
            m
        )));
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| values[i]).collect());
        // next combination in lexicographic order
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if idx[pos] + (k - pos) < values.len() {
                idx[pos] += 1;
                for j in pos + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return Ok(out);
            }
        }
    }
}
