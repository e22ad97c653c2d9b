//! Weighted entropy and weighted information gain (natural log).

use crate::belief::{CategoricalDist, FactoredBelief, Weights};
use crate::error::{Error, Result};

/// `-Σ w_i p_i ln p_i` over the nonzero entries of `dist`.
pub fn weighted_entropy(dist: &CategoricalDist, w: &[f64]) -> Result<f64> {
    if w.len() != dist.len() {
        return Err(Error::DimensionMismatch {
            expected: dist.len(),
            actual: w.len(),
        });
    }
    Ok(weighted_entropy_unchecked(dist.probs(), w))
}

pub(crate) fn weighted_entropy_unchecked(p: &[f64], w: &[f64]) -> f64 {
    let s: f64 = p
        .iter()
        .zip(w)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, w)| w * p * p.ln())
        .sum();
    // -0.0 for degenerate distributions.
    if s == 0.0 {
        0.0
    } else {
        -s
    }
}

pub fn shannon_entropy(dist: &CategoricalDist) -> f64 {
    -dist
        .probs()
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// Sum of per-factor weighted entropies.
pub fn factored_weighted_entropy(b: &FactoredBelief, w: &Weights) -> Result<f64> {
    if w.len() != b.total_len() {
        return Err(Error::DimensionMismatch {
            expected: b.total_len(),
            actual: w.len(),
        });
    }
    let w = w.as_slice();
    let mut off = 0;
    let mut total = 0.0;
    for (_, d) in b.factors() {
        total += weighted_entropy_unchecked(d.probs(), &w[off..off + d.len()]);
        off += d.len();
    }
    Ok(total)
}

/// `S_w(b) - S_w(b_next)`; negative when the update adds uncertainty.
pub fn weighted_gain(b: &FactoredBelief, b_next: &FactoredBelief, w: &Weights) -> Result<f64> {
    if !b.same_layout(b_next) {
        return Err(Error::LayoutMismatch);
    }
    Ok(factored_weighted_entropy(b, w)? - factored_weighted_entropy(b_next, w)?)
}
