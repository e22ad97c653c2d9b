//! Belief-change features for score regression.

use crate::belief::FactoredBelief;
use crate::error::{Error, Result};

fn p_ln_p(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

/// Entry-wise `p' ln p' - p ln p` over the canonical flattening. Under a
/// gain-based score the gain is `sum_i w_i * x_i`.
pub fn featurize(before: &FactoredBelief, after: &FactoredBelief) -> Result<Vec<f64>> {
    if !before.same_layout(after) {
        return Err(Error::LayoutMismatch);
    }
    Ok(before
        .flatten()
        .iter()
        .zip(after.flatten())
        .map(|(p, q)| p_ln_p(q) - p_ln_p(*p))
        .collect())
}

/// Features with a trailing "transmitted last step" bit when `history` is set.
pub fn featurize_with_history(
    before: &FactoredBelief,
    after: &FactoredBelief,
    history: Option<bool>,
) -> Result<Vec<f64>> {
    let mut x = featurize(before, after)?;
    if let Some(h) = history {
        x.push(if h { 1.0 } else { 0.0 });
    }
    Ok(x)
}
