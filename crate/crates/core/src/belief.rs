//! Factored categorical beliefs and the update rules that act on them.
//!
//! A [`FactoredBelief`] maps each factor (a grid cell, an object) to an
//! independent [`CategoricalDist`]. Both the agent's belief and the human's
//! belief use this representation. All updates return new values.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a distribution sums to one.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Probabilities are rounded to this many decimal places when beliefs are
/// hashed for node identity.
pub const KEY_DECIMALS: i32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactorId(pub u32);

impl fmt::Display for FactorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CategoricalDist {
    probs: Vec<f64>,
}

impl CategoricalDist {
    /// Validates and wraps a probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(format!("{probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes arbitrary nonnegative masses.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() || masses.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(format!("{masses:?}")));
        }
        let sum: f64 = masses.iter().sum();
        if sum <= 0.0 {
            return Err(Error::ZeroProbabilityObservation);
        }
        Ok(Self {
            probs: masses.into_iter().map(|m| m / sum).collect(),
        })
    }

    pub fn uniform(dim: usize) -> Self {
        assert!(dim >= 1, "distribution needs at least one value");
        Self {
            probs: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn degenerate(dim: usize, value: usize) -> Self {
        assert!(value < dim, "value {value} out of range {dim}");
        let mut probs = vec![0.0; dim];
        probs[value] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, value: usize) -> f64 {
        self.probs[value]
    }

    /// Index of the most likely value; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_degenerate(&self) -> Option<usize> {
        self.probs.iter().position(|p| *p == 1.0)
    }

    /// Zeroes `value` and renormalizes.
    pub fn eliminate(&self, value: usize) -> Result<Self> {
        let mut masses = self.probs.clone();
        masses[value] = 0.0;
        Self::from_masses(masses)
    }

    /// Keeps only the values for which `keep` is true, then renormalizes.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> Result<Self> {
        let masses = self
            .probs
            .iter()
            .enumerate()
            .map(|(i, p)| if keep(i) { *p } else { 0.0 })
            .collect();
        Self::from_masses(masses)
    }

    fn renormalized(mut probs: Vec<f64>) -> Self {
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        Self { probs }
    }
}

/// Per-factor categorical distributions in sorted factor order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "BTreeMap<u32, Vec<f64>>", try_from = "BTreeMap<u32, Vec<f64>>")]
pub struct FactoredBelief {
    factors: BTreeMap<FactorId, CategoricalDist>,
}

impl From<FactoredBelief> for BTreeMap<u32, Vec<f64>> {
    fn from(b: FactoredBelief) -> Self {
        b.factors.into_iter().map(|(k, v)| (k.0, v.probs)).collect()
    }
}

impl TryFrom<BTreeMap<u32, Vec<f64>>> for FactoredBelief {
    type Error = Error;

    fn try_from(map: BTreeMap<u32, Vec<f64>>) -> Result<Self> {
        let factors = map
            .into_iter()
            .map(|(k, v)| Ok((FactorId(k), CategoricalDist::new(v)?)))
            .collect::<Result<_>>()?;
        Ok(Self { factors })
    }
}

/// Rounded flattening of a belief, used to merge identical DAG nodes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BeliefKey(Vec<i64>);

impl BeliefKey {
    pub fn values(&self) -> &[i64] {
        &self.0
    }
}

impl FactoredBelief {
    pub fn new(factors: impl IntoIterator<Item = (FactorId, CategoricalDist)>) -> Self {
        Self {
            factors: factors.into_iter().collect(),
        }
    }

    /// `n_factors` uniform factors with ids `0..n_factors`.
    pub fn uniform(n_factors: usize, dim: usize) -> Self {
        Self::new((0..n_factors).map(|i| (FactorId(i as u32), CategoricalDist::uniform(dim))))
    }

    pub fn get(&self, id: FactorId) -> Result<&CategoricalDist> {
        self.factors.get(&id).ok_or(Error::UnknownFactor(id))
    }

    pub fn factors(&self) -> impl Iterator<Item = (FactorId, &CategoricalDist)> {
        self.factors.iter().map(|(k, v)| (*k, v))
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn total_len(&self) -> usize {
        self.factors.values().map(CategoricalDist::len).sum()
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.factors.len() == other.factors.len()
            && self
                .factors
                .iter()
                .zip(&other.factors)
                .all(|((ka, va), (kb, vb))| ka == kb && va.len() == vb.len())
    }

    /// Offset of each factor in the flattened vector.
    pub fn offset_of(&self, id: FactorId) -> Result<usize> {
        let mut off = 0;
        for (k, v) in &self.factors {
            if *k == id {
                return Ok(off);
            }
            off += v.len();
        }
        Err(Error::UnknownFactor(id))
    }

    /// Canonical entry vector: sorted factor id, then value index.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_len());
        for d in self.factors.values() {
            out.extend_from_slice(&d.probs);
        }
        out
    }

    pub fn key(&self) -> BeliefKey {
        let scale = 10f64.powi(KEY_DECIMALS);
        BeliefKey(
            self.factors
                .values()
                .flat_map(|d| d.probs.iter().map(move |p| (p * scale).round() as i64))
                .collect(),
        )
    }

    /// Copy with one factor replaced.
    pub fn with_factor(&self, id: FactorId, dist: CategoricalDist) -> Result<Self> {
        let old = self.get(id)?;
        if old.len() != dist.len() {
            return Err(Error::DimensionMismatch {
                expected: old.len(),
                actual: dist.len(),
            });
        }
        let mut out = self.clone();
        out.factors.insert(id, dist);
        Ok(out)
    }

    pub(crate) fn set_factor(&mut self, id: FactorId, dist: CategoricalDist) {
        self.factors.insert(id, dist);
    }

    /// Largest per-factor deviation of the sum from one.
    pub fn max_normalization_error(&self) -> f64 {
        self.factors
            .values()
            .map(|d| (d.probs.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// A transmittable fluent: a Boolean atom over one factor's value, or nothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fluent {
    Null,
    Holds { factor: FactorId, value: usize },
    NotHolds { factor: FactorId, value: usize },
}

impl Fluent {
    pub fn is_null(&self) -> bool {
        matches!(self, Fluent::Null)
    }

    pub fn factor(&self) -> Option<FactorId> {
        match self {
            Fluent::Null => None,
            Fluent::Holds { factor, .. } | Fluent::NotHolds { factor, .. } => Some(*factor),
        }
    }

    /// Does `value` of this fluent's factor belong to the event "fluent holds"?
    fn in_event(&self, v: usize) -> bool {
        match self {
            Fluent::Null => false,
            Fluent::Holds { value, .. } => v == *value,
            Fluent::NotHolds { value, .. } => v != *value,
        }
    }

    fn check<'a>(&self, b: &'a FactoredBelief) -> Result<(FactorId, &'a CategoricalDist)> {
        match self {
            Fluent::Null => Err(Error::NullInformation),
            Fluent::Holds { factor, value } | Fluent::NotHolds { factor, value } => {
                let d = b.get(*factor)?;
                if *value >= d.len() {
                    return Err(Error::ValueOutOfRange {
                        factor: *factor,
                        value: *value,
                        dim: d.len(),
                    });
                }
                Ok((*factor, d))
            }
        }
    }
}

impl fmt::Display for Fluent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fluent::Null => write!(f, "Null"),
            Fluent::Holds { factor, value } => write!(f, "Holds({factor},{value})"),
            Fluent::NotHolds { factor, value } => write!(f, "NotHolds({factor},{value})"),
        }
    }
}

/// A fluent together with the marginal the agent transmits alongside it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Information {
    pub fluent: Fluent,
    pub marginal: Option<f64>,
}

impl Information {
    pub const NULL: Information = Information {
        fluent: Fluent::Null,
        marginal: None,
    };

    /// Attaches the marginal of `fluent` under the agent's (human-layout) belief.
    pub fn from_belief(fluent: Fluent, agent: &FactoredBelief) -> Result<Self> {
        if fluent.is_null() {
            return Ok(Self::NULL);
        }
        Ok(Self {
            fluent,
            marginal: Some(marginal(agent, &fluent)?),
        })
    }

    pub fn is_null(&self) -> bool {
        self.fluent.is_null()
    }
}

impl fmt::Display for Information {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.marginal {
            Some(q) => write!(f, "{}@{q:.3}", self.fluent),
            None => write!(f, "{}", self.fluent),
        }
    }
}

/// Probability that `fluent` holds under `b`.
pub fn marginal(b: &FactoredBelief, fluent: &Fluent) -> Result<f64> {
    let (_, d) = fluent.check(b)?;
    Ok(match fluent {
        Fluent::Holds { value, .. } => d.prob(*value),
        // Summing the complement directly keeps exact zeros exact.
        _ => d
            .probs
            .iter()
            .enumerate()
            .filter(|(v, _)| fluent.in_event(*v))
            .map(|(_, p)| p)
            .sum(),
    })
}

/// The human's model of how the world drifts between timesteps: each factor
/// keeps its value with probability `1 - drift_epsilon` and otherwise moves
/// uniformly to one of the other values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanForwardModel {
    pub drift_epsilon: f64,
}

impl Default for HumanForwardModel {
    fn default() -> Self {
        Self {
            drift_epsilon: 1e-3,
        }
    }
}

impl HumanForwardModel {
    pub fn new(drift_epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&drift_epsilon) {
            return Err(Error::Config(format!(
                "drift_epsilon must be in [0, 1), got {drift_epsilon}"
            )));
        }
        Ok(Self { drift_epsilon })
    }

    pub fn step_dist(&self, d: &CategoricalDist) -> CategoricalDist {
        let n = d.len();
        if n == 1 || self.drift_epsilon == 0.0 {
            return d.clone();
        }
        let eps = self.drift_epsilon;
        let spread = eps / (n - 1) as f64;
        let probs = d
            .probs
            .iter()
            .map(|p| (1.0 - eps) * p + spread * (1.0 - p))
            .collect();
        CategoricalDist::renormalized(probs)
    }

    pub fn step(&self, b: &FactoredBelief) -> FactoredBelief {
        if self.drift_epsilon == 0.0 {
            return b.clone();
        }
        FactoredBelief {
            factors: b
                .factors
                .iter()
                .map(|(k, d)| (*k, self.step_dist(d)))
                .collect(),
        }
    }
}

/// `b̃_H` from `b_h` under the forward model.
pub fn human_forward_step(b: &FactoredBelief, m: &HumanForwardModel) -> FactoredBelief {
    m.step(b)
}

/// Jeffrey's-rule update of the human belief: drift, then move the mass of
/// the event "fluent holds" to the transmitted marginal while preserving the
/// conditional distributions inside the event and its complement.
pub fn jeffrey_update(
    b_h: &FactoredBelief,
    info: &Information,
    m: &HumanForwardModel,
) -> Result<FactoredBelief> {
    let drifted = m.step(b_h);
    revise(&drifted, info)
}

/// The Jeffrey revision without the drift step.
pub fn revise(drifted: &FactoredBelief, info: &Information) -> Result<FactoredBelief> {
    if info.is_null() {
        return Ok(drifted.clone());
    }
    let (factor, dist) = info.fluent.check(drifted)?;
    let q = info.marginal.ok_or(Error::NullInformation)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidDistribution(format!("marginal {q}")));
    }
    let revised = revise_dist(dist, &info.fluent, q).ok_or(Error::UnsupportedUpdate(factor))?;
    let mut out = drifted.clone();
    out.set_factor(factor, revised);
    Ok(out)
}

fn revise_dist(d: &CategoricalDist, fluent: &Fluent, q: f64) -> Option<CategoricalDist> {
    let (mut in_mass, mut out_mass) = (0.0, 0.0);
    for (v, p) in d.probs.iter().enumerate() {
        if fluent.in_event(v) {
            in_mass += p;
        } else {
            out_mass += p;
        }
    }
    if (q > 0.0 && in_mass == 0.0) || (q < 1.0 && out_mass == 0.0) {
        return None;
    }
    let in_scale = if q > 0.0 { q / in_mass } else { 0.0 };
    let out_scale = if q < 1.0 { (1.0 - q) / out_mass } else { 0.0 };
    let probs = d
        .probs
        .iter()
        .enumerate()
        .map(|(v, p)| {
            if fluent.in_event(v) {
                p * in_scale
            } else {
                p * out_scale
            }
        })
        .collect();
    Some(CategoricalDist::renormalized(probs))
}

/// Nonnegative per-entry weights aligned with a flattened belief.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weights(Vec<f64>);

impl From<Weights> for Vec<f64> {
    fn from(w: Weights) -> Self {
        w.0
    }
}

impl TryFrom<Vec<f64>> for Weights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Weights::new(v)
    }
}

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(bad) = w.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidWeights(format!("negative or non-finite weight {bad}")));
        }
        Ok(Self(w))
    }

    /// The same per-value weights repeated for each of `n_factors` factors.
    pub fn shared(per_value: &[f64], n_factors: usize) -> Result<Self> {
        Self::new(per_value.repeat(n_factors))
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn holds(f: u32, v: usize) -> Fluent {
        Fluent::Holds {
            factor: FactorId(f),
            value: v,
        }
    }

    fn not_holds(f: u32, v: usize) -> Fluent {
        Fluent::NotHolds {
            factor: FactorId(f),
            value: v,
        }
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(CategoricalDist::new(vec![]).is_err());
        assert!(CategoricalDist::new(vec![0.5, 0.6]).is_err());
        assert!(CategoricalDist::new(vec![-0.1, 1.1]).is_err());
        assert!(CategoricalDist::new(vec![0.25; 4]).is_ok());
    }

    #[test]
    fn marginal_examples() {
        let b = FactoredBelief::new([
            (FactorId(0), CategoricalDist::degenerate(5, 2)),
            (FactorId(1), CategoricalDist::uniform(5)),
        ]);
        assert_eq!(marginal(&b, &holds(0, 2)).unwrap(), 1.0);
        assert!((marginal(&b, &not_holds(1, 3)).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(marginal(&b, &Fluent::Null), Err(Error::NullInformation));
        assert!(matches!(
            marginal(&b, &holds(0, 5)),
            Err(Error::ValueOutOfRange { .. })
        ));
        assert!(matches!(
            marginal(&b, &holds(7, 0)),
            Err(Error::UnknownFactor(FactorId(7)))
        ));
    }

    #[test]
    fn forward_step_examples() {
        let m0 = HumanForwardModel::new(0.0).unwrap();
        let b = FactoredBelief::new([(FactorId(0), CategoricalDist::degenerate(3, 0))]);
        assert_eq!(human_forward_step(&b, &m0), b);

        let m = HumanForwardModel::new(0.1).unwrap();
        let out = human_forward_step(&b, &m);
        assert_close(out.get(FactorId(0)).unwrap().probs(), &[0.9, 0.05, 0.05], 1e-12);

        let u = FactoredBelief::uniform(2, 4);
        let out = human_forward_step(&u, &m);
        assert_close(&out.flatten(), &u.flatten(), 1e-15);

        assert!(HumanForwardModel::new(1.0).is_err());
    }

    #[test]
    fn jeffrey_examples() {
        let m0 = HumanForwardModel::new(0.0).unwrap();
        let b = FactoredBelief::uniform(1, 4);

        let info = Information {
            fluent: holds(0, 0),
            marginal: Some(0.7),
        };
        let out = jeffrey_update(&b, &info, &m0).unwrap();
        assert_close(out.get(FactorId(0)).unwrap().probs(), &[0.7, 0.1, 0.1, 0.1], 1e-12);

        // Marginal 1: exact conditioning.
        let info = Information {
            fluent: not_holds(0, 1),
            marginal: Some(1.0),
        };
        let out = jeffrey_update(&b, &info, &m0).unwrap();
        assert_close(
            out.get(FactorId(0)).unwrap().probs(),
            &[1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0 / 3.0],
            1e-12,
        );

        // Marginal equal to the current one leaves the belief alone.
        let info = Information {
            fluent: holds(0, 2),
            marginal: Some(0.25),
        };
        let out = jeffrey_update(&b, &info, &m0).unwrap();
        assert_close(&out.flatten(), &b.flatten(), 1e-15);

        // Null with no drift is the identity.
        assert_eq!(jeffrey_update(&b, &Information::NULL, &m0).unwrap(), b);
    }

    #[test]
    fn jeffrey_degenerate_cases() {
        let m0 = HumanForwardModel::new(0.0).unwrap();
        let b = FactoredBelief::new([(FactorId(0), CategoricalDist::new(vec![0.0, 0.5, 0.5]).unwrap())]);
        let info = Information {
            fluent: holds(0, 0),
            marginal: Some(0.3),
        };
        assert_eq!(
            jeffrey_update(&b, &info, &m0),
            Err(Error::UnsupportedUpdate(FactorId(0)))
        );
        // Marginal 0 on an event the human already rules out is fine.
        let info = Information {
            fluent: holds(0, 0),
            marginal: Some(0.0),
        };
        assert_eq!(jeffrey_update(&b, &info, &m0).unwrap(), b);
        // With drift the support is restored.
        let m = HumanForwardModel::new(0.01).unwrap();
        let info = Information {
            fluent: holds(0, 0),
            marginal: Some(0.3),
        };
        let out = jeffrey_update(&b, &info, &m).unwrap();
        assert!((out.get(FactorId(0)).unwrap().prob(0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn key_merges_tiny_differences() {
        let a = FactoredBelief::new([(FactorId(0), CategoricalDist::new(vec![0.5, 0.5]).unwrap())]);
        let b = FactoredBelief::new([(
            FactorId(0),
            CategoricalDist::new(vec![0.5 + 1e-9, 0.5 - 1e-9]).unwrap(),
        )]);
        assert_eq!(a.key(), b.key());
    }

    #[test]
    fn json_layout() {
        let b = FactoredBelief::new([
            (FactorId(3), CategoricalDist::new(vec![0.25, 0.75]).unwrap()),
            (FactorId(1), CategoricalDist::uniform(2)),
        ]);
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"1":[0.5,0.5],"3":[0.25,0.75]}"#);
        let back: FactoredBelief = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn flatten_is_factor_then_value() {
        let b = FactoredBelief::new([
            (FactorId(2), CategoricalDist::degenerate(2, 1)),
            (FactorId(0), CategoricalDist::degenerate(3, 0)),
        ]);
        assert_eq!(b.flatten(), vec![1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(b.offset_of(FactorId(2)).unwrap(), 3);
    }

    #[test]
    fn weights_reject_negative() {
        assert!(Weights::new(vec![1.0, -0.5]).is_err());
        assert_eq!(Weights::shared(&[1.0, 2.0], 2).unwrap().as_slice(), &[1.0, 2.0, 1.0, 2.0]);
    }
}
