use infoplan::belief::{CategoricalDist, FactorId, FactoredBelief, Fluent, HumanForwardModel, Information, Weights};
use infoplan::{factored_weighted_entropy, jeffrey_update, marginal, weighted_entropy, weighted_gain, FKind, ScoreFunctionSpec};
use proptest::prelude::*;

fn dist(dim: std::ops::Range<usize>) -> impl Strategy<Value = CategoricalDist> {
    prop::collection::vec(0.01f64..1.0, dim).prop_map(|m| CategoricalDist::from_masses(m).unwrap())
}

fn belief() -> impl Strategy<Value = FactoredBelief> {
    prop::collection::vec(dist(2..6), 1..4)
        .prop_map(|ds| FactoredBelief::new(ds.into_iter().enumerate().map(|(i, d)| (FactorId(i as u32), d))))
}

fn fluent_for(b: &FactoredBelief, pick: (usize, usize, bool)) -> Fluent {
    let factor = FactorId((pick.0 % b.num_factors()) as u32);
    let value = pick.1 % b.get(factor).unwrap().len();
    if pick.2 {
        Fluent::Holds { factor, value }
    } else {
        Fluent::NotHolds { factor, value }
    }
}

fn plain_shannon(p: &[f64]) -> f64 {
    -p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

proptest! {
    #[test]
    fn unit_weights_give_shannon(d in dist(1..9)) {
        let w = vec![1.0; d.len()];
        prop_assert!((weighted_entropy(&d, &w).unwrap() - plain_shannon(d.probs())).abs() <= 1e-12);
    }

    #[test]
    fn entropy_is_linear_in_weights(
        d in dist(2..7),
        a in 0.0f64..5.0,
        b in 0.0f64..5.0,
        seed in prop::collection::vec(0.0f64..10.0, 14),
    ) {
        let n = d.len();
        let (w1, w2) = (&seed[..n], &seed[7..7 + n]);
        let mix: Vec<f64> = w1.iter().zip(w2).map(|(x, y)| a * x + b * y).collect();
        let lhs = weighted_entropy(&d, &mix).unwrap();
        let rhs = a * weighted_entropy(&d, w1).unwrap() + b * weighted_entropy(&d, w2).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }

    #[test]
    fn weighted_entropy_nonnegative(d in dist(2..7), w in prop::collection::vec(0.0f64..10.0, 7)) {
        prop_assert!(weighted_entropy(&d, &w[..d.len()]).unwrap() >= 0.0);
    }

    #[test]
    fn jeffrey_hits_target_and_keeps_ratios(
        b in belief(),
        pick in (0usize..8, 0usize..8, any::<bool>()),
        q in 0.0f64..=1.0,
        eps in 0.0f64..0.2,
    ) {
        let fluent = fluent_for(&b, pick);
        let fwd = HumanForwardModel::new(eps).unwrap();
        let next = jeffrey_update(&b, &Information { fluent, marginal: Some(q) }, &fwd).unwrap();
        prop_assert!(next.max_normalization_error() <= 1e-12);
        prop_assert!((marginal(&next, &fluent).unwrap() - q).abs() <= 1e-9);

        let drifted = fwd.step(&b);
        let f = fluent.factor().unwrap();
        let (p, n) = (drifted.get(f).unwrap().probs(), next.get(f).unwrap().probs());
        let inside = |v: usize| match fluent {
            Fluent::Holds { value, .. } => v == value,
            Fluent::NotHolds { value, .. } => v != value,
            Fluent::Null => false,
        };
        for u in 0..p.len() {
            for v in 0..p.len() {
                if inside(u) == inside(v) {
                    prop_assert!((n[u] * p[v] - n[v] * p[u]).abs() <= 1e-9 * p[u] * p[v] + 1e-15);
                }
            }
        }
        for (id, d) in drifted.factors().filter(|(id, _)| *id != f) {
            prop_assert_eq!(d, next.get(id).unwrap());
        }
    }

    #[test]
    fn null_is_drift_only(b in belief(), eps in 0.0f64..0.2) {
        let fwd = HumanForwardModel::new(eps).unwrap();
        let next = jeffrey_update(&b, &Information::NULL, &fwd).unwrap();
        prop_assert_eq!(next, fwd.step(&b));
    }

    #[test]
    fn drift_preserves_normalization(b in belief(), eps in 0.0f64..0.5) {
        let d = HumanForwardModel::new(eps).unwrap().step(&b);
        prop_assert!(d.max_normalization_error() <= 1e-12);
    }

    #[test]
    fn certainty_gain_equals_entropy(b in belief(), f in 0usize..3, w in prop::collection::vec(0.0f64..10.0, 15)) {
        // Collapsing a factor onto one value removes exactly its weighted entropy.
        let id = FactorId((f % b.num_factors()) as u32);
        let d = b.get(id).unwrap();
        let weights = Weights::new(w[..b.total_len()].to_vec()).unwrap();
        let after = b.with_factor(id, CategoricalDist::degenerate(d.len(), 0)).unwrap();
        let off = b.offset_of(id).unwrap();
        let lost = weighted_entropy(d, &weights.as_slice()[off..off + d.len()]).unwrap();
        prop_assert!((weighted_gain(&b, &after, &weights).unwrap() - lost).abs() <= 1e-9);
        let total = factored_weighted_entropy(&b, &weights).unwrap();
        prop_assert!((factored_weighted_entropy(&after, &weights).unwrap() - (total - lost)).abs() <= 1e-9);
    }

    #[test]
    fn apply_f_monotone_above_threshold(g1 in 1.0f64..50.0, g2 in 1.0f64..50.0) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        for k in [FKind::Identity, FKind::Square, FKind::Log] {
            let s = ScoreFunctionSpec::new(k, Weights::ones(1));
            prop_assert!(s.apply_f(lo, false) <= s.apply_f(hi, false));
            prop_assert!(s.apply_f(lo, false) > s.penalty);
        }
    }

    #[test]
    fn below_threshold_is_penalized(g in -5.0f64..0.999) {
        for k in [FKind::Identity, FKind::Square, FKind::Log] {
            let s = ScoreFunctionSpec::new(k, Weights::ones(1));
            prop_assert_eq!(s.apply_f(g, false), -10.0);
            prop_assert_eq!(s.apply_f(g, true), 1e-3);
        }
    }
}

#[test]
fn single_location_not_t3_gain() {
    // Four equally likely types, weights 10/5/1/1: ruling out T3 gains ~0.03.
    let b = FactoredBelief::uniform(1, 4);
    let w = Weights::new(vec![10.0, 5.0, 1.0, 1.0]).unwrap();
    let info = Information {
        fluent: Fluent::NotHolds {
            factor: FactorId(0),
            value: 2,
        },
        marginal: Some(1.0),
    };
    let after = jeffrey_update(&b, &info, &HumanForwardModel::default()).unwrap();
    let expected = 17.0 * 0.25 * 4f64.ln() - 16.0 * 3f64.ln() / 3.0;
    assert!((weighted_gain(&b, &after, &w).unwrap() - expected).abs() < 1e-12);
    assert!((expected - 0.03).abs() < 0.015);
}
