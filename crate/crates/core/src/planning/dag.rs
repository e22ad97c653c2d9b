//! The information DAG: nodes are (human belief, timestep) pairs, edges are
//! transmissions weighted by the human's score, and the best information
//! plan is the longest weighted path through the layers.

use std::collections::HashMap;
use std::hash::Hash;

use crate::belief::{marginal, revise, BeliefKey, FactoredBelief, Fluent, HumanForwardModel, Information};
use crate::entropy::{factored_weighted_entropy, weighted_entropy_unchecked};
use crate::error::Result;
use crate::scoring::ScoreSource;

/// Transmissions whose marginal is this close to the human's current one
/// change nothing but the score, so they are pruned when asked.
const UNINFORMATIVE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DagNode {
    pub belief: FactoredBelief,
    pub timestep: usize,
    /// Whether the edge into this node transmitted something.
    pub prev_transmitted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeKey {
    belief: BeliefKey,
    timestep: usize,
    prev_transmitted: bool,
}

impl DagNode {
    pub fn root(belief: FactoredBelief, prev_transmitted: bool) -> Self {
        Self {
            belief,
            timestep: 0,
            prev_transmitted,
        }
    }

    /// Beliefs are quantized before hashing; the history flag only matters to
    /// history-aware scores.
    pub fn key(&self, with_history: bool) -> NodeKey {
        NodeKey {
            belief: self.belief.key(),
            timestep: self.timestep,
            prev_transmitted: with_history && self.prev_transmitted,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Successor {
    pub node: DagNode,
    pub info: Information,
    pub weight: f64,
    /// Position of the fluent in the canonical information space.
    pub rank: usize,
}

/// Everything edge generation needs besides the node itself.
pub struct InfoContext<'a> {
    pub info_space: &'a [Fluent],
    pub forward: &'a HumanForwardModel,
    pub score: &'a dyn ScoreSource,
    pub skip_uninformative: bool,
}

/// One successor per fluent, with `B_H'` from Jeffrey's rule using marginals
/// from `agent_view`. Fluents the human cannot accept are skipped. Successors
/// that land on the same quantized belief keep only the heaviest edge.
pub fn get_successors(
    node: &DagNode,
    agent_view: &FactoredBelief,
    drift: bool,
    ctx: &InfoContext<'_>,
) -> Result<Vec<Successor>> {
    let drifted = if drift {
        ctx.forward.step(&node.belief)
    } else {
        node.belief.clone()
    };
    let spec = ctx.score.as_spec();
    // With a gain-based score only the revised factor changes after drift.
    let drift_gain = match spec {
        Some(s) => factored_weighted_entropy(&node.belief, &s.weights)? - factored_weighted_entropy(&drifted, &s.weights)?,
        None => 0.0,
    };
    let with_history = ctx.score.uses_history();
    let timestep = node.timestep + 1;

    let mut out: Vec<Successor> = Vec::with_capacity(ctx.info_space.len());
    let mut seen: HashMap<NodeKey, usize> = HashMap::new();
    for (rank, fluent) in ctx.info_space.iter().enumerate() {
        let info = if fluent.is_null() {
            Information::NULL
        } else {
            let Ok(q) = marginal(agent_view, fluent) else { continue };
            if ctx.skip_uninformative && (q - marginal(&drifted, fluent)?).abs() < UNINFORMATIVE_TOL {
                continue;
            }
            Information {
                fluent: *fluent,
                marginal: Some(q),
            }
        };
        let next = match revise(&drifted, &info) {
            Ok(b) => b,
            Err(_) => continue,
        };
        let weight = match spec {
            Some(s) => {
                let gain = match fluent.factor() {
                    None => drift_gain,
                    Some(f) => {
                        let off = drifted.offset_of(f)?;
                        let before = drifted.get(f)?;
                        let after = next.get(f)?;
                        let w = &s.weights.as_slice()[off..off + before.len()];
                        drift_gain + weighted_entropy_unchecked(before.probs(), w)
                            - weighted_entropy_unchecked(after.probs(), w)
                    }
                };
                s.apply_f(gain, fluent.is_null()) + s.history_term(fluent, node.prev_transmitted)
            }
            None => ctx
                .score
                .edge_score(&node.belief, &next, fluent, node.prev_transmitted)?,
        };
        let succ = Successor {
            node: DagNode {
                belief: next,
                timestep,
                prev_transmitted: !fluent.is_null(),
            },
            info,
            weight,
            rank,
        };
        match seen.entry(succ.node.key(with_history)) {
            std::collections::hash_map::Entry::Occupied(e) => {
                let slot = &mut out[*e.get()];
                if succ.weight > slot.weight {
                    *slot = succ;
                }
            }
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(out.len());
                out.push(succ);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathResult<L> {
    pub labels: Vec<L>,
    pub ranks: Vec<usize>,
    pub total: f64,
}

struct Partial<N, L> {
    node: N,
    total: f64,
    ranks: Vec<usize>,
    labels: Vec<L>,
}

fn better(total: f64, ranks: &[usize], than_total: f64, than_ranks: &[usize]) -> bool {
    total > than_total || (total == than_total && ranks < than_ranks)
}

/// Layer-by-layer dynamic programming over a DAG given by a successor
/// function. Successors are `(node, label, weight, rank)`; among equal totals
/// the lexicographically smallest rank sequence wins. With `beam` set, each
/// layer keeps only that many best partial paths.
pub fn longest_weighted_path_dag<N, K, L, KF, SF>(
    root: N,
    horizon: usize,
    beam: Option<usize>,
    key: KF,
    mut successors: SF,
) -> Result<PathResult<L>>
where
    K: Hash + Eq,
    L: Clone,
    KF: Fn(&N) -> K,
    SF: FnMut(&N, usize) -> Result<Vec<(N, L, f64, usize)>>,
{
    let mut layer = vec![Partial {
        node: root,
        total: 0.0,
        ranks: Vec::new(),
        labels: Vec::new(),
    }];
    for t in 0..horizon {
        let mut next: Vec<Partial<N, L>> = Vec::new();
        let mut index: HashMap<K, usize> = HashMap::new();
        for p in &layer {
            for (node, label, weight, rank) in successors(&p.node, t)? {
                let total = p.total + weight;
                let k = key(&node);
                let mut ranks = p.ranks.clone();
                ranks.push(rank);
                match index.get(&k) {
                    Some(&i) => {
                        if better(total, &ranks, next[i].total, &next[i].ranks) {
                            let mut labels = p.labels.clone();
                            labels.push(label);
                            next[i] = Partial {
                                node,
                                total,
                                ranks,
                                labels,
                            };
                        }
                    }
                    None => {
                        let mut labels = p.labels.clone();
                        labels.push(label);
                        index.insert(k, next.len());
                        next.push(Partial {
                            node,
                            total,
                            ranks,
                            labels,
                        });
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        if let Some(width) = beam {
            if next.len() > width {
                next.sort_by(|a, b| {
                    b.total
                        .total_cmp(&a.total)
                        .then_with(|| a.ranks.cmp(&b.ranks))
                });
                next.truncate(width);
            }
        }
        layer = next;
    }
    let best = layer
        .into_iter()
        .reduce(|a, b| if better(b.total, &b.ranks, a.total, &a.ranks) { b } else { a })
        .expect("root layer is never empty");
    Ok(PathResult {
        labels: best.labels,
        ranks: best.ranks,
        total: best.total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{CategoricalDist, FactorId, Weights};
    use crate::scoring::{FKind, ScoreFunctionSpec};

    #[test]
    fn horizon_zero_is_empty() {
        let r = longest_weighted_path_dag(0u32, 0, None, |n| *n, |_, _| Ok(vec![(1u32, 'a', 5.0, 0)])).unwrap();
        assert!(r.labels.is_empty());
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn forced_path() {
        let r = longest_weighted_path_dag(
            0u32,
            3,
            None,
            |n| *n,
            |n, _| Ok(vec![(n + 1, *n, 1.5, 0)]),
        )
        .unwrap();
        assert_eq!(r.labels, vec![0, 1, 2]);
        assert_eq!(r.total, 4.5);
    }

    #[test]
    fn ties_prefer_low_ranks() {
        // Two labels with equal weight at every layer.
        let r = longest_weighted_path_dag(
            (0u32, 0u32),
            2,
            None,
            |n| *n,
            |n, _| Ok(vec![((n.0 + 1, n.1 * 2), 'x', 1.0, 1), ((n.0 + 1, n.1 * 2 + 1), 'n', 1.0, 0)]),
        )
        .unwrap();
        assert_eq!(r.labels, vec!['n', 'n']);
    }

    #[test]
    fn null_only_space() {
        let spec = ScoreFunctionSpec::new(FKind::Identity, Weights::ones(4));
        let fwd = HumanForwardModel::default();
        let ctx = InfoContext {
            info_space: &[Fluent::Null],
            forward: &fwd,
            score: &spec,
            skip_uninformative: false,
        };
        let b = FactoredBelief::uniform(2, 2);
        let s = get_successors(&DagNode::root(b.clone(), false), &b, true, &ctx).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].weight, 1e-3);
    }

    #[test]
    fn identical_updates_merge() {
        // Holds(0,0) and NotHolds(0,1) on a binary factor are the same event.
        let spec = ScoreFunctionSpec::new(FKind::Identity, Weights::ones(2));
        let fwd = HumanForwardModel::new(0.0).unwrap();
        let space = [
            Fluent::Null,
            Fluent::Holds { factor: FactorId(0), value: 0 },
            Fluent::NotHolds { factor: FactorId(0), value: 1 },
        ];
        let ctx = InfoContext {
            info_space: &space,
            forward: &fwd,
            score: &spec,
            skip_uninformative: false,
        };
        let agent = FactoredBelief::new([(FactorId(0), CategoricalDist::degenerate(2, 0))]);
        let s = get_successors(&DagNode::root(FactoredBelief::uniform(1, 2), false), &agent, true, &ctx).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].rank, 1);
    }

    #[test]
    fn fast_path_matches_direct_score() {
        let weights = Weights::new(vec![10.0, 5.0, 1.0, 1.0, 2.0, 3.0, 1.0, 1.0]).unwrap();
        let spec = ScoreFunctionSpec {
            threshold: 0.0,
            ..ScoreFunctionSpec::new(FKind::Identity, weights)
        };
        let fwd = HumanForwardModel::new(0.01).unwrap();
        let space: Vec<Fluent> = std::iter::once(Fluent::Null)
            .chain((0..2).flat_map(|f| {
                (0..4).flat_map(move |v| {
                    [
                        Fluent::Holds { factor: FactorId(f), value: v },
                        Fluent::NotHolds { factor: FactorId(f), value: v },
                    ]
                })
            }))
            .collect();
        let agent = FactoredBelief::new([
            (FactorId(0), CategoricalDist::new(vec![0.0, 0.5, 0.25, 0.25]).unwrap()),
            (FactorId(1), CategoricalDist::degenerate(4, 3)),
        ]);
        let human = FactoredBelief::uniform(2, 4);
        let ctx = InfoContext {
            info_space: &space,
            forward: &fwd,
            score: &spec,
            skip_uninformative: false,
        };
        for s in get_successors(&DagNode::root(human.clone(), false), &agent, true, &ctx).unwrap() {
            let direct = spec.score(&human, &s.node.belief, &s.info.fluent).unwrap();
            assert!((direct - s.weight).abs() < 1e-9, "{:?}", s.info);
        }
    }
}
