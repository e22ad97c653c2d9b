//! Fixed-capacity FIFO store of observed transitions and their noisy scores.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

use crate::belief::FactoredBelief;

pub const DEFAULT_CAPACITY: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub before: FactoredBelief,
    pub after: FactoredBelief,
    pub noisy_score: f64,
    /// Whether the transmission was not `Null`.
    pub transmitted: bool,
    pub prev_transmitted: bool,
}

#[derive(Clone, Debug)]
pub struct ReplayDataset {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayDataset {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: VecDeque::with_capacity(capacity.min(DEFAULT_CAPACITY)),
            capacity: capacity.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Up to `size` distinct entries, uniformly without replacement.
    pub fn sample_batch(&self, size: usize, rng: &mut ChaCha8Rng) -> Vec<&Transition> {
        let n = size.min(self.items.len());
        sample(rng, self.items.len(), n).into_iter().map(|i| &self.items[i]).collect()
    }
}
