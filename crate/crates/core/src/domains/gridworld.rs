//! N×N search-and-recover gridworld.
//!
//! Each cell is one belief factor whose values are the object types followed
//! by "nothing". Sensing is noiseless.

use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Domain, Enumerable, Outcome, Rewards};
use crate::belief::{CategoricalDist, FactorId, FactoredBelief, Fluent};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridworldConfig {
    pub n: usize,
    pub m: usize,
    pub num_types: usize,
    /// Whether cells may be empty. Without it every cell holds an object.
    #[serde(default = "yes")]
    pub allow_empty: bool,
    #[serde(default)]
    pub start_cell: usize,
    #[serde(default)]
    pub rewards: Rewards,
}

fn yes() -> bool {
    true
}

impl GridworldConfig {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            num_types: 4,
            allow_empty: true,
            start_cell: 0,
            rewards: Rewards::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.n * self.n;
        if self.n == 0 || self.num_types == 0 {
            return Err(Error::Config("grid needs n >= 1 and at least one type".into()));
        }
        if self.m == 0 || self.m > cells {
            return Err(Error::Config(format!("need 1 <= m <= {cells}, got {}", self.m)));
        }
        if !self.allow_empty && self.m != cells {
            return Err(Error::Config("without empty cells m must equal n*n".into()));
        }
        if self.start_cell >= cells {
            return Err(Error::Config("start cell off the grid".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    North,
    South,
    West,
    East,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::West, Direction::East];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridAction {
    Move(Direction),
    Detect(usize),
    Recover(usize),
}

impl fmt::Display for GridAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridAction::Move(d) => write!(f, "Move({d:?})"),
            GridAction::Detect(t) => write!(f, "Detect(T{})", t + 1),
            GridAction::Recover(t) => write!(f, "Recover(T{})", t + 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridObservation {
    Moved,
    Detected(bool),
    Recovered(bool),
}

impl fmt::Display for GridObservation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridObservation::Moved => write!(f, "moved"),
            GridObservation::Detected(b) => write!(f, "{}", if *b { "present" } else { "absent" }),
            GridObservation::Recovered(b) => write!(f, "{}", if *b { "recovered" } else { "failed" }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridState {
    pub agent: usize,
    pub contents: Vec<Option<usize>>,
    pub recovered: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridBelief {
    pub cells: FactoredBelief,
    pub agent: usize,
    pub recovered: usize,
    /// Cells known to hold nothing further to recover.
    pub cleared: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct Gridworld {
    cfg: GridworldConfig,
}

impl Gridworld {
    pub fn new(cfg: GridworldConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &GridworldConfig {
        &self.cfg
    }

    pub fn num_cells(&self) -> usize {
        self.cfg.n * self.cfg.n
    }

    /// Values per cell factor.
    pub fn num_values(&self) -> usize {
        self.cfg.num_types + usize::from(self.cfg.allow_empty)
    }

    pub fn nothing_value(&self) -> Option<usize> {
        self.cfg.allow_empty.then_some(self.cfg.num_types)
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell / self.cfg.n, cell % self.cfg.n)
    }

    pub fn neighbor(&self, cell: usize, dir: Direction) -> usize {
        let n = self.cfg.n;
        let (r, c) = self.coords(cell);
        match dir {
            Direction::North if r > 0 => cell - n,
            Direction::South if r + 1 < n => cell + n,
            Direction::West if c > 0 => cell - 1,
            Direction::East if c + 1 < n => cell + 1,
            _ => cell,
        }
    }

    fn manhattan(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb) + ca.abs_diff(cb)
    }

    /// Builds a state from explicit contents.
    pub fn state_from(&self, agent: usize, objects: &[(usize, usize)]) -> Result<GridState> {
        let mut contents = vec![None; self.num_cells()];
        for &(cell, ty) in objects {
            if cell >= contents.len() || ty >= self.cfg.num_types || contents[cell].is_some() {
                return Err(Error::Config(format!("bad object placement ({cell}, {ty})")));
            }
            contents[cell] = Some(ty);
        }
        if agent >= contents.len() {
            return Err(Error::Config("agent off the grid".into()));
        }
        Ok(GridState {
            agent,
            contents,
            recovered: 0,
        })
    }

    fn factor<'a>(&self, b: &'a GridBelief, cell: usize) -> &'a CategoricalDist {
        b.cells.get(FactorId(cell as u32)).expect("cell factor")
    }

    /// Most likely value at a cell, lowest index on ties.
    pub fn predicted_value(&self, b: &GridBelief, cell: usize) -> usize {
        self.factor(b, cell).argmax()
    }

    fn type_mass(&self, d: &CategoricalDist) -> f64 {
        d.probs()[..self.cfg.num_types].iter().sum()
    }

    fn best_type(&self, d: &CategoricalDist) -> usize {
        let p = &d.probs()[..self.cfg.num_types];
        (0..p.len()).fold(0, |best, t| if p[t] > p[best] { t } else { best })
    }

    fn unresolved(&self, b: &GridBelief, cell: usize) -> bool {
        !b.cleared[cell] && self.type_mass(self.factor(b, cell)) > 0.0
    }

    fn with_cell(&self, b: &GridBelief, cell: usize, d: CategoricalDist) -> GridBelief {
        let mut out = b.clone();
        out.cells.set_factor(FactorId(cell as u32), d);
        if let Some(nothing) = self.nothing_value() {
            if out.cells.get(FactorId(cell as u32)).expect("cell").prob(nothing) == 1.0 {
                out.cleared[cell] = true;
            }
        }
        out
    }
}

impl Domain for Gridworld {
    type State = GridState;
    type Action = GridAction;
    type Observation = GridObservation;
    type Belief = GridBelief;

    fn sample_state(&self, rng: &mut ChaCha8Rng) -> GridState {
        let cells = sample(rng, self.num_cells(), self.cfg.m);
        let objects: Vec<_> = cells
            .into_iter()
            .map(|c| (c, rng.random_range(0..self.cfg.num_types)))
            .collect();
        self.state_from(self.cfg.start_cell, &objects)
            .expect("sampled placement is valid")
    }

    fn initial_belief(&self, state: &GridState) -> GridBelief {
        GridBelief {
            cells: FactoredBelief::uniform(self.num_cells(), self.num_values()),
            agent: state.agent,
            recovered: 0,
            cleared: vec![false; self.num_cells()],
        }
    }

    fn step(&self, s: &GridState, a: &GridAction) -> Outcome<GridState, GridObservation> {
        let r = &self.cfg.rewards;
        let mut next = s.clone();
        let (observation, reward) = match *a {
            GridAction::Move(d) => {
                next.agent = self.neighbor(s.agent, d);
                (GridObservation::Moved, r.move_cost)
            }
            GridAction::Detect(t) => (
                GridObservation::Detected(s.contents[s.agent] == Some(t)),
                r.detect_cost,
            ),
            GridAction::Recover(t) => {
                if s.contents[s.agent] == Some(t) {
                    next.contents[s.agent] = None;
                    next.recovered += 1;
                    (GridObservation::Recovered(true), r.recover_success)
                } else {
                    (GridObservation::Recovered(false), r.recover_fail)
                }
            }
        };
        Outcome {
            state: next,
            observation,
            reward,
        }
    }

    fn update_belief(&self, b: &GridBelief, a: &GridAction, o: &GridObservation) -> Result<GridBelief> {
        let cell = b.agent;
        let d = self.factor(b, cell);
        match (*a, *o) {
            (GridAction::Move(dir), GridObservation::Moved) => {
                let mut out = b.clone();
                out.agent = self.neighbor(cell, dir);
                Ok(out)
            }
            (GridAction::Detect(t), GridObservation::Detected(true)) => {
                if d.prob(t) == 0.0 {
                    return Err(Error::ZeroProbabilityObservation);
                }
                Ok(self.with_cell(b, cell, CategoricalDist::degenerate(d.len(), t)))
            }
            (GridAction::Detect(t), GridObservation::Detected(false))
            | (GridAction::Recover(t), GridObservation::Recovered(false)) => {
                Ok(self.with_cell(b, cell, d.eliminate(t)?))
            }
            (GridAction::Recover(t), GridObservation::Recovered(true)) => {
                if d.prob(t) == 0.0 {
                    return Err(Error::ZeroProbabilityObservation);
                }
                let mut out = match self.nothing_value() {
                    Some(nothing) => self.with_cell(b, cell, CategoricalDist::degenerate(d.len(), nothing)),
                    None => self.with_cell(b, cell, CategoricalDist::degenerate(d.len(), t)),
                };
                out.cleared[cell] = true;
                out.recovered += 1;
                Ok(out)
            }
            _ => Err(Error::ZeroProbabilityObservation),
        }
    }

    fn most_likely_observation(&self, b: &GridBelief, a: &GridAction) -> GridObservation {
        let v = self.predicted_value(b, b.agent);
        match *a {
            GridAction::Move(_) => GridObservation::Moved,
            GridAction::Detect(t) => GridObservation::Detected(v == t),
            GridAction::Recover(t) => GridObservation::Recovered(v == t),
        }
    }

    fn reward(&self, a: &GridAction, o: &GridObservation) -> f64 {
        let r = &self.cfg.rewards;
        match (a, o) {
            (GridAction::Move(_), _) => r.move_cost,
            (GridAction::Detect(_), _) => r.detect_cost,
            (GridAction::Recover(_), GridObservation::Recovered(true)) => r.recover_success,
            (GridAction::Recover(_), _) => r.recover_fail,
        }
    }

    fn is_terminal(&self, b: &GridBelief) -> bool {
        b.recovered >= self.cfg.m
    }

    fn remaining_objects(&self, b: &GridBelief) -> usize {
        self.cfg.m.saturating_sub(b.recovered)
    }

    /// Detect the likeliest type until it is confirmed, recover it, and
    /// otherwise walk to the nearest unresolved cell.
    fn acting_policy(&self, b: &GridBelief) -> Option<GridAction> {
        if self.is_terminal(b) {
            return None;
        }
        let here = b.agent;
        if self.unresolved(b, here) {
            let d = self.factor(b, here);
            let t = self.best_type(d);
            return Some(if d.prob(t) >= self.cfg.rewards.confirm_threshold() {
                GridAction::Recover(t)
            } else {
                GridAction::Detect(t)
            });
        }
        let target = (0..self.num_cells())
            .filter(|c| self.unresolved(b, *c))
            .min_by_key(|c| (self.manhattan(here, *c), *c))?;
        let (r, c) = self.coords(here);
        let (tr, tc) = self.coords(target);
        let dir = if tc > c {
            Direction::East
        } else if tc < c {
            Direction::West
        } else if tr > r {
            Direction::South
        } else {
            Direction::North
        };
        Some(GridAction::Move(dir))
    }

    fn human_view(&self, b: &GridBelief) -> FactoredBelief {
        b.cells.clone()
    }

    fn human_initial_belief(&self) -> FactoredBelief {
        FactoredBelief::uniform(self.num_cells(), self.num_values())
    }

    fn info_space(&self) -> Vec<Fluent> {
        let mut out = vec![Fluent::Null];
        for cell in 0..self.num_cells() {
            let factor = FactorId(cell as u32);
            for value in 0..self.cfg.num_types {
                out.push(Fluent::Holds { factor, value });
                out.push(Fluent::NotHolds { factor, value });
            }
        }
        out
    }

    fn step_limit(&self) -> usize {
        (self.cfg.num_types + 1) * self.num_cells() + 10 * self.cfg.m
    }
}

impl Enumerable for Gridworld {
    fn actions(&self, _b: &GridBelief) -> Vec<GridAction> {
        let mut out: Vec<_> = Direction::ALL.iter().map(|d| GridAction::Move(*d)).collect();
        out.extend((0..self.cfg.num_types).map(GridAction::Detect));
        out.extend((0..self.cfg.num_types).map(GridAction::Recover));
        out
    }

    fn observation_distribution(&self, b: &GridBelief, a: &GridAction) -> Vec<(f64, GridObservation)> {
        let d = self.factor(b, b.agent);
        let split = |p: f64, make: fn(bool) -> GridObservation| {
            [(p, make(true)), (1.0 - p, make(false))]
                .into_iter()
                .filter(|(p, _)| *p > 0.0)
                .collect()
        };
        match *a {
            GridAction::Move(_) => vec![(1.0, GridObservation::Moved)],
            GridAction::Detect(t) => split(d.prob(t), GridObservation::Detected),
            GridAction::Recover(t) => split(d.prob(t), GridObservation::Recovered),
        }
    }

    fn belief_key(&self, b: &GridBelief) -> Vec<i64> {
        let mut key = b.cells.key().values().to_vec();
        key.push(b.agent as i64);
        key.push(b.recovered as i64);
        key.extend(b.cleared.iter().map(|&c| c as i64));
        key
    }
}
