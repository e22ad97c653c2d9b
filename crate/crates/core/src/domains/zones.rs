//! Continuous search-and-recover over the unit square, split into vertical
//! zones.
//!
//! The agent tracks each object's position on a G×G lattice; the human only
//! sees which zone each object is in. Sensing cones are closed and are tested
//! against cell centres, so an object is visible exactly when the centre of
//! its cell is.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Domain, Outcome, Rewards};
use crate::belief::{CategoricalDist, FactorId, FactoredBelief, Fluent};
use crate::error::{Error, Result};

const POSE_TOL: f64 = 1e-9;
const POSE_BOUND: (f64, f64) = (-1.0, 2.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    fn close_to(&self, other: &Pose) -> bool {
        (self.x - other.x).abs() < POSE_TOL
            && (self.y - other.y).abs() < POSE_TOL
            && (self.heading - other.heading).abs() < POSE_TOL
    }

    fn dist(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cone {
    pub half_angle: f64,
    pub range: f64,
}

impl Cone {
    pub fn contains(&self, pose: &Pose, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - pose.x, y - pose.y);
        let d = dx.hypot(dy);
        if d > self.range + 1e-12 {
            return false;
        }
        if d == 0.0 {
            return true;
        }
        let mut off = dy.atan2(dx) - pose.heading;
        while off > std::f64::consts::PI {
            off -= std::f64::consts::TAU;
        }
        while off < -std::f64::consts::PI {
            off += std::f64::consts::TAU;
        }
        off.abs() <= self.half_angle + 1e-12
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneConfig {
    pub zones: usize,
    pub m: usize,
    #[serde(default = "default_lattice")]
    pub lattice: usize,
    #[serde(default = "default_view")]
    pub view: Cone,
    #[serde(default = "default_reach")]
    pub reach: Cone,
    #[serde(default = "default_start")]
    pub start: Pose,
    #[serde(default)]
    pub rewards: Rewards,
}

fn default_lattice() -> usize {
    20
}

fn default_view() -> Cone {
    Cone {
        half_angle: 30f64.to_radians(),
        range: 2.0,
    }
}

fn default_reach() -> Cone {
    Cone {
        half_angle: 30f64.to_radians(),
        range: 0.2,
    }
}

fn default_start() -> Pose {
    Pose {
        x: 0.5,
        y: -0.5,
        heading: FRAC_PI_2,
    }
}

impl ZoneConfig {
    pub fn new(zones: usize, m: usize) -> Self {
        Self {
            zones,
            m,
            lattice: default_lattice(),
            view: default_view(),
            reach: default_reach(),
            start: default_start(),
            rewards: Rewards::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.zones == 0 || self.m == 0 || self.lattice == 0 {
            return Err(Error::Config("zones, m and lattice must be positive".into()));
        }
        if self.m > self.lattice * self.lattice {
            return Err(Error::Config("more objects than lattice cells".into()));
        }
        if !(self.view.half_angle > 0.0 && self.view.half_angle < FRAC_PI_2) {
            return Err(Error::Config("view half-angle must be in (0, pi/2)".into()));
        }
        if !(self.reach.half_angle > 0.0 && self.reach.range > 0.0) {
            return Err(Error::Config("reach cone must be nonempty".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ZoneAction {
    Move(Pose),
    Detect,
    Recover,
}

impl fmt::Display for ZoneAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZoneAction::Move(p) => write!(f, "Move({:.3},{:.3},{:.3})", p.x, p.y, p.heading),
            ZoneAction::Detect => write!(f, "Detect"),
            ZoneAction::Recover => write!(f, "Recover"),
        }
    }
}

/// An object seen by Detect. Equality ignores the exact position: the
/// predictor only knows lattice cells.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Sighting {
    pub object: usize,
    pub cell: usize,
    pub pos: [f64; 2],
}

impl PartialEq for Sighting {
    fn eq(&self, other: &Self) -> bool {
        self.object == other.object && self.cell == other.cell
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ZoneObservation {
    Moved,
    Seen(Vec<Sighting>),
    Recovered(Option<usize>),
}

impl fmt::Display for ZoneObservation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZoneObservation::Moved => write!(f, "moved"),
            ZoneObservation::Seen(s) => {
                write!(f, "seen[")?;
                for (i, x) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "o{}@({:.3},{:.3})", x.object, x.pos[0], x.pos[1])?;
                }
                write!(f, "]")
            }
            ZoneObservation::Recovered(Some(o)) => write!(f, "recovered(o{o})"),
            ZoneObservation::Recovered(None) => write!(f, "failed"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZoneObject {
    pub pos: [f64; 2],
    pub cell: usize,
    pub recovered: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZoneState {
    pub pose: Pose,
    pub objects: Vec<ZoneObject>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZoneBelief {
    /// One factor per object over lattice cells.
    pub positions: FactoredBelief,
    pub pose: Pose,
    pub recovered: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct Zones {
    cfg: ZoneConfig,
    cell_zone: Vec<usize>,
    view_poses: Vec<Pose>,
}

impl Zones {
    pub fn new(cfg: ZoneConfig) -> Result<Self> {
        cfg.validate()?;
        let g = cfg.lattice;
        let cell_zone = (0..g * g)
            .map(|c| {
                let x = (c % g) as f64 / g as f64 + 0.5 / g as f64;
                ((x * cfg.zones as f64) as usize).min(cfg.zones - 1)
            })
            .collect();
        let width = 1.0 / cfg.zones as f64;
        let back = 0.5 * width / cfg.view.half_angle.tan();
        let view_poses = (0..cfg.zones)
            .map(|z| Pose {
                x: (z as f64 + 0.5) * width,
                y: -back,
                heading: FRAC_PI_2,
            })
            .collect();
        let out = Self {
            cfg,
            cell_zone,
            view_poses,
        };
        for z in 0..out.cfg.zones {
            let pose = out.view_poses[z];
            if (0..g * g)
                .filter(|c| out.cell_zone[*c] == z)
                .any(|c| !out.in_cone(&out.cfg.view, &pose, c))
            {
                return Err(Error::Config(format!("view cone cannot cover zone {z}")));
            }
        }
        Ok(out)
    }

    pub fn config(&self) -> &ZoneConfig {
        &self.cfg
    }

    pub fn num_cells(&self) -> usize {
        self.cfg.lattice * self.cfg.lattice
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let g = self.cfg.lattice as f64;
        [
            (cell % self.cfg.lattice) as f64 / g + 0.5 / g,
            (cell / self.cfg.lattice) as f64 / g + 0.5 / g,
        ]
    }

    pub fn cell_of(&self, pos: [f64; 2]) -> usize {
        let g = self.cfg.lattice;
        let clamp = |v: f64| ((v * g as f64).floor().max(0.0) as usize).min(g - 1);
        clamp(pos[1]) * g + clamp(pos[0])
    }

    pub fn zone_of_cell(&self, cell: usize) -> usize {
        self.cell_zone[cell]
    }

    pub fn view_pose(&self, zone: usize) -> Pose {
        self.view_poses[zone]
    }

    /// Pose from which an object in `cell` is straight ahead at half reach.
    pub fn approach_pose(&self, cell: usize) -> Pose {
        let [x, y] = self.cell_center(cell);
        Pose {
            x,
            y: y - 0.5 * self.cfg.reach.range,
            heading: FRAC_PI_2,
        }
    }

    fn in_cone(&self, cone: &Cone, pose: &Pose, cell: usize) -> bool {
        let [x, y] = self.cell_center(cell);
        cone.contains(pose, x, y)
    }

    pub fn state_from(&self, pose: Pose, positions: &[[f64; 2]]) -> Result<ZoneState> {
        let mut seen = vec![false; self.num_cells()];
        let mut objects = Vec::with_capacity(positions.len());
        for p in positions {
            if !(0.0..1.0).contains(&p[0]) || !(0.0..1.0).contains(&p[1]) {
                return Err(Error::Config(format!("object position {p:?} outside the unit square")));
            }
            let cell = self.cell_of(*p);
            if std::mem::replace(&mut seen[cell], true) {
                return Err(Error::Config("two objects share a lattice cell".into()));
            }
            objects.push(ZoneObject {
                pos: *p,
                cell,
                recovered: false,
            });
        }
        if objects.len() != self.cfg.m {
            return Err(Error::Config(format!("expected {} objects", self.cfg.m)));
        }
        Ok(ZoneState { pose, objects })
    }

    /// Abstraction map: sum each object's cell masses by zone.
    pub fn abstraction_map(&self, positions: &FactoredBelief) -> FactoredBelief {
        FactoredBelief::new(positions.factors().map(|(id, d)| {
            let mut mass = vec![0.0; self.cfg.zones];
            for (c, p) in d.probs().iter().enumerate() {
                mass[self.cell_zone[c]] += p;
            }
            (id, CategoricalDist::from_masses(mass).expect("nonempty mass"))
        }))
    }

    fn object_dist<'a>(&self, b: &'a ZoneBelief, o: usize) -> &'a CategoricalDist {
        b.positions.get(FactorId(o as u32)).expect("object factor")
    }

    fn known_cell(&self, b: &ZoneBelief, o: usize) -> Option<usize> {
        self.object_dist(b, o).is_degenerate()
    }

    fn closest_in_reach(&self, pose: &Pose, candidates: impl Iterator<Item = (usize, usize)>) -> Option<usize> {
        candidates
            .filter(|(_, cell)| self.in_cone(&self.cfg.reach, pose, *cell))
            .map(|(o, cell)| {
                let [x, y] = self.cell_center(cell);
                ((x - pose.x).hypot(y - pose.y), o)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, o)| o)
    }

    fn restrict_object(&self, b: &mut ZoneBelief, o: usize, keep: impl Fn(usize) -> bool) -> Result<()> {
        let d = self.object_dist(b, o).restrict(keep)?;
        b.positions.set_factor(FactorId(o as u32), d);
        Ok(())
    }
}

impl Domain for Zones {
    type State = ZoneState;
    type Action = ZoneAction;
    type Observation = ZoneObservation;
    type Belief = ZoneBelief;

    fn sample_state(&self, rng: &mut ChaCha8Rng) -> ZoneState {
        let g = self.cfg.lattice as f64;
        let cells = sample(rng, self.num_cells(), self.cfg.m);
        let positions: Vec<[f64; 2]> = cells
            .into_iter()
            .map(|c| {
                let col = (c % self.cfg.lattice) as f64;
                let row = (c / self.cfg.lattice) as f64;
                [
                    (col + rng.random_range(0.0..1.0)) / g,
                    (row + rng.random_range(0.0..1.0)) / g,
                ]
            })
            .collect();
        self.state_from(self.cfg.start, &positions)
            .expect("sampled placement is valid")
    }

    fn initial_belief(&self, state: &ZoneState) -> ZoneBelief {
        ZoneBelief {
            positions: FactoredBelief::uniform(self.cfg.m, self.num_cells()),
            pose: state.pose,
            recovered: vec![false; self.cfg.m],
        }
    }

    fn step(&self, s: &ZoneState, a: &ZoneAction) -> Outcome<ZoneState, ZoneObservation> {
        let r = &self.cfg.rewards;
        let mut next = s.clone();
        let (observation, reward) = match a {
            ZoneAction::Move(p) => {
                next.pose = Pose {
                    x: p.x.clamp(POSE_BOUND.0, POSE_BOUND.1),
                    y: p.y.clamp(POSE_BOUND.0, POSE_BOUND.1),
                    heading: p.heading,
                };
                (ZoneObservation::Moved, r.move_cost)
            }
            ZoneAction::Detect => {
                let seen = s
                    .objects
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| !o.recovered && self.in_cone(&self.cfg.view, &s.pose, o.cell))
                    .map(|(i, o)| Sighting {
                        object: i,
                        cell: o.cell,
                        pos: o.pos,
                    })
                    .collect();
                (ZoneObservation::Seen(seen), r.detect_cost)
            }
            ZoneAction::Recover => {
                let live = s
                    .objects
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| !o.recovered)
                    .map(|(i, o)| (i, o.cell));
                match self.closest_in_reach(&s.pose, live) {
                    Some(o) => {
                        next.objects[o].recovered = true;
                        (ZoneObservation::Recovered(Some(o)), r.recover_success)
                    }
                    None => (ZoneObservation::Recovered(None), r.recover_fail),
                }
            }
        };
        Outcome {
            state: next,
            observation,
            reward,
        }
    }

    fn update_belief(&self, b: &ZoneBelief, a: &ZoneAction, obs: &ZoneObservation) -> Result<ZoneBelief> {
        let mut out = b.clone();
        match (a, obs) {
            (ZoneAction::Move(p), ZoneObservation::Moved) => {
                out.pose = Pose {
                    x: p.x.clamp(POSE_BOUND.0, POSE_BOUND.1),
                    y: p.y.clamp(POSE_BOUND.0, POSE_BOUND.1),
                    heading: p.heading,
                };
            }
            (ZoneAction::Detect, ZoneObservation::Seen(seen)) => {
                let pose = b.pose;
                for o in (0..self.cfg.m).filter(|o| !b.recovered[*o]) {
                    match seen.iter().find(|s| s.object == o) {
                        Some(s) => {
                            if !self.in_cone(&self.cfg.view, &pose, s.cell) || self.object_dist(b, o).prob(s.cell) == 0.0 {
                                return Err(Error::ZeroProbabilityObservation);
                            }
                            out.positions
                                .set_factor(FactorId(o as u32), CategoricalDist::degenerate(self.num_cells(), s.cell));
                        }
                        None => self.restrict_object(&mut out, o, |c| !self.in_cone(&self.cfg.view, &pose, c))?,
                    }
                }
            }
            (ZoneAction::Recover, ZoneObservation::Recovered(Some(o))) => {
                let pose = b.pose;
                if *o >= self.cfg.m || b.recovered[*o] {
                    return Err(Error::ZeroProbabilityObservation);
                }
                self.restrict_object(&mut out, *o, |c| self.in_cone(&self.cfg.reach, &pose, c))?;
                out.recovered[*o] = true;
            }
            (ZoneAction::Recover, ZoneObservation::Recovered(None)) => {
                let pose = b.pose;
                for o in (0..self.cfg.m).filter(|o| !b.recovered[*o]) {
                    self.restrict_object(&mut out, o, |c| !self.in_cone(&self.cfg.reach, &pose, c))?;
                }
            }
            _ => return Err(Error::ZeroProbabilityObservation),
        }
        Ok(out)
    }

    fn most_likely_observation(&self, b: &ZoneBelief, a: &ZoneAction) -> ZoneObservation {
        let ml = (0..self.cfg.m)
            .filter(|o| !b.recovered[*o])
            .map(|o| (o, self.object_dist(b, o).argmax()));
        match a {
            ZoneAction::Move(_) => ZoneObservation::Moved,
            ZoneAction::Detect => ZoneObservation::Seen(
                ml.filter(|(_, c)| self.in_cone(&self.cfg.view, &b.pose, *c))
                    .map(|(object, cell)| Sighting {
                        object,
                        cell,
                        pos: self.cell_center(cell),
                    })
                    .collect(),
            ),
            ZoneAction::Recover => ZoneObservation::Recovered(self.closest_in_reach(&b.pose, ml)),
        }
    }

    fn reward(&self, a: &ZoneAction, o: &ZoneObservation) -> f64 {
        let r = &self.cfg.rewards;
        match (a, o) {
            (ZoneAction::Move(_), _) => r.move_cost,
            (ZoneAction::Detect, _) => r.detect_cost,
            (ZoneAction::Recover, ZoneObservation::Recovered(Some(_))) => r.recover_success,
            (ZoneAction::Recover, _) => r.recover_fail,
        }
    }

    fn is_terminal(&self, b: &ZoneBelief) -> bool {
        b.recovered.iter().all(|r| *r)
    }

    fn remaining_objects(&self, b: &ZoneBelief) -> usize {
        b.recovered.iter().filter(|r| !**r).count()
    }

    /// Recover the nearest localized object; with none, look at the zone
    /// with the most unrecovered probability mass in view.
    fn acting_policy(&self, b: &ZoneBelief) -> Option<ZoneAction> {
        if self.is_terminal(b) {
            return None;
        }
        let known = (0..self.cfg.m)
            .filter(|o| !b.recovered[*o])
            .filter_map(|o| self.known_cell(b, o).map(|c| (o, self.approach_pose(c))))
            .min_by(|a, c| a.1.dist(&b.pose).total_cmp(&c.1.dist(&b.pose)).then(a.0.cmp(&c.0)));
        if let Some((_, pose)) = known {
            return Some(if pose.close_to(&b.pose) {
                ZoneAction::Recover
            } else {
                ZoneAction::Move(pose)
            });
        }
        let mut best: Option<(f64, usize)> = None;
        for z in 0..self.cfg.zones {
            let pose = self.view_poses[z];
            let mass: f64 = (0..self.cfg.m)
                .filter(|o| !b.recovered[*o])
                .map(|o| {
                    self.object_dist(b, o)
                        .probs()
                        .iter()
                        .enumerate()
                        .filter(|(c, p)| **p > 0.0 && self.in_cone(&self.cfg.view, &pose, *c))
                        .map(|(_, p)| p)
                        .sum::<f64>()
                })
                .sum();
            if mass > 1e-12 && best.is_none_or(|(m, _)| mass > m) {
                best = Some((mass, z));
            }
        }
        let (_, z) = best?;
        let pose = self.view_poses[z];
        Some(if pose.close_to(&b.pose) {
            ZoneAction::Detect
        } else {
            ZoneAction::Move(pose)
        })
    }

    fn human_view(&self, b: &ZoneBelief) -> FactoredBelief {
        self.abstraction_map(&b.positions)
    }

    fn human_initial_belief(&self) -> FactoredBelief {
        FactoredBelief::uniform(self.cfg.m, self.cfg.zones)
    }

    fn info_space(&self) -> Vec<Fluent> {
        let mut out = vec![Fluent::Null];
        for o in 0..self.cfg.m {
            let factor = FactorId(o as u32);
            for value in 0..self.cfg.zones {
                out.push(Fluent::Holds { factor, value });
                out.push(Fluent::NotHolds { factor, value });
            }
        }
        out
    }

    fn step_limit(&self) -> usize {
        4 * self.cfg.zones + 4 * self.cfg.m + 10
    }
}
