//! Fixed initial layouts loaded from JSON, for regression runs.
//!
//! Gridworld: `{"objects": [{"id": <cell>, "type": <t>}], "agent": <cell>}`.
//! Zones: `{"objects": [{"id": <o>, "pos": [x, y]}], "agent": {"x", "y", "heading"}}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GridState, Gridworld, Pose, ZoneState, Zones};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioObject {
    pub id: usize,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub ty: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioAgent {
    Cell(usize),
    Pose(Pose),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub objects: Vec<ScenarioObject>,
    pub agent: ScenarioAgent,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn grid_state(&self, g: &Gridworld) -> Result<GridState> {
        let ScenarioAgent::Cell(agent) = self.agent else {
            return Err(Error::Config("gridworld scenario needs a cell for the agent".into()));
        };
        let objects = self
            .objects
            .iter()
            .map(|o| {
                o.ty.map(|t| (o.id, t))
                    .ok_or_else(|| Error::Config(format!("object {} has no type", o.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        if objects.len() != g.config().m {
            return Err(Error::Config(format!("expected {} objects", g.config().m)));
        }
        g.state_from(agent, &objects)
    }

    pub fn zone_state(&self, z: &Zones) -> Result<ZoneState> {
        let ScenarioAgent::Pose(pose) = self.agent else {
            return Err(Error::Config("zone scenario needs a pose for the agent".into()));
        };
        let mut objects: Vec<_> = self.objects.iter().collect();
        objects.sort_by_key(|o| o.id);
        if objects.iter().enumerate().any(|(i, o)| o.id != i) {
            return Err(Error::Config("zone object ids must be 0..m".into()));
        }
        let positions = objects
            .iter()
            .map(|o| o.pos.ok_or_else(|| Error::Config(format!("object {} has no pos", o.id))))
            .collect::<Result<Vec<_>>>()?;
        z.state_from(pose, &positions)
    }
}
