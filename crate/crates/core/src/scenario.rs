//! Scenario files: the map, ground-truth object placements, sensor and
//! correlation parameters, and planner settings for one search task.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "kitchen-1",
//!   "map": { "width": 12, "height": 10, "cell_size": 0.25, "obstacles": [[4, 0], [4, 1]] },
//!   "target": { "class": "PepperShaker", "cell": [9, 7], "detector": { "preset": "Kitchen/PepperShaker" } },
//!   "objects": [
//!     { "class": "StoveKnob", "cell": [10, 7],
//!       "detector": { "tp": 0.85, "fp": 0.03, "r": 2.5 },
//!       "correlation": { "relation": "close", "d": 1.0 } }
//!   ],
//!   "init_pose": { "cell": [1, 1], "heading": 0 },
//!   "max_steps": 100,
//!   "success_distance": 1.0,
//!   "ablation": "accurate",
//!   "hierarchy": { "max_nodes": 10, "high_level_planner": { "num_sims": 500 } },
//!   "greedy": { "num_particles": 1000 }
//! }
//! ```
//!
//! Headings are in degrees (multiples of 45, counter-clockwise from +col).
//! `ablation: "wrong"` flips every close/far relation in the agent's model
//! while leaving the world untouched.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, GridMap, Pose, World};
use crate::hierarchy::HierParams;
use crate::baselines::GreedyParams;
use crate::pomdp::CosModel;
use crate::sensing::{CorrelationSpec, DetectorParams};

pub const SCHEMA_VERSION: u32 = 1;

const PRESETS_JSON: &str = include_str!("../presets/detectors.json");

#[derive(Deserialize)]
struct PresetFile {
    targets: BTreeMap<String, BTreeMap<String, DetectorParams>>,
    correlated: BTreeMap<String, BTreeMap<String, DetectorParams>>,
}

fn presets() -> &'static BTreeMap<String, DetectorParams> {
    static TABLE: OnceLock<BTreeMap<String, DetectorParams>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let file: PresetFile = serde_json::from_str(PRESETS_JSON).expect("bundled presets parse");
        let mut out = BTreeMap::new();
        for rooms in [file.targets, file.correlated] {
            for (room, classes) in rooms {
                for (class, params) in classes {
                    out.insert(format!("{room}/{class}"), params);
                }
            }
        }
        out
    })
}

/// Measured detector statistics for household object classes, keyed
/// `"Room/Class"` (e.g. `"Kitchen/PepperShaker"`).
pub fn detector_preset(key: &str) -> Option<DetectorParams> {
    presets().get(key).copied()
}

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    presets().keys().map(String::as_str)
}

/// Inline parameters or a named preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DetectorSource {
    Params(DetectorParams),
    Preset { preset: String },
}

impl DetectorSource {
    pub fn resolve(&self) -> Result<DetectorParams> {
        match self {
            DetectorSource::Params(p) => Ok(*p),
            DetectorSource::Preset { preset } => {
                detector_preset(preset).ok_or_else(|| Error::InvalidScenario(format!("unknown detector preset {preset:?}")))
            }
        }
    }
}

impl From<DetectorParams> for DetectorSource {
    fn from(p: DetectorParams) -> Self {
        DetectorSource::Params(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub class: String,
    pub cell: Cell,
    pub detector: DetectorSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub class: String,
    pub cell: Cell,
    pub detector: DetectorSource,
    pub correlation: CorrelationSpec,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ablation {
    #[default]
    Accurate,
    Wrong,
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}

fn default_max_steps() -> u32 {
    100
}

fn default_success_distance() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    pub name: String,
    pub map: GridMap,
    pub target: TargetSpec,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    pub init_pose: Pose,
    #[serde(default = "default_max_steps")]
    pub max_steps: u32,
    #[serde(default = "default_success_distance")]
    pub success_distance: f64,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default)]
    pub hierarchy: HierParams,
    #[serde(default)]
    pub greedy: GreedyParams,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks everything the type system does not: schema version, free
    /// object and start cells, unique class names, parameter ranges and
    /// nonempty correlation supports.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidScenario(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.max_steps < 1 {
            return Err(Error::InvalidScenario("max_steps must be at least 1".into()));
        }
        if !(self.success_distance > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "success_distance must be positive, got {}",
                self.success_distance
            )));
        }
        if !self.map.is_free(self.init_pose.cell) {
            return Err(Error::InvalidScenario(format!("init pose cell {} is not free", self.init_pose.cell)));
        }
        let mut names = HashSet::new();
        for (class, cell) in std::iter::once((&self.target.class, self.target.cell))
            .chain(self.objects.iter().map(|o| (&o.class, o.cell)))
        {
            if !names.insert(class.as_str()) {
                return Err(Error::InvalidScenario(format!("duplicate class name {class:?}")));
            }
            if !self.map.is_free(cell) {
                return Err(Error::InvalidScenario(format!("{class} cell {cell} is not free")));
            }
        }
        self.target.detector.resolve()?.validate()?;
        for o in &self.objects {
            o.detector.resolve()?.validate()?;
            o.correlation.validate()?;
        }
        self.hierarchy.validate()?;
        self.greedy.validate()?;
        self.build_model(&Arc::new(World::new(self.map.clone())), self.ablation)?;
        Ok(())
    }

    pub fn world(&self) -> Arc<World> {
        Arc::new(World::new(self.map.clone()))
    }

    /// Agent-side model, with relations flipped under the `wrong` ablation.
    pub fn agent_model(&self, world: &Arc<World>) -> Result<CosModel> {
        self.build_model(world, self.ablation)
    }

    /// Model with the scenario's stated relations, used by the environment.
    pub fn true_model(&self, world: &Arc<World>) -> Result<CosModel> {
        self.build_model(world, Ablation::Accurate)
    }

    fn build_model(&self, world: &Arc<World>, ablation: Ablation) -> Result<CosModel> {
        let objects = self
            .objects
            .iter()
            .map(|o| {
                let corr = match ablation {
                    Ablation::Accurate => o.correlation,
                    Ablation::Wrong => o.correlation.flipped(),
                };
                Ok((o.class.clone(), o.detector.resolve()?, corr))
            })
            .collect::<Result<Vec<_>>>()?;
        CosModel::new(
            world.clone(),
            self.target.class.clone(),
            self.target.detector.resolve()?,
            &objects,
            self.success_distance,
        )
    }

    /// Ground-truth cells, target first.
    pub fn object_cells(&self) -> Vec<Cell> {
        std::iter::once(self.target.cell)
            .chain(self.objects.iter().map(|o| o.cell))
            .collect()
    }
}

/// Every `*.json` scenario in `dir`, sorted by file name.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<ScenarioSpec>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths.iter().map(ScenarioSpec::load).collect()
}
