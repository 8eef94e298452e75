//! Hierarchical online planning: a belief-driven topological graph of places,
//! a subgoal-level POUCT over that graph, A* navigation between places and a
//! primitive-level POUCT for local search. Both levels read the same target
//! belief.

mod astar;
mod models;
mod topo;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use astar::{astar_action, astar_path, Navigation};
pub use models::{HighLevelModel, LowLevelModel, Subgoal};
pub use topo::{sample_topo_graph, Places, TopoGraph};

use crate::agent::{Agent, AgentRng, Decision};
use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::pomdp::{Action, CosBelief, CosModel, JointObservation};
use crate::pouct::{plan, PlannerParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierParams {
    /// Maximum number of graph nodes.
    #[serde(alias = "M")]
    pub max_nodes: usize,
    /// Minimum node separation in meters.
    pub d_sep: f64,
    pub deg_min: usize,
    pub deg_max: usize,
    /// Resample the graph when its nodes capture less belief than this.
    pub resample_threshold: f64,
    pub high_level_planner: PlannerParams,
    pub low_level_planner: PlannerParams,
}

impl Default for HierParams {
    fn default() -> Self {
        Self {
            max_nodes: 10,
            d_sep: 1.0,
            deg_min: 3,
            deg_max: 5,
            resample_threshold: 0.5,
            high_level_planner: PlannerParams::default(),
            low_level_planner: PlannerParams::default(),
        }
    }
}

impl HierParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_nodes < 1 {
            return Err(Error::InvalidParameter("max_nodes must be at least 1".into()));
        }
        if !(self.d_sep >= 0.0) {
            return Err(Error::InvalidParameter(format!("d_sep must be nonnegative, got {}", self.d_sep)));
        }
        if self.deg_min > self.deg_max {
            return Err(Error::InvalidParameter(format!(
                "deg_min {} exceeds deg_max {}",
                self.deg_min, self.deg_max
            )));
        }
        if !(self.resample_threshold > 0.0 && self.resample_threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "resample_threshold must lie in (0,1], got {}",
                self.resample_threshold
            )));
        }
        self.high_level_planner.validate()?;
        self.low_level_planner.validate()
    }
}

/// Subgoal chosen by POUCT over the graph's high-level action space.
pub fn high_level_plan<R: Rng + ?Sized>(
    topo: &TopoGraph,
    belief: &CosBelief,
    model: &CosModel,
    params: &HierParams,
    rng: &mut R,
) -> Subgoal {
    let m = HighLevelModel::new(model, topo, belief);
    plan(&m, &params.high_level_planner, rng)
}

/// Primitive action chosen by POUCT over moves and `Done`.
pub fn low_level_plan<R: Rng + ?Sized>(belief: &CosBelief, model: &CosModel, params: &PlannerParams, rng: &mut R) -> Action {
    let m = LowLevelModel::new(model, belief);
    plan(&m, params, rng)
}

/// Keeps the target report and the first `n - 1` correlated reports.
pub(crate) fn project(z: &JointObservation, n: usize) -> JointObservation {
    JointObservation {
        robot_pose: z.robot_pose,
        detections: z.detections.iter().copied().take(n).collect(),
    }
}

/// Online hierarchical planner holding the shared target belief.
pub struct HierarchicalAgent {
    name: String,
    model: CosModel,
    params: HierParams,
    places: Places,
    belief: CosBelief,
    graph: Option<TopoGraph>,
    subgoal: Option<Subgoal>,
    resamples: u32,
    resets: u32,
    done: bool,
}

impl HierarchicalAgent {
    /// Starts from a uniform target belief at `start`.
    pub fn new(name: impl Into<String>, model: CosModel, params: HierParams, start: crate::grid::Pose) -> Result<Self> {
        params.validate()?;
        let places = Places::new(&model.world().map, start.cell)?;
        let belief = CosBelief::uniform(model.world(), start);
        Ok(Self {
            name: name.into(),
            model,
            params,
            places,
            belief,
            graph: None,
            subgoal: None,
            resamples: 0,
            resets: 0,
            done: false,
        })
    }

    pub fn belief(&self) -> &CosBelief {
        &self.belief
    }

    pub fn graph(&self) -> Option<&TopoGraph> {
        self.graph.as_ref()
    }

    pub fn model(&self) -> &CosModel {
        &self.model
    }

    pub fn subgoal(&self) -> Option<Subgoal> {
        self.subgoal
    }

    pub fn resample_count(&self) -> u32 {
        self.resamples
    }

    pub fn reset_count(&self) -> u32 {
        self.resets
    }

    fn captured_mass(&self) -> f64 {
        let map = &self.model.world().map;
        let p = self.places.place_mass(&self.belief.target_dist);
        self.graph.as_ref().map_or(0.0, |g| g.captured_mass(map, &p))
    }

    /// One iteration of the online loop: belief update, conditional graph
    /// resample, subgoal planning and primitive action selection.
    pub fn agent_step(&mut self, z: &JointObservation, rng: &mut AgentRng) -> Result<Decision> {
        if self.done {
            return Err(Error::Agent("agent already declared Done".into()));
        }
        let z = project(z, self.model.num_classes());
        let (belief, reset) = self.belief.update(&z, &self.model);
        self.belief = belief;
        if reset {
            self.resets += 1;
        }

        let mut resampled = false;
        if self.graph.is_none() || self.captured_mass() < self.params.resample_threshold {
            let map = &self.model.world().map;
            self.graph = Some(sample_topo_graph(map, &self.places, &self.belief.target_dist, &self.params, rng)?);
            self.resamples += 1;
            resampled = true;
        }
        let graph = self.graph.as_ref().expect("graph sampled");

        let subgoal = high_level_plan(graph, &self.belief, &self.model, &self.params, rng);
        self.subgoal = Some(subgoal);
        let map = &self.model.world().map;
        let action = match subgoal {
            Subgoal::Done => Action::Done,
            Subgoal::NavigateTo(dest) => match astar_action(dest, self.belief.robot, map) {
                Navigation::Move(m) => Action::Move(m),
                Navigation::Arrived | Navigation::Unreachable => {
                    low_level_plan(&self.belief, &self.model, &self.params.low_level_planner, rng)
                }
            },
            Subgoal::SearchLocal => low_level_plan(&self.belief, &self.model, &self.params.low_level_planner, rng),
        };
        if action == Action::Done {
            self.done = true;
        }
        Ok(Decision {
            action,
            subgoal: Some(subgoal.to_string()),
            belief_hash: self.belief.fingerprint(),
            resampled,
            belief_reset: reset,
        })
    }
}

impl Agent for HierarchicalAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&mut self, z: &JointObservation, rng: &mut AgentRng) -> Result<Decision> {
        self.agent_step(z, rng)
    }

    fn target_belief(&self) -> Vec<(Cell, f64)> {
        self.belief.snapshot(self.model.world())
    }
}
