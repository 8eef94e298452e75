//! Generative models handed to the POUCT planner at the two levels of the
//! hierarchy. Both share the agent's target belief as their root distribution.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{apply_move, Cell, Heading, MoveAction, Pose};
use crate::pomdp::{Action, BeliefSampler, CosBelief, CosModel, CosState, JointObservation, STEP_COST};
use crate::pouct::{GenerativeModel, Step};

use super::topo::TopoGraph;

/// Primitive-level search: moves plus `Done`.
pub struct LowLevelModel<'a> {
    model: &'a CosModel,
    robot: Pose,
    sampler: BeliefSampler,
}

impl<'a> LowLevelModel<'a> {
    pub fn new(model: &'a CosModel, belief: &CosBelief) -> Self {
        Self {
            model,
            robot: belief.robot,
            sampler: belief.sampler(),
        }
    }

    /// Moves that shorten the distance to the target or put the target or an
    /// imagined correlated object in view. Falls back to every move.
    pub fn rollout_candidates(&self, robot: Pose, target: Cell, objects: &[usize]) -> Vec<MoveAction> {
        let world = self.model.world();
        let map = &world.map;
        let here = robot.cell.dist_sq(target);
        let watched: Vec<usize> = std::iter::once(map.index(target)).chain(objects.iter().copied()).collect();
        let candidates: Vec<MoveAction> = MoveAction::ALL
            .into_iter()
            .filter(|&m| {
                let next = apply_move(robot, m, map);
                next.cell.dist_sq(target) < here || watched.iter().any(|&k| world.sees(next, k))
            })
            .collect();
        if candidates.is_empty() {
            MoveAction::ALL.to_vec()
        } else {
            candidates
        }
    }
}

impl GenerativeModel for LowLevelModel<'_> {
    type State = CosState;
    type Action = Action;
    type Observation = JointObservation;

    fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> CosState {
        CosState {
            robot: self.robot,
            target: self.model.world().map.cell_at(self.sampler.sample(rng)),
        }
    }

    fn actions(&self, _state: &CosState) -> Vec<Action> {
        Action::ALL.to_vec()
    }

    fn step<R: Rng + ?Sized>(&self, s: &CosState, a: Action, rng: &mut R) -> Step<CosState, JointObservation> {
        let reward = self.model.reward(s, a);
        if a == Action::Done {
            return Step {
                state: *s,
                observation: JointObservation {
                    robot_pose: s.robot,
                    detections: Vec::new(),
                },
                reward,
                terminal: true,
            };
        }
        let next = CosState {
            robot: self.model.transition(s.robot, a),
            target: s.target,
        };
        let observation = self.model.sample_observation(&next, rng);
        Step {
            state: next,
            observation,
            reward,
            terminal: false,
        }
    }

    /// Moves only: the rollout never declares `Done`. Correlated objects are
    /// imagined once per rollout from the correlation model.
    fn rollout<R: Rng + ?Sized>(&self, state: &CosState, depth: u32, discount: f64, rng: &mut R) -> f64 {
        let map = &self.model.world().map;
        let t = map.index(state.target);
        let objects: Vec<usize> = self
            .model
            .objects()
            .iter()
            .map(|o| o.correlation.sample(t, rng))
            .collect();
        let mut robot = state.robot;
        let mut total = 0.0;
        let mut scale = 1.0;
        for _ in 0..depth {
            let candidates = self.rollout_candidates(robot, state.target, &objects);
            let m = candidates[rng.gen_range(0..candidates.len())];
            robot = apply_move(robot, m, map);
            total += scale * STEP_COST;
            scale *= discount;
        }
        total
    }
}

/// High-level action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subgoal {
    NavigateTo(Cell),
    SearchLocal,
    Done,
}

impl fmt::Display for Subgoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subgoal::NavigateTo(c) => write!(f, "NavigateTo{c}"),
            Subgoal::SearchLocal => f.write_str("SearchLocal"),
            Subgoal::Done => f.write_str("Done"),
        }
    }
}

/// Subgoal-level search over the topological graph. Navigation lands on the
/// destination node facing the (sampled) target and costs one unit per
/// `MoveAhead` step; searching locally is one primitive step with a fresh
/// observation.
pub struct HighLevelModel<'a> {
    model: &'a CosModel,
    graph: &'a TopoGraph,
    robot: Pose,
    sampler: BeliefSampler,
}

impl<'a> HighLevelModel<'a> {
    pub fn new(model: &'a CosModel, graph: &'a TopoGraph, belief: &CosBelief) -> Self {
        Self {
            model,
            graph,
            robot: belief.robot,
            sampler: belief.sampler(),
        }
    }

    fn navigation_targets(&self, robot: Pose) -> Vec<Cell> {
        let map = &self.model.world().map;
        if self.graph.is_empty() {
            return Vec::new();
        }
        let here = self.graph.nearest_node(map, robot.cell);
        let mut out: Vec<Cell> = Vec::new();
        if self.graph.nodes[here] != robot.cell {
            out.push(self.graph.nodes[here]);
        }
        out.extend(self.graph.neighbors(here).map(|n| self.graph.nodes[n]));
        out.retain(|&c| c != robot.cell && self.graph.node_of(c).is_some_and(|n| self.graph.steps_to(map, n, robot.cell).is_some()));
        out
    }
}

impl GenerativeModel for HighLevelModel<'_> {
    type State = CosState;
    type Action = Subgoal;
    type Observation = JointObservation;

    fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> CosState {
        CosState {
            robot: self.robot,
            target: self.model.world().map.cell_at(self.sampler.sample(rng)),
        }
    }

    fn actions(&self, state: &CosState) -> Vec<Subgoal> {
        let mut out: Vec<Subgoal> = self
            .navigation_targets(state.robot)
            .into_iter()
            .map(Subgoal::NavigateTo)
            .collect();
        out.push(Subgoal::SearchLocal);
        out.push(Subgoal::Done);
        out
    }

    fn step<R: Rng + ?Sized>(&self, s: &CosState, g: Subgoal, rng: &mut R) -> Step<CosState, JointObservation> {
        let map = &self.model.world().map;
        match g {
            Subgoal::Done => Step {
                state: *s,
                observation: JointObservation {
                    robot_pose: s.robot,
                    detections: Vec::new(),
                },
                reward: self.model.reward(s, Action::Done),
                terminal: true,
            },
            Subgoal::SearchLocal => {
                let observation = self.model.sample_observation(s, rng);
                Step {
                    state: *s,
                    observation,
                    reward: STEP_COST,
                    terminal: false,
                }
            }
            Subgoal::NavigateTo(dest) => {
                let node = self.graph.node_of(dest).expect("destination is a graph node");
                let steps = self.graph.steps_to(map, node, s.robot.cell).unwrap_or(0).max(1);
                let heading = Heading::toward(dest, s.target).unwrap_or(s.robot.heading);
                let next = CosState {
                    robot: Pose::new(dest, heading),
                    target: s.target,
                };
                let observation = self.model.sample_observation(&next, rng);
                Step {
                    state: next,
                    observation,
                    reward: STEP_COST * steps as f64,
                    terminal: false,
                }
            }
        }
    }

    /// Uniform over navigation and local search; `Done` is never rolled out.
    fn rollout_action<R: Rng + ?Sized>(&self, state: &CosState, rng: &mut R) -> Option<Subgoal> {
        let targets = self.navigation_targets(state.robot);
        let pick = rng.gen_range(0..=targets.len());
        Some(targets.get(pick).map_or(Subgoal::SearchLocal, |&c| Subgoal::NavigateTo(c)))
    }

    fn rollout<R: Rng + ?Sized>(&self, state: &CosState, depth: u32, discount: f64, rng: &mut R) -> f64 {
        let map = &self.model.world().map;
        let mut s = *state;
        let mut total = 0.0;
        let mut scale = 1.0;
        for _ in 0..depth {
            let cost = match self.rollout_action(&s, rng) {
                Some(Subgoal::NavigateTo(dest)) => {
                    let node = self.graph.node_of(dest).expect("graph node");
                    let steps = self.graph.steps_to(map, node, s.robot.cell).unwrap_or(0).max(1);
                    s.robot = Pose::new(dest, Heading::toward(dest, s.target).unwrap_or(s.robot.heading));
                    steps as f64
                }
                _ => 1.0,
            };
            total += scale * STEP_COST * cost;
            scale *= discount;
        }
        total
    }
}
