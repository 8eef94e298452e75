//! Correlational object search in 2D grid worlds.
//!
//! The crate models a robot searching for a hard-to-detect target object
//! while exploiting detections of easier, spatially correlated objects. It
//! contains the reduced search POMDP over `(robot pose, target cell)`, an exact
//! Bayes filter for it, a dense joint-state oracle, a POUCT planner, the
//! hierarchical topological-graph agent, baseline agents and a seeded
//! benchmark harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod baselines;
pub mod error;
pub mod grid;
pub mod harness;
pub mod hierarchy;
pub mod pomdp;
pub mod pouct;
pub mod render;
pub mod scenario;
pub mod sensing;

pub use error::{Error, Result};
pub use grid::{
    apply_move, shortest_path_length, success_check, visible_cells, Cell, GridMap, Heading,
    MoveAction, PathLength, Pose, World,
};
pub use sensing::{
    correlation_prob, correlational_likelihood, detection_likelihood, sample_detection,
    CorrelationSpec, Detection, DetectorParams, Relation,
};
pub use pomdp::{belief_update, Action, CosBelief, CosModel, CosState, JointObservation};
pub use pouct::PlannerParams;
pub use hierarchy::{HierParams, HierarchicalAgent, Subgoal, TopoGraph};
pub use baselines::{GreedyNbvAgent, GreedyParams, RandomAgent};
pub use agent::{Agent, Decision};
pub use harness::{compute_metrics, run_trial, AgentKind, Metrics, TrialResult, TrialTrace};
pub use scenario::ScenarioSpec;
