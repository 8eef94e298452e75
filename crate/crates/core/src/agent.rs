//! The interface every search agent exposes to the trial harness.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::Cell;
use crate::pomdp::{Action, JointObservation};

/// Random stream owned by one trial.
pub type AgentRng = ChaCha8Rng;

/// One agent decision plus the bookkeeping written to trial traces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgoal: Option<String>,
    pub belief_hash: u64,
    #[serde(default)]
    pub resampled: bool,
    #[serde(default)]
    pub belief_reset: bool,
}

impl Decision {
    pub fn plain(action: Action, belief_hash: u64) -> Self {
        Self {
            action,
            subgoal: None,
            belief_hash,
            resampled: false,
            belief_reset: false,
        }
    }
}

pub trait Agent {
    fn name(&self) -> &str;

    /// Takes the observation received at the current pose and returns the
    /// next action. Called once per step, starting with the observation at
    /// the initial pose.
    fn act(&mut self, z: &JointObservation, rng: &mut AgentRng) -> Result<Decision>;

    /// Current belief over the target cell, nonzero entries only.
    fn target_belief(&self) -> Vec<(Cell, f64)>;
}
