//! Partially observable UCT: Monte-Carlo tree search over action/observation
//! histories, with root states drawn from the current belief.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub num_sims: u32,
    pub max_depth: u32,
    pub exploration_const: f64,
    pub discount: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            num_sims: 500,
            max_depth: 20,
            // UCB1's sqrt(2), scaled to the ±100 reward range.
            exploration_const: std::f64::consts::SQRT_2 * 100.0,
            discount: 0.95,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_sims < 1 || self.max_depth < 1 {
            return Err(Error::InvalidParameter(format!(
                "num_sims and max_depth must be at least 1 (got {}, {})",
                self.num_sims, self.max_depth
            )));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "discount must lie in (0,1), got {}",
                self.discount
            )));
        }
        if !(self.exploration_const >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "exploration constant must be nonnegative, got {}",
                self.exploration_const
            )));
        }
        Ok(())
    }
}

pub struct Step<S, O> {
    pub state: S,
    pub observation: O,
    pub reward: f64,
    pub terminal: bool,
}

/// Black-box simulator used by the planner.
///
/// `actions` must return the same list for every state that can occupy a
/// given history node; the planner reads it once when a node is created.
pub trait GenerativeModel {
    type State: Clone;
    type Action: Copy + Eq + Debug;
    type Observation: Clone + Eq + Hash;

    fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    fn actions(&self, state: &Self::State) -> Vec<Self::Action>;

    fn step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: Self::Action,
        rng: &mut R,
    ) -> Step<Self::State, Self::Observation>;

    /// Rollout policy. `None` ends the rollout.
    fn rollout_action<R: Rng + ?Sized>(&self, state: &Self::State, rng: &mut R) -> Option<Self::Action> {
        let actions = self.actions(state);
        if actions.is_empty() {
            None
        } else {
            Some(actions[rng.gen_range(0..actions.len())])
        }
    }

    /// Discounted return of `depth` rollout-policy steps from `state`.
    fn rollout<R: Rng + ?Sized>(&self, state: &Self::State, depth: u32, discount: f64, rng: &mut R) -> f64 {
        let mut total = 0.0;
        let mut scale = 1.0;
        let mut s = state.clone();
        for _ in 0..depth {
            let Some(a) = self.rollout_action(&s, rng) else {
                break;
            };
            let step = self.step(&s, a, rng);
            total += scale * step.reward;
            if step.terminal {
                break;
            }
            scale *= discount;
            s = step.state;
        }
        total
    }
}

/// Discounted return of the model's rollout policy.
pub fn rollout<M: GenerativeModel, R: Rng + ?Sized>(
    state: &M::State,
    model: &M,
    depth: u32,
    discount: f64,
    rng: &mut R,
) -> f64 {
    model.rollout(state, depth, discount, rng)
}

struct ActionStats<O> {
    visits: u32,
    value: f64,
    children: HashMap<O, usize>,
}

struct HistoryNode<A, O> {
    visits: u32,
    actions: Vec<A>,
    stats: Vec<ActionStats<O>>,
}

/// Visit count and mean return of one root action.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionValue<A> {
    pub action: A,
    pub visits: u32,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct PlanOutcome<A> {
    pub action: A,
    pub root: Vec<ActionValue<A>>,
}

struct Search<'m, M: GenerativeModel> {
    model: &'m M,
    params: PlannerParams,
    nodes: Vec<HistoryNode<M::Action, M::Observation>>,
}

impl<M: GenerativeModel> Search<'_, M> {
    fn new_node(&mut self, state: &M::State) -> usize {
        let actions = self.model.actions(state);
        let stats = actions
            .iter()
            .map(|_| ActionStats {
                visits: 0,
                value: 0.0,
                children: HashMap::new(),
            })
            .collect();
        self.nodes.push(HistoryNode {
            visits: 0,
            actions,
            stats,
        });
        self.nodes.len() - 1
    }

    /// Untried actions first, then UCB1; ties go to the lowest index.
    fn select(&self, node: usize) -> usize {
        let n = &self.nodes[node];
        if let Some(i) = n.stats.iter().position(|s| s.visits == 0) {
            return i;
        }
        let log_n = (n.visits as f64).ln();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, s) in n.stats.iter().enumerate() {
            let score = s.value + self.params.exploration_const * (log_n / s.visits as f64).sqrt();
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }

    fn simulate<R: Rng + ?Sized>(&mut self, state: &M::State, node: usize, depth: u32, rng: &mut R) -> f64 {
        if depth >= self.params.max_depth || self.nodes[node].actions.is_empty() {
            return 0.0;
        }
        let i = self.select(node);
        let action = self.nodes[node].actions[i];
        let step = self.model.step(state, action, rng);
        let total = if step.terminal {
            step.reward
        } else {
            let child = self.nodes[node].stats[i].children.get(&step.observation).copied();
            let future = match child {
                Some(c) => self.simulate(&step.state, c, depth + 1, rng),
                None => {
                    let c = self.new_node(&step.state);
                    self.nodes[node].stats[i].children.insert(step.observation, c);
                    let remaining = self.params.max_depth - depth - 1;
                    self.model
                        .rollout(&step.state, remaining, self.params.discount, rng)
                }
            };
            step.reward + self.params.discount * future
        };
        let n = &mut self.nodes[node];
        n.visits += 1;
        let s = &mut n.stats[i];
        s.visits += 1;
        s.value += (total - s.value) / s.visits as f64;
        total
    }
}

/// Runs `params.num_sims` simulations and returns the root action with the
/// highest mean return (lowest index on ties) with the root statistics.
pub fn plan_with_stats<M: GenerativeModel, R: Rng + ?Sized>(
    model: &M,
    params: &PlannerParams,
    rng: &mut R,
) -> PlanOutcome<M::Action> {
    let mut search = Search {
        model,
        params: *params,
        nodes: Vec::new(),
    };
    let first = model.sample_state(rng);
    let root = search.new_node(&first);
    assert!(!search.nodes[root].actions.is_empty(), "no legal actions at the root");
    search.simulate(&first, root, 0, rng);
    for _ in 1..params.num_sims {
        let s = model.sample_state(rng);
        search.simulate(&s, root, 0, rng);
    }
    let node = &search.nodes[root];
    let root_stats: Vec<ActionValue<M::Action>> = node
        .actions
        .iter()
        .zip(&node.stats)
        .map(|(&action, s)| ActionValue {
            action,
            visits: s.visits,
            value: s.value,
        })
        .collect();
    let mut best: Option<&ActionValue<M::Action>> = None;
    for av in root_stats.iter().filter(|a| a.visits > 0) {
        if best.is_none_or(|b| av.value > b.value) {
            best = Some(av);
        }
    }
    PlanOutcome {
        action: best.map_or(node.actions[0], |b| b.action),
        root: root_stats,
    }
}

pub fn plan<M: GenerativeModel, R: Rng + ?Sized>(model: &M, params: &PlannerParams, rng: &mut R) -> M::Action {
    plan_with_stats(model, params, rng).action
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two-armed bandit with one terminal pull each.
    struct Bandit {
        means: Vec<f64>,
    }

    impl GenerativeModel for Bandit {
        type State = ();
        type Action = usize;
        type Observation = ();

        fn sample_state<R: Rng + ?Sized>(&self, _rng: &mut R) {}

        fn actions(&self, _state: &()) -> Vec<usize> {
            (0..self.means.len()).collect()
        }

        fn step<R: Rng + ?Sized>(&self, _s: &(), a: usize, rng: &mut R) -> Step<(), ()> {
            Step {
                state: (),
                observation: (),
                reward: self.means[a] + rng.gen_range(-1.0..1.0),
                terminal: true,
            }
        }
    }

    #[test]
    fn picks_better_arm() {
        let m = Bandit {
            means: vec![0.0, 5.0, 1.0],
        };
        let params = PlannerParams {
            num_sims: 300,
            exploration_const: 2.0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = plan_with_stats(&m, &params, &mut rng);
        assert_eq!(out.action, 1);
        assert_eq!(out.root.iter().map(|a| a.visits).sum::<u32>(), 300);
    }

    #[test]
    fn single_sim_returns_first_action() {
        let m = Bandit { means: vec![0.0, 1.0] };
        let params = PlannerParams {
            num_sims: 1,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(plan(&m, &params, &mut rng), 0);
    }

    #[test]
    fn deterministic_given_seed() {
        let m = Bandit {
            means: vec![1.0, 1.1, 0.9, 1.05],
        };
        let params = PlannerParams::default();
        let a = plan_with_stats(&m, &params, &mut ChaCha8Rng::seed_from_u64(9));
        let b = plan_with_stats(&m, &params, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.root, b.root);
    }

    #[test]
    fn params_validation() {
        assert!(PlannerParams::default().validate().is_ok());
        let bad = PlannerParams {
            discount: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PlannerParams {
            num_sims: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
