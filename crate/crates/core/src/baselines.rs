//! Comparison agents: uniform random actions, the hierarchical planner without
//! correlated objects, and a greedy next-best-view searcher over a joint
//! particle belief.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentRng, Decision};
use crate::error::{Error, Result};
use crate::grid::{step_distances, Cell, Heading, MoveAction, Pose};
use crate::hierarchy::{astar_action, project, sample_topo_graph, HierParams, HierarchicalAgent, Navigation, Places};
use crate::pomdp::{Action, CosModel, JointObservation};

/// Uniform over the three moves and `Done`.
pub fn random_step<R: Rng + ?Sized>(rng: &mut R) -> Action {
    Action::ALL[rng.gen_range(0..Action::ALL.len())]
}

pub struct RandomAgent;

impl Agent for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, _z: &JointObservation, rng: &mut AgentRng) -> Result<Decision> {
        Ok(Decision::plain(random_step(rng), 0))
    }

    fn target_belief(&self) -> Vec<(Cell, f64)> {
        Vec::new()
    }
}

/// The hierarchical planner with every correlated object removed from its
/// model, so only target detections inform the belief.
pub fn target_pomdp_agent(model: &CosModel, params: HierParams, start: Pose) -> Result<HierarchicalAgent> {
    HierarchicalAgent::new("target-pomdp", model.without_objects(), params, start)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyParams {
    pub num_particles: usize,
    /// Travel penalty per meter.
    pub lambda: f64,
    /// Fraction of particles redrawn from the prior after resampling.
    pub reinvigoration: f64,
    /// Minimum particle mass on the modal target cell before declaring `Done`.
    pub done_confidence: f64,
}

impl Default for GreedyParams {
    fn default() -> Self {
        Self {
            num_particles: 1000,
            lambda: 0.05,
            reinvigoration: 0.05,
            done_confidence: 0.5,
        }
    }
}

impl GreedyParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_particles < 1 {
            return Err(Error::InvalidParameter("num_particles must be at least 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.reinvigoration) || !(0.0..=1.0).contains(&self.done_confidence) {
            return Err(Error::InvalidParameter(
                "reinvigoration and done_confidence must lie in [0,1]".into(),
            ));
        }
        Ok(())
    }
}

/// Weighted joint samples of `(target, x_1, …, x_n)` as cell indices.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleBelief {
    pub particles: Vec<Vec<u32>>,
    pub weights: Vec<f64>,
}

impl ParticleBelief {
    fn draw_prior<R: Rng + ?Sized>(model: &CosModel, free: &[u32], rng: &mut R) -> Vec<u32> {
        let t = free[rng.gen_range(0..free.len())];
        std::iter::once(t)
            .chain(model.objects().iter().map(|o| o.correlation.sample(t as usize, rng) as u32))
            .collect()
    }

    /// Target uniform over free cells, correlated objects drawn from the
    /// correlation model given the target.
    pub fn prior<R: Rng + ?Sized>(model: &CosModel, n: usize, rng: &mut R) -> Self {
        let free = free_indices(model);
        let particles = (0..n).map(|_| Self::draw_prior(model, &free, rng)).collect();
        Self {
            particles,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Marginal over target cells, indexed by cell.
    pub fn target_marginal(&self, num_cells: usize) -> Vec<f64> {
        let mut m = vec![0.0; num_cells];
        for (p, w) in self.particles.iter().zip(&self.weights) {
            m[p[0] as usize] += w;
        }
        m
    }

    /// Reweights by the joint detection likelihood of `z`, then resamples
    /// when the effective sample size drops below half. Returns whether the
    /// particles had to be redrawn from scratch.
    pub fn update<R: Rng + ?Sized>(&mut self, z: &JointObservation, model: &CosModel, params: &GreedyParams, rng: &mut R) -> bool {
        let map = &model.world().map;
        let pose = z.robot_pose;
        for (p, w) in self.particles.iter().zip(self.weights.iter_mut()) {
            let mut l = model.target_detector().likelihood(z.detections[0], map.cell_at(p[0] as usize), pose);
            for (j, obj) in model.objects().iter().enumerate() {
                l *= obj.detector.likelihood(z.detections[j + 1], map.cell_at(p[j + 1] as usize), pose);
            }
            *w *= l;
        }
        let total: f64 = self.weights.iter().sum();
        let n = self.len();
        if !(total > 0.0) || !total.is_finite() {
            log::warn!("particle depletion; redrawing every particle from the prior");
            *self = Self::prior(model, n, rng);
            return true;
        }
        self.weights.iter_mut().for_each(|w| *w /= total);
        if self.ess() < n as f64 / 2.0 {
            self.resample(model, params.reinvigoration, rng);
        }
        false
    }

    /// Systematic resampling, then a fraction of fresh prior particles.
    fn resample<R: Rng + ?Sized>(&mut self, model: &CosModel, reinvigoration: f64, rng: &mut R) {
        let n = self.len();
        let fresh = ((n as f64) * reinvigoration).round() as usize;
        let keep = n - fresh.min(n);
        let mut out = Vec::with_capacity(n);
        let step = 1.0 / keep.max(1) as f64;
        let mut u = rng.gen::<f64>() * step;
        let mut acc = self.weights[0];
        let mut i = 0;
        for _ in 0..keep {
            while u > acc && i + 1 < n {
                i += 1;
                acc += self.weights[i];
            }
            out.push(self.particles[i].clone());
            u += step;
        }
        let free = free_indices(model);
        for _ in keep..n {
            out.push(Self::draw_prior(model, &free, rng));
        }
        self.particles = out;
        self.weights = vec![1.0 / n as f64; n];
    }
}

fn free_indices(model: &CosModel) -> Vec<u32> {
    let map = &model.world().map;
    (0..map.num_cells())
        .filter(|&k| map.is_free_index(k))
        .map(|k| k as u32)
        .collect()
}

/// `P̂(v)`: particle-averaged probability that at least one object is
/// detected from viewpoint `v`.
pub fn detect_any_prob(pb: &ParticleBelief, view: Pose, model: &CosModel) -> f64 {
    let world = model.world();
    let tps: Vec<f64> = std::iter::once(model.target_detector().params().tp)
        .chain(model.objects().iter().map(|o| o.detector.params().tp))
        .collect();
    pb.particles
        .iter()
        .zip(&pb.weights)
        .map(|(p, w)| {
            let miss: f64 = p
                .iter()
                .zip(&tps)
                .map(|(&k, &tp)| if world.sees(view, k as usize) { 1.0 - tp } else { 1.0 })
                .product();
            w * (1.0 - miss)
        })
        .sum()
}

/// Highest-utility viewpoint `U(v) = P̂(v) − λ·dist(pose, v)` among
/// `candidates` (first one on ties). Distances are path lengths in meters;
/// unreachable candidates are skipped.
pub fn best_viewpoint(pb: &ParticleBelief, pose: Pose, candidates: &[Pose], model: &CosModel, lambda: f64) -> Option<Pose> {
    let map = &model.world().map;
    let steps = step_distances(map, pose.cell);
    let mut best: Option<(f64, Pose)> = None;
    for &v in candidates {
        let Some(s) = steps[map.index(v.cell)] else { continue };
        let u = detect_any_prob(pb, v, model) - lambda * s as f64 * map.cell_size();
        if best.is_none_or(|(b, _)| u > b) {
            best = Some((u, v));
        }
    }
    best.map(|(_, v)| v)
}

/// Myopic viewpoint selection over a joint particle belief.
pub struct GreedyNbvAgent {
    model: CosModel,
    params: GreedyParams,
    hier: HierParams,
    places: Places,
    belief: ParticleBelief,
    goal: Option<Pose>,
    started: bool,
}

impl GreedyNbvAgent {
    pub fn new(model: CosModel, params: GreedyParams, hier: HierParams, start: Pose) -> Result<Self> {
        params.validate()?;
        let places = Places::new(&model.world().map, start.cell)?;
        Ok(Self {
            belief: ParticleBelief {
                particles: Vec::new(),
                weights: Vec::new(),
            },
            model,
            params,
            hier,
            places,
            goal: None,
            started: false,
        })
    }

    pub fn belief(&self) -> &ParticleBelief {
        &self.belief
    }

    fn hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.belief.particles.hash(&mut h);
        for w in &self.belief.weights {
            w.to_bits().hash(&mut h);
        }
        h.finish()
    }

    fn choose_viewpoint(&self, pose: Pose, rng: &mut AgentRng) -> Result<Option<Pose>> {
        let map = &self.model.world().map;
        let marginal = self.belief.target_marginal(map.num_cells());
        let graph = sample_topo_graph(map, &self.places, &marginal, &self.hier, rng)?;
        let candidates: Vec<Pose> = graph
            .nodes
            .iter()
            .flat_map(|&c| Heading::ALL.into_iter().map(move |h| Pose::new(c, h)))
            .filter(|&v| v != pose)
            .collect();
        Ok(best_viewpoint(&self.belief, pose, &candidates, &self.model, self.params.lambda))
    }

    /// One greedy step: particle update, `Done` check, then the next A*
    /// primitive toward the committed viewpoint.
    pub fn greedy_nbv_step(&mut self, z: &JointObservation, rng: &mut AgentRng) -> Result<Decision> {
        let z = project(z, self.model.num_classes());
        if !self.started {
            self.belief = ParticleBelief::prior(&self.model, self.params.num_particles, rng);
            self.started = true;
        }
        let reset = self.belief.update(&z, &self.model, &self.params, rng);
        let pose = z.robot_pose;
        let map = &self.model.world().map;

        let marginal = self.belief.target_marginal(map.num_cells());
        let mut mode = 0;
        for (k, &p) in marginal.iter().enumerate() {
            if p > marginal[mode] {
                mode = k;
            }
        }
        let belief_hash = self.hash();
        let decide = move |action| Decision {
            action,
            subgoal: None,
            belief_hash,
            resampled: false,
            belief_reset: reset,
        };
        if marginal[mode] >= self.params.done_confidence && self.model.is_success(pose, map.cell_at(mode)) {
            return Ok(decide(Action::Done));
        }

        if z.detections.iter().any(Option::is_some) || self.goal.is_some_and(|g| g == pose) {
            self.goal = None;
        }
        for _ in 0..2 {
            if self.goal.is_none() {
                self.goal = self.choose_viewpoint(pose, rng)?;
            }
            let Some(goal) = self.goal else { break };
            let action = if goal.cell == pose.cell {
                let ccw = (goal.heading.index() + 8 - pose.heading.index()) % 8;
                Some(if ccw <= 4 { MoveAction::RotateLeft } else { MoveAction::RotateRight })
            } else {
                match astar_action(goal.cell, pose, map) {
                    Navigation::Move(m) => Some(m),
                    _ => None,
                }
            };
            match action {
                Some(m) => {
                    let mut d = decide(Action::Move(m));
                    d.subgoal = Some(format!("View{}", goal));
                    return Ok(d);
                }
                None => self.goal = None,
            }
        }
        Ok(decide(Action::Move(MoveAction::RotateLeft)))
    }
}

impl Agent for GreedyNbvAgent {
    fn name(&self) -> &str {
        "greedy-nbv"
    }

    fn act(&mut self, z: &JointObservation, rng: &mut AgentRng) -> Result<Decision> {
        self.greedy_nbv_step(z, rng)
    }

    fn target_belief(&self) -> Vec<(Cell, f64)> {
        let map = &self.model.world().map;
        self.belief
            .target_marginal(map.num_cells())
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(k, p)| (map.cell_at(k), p))
            .collect()
    }
}
