//! The correlational object search POMDP: state `(robot pose, target cell)`,
//! factored joint observations, step/terminal rewards and the exact Bayes
//! filter over the target location.
//!
//! Correlated objects never enter the state. Their detections are explained
//! through `Pr(z_i | x_target, pose) = Σ_{x_i} Pr(z_i | x_i, pose) Ĉ(x_i | x_target)`.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_move, Cell, MoveAction, Pose, World};
use crate::sensing::{
    correlational_likelihoods, detection_likelihoods, CorrelationModel, CorrelationSpec,
    Detection, DetectionModel, DetectorParams,
};

pub const REWARD_SUCCESS: f64 = 100.0;
pub const REWARD_FAILURE: f64 = -100.0;
pub const STEP_COST: f64 = -1.0;

/// Primitive move or the terminal `Done` declaration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Move(MoveAction),
    Done,
}

impl Action {
    /// Primitive moves followed by `Done`; the order fixes planner tie-breaks.
    pub const ALL: [Action; 4] = [
        Action::Move(MoveAction::MoveAhead),
        Action::Move(MoveAction::RotateLeft),
        Action::Move(MoveAction::RotateRight),
        Action::Done,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::Move(MoveAction::MoveAhead) => "MoveAhead",
            Action::Move(MoveAction::RotateLeft) => "RotateLeft",
            Action::Move(MoveAction::RotateRight) => "RotateRight",
            Action::Done => "Done",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CosState {
    pub robot: Pose,
    pub target: Cell,
}

/// Exact robot pose plus one report per class: index 0 is the target, the
/// rest follow the model's correlated-object order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointObservation {
    pub robot_pose: Pose,
    pub detections: Vec<Option<Cell>>,
}

impl JointObservation {
    pub fn target(&self) -> Option<Cell> {
        self.detections[0]
    }

    pub fn named(&self, model: &CosModel) -> Vec<Detection> {
        self.detections
            .iter()
            .zip(model.class_names())
            .map(|(&value, name)| Detection {
                object_id: name.to_string(),
                value,
            })
            .collect()
    }
}

/// Sensor and correlation model of one correlated class.
#[derive(Clone, Debug)]
pub struct ObjectModel {
    pub class: String,
    pub detector: DetectionModel,
    pub correlation: CorrelationModel,
}

/// Everything the agent knows about the task: map, detectors, correlations
/// and the success radius. Built once per scenario and shared.
#[derive(Clone, Debug)]
pub struct CosModel {
    world: Arc<World>,
    target_class: String,
    target: DetectionModel,
    objects: Vec<ObjectModel>,
    success_distance: f64,
}

impl CosModel {
    pub fn new(
        world: Arc<World>,
        target_class: impl Into<String>,
        target: DetectorParams,
        objects: &[(String, DetectorParams, CorrelationSpec)],
        success_distance: f64,
    ) -> Result<Self> {
        target.validate()?;
        let objects = objects
            .iter()
            .map(|(class, det, corr)| {
                det.validate()?;
                Ok(ObjectModel {
                    class: class.clone(),
                    detector: DetectionModel::new(*det, world.clone()),
                    correlation: CorrelationModel::new(*corr, &world.map)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            target: DetectionModel::new(target, world.clone()),
            world,
            target_class: target_class.into(),
            objects,
            success_distance,
        })
    }

    /// Same model with every correlated class dropped.
    pub fn without_objects(&self) -> Self {
        Self {
            objects: Vec::new(),
            ..self.clone()
        }
    }

    pub fn world(&self) -> &Arc<World> {
        &self.world
    }

    pub fn target_detector(&self) -> &DetectionModel {
        &self.target
    }

    pub fn objects(&self) -> &[ObjectModel] {
        &self.objects
    }

    pub fn success_distance(&self) -> f64 {
        self.success_distance
    }

    pub fn class_names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.target_class.as_str()).chain(self.objects.iter().map(|o| o.class.as_str()))
    }

    pub fn num_classes(&self) -> usize {
        1 + self.objects.len()
    }

    pub fn is_success(&self, robot: Pose, target: Cell) -> bool {
        self.world.success(robot, target, self.success_distance)
    }

    pub fn reward(&self, s: &CosState, a: Action) -> f64 {
        match a {
            Action::Move(_) => STEP_COST,
            Action::Done => {
                if self.is_success(s.robot, s.target) {
                    REWARD_SUCCESS
                } else {
                    REWARD_FAILURE
                }
            }
        }
    }

    pub fn transition(&self, robot: Pose, a: Action) -> Pose {
        match a {
            Action::Move(m) => apply_move(robot, m, &self.world.map),
            Action::Done => robot,
        }
    }

    /// `Pr(z | s)`: the target's detection likelihood times every correlated
    /// object's correlational likelihood.
    pub fn joint_observation_likelihood(&self, z: &JointObservation, s: &CosState) -> f64 {
        if z.robot_pose != s.robot {
            return 0.0;
        }
        debug_assert_eq!(z.detections.len(), self.num_classes());
        let map = &self.world.map;
        let t = map.index(s.target);
        let mut p = self.target.likelihood(z.detections[0], s.target, s.robot);
        for (obj, &zi) in self.objects.iter().zip(&z.detections[1..]) {
            let support = obj.correlation.support(t);
            let sum: f64 = support
                .iter()
                .map(|&k| obj.detector.likelihood(zi, map.cell_at(k as usize), s.robot))
                .sum();
            p *= sum / support.len() as f64;
        }
        p
    }

    /// `Pr(z | robot = z.robot_pose, target = x)` for every cell `x`.
    pub fn likelihood_field(&self, z: &JointObservation) -> Vec<f64> {
        let pose = z.robot_pose;
        let mut field = detection_likelihoods(z.detections[0], pose, &self.target);
        for (obj, &zi) in self.objects.iter().zip(&z.detections[1..]) {
            let corr = correlational_likelihoods(zi, pose, &obj.detector, &obj.correlation);
            for (f, c) in field.iter_mut().zip(corr) {
                *f *= c;
            }
        }
        field
    }

    /// Draws `z ~ Pr(· | s)`: each correlated object is placed by the
    /// correlation model, then every class is detected independently.
    pub fn sample_observation<R: Rng + ?Sized>(&self, s: &CosState, rng: &mut R) -> JointObservation {
        let map = &self.world.map;
        let t = map.index(s.target);
        let mut detections = Vec::with_capacity(self.num_classes());
        detections.push(self.target.sample(s.target, s.robot, rng));
        for obj in &self.objects {
            let x_i = map.cell_at(obj.correlation.sample(t, rng));
            detections.push(obj.detector.sample(x_i, s.robot, rng));
        }
        JointObservation {
            robot_pose: s.robot,
            detections,
        }
    }
}

/// Step cost `-1` for moves, `±100` for `Done` depending on success.
pub fn reward(s: &CosState, a: Action, model: &CosModel) -> f64 {
    model.reward(s, a)
}

/// Belief over the target cell with a known robot pose. Indexed by cell;
/// obstacle entries are always zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosBelief {
    pub robot: Pose,
    pub target_dist: Vec<f64>,
}

impl CosBelief {
    pub fn uniform(world: &World, robot: Pose) -> Self {
        let map = &world.map;
        let n = map.num_free() as f64;
        let target_dist = (0..map.num_cells())
            .map(|k| if map.is_free_index(k) { 1.0 / n } else { 0.0 })
            .collect();
        Self { robot, target_dist }
    }

    /// Point mass on `target`.
    pub fn point(world: &World, robot: Pose, target: Cell) -> Self {
        let mut target_dist = vec![0.0; world.map.num_cells()];
        target_dist[world.map.index(target)] = 1.0;
        Self { robot, target_dist }
    }

    pub fn prob(&self, world: &World, c: Cell) -> f64 {
        self.target_dist[world.map.index(c)]
    }

    pub fn total(&self) -> f64 {
        self.target_dist.iter().sum()
    }

    /// Cell index with the largest mass (lowest index on ties).
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.target_dist.iter().enumerate() {
            if p > self.target_dist[best] {
                best = k;
            }
        }
        best
    }

    /// Bayes update with a noiseless pose and static target. Returns the new
    /// belief and whether it had to be reset because every cell was ruled out.
    pub fn update(&self, z: &JointObservation, model: &CosModel) -> (CosBelief, bool) {
        let field = model.likelihood_field(z);
        let mut dist: Vec<f64> = self
            .target_dist
            .iter()
            .zip(&field)
            .map(|(b, l)| b * l)
            .collect();
        let total: f64 = dist.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            log::warn!("observation has zero likelihood under the belief; resetting to uniform");
            return (CosBelief::uniform(model.world(), z.robot_pose), true);
        }
        dist.iter_mut().for_each(|p| *p /= total);
        (
            CosBelief {
                robot: z.robot_pose,
                target_dist: dist,
            },
            false,
        )
    }

    /// Cumulative table for repeated sampling of target cells.
    pub fn sampler(&self) -> BeliefSampler {
        let mut acc = 0.0;
        let mut cdf = Vec::new();
        let mut cells = Vec::new();
        for (k, &p) in self.target_dist.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                cdf.push(acc);
                cells.push(k as u32);
            }
        }
        BeliefSampler { cdf, cells }
    }

    /// Stable fingerprint of the distribution, for trace logs.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.robot.hash(&mut h);
        for p in &self.target_dist {
            p.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Nonzero entries as `(cell, probability)` pairs.
    pub fn snapshot(&self, world: &World) -> Vec<(Cell, f64)> {
        self.target_dist
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| (world.map.cell_at(k), p))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct BeliefSampler {
    cdf: Vec<f64>,
    cells: Vec<u32>,
}

impl BeliefSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("nonempty belief");
        let u = rng.gen::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c <= u).min(self.cells.len() - 1);
        self.cells[i] as usize
    }
}

/// Bayes update of the target belief after taking `_a` and observing `z`.
pub fn belief_update(b: &CosBelief, _a: Action, z: &JointObservation, model: &CosModel) -> CosBelief {
    b.update(z, model).0
}

/// Dense joint belief over `(target, x_1, …, x_n)` for validation against
/// the reduced filter. Only feasible on tiny maps.
#[derive(Clone, Debug, PartialEq)]
pub struct FBelief {
    robot: Pose,
    free: Vec<u32>,
    dims: usize,
    joint: Vec<f64>,
}

pub const DEFAULT_FBELIEF_CAP: usize = 1_000_000;

impl FBelief {
    /// `b_target ⊗ Π_i Ĉ(x_i | x_target)`.
    pub fn from_cos(b: &CosBelief, model: &CosModel, cap: usize) -> Result<Self> {
        let map = &model.world().map;
        let free: Vec<u32> = (0..map.num_cells())
            .filter(|&k| map.is_free_index(k))
            .map(|k| k as u32)
            .collect();
        let f = free.len();
        let dims = 1 + model.objects().len();
        let needed = (f as u128).pow(dims as u32);
        if needed > cap as u128 {
            return Err(Error::BeliefTooLarge { needed, cap });
        }
        let mut joint = vec![0.0; needed as usize];
        for (idx, slot) in joint.iter_mut().enumerate() {
            let tuple = Self::decode(idx, f, dims);
            let t = free[tuple[0]] as usize;
            let mut p = b.target_dist[t];
            for (obj, &xi) in model.objects().iter().zip(&tuple[1..]) {
                p *= obj.correlation.prob(free[xi] as usize, t);
            }
            *slot = p;
        }
        Ok(Self {
            robot: b.robot,
            free,
            dims,
            joint,
        })
    }

    fn decode(mut idx: usize, f: usize, dims: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(dims);
        for _ in 0..dims {
            out.push(idx % f);
            idx /= f;
        }
        out
    }

    pub fn robot(&self) -> Pose {
        self.robot
    }

    pub fn total(&self) -> f64 {
        self.joint.iter().sum()
    }

    /// Entries as `(cell indices of target, x_1, …, x_n; probability)`.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let f = self.free.len();
        self.joint.iter().enumerate().map(move |(idx, &p)| {
            let tuple = Self::decode(idx, f, self.dims)
                .into_iter()
                .map(|i| self.free[i] as usize)
                .collect();
            (tuple, p)
        })
    }
}

/// Bayes update of the dense joint belief using only per-object detection
/// models.
pub fn fpomdp_update(b: &FBelief, _a: Action, z: &JointObservation, model: &CosModel) -> FBelief {
    let map = &model.world().map;
    let pose = z.robot_pose;
    let f = b.free.len();
    // Per-class likelihood of the report for each free cell.
    let mut tables = Vec::with_capacity(b.dims);
    tables.push(
        b.free
            .iter()
            .map(|&k| model.target_detector().likelihood(z.detections[0], map.cell_at(k as usize), pose))
            .collect::<Vec<f64>>(),
    );
    for (obj, &zi) in model.objects().iter().zip(&z.detections[1..]) {
        tables.push(
            b.free
                .iter()
                .map(|&k| obj.detector.likelihood(zi, map.cell_at(k as usize), pose))
                .collect(),
        );
    }
    let mut joint: Vec<f64> = b
        .joint
        .iter()
        .enumerate()
        .map(|(idx, &p)| {
            if p == 0.0 {
                return 0.0;
            }
            let tuple = FBelief::decode(idx, f, b.dims);
            tuple
                .iter()
                .zip(&tables)
                .fold(p, |acc, (&i, table)| acc * table[i])
        })
        .collect();
    let total: f64 = joint.iter().sum();
    if !(total > 0.0) {
        log::warn!("joint observation has zero likelihood; resetting joint belief to uniform");
        let u = 1.0 / joint.len() as f64;
        joint.iter_mut().for_each(|p| *p = u);
    } else {
        joint.iter_mut().for_each(|p| *p /= total);
    }
    FBelief {
        robot: pose,
        free: b.free.clone(),
        dims: b.dims,
        joint,
    }
}

/// Target marginal of a joint belief, indexed by cell.
pub fn marginal_target(b: &FBelief, num_cells: usize) -> Vec<f64> {
    let f = b.free.len();
    let mut out = vec![0.0; num_cells];
    for (idx, &p) in b.joint.iter().enumerate() {
        out[b.free[idx % f] as usize] += p;
    }
    out
}
