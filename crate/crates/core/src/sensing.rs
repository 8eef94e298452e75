//! Object detection and spatial-correlation models.
//!
//! A detection of object `i` is either `None` (nothing reported) or a cell.
//! Its conditional distribution given the object's cell and the robot pose
//! follows the five-case line-of-sight model:
//!
//! | object      | report           | unnormalized weight          |
//! |-------------|------------------|------------------------------|
//! | in view     | none             | `1 − TP`                     |
//! | in view     | `‖z − x‖ > 3σ`   | `δ(z)·FP/|V_E(r)|`           |
//! | in view     | `‖z − x‖ ≤ 3σ`   | `δ(z)·𝒩(z; x, σ²)`           |
//! | not in view | none             | `1 − FP`                     |
//! | not in view | any cell         | `δ(z)·FP/|V_E(r)|`           |
//!
//! with `δ(z) = 1` inside `V_E(r)` (visible and within `r` of the robot) and
//! `exp(−(‖z − robot‖ − r)²)` otherwise, distances in meters. Reports are only
//! ever cells the robot can see. The null probabilities are kept exactly at
//! `1 − TP` / `1 − FP` and the remaining mass is spread over cells in
//! proportion to the weights above, so each conditional sums to one. The
//! Gaussian is discretized over the visible cells of the `3σ` disk and scaled
//! to carry the true-positive mass.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, GridMap, Pose, World};

pub const DEFAULT_SIGMA: f64 = 0.5;

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

/// Per-class detector noise: true/false-positive rates, typical true-positive
/// range `r` and localization width `sigma` (meters).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub tp: f64,
    pub fp: f64,
    pub r: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

impl DetectorParams {
    pub fn new(tp: f64, fp: f64, r: f64) -> Self {
        Self {
            tp,
            fp,
            r,
            sigma: DEFAULT_SIGMA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        if !prob(self.tp) || !prob(self.fp) {
            return Err(Error::InvalidParameter(format!(
                "detector rates must lie in [0,1]: tp={} fp={}",
                self.tp, self.fp
            )));
        }
        if !(self.r > 0.0) || !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "detector range and sigma must be positive: r={} sigma={}",
                self.r, self.sigma
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Close,
    Far,
}

impl Relation {
    pub fn flipped(self) -> Self {
        match self {
            Relation::Close => Relation::Far,
            Relation::Far => Relation::Close,
        }
    }
}

/// Class-level spatial relation between a correlated object and the target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub relation: Relation,
    /// Expected distance between the two classes, meters.
    pub d: f64,
}

impl CorrelationSpec {
    pub fn close(d: f64) -> Self {
        Self {
            relation: Relation::Close,
            d,
        }
    }

    pub fn far(d: f64) -> Self {
        Self {
            relation: Relation::Far,
            d,
        }
    }

    pub fn flipped(self) -> Self {
        Self {
            relation: self.relation.flipped(),
            d: self.d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "correlation distance must be positive, got {}",
                self.d
            )));
        }
        Ok(())
    }
}

/// One object's report: the detected cell, or `None` for no detection.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Detection {
    pub object_id: String,
    pub value: Option<Cell>,
}

/// Binary close/far correlation indicator. Both inequalities are strict, so a
/// pair at exactly distance `d` satisfies neither relation.
pub fn correlation_prob(x_i: Cell, x_target: Cell, spec: &CorrelationSpec, cell_size: f64) -> u8 {
    let dist = x_i.dist(x_target) * cell_size;
    let holds = match spec.relation {
        Relation::Close => dist < spec.d,
        Relation::Far => dist > spec.d,
    };
    holds as u8
}

/// Precomputed detection model for one class on one world.
#[derive(Clone, Debug)]
pub struct DetectionModel {
    params: DetectorParams,
    world: Arc<World>,
    /// `δ` indexed by squared robot-to-report distance in cells.
    delta_by_d2: Vec<f64>,
    /// `‖z − robot‖ ≤ r`, indexed like `delta_by_d2`.
    in_range_by_d2: Vec<bool>,
    /// Offsets of the `3σ` disk and their unnormalized Gaussian weights.
    disk: Vec<(i32, i32, f64)>,
    /// Per pose slot: `|V_E(r)|` and the running sum of `δ` over visible cells.
    pose_stats: Vec<PoseStats>,
}

#[derive(Clone, Debug, Default)]
struct PoseStats {
    in_range: u32,
    delta_cdf: Vec<f64>,
}

impl PoseStats {
    fn delta_sum(&self) -> f64 {
        self.delta_cdf.last().copied().unwrap_or(0.0)
    }
}

impl DetectionModel {
    pub fn new(params: DetectorParams, world: Arc<World>) -> Self {
        let map = &world.map;
        let cs = map.cell_size();
        let max_d2 = (map.width() as usize).pow(2) + (map.height() as usize).pow(2);
        let mut delta_by_d2 = Vec::with_capacity(max_d2 + 1);
        let mut in_range_by_d2 = Vec::with_capacity(max_d2 + 1);
        for d2 in 0..=max_d2 {
            let meters = (d2 as f64).sqrt() * cs;
            let in_range = meters <= params.r + 1e-9;
            in_range_by_d2.push(in_range);
            delta_by_d2.push(if in_range {
                1.0
            } else {
                (-(meters - params.r).powi(2)).exp()
            });
        }

        let radius = 3.0 * params.sigma;
        let reach = (radius / cs).floor() as i32 + 1;
        let mut disk = Vec::new();
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let meters = ((dc * dc + dr * dr) as f64).sqrt() * cs;
                if meters <= radius + 1e-9 {
                    let w = (-(meters * meters) / (2.0 * params.sigma * params.sigma)).exp();
                    disk.push((dc, dr, w));
                }
            }
        }

        let mut pose_stats = vec![PoseStats::default(); map.num_cells() * 8];
        for cell in map.free_cells() {
            for h in crate::grid::Heading::ALL {
                let pose = Pose::new(cell, h);
                let mut acc = 0.0;
                let mut in_range = 0;
                let cdf = world
                    .visible(pose)
                    .iter()
                    .map(|&k| {
                        let d2 = cell.dist_sq(map.cell_at(k as usize)) as usize;
                        in_range += in_range_by_d2[d2] as u32;
                        acc += delta_by_d2[d2];
                        acc
                    })
                    .collect();
                pose_stats[map.index(cell) * 8 + h.index()] = PoseStats {
                    in_range,
                    delta_cdf: cdf,
                };
            }
        }

        Self {
            params,
            world,
            delta_by_d2,
            in_range_by_d2,
            disk,
            pose_stats,
        }
    }

    pub fn params(&self) -> &DetectorParams {
        &self.params
    }

    pub fn world(&self) -> &Arc<World> {
        &self.world
    }

    fn stats(&self, pose: Pose) -> &PoseStats {
        &self.pose_stats[self.world.map.index(pose.cell) * 8 + pose.heading.index()]
    }

    /// `|V_E(r)|`: visible cells within range `r` of the robot.
    pub fn in_range_count(&self, pose: Pose) -> usize {
        self.stats(pose).in_range as usize
    }

    #[inline]
    fn delta(&self, pose: Pose, z: Cell) -> f64 {
        self.delta_by_d2[pose.cell.dist_sq(z) as usize]
    }

    /// Whether `z` lies in `V_E(r)` for this pose.
    pub fn in_range(&self, pose: Pose, z: Cell) -> bool {
        let map = &self.world.map;
        map.in_bounds(z)
            && self.world.sees(pose, map.index(z))
            && self.in_range_by_d2[pose.cell.dist_sq(z) as usize]
    }

    /// Gaussian-part sums over the visible `3σ` disk around `x`:
    /// `(Σ 𝒩, Σ δ·𝒩, Σ δ)`.
    fn disk_sums(&self, pose: Pose, x: Cell) -> (f64, f64, f64) {
        let map = &self.world.map;
        let (mut g, mut dg, mut d) = (0.0, 0.0, 0.0);
        for &(dc, dr, w) in &self.disk {
            let z = x.offset(dc, dr);
            if map.in_bounds(z) && self.world.sees(pose, map.index(z)) {
                let delta = self.delta(pose, z);
                g += w;
                dg += delta * w;
                d += delta;
            }
        }
        (g, dg, d)
    }

    /// Total unnormalized report weight for an in-view object at `x`, split
    /// as `(gaussian part, false-positive part)`, plus the Gaussian normalizer.
    fn in_view_masses(&self, pose: Pose, x: Cell) -> (f64, f64, f64) {
        let p = &self.params;
        let stats = self.stats(pose);
        let (g, dg, d_disk) = self.disk_sums(pose, x);
        let gauss = if g > 0.0 { p.tp * dg / g } else { 0.0 };
        let fp = if stats.in_range > 0 {
            p.fp / stats.in_range as f64 * (stats.delta_sum() - d_disk).max(0.0)
        } else {
            0.0
        };
        (gauss, fp, g)
    }

    /// `Pr(z | x, pose)`.
    pub fn likelihood(&self, z: Option<Cell>, x: Cell, pose: Pose) -> f64 {
        let map = &self.world.map;
        let p = &self.params;
        let x_seen = map.in_bounds(x) && self.world.sees(pose, map.index(x));
        let stats = self.stats(pose);
        let fp_possible = stats.in_range > 0 && stats.delta_sum() > 0.0;
        match z {
            None => {
                if x_seen {
                    1.0 - p.tp
                } else if fp_possible {
                    1.0 - p.fp
                } else {
                    1.0
                }
            }
            Some(z) => {
                if !map.in_bounds(z) || !self.world.sees(pose, map.index(z)) {
                    return 0.0;
                }
                if x_seen {
                    let (gauss, fp, g) = self.in_view_masses(pose, x);
                    let total = gauss + fp;
                    if total <= 0.0 {
                        return 0.0;
                    }
                    let raw = if self.in_disk(x, z) {
                        self.delta(pose, z) * p.tp * self.gauss_weight(x, z) / g
                    } else if stats.in_range > 0 {
                        self.delta(pose, z) * p.fp / stats.in_range as f64
                    } else {
                        0.0
                    };
                    p.tp * raw / total
                } else if fp_possible {
                    p.fp * self.delta(pose, z) / stats.delta_sum()
                } else {
                    0.0
                }
            }
        }
    }

    #[inline]
    fn in_disk(&self, x: Cell, z: Cell) -> bool {
        x.dist(z) * self.world.map.cell_size() <= 3.0 * self.params.sigma + 1e-9
    }

    fn gauss_weight(&self, x: Cell, z: Cell) -> f64 {
        let meters = x.dist(z) * self.world.map.cell_size();
        (-(meters * meters) / (2.0 * self.params.sigma * self.params.sigma)).exp()
    }

    /// Full conditional over `{None} ∪ visible cells`; zero-probability cells
    /// are omitted.
    pub fn distribution(&self, x: Cell, pose: Pose) -> Vec<(Option<Cell>, f64)> {
        let map = &self.world.map;
        let mut out = vec![(None, self.likelihood(None, x, pose))];
        for &k in self.world.visible(pose) {
            let z = map.cell_at(k as usize);
            let p = self.likelihood(Some(z), x, pose);
            if p > 0.0 {
                out.push((Some(z), p));
            }
        }
        out
    }

    /// Draws a report for an object at `x` seen from `pose`.
    pub fn sample<R: Rng + ?Sized>(&self, x: Cell, pose: Pose, rng: &mut R) -> Option<Cell> {
        let map = &self.world.map;
        let p = &self.params;
        let stats = self.stats(pose);
        let visible = self.world.visible(pose);
        let x_seen = map.in_bounds(x) && self.world.sees(pose, map.index(x));
        if !x_seen {
            if stats.in_range == 0 || stats.delta_sum() <= 0.0 || rng.gen::<f64>() >= p.fp {
                return None;
            }
            let u = rng.gen::<f64>() * stats.delta_sum();
            let i = stats.delta_cdf.partition_point(|&c| c <= u).min(visible.len() - 1);
            return Some(map.cell_at(visible[i] as usize));
        }
        if rng.gen::<f64>() >= p.tp {
            return None;
        }
        let (gauss, fp, g) = self.in_view_masses(pose, x);
        let total = gauss + fp;
        if total <= 0.0 {
            return None;
        }
        if rng.gen::<f64>() * total < gauss {
            let mut u = rng.gen::<f64>() * gauss;
            let mut last = None;
            for &(dc, dr, w) in &self.disk {
                let z = x.offset(dc, dr);
                if map.in_bounds(z) && self.world.sees(pose, map.index(z)) {
                    let weight = self.delta(pose, z) * p.tp * w / g;
                    last = Some(z);
                    if u < weight {
                        return Some(z);
                    }
                    u -= weight;
                }
            }
            last
        } else {
            let per = p.fp / stats.in_range as f64;
            let mut u = rng.gen::<f64>() * fp;
            let mut last = None;
            for &k in visible {
                let z = map.cell_at(k as usize);
                if self.in_disk(x, z) {
                    continue;
                }
                let weight = self.delta(pose, z) * per;
                last = Some(z);
                if u < weight {
                    return Some(z);
                }
                u -= weight;
            }
            last
        }
    }
}

/// Normalized close/far correlation: for each target cell, the free cells a
/// correlated object may occupy, each with equal probability.
#[derive(Clone, Debug)]
pub struct CorrelationModel {
    spec: CorrelationSpec,
    support: Vec<Vec<u32>>,
}

impl CorrelationModel {
    /// Fails when some free target cell admits no object location.
    pub fn new(spec: CorrelationSpec, map: &GridMap) -> Result<Self> {
        spec.validate()?;
        let free: Vec<Cell> = map.free_cells().collect();
        let mut support = vec![Vec::new(); map.num_cells()];
        for &t in &free {
            let s: Vec<u32> = free
                .iter()
                .filter(|&&c| correlation_prob(c, t, &spec, map.cell_size()) == 1)
                .map(|&c| map.index(c) as u32)
                .collect();
            if s.is_empty() {
                return Err(Error::InvalidScenario(format!(
                    "{:?} relation with d={} m leaves no object location for target cell {t}",
                    spec.relation, spec.d
                )));
            }
            support[map.index(t)] = s;
        }
        Ok(Self { spec, support })
    }

    pub fn spec(&self) -> &CorrelationSpec {
        &self.spec
    }

    /// Cell indices with nonzero `Ĉ(· | target)`.
    pub fn support(&self, target_index: usize) -> &[u32] {
        &self.support[target_index]
    }

    pub fn prob(&self, x_i: usize, target_index: usize) -> f64 {
        let s = &self.support[target_index];
        if s.binary_search(&(x_i as u32)).is_ok() {
            1.0 / s.len() as f64
        } else {
            0.0
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, target_index: usize, rng: &mut R) -> usize {
        let s = &self.support[target_index];
        s[rng.gen_range(0..s.len())] as usize
    }
}

/// `Pr(z | x, pose)` for every cell `x` (zero on obstacles).
pub fn detection_likelihoods(z: Option<Cell>, pose: Pose, det: &DetectionModel) -> Vec<f64> {
    let map = &det.world().map;
    (0..map.num_cells())
        .map(|k| {
            if map.is_free_index(k) {
                det.likelihood(z, map.cell_at(k), pose)
            } else {
                0.0
            }
        })
        .collect()
}

/// `Pr(z_i | x_target, pose)` for every target cell, for one correlated class
/// and one report.
pub fn correlational_likelihoods(
    z: Option<Cell>,
    pose: Pose,
    det: &DetectionModel,
    corr: &CorrelationModel,
) -> Vec<f64> {
    let map = &det.world().map;
    let n = map.num_cells();
    let per_cell = detection_likelihoods(z, pose, det);
    (0..n)
        .map(|t| {
            if !map.is_free_index(t) {
                return 0.0;
            }
            let s = corr.support(t);
            s.iter().map(|&k| per_cell[k as usize]).sum::<f64>() / s.len() as f64
        })
        .collect()
}

/// `Pr(z | x_i, pose)` for one class. Builds the visibility tables for `map`
/// on every call; use [`DetectionModel`] in loops.
pub fn detection_likelihood(
    z: Option<Cell>,
    x_i: Cell,
    pose: Pose,
    params: &DetectorParams,
    map: &GridMap,
) -> f64 {
    let model = DetectionModel::new(*params, Arc::new(World::new(map.clone())));
    model.likelihood(z, x_i, pose)
}

/// Draws a report for one class. Builds the visibility tables for `map` on
/// every call; use [`DetectionModel::sample`] in loops.
pub fn sample_detection<R: Rng + ?Sized>(
    x_i: Cell,
    pose: Pose,
    params: &DetectorParams,
    map: &GridMap,
    rng: &mut R,
) -> Option<Cell> {
    let model = DetectionModel::new(*params, Arc::new(World::new(map.clone())));
    model.sample(x_i, pose, rng)
}

/// `Σ_{x_i} Pr(z | x_i, pose) · Ĉ(x_i | x_target)`.
pub fn correlational_likelihood(
    z: Option<Cell>,
    x_target: Cell,
    pose: Pose,
    det: &DetectorParams,
    corr: &CorrelationSpec,
    map: &GridMap,
) -> Result<f64> {
    let model = DetectionModel::new(*det, Arc::new(World::new(map.clone())));
    let corr = CorrelationModel::new(*corr, map)?;
    let s = corr.support(map.index(x_target));
    Ok(s.iter()
        .map(|&k| model.likelihood(z, map.cell_at(k as usize), pose))
        .sum::<f64>()
        / s.len() as f64)
}
