//! Trial execution, metrics and result persistence.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentRng};
use crate::baselines::{target_pomdp_agent, GreedyNbvAgent, RandomAgent};
use crate::error::{Error, Result};
use crate::grid::{apply_move, shortest_path_length, Cell, PathLength, Pose, World};
use crate::hierarchy::HierarchicalAgent;
use crate::pomdp::{Action, CosModel, CosState, JointObservation};
use crate::scenario::ScenarioSpec;

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const DISCOUNT: f64 = 0.95;
/// Environment variable holding the default number of worker threads.
pub const PARALLEL_ENV: &str = "COSEARCH_PARALLEL";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Cospomdp,
    TargetPomdp,
    GreedyNbv,
    Random,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::Cospomdp,
        AgentKind::TargetPomdp,
        AgentKind::GreedyNbv,
        AgentKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Cospomdp => "cospomdp",
            AgentKind::TargetPomdp => "target-pomdp",
            AgentKind::GreedyNbv => "greedy-nbv",
            AgentKind::Random => "random",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownAgent(s.to_string()))
    }
}

pub fn make_agent(kind: AgentKind, spec: &ScenarioSpec, world: &Arc<World>) -> Result<Box<dyn Agent>> {
    let model = spec.agent_model(world)?;
    Ok(match kind {
        AgentKind::Cospomdp => Box::new(HierarchicalAgent::new("cospomdp", model, spec.hierarchy, spec.init_pose)?),
        AgentKind::TargetPomdp => Box::new(target_pomdp_agent(&model, spec.hierarchy, spec.init_pose)?),
        AgentKind::GreedyNbv => Box::new(GreedyNbvAgent::new(model, spec.greedy, spec.hierarchy, spec.init_pose)?),
        AgentKind::Random => Box::new(RandomAgent),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub scenario: String,
    pub agent: String,
    pub seed: u64,
    pub success: bool,
    /// Translation distance travelled, meters.
    pub path_len: f64,
    /// Shortest distance from the start to a success cell, meters.
    pub shortest_len: f64,
    pub discounted_reward: f64,
    pub steps: u32,
    #[serde(default)]
    pub belief_resets: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialResult {
    pub fn spl(&self) -> f64 {
        spl(self.success, self.path_len, self.shortest_len)
    }
}

/// `S·ℓ / max(p, ℓ)`; a success with `ℓ = p = 0` scores 1.
pub fn spl(success: bool, path_len: f64, shortest_len: f64) -> f64 {
    if !success {
        return 0.0;
    }
    let denom = path_len.max(shortest_len);
    if denom <= 0.0 {
        1.0
    } else {
        shortest_len / denom
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u32,
    pub pose: Pose,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgoal: Option<String>,
    pub belief_hash: u64,
    pub detections: Vec<Option<Cell>>,
    pub reward: f64,
    #[serde(default)]
    pub resampled: bool,
    #[serde(default)]
    pub belief_reset: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub t: u32,
    pub cells: Vec<(Cell, f64)>,
}

/// Full record of one trial, enough to render it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub schema_version: u32,
    pub scenario: ScenarioSpec,
    pub steps: Vec<StepRecord>,
    #[serde(default)]
    pub beliefs: Vec<BeliefSnapshot>,
    pub final_pose: Pose,
    pub result: TrialResult,
}

fn observe<R: rand::Rng + ?Sized>(truth: &CosModel, pose: Pose, cells: &[Cell], rng: &mut R) -> JointObservation {
    let mut detections = Vec::with_capacity(cells.len());
    detections.push(truth.target_detector().sample(cells[0], pose, rng));
    for (obj, &c) in truth.objects().iter().zip(&cells[1..]) {
        detections.push(obj.detector.sample(c, pose, rng));
    }
    JointObservation {
        robot_pose: pose,
        detections,
    }
}

/// Runs one trial and returns its result.
pub fn run_trial(spec: &ScenarioSpec, agent: AgentKind, seed: u64) -> Result<TrialResult> {
    Ok(run_trial_traced(spec, agent, seed, None)?.result)
}

/// Runs one trial, recording every step. With `snapshot_every = Some(k)` the
/// agent's target belief is stored at steps `0, k, 2k, …` and at the end.
///
/// Agent failures do not abort: the trial is marked errored.
pub fn run_trial_traced(spec: &ScenarioSpec, kind: AgentKind, seed: u64, snapshot_every: Option<u32>) -> Result<TrialTrace> {
    let world = spec.world();
    let truth = spec.true_model(&world)?;
    let mut agent = make_agent(kind, spec, &world)?;
    let map = &world.map;
    let cells = spec.object_cells();
    let target = spec.target.cell;
    let shortest_len = match shortest_path_length(map, spec.init_pose, target, spec.success_distance) {
        PathLength::Meters(m) => m,
        PathLength::Unreachable => {
            return Err(Error::InvalidScenario(format!(
                "no free cell within {} m of the target is reachable",
                spec.success_distance
            )))
        }
    };

    let mut agent_rng = AgentRng::seed_from_u64(seed);
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
    env_rng.set_stream(1);

    let mut pose = spec.init_pose;
    let mut z = observe(&truth, pose, &cells, &mut env_rng);
    let mut steps = Vec::new();
    let mut beliefs = Vec::new();
    let mut result = TrialResult {
        scenario: spec.name.clone(),
        agent: kind.name().to_string(),
        seed,
        success: false,
        path_len: 0.0,
        shortest_len,
        discounted_reward: 0.0,
        steps: 0,
        belief_resets: 0,
        error: None,
    };
    let mut scale = 1.0;
    for t in 0..spec.max_steps {
        let decision = match agent.act(&z, &mut agent_rng) {
            Ok(d) => d,
            Err(e) => {
                log::error!("{} on {} (seed {seed}) failed: {e}", kind, spec.name);
                result.error = Some(e.to_string());
                break;
            }
        };
        if snapshot_every.is_some_and(|k| k > 0 && t % k == 0) {
            beliefs.push(BeliefSnapshot {
                t,
                cells: agent.target_belief(),
            });
        }
        let reward = truth.reward(&CosState { robot: pose, target }, decision.action);
        result.discounted_reward += scale * reward;
        scale *= DISCOUNT;
        result.steps = t + 1;
        result.belief_resets += decision.belief_reset as u32;
        steps.push(StepRecord {
            t,
            pose,
            action: decision.action,
            subgoal: decision.subgoal,
            belief_hash: decision.belief_hash,
            detections: z.detections.clone(),
            reward,
            resampled: decision.resampled,
            belief_reset: decision.belief_reset,
        });
        match decision.action {
            Action::Done => {
                result.success = truth.is_success(pose, target);
                break;
            }
            Action::Move(m) => {
                let next = apply_move(pose, m, map);
                if next.cell != pose.cell {
                    result.path_len += map.cell_size();
                }
                pose = next;
            }
        }
        z = observe(&truth, pose, &cells, &mut env_rng);
    }
    if snapshot_every.is_some() {
        let t = result.steps;
        if beliefs.last().is_none_or(|b: &BeliefSnapshot| b.t != t) {
            beliefs.push(BeliefSnapshot {
                t,
                cells: agent.target_belief(),
            });
        }
    }
    Ok(TrialTrace {
        schema_version: RESULTS_SCHEMA_VERSION,
        scenario: spec.clone(),
        steps,
        beliefs,
        final_pose: pose,
        result,
    })
}

/// Mean and 95% half-width (normal approximation).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci95: f64,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ci95 = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            1.96 * (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, ci95 }
    }

    pub fn low(&self) -> f64 {
        self.mean - self.ci95
    }

    pub fn high(&self) -> f64 {
        self.mean + self.ci95
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub spl: Estimate,
    pub sr: Estimate,
    pub dr: Estimate,
}

/// SPL, success rate and discounted reward over error-free trials.
pub fn compute_metrics<'a>(results: impl IntoIterator<Item = &'a TrialResult>) -> Result<Metrics> {
    let ok: Vec<&TrialResult> = results.into_iter().filter(|r| r.error.is_none()).collect();
    if ok.is_empty() {
        return Err(Error::EmptyResults);
    }
    let spl: Vec<f64> = ok.iter().map(|r| r.spl()).collect();
    let sr: Vec<f64> = ok.iter().map(|r| r.success as u8 as f64).collect();
    let dr: Vec<f64> = ok.iter().map(|r| r.discounted_reward).collect();
    Ok(Metrics {
        n: ok.len(),
        spl: Estimate::of(&spl),
        sr: Estimate::of(&sr),
        dr: Estimate::of(&dr),
    })
}

/// Independent trial seed from a batch seed and trial index (SplitMix64).
pub fn trial_seed(batch_seed: u64, index: u64) -> u64 {
    let mut z = batch_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Worker count from the environment, defaulting to the number of CPUs.
pub fn default_parallelism() -> usize {
    std::env::var(PARALLEL_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&k: &usize| k > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Clone, Debug)]
pub struct BatchJob {
    pub scenario: usize,
    pub agent: AgentKind,
    pub trial: u32,
    pub seed: u64,
}

/// Every `(scenario, agent, trial)` combination. Seeds depend on the
/// scenario and trial index only, so agents face identical draws.
pub fn batch_jobs(num_scenarios: usize, agents: &[AgentKind], trials: u32, batch_seed: u64) -> Vec<BatchJob> {
    let mut jobs = Vec::new();
    for s in 0..num_scenarios {
        for &agent in agents {
            for trial in 0..trials {
                jobs.push(BatchJob {
                    scenario: s,
                    agent,
                    trial,
                    seed: trial_seed(batch_seed, s as u64 * trials as u64 + trial as u64),
                });
            }
        }
    }
    jobs
}

/// Runs every job on `parallel` worker threads. Results come back in job
/// order; a trial that cannot run at all is returned as an errored result.
pub fn run_batch(scenarios: &[ScenarioSpec], jobs: &[BatchJob], parallel: usize) -> Result<Vec<TrialResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let spec = &scenarios[job.scenario];
                run_trial(spec, job.agent, job.seed).unwrap_or_else(|e| TrialResult {
                    scenario: spec.name.clone(),
                    agent: job.agent.name().to_string(),
                    seed: job.seed,
                    success: false,
                    path_len: 0.0,
                    shortest_len: 0.0,
                    discounted_reward: 0.0,
                    steps: 0,
                    belief_resets: 0,
                    error: Some(e.to_string()),
                })
            })
            .collect()
    }))
}

#[derive(Serialize)]
struct ResultRecord<'a> {
    schema_version: u32,
    #[serde(flatten)]
    result: &'a TrialResult,
}

pub fn write_jsonl(path: impl AsRef<Path>, results: &[TrialResult]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in results {
        serde_json::to_writer(
            &mut out,
            &ResultRecord {
                schema_version: RESULTS_SCHEMA_VERSION,
                result: r,
            },
        )?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<TrialResult>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub schema_version: u32,
    pub scenario: String,
    pub agent: String,
    pub n: usize,
    pub errored: usize,
    pub spl_mean: f64,
    pub spl_ci95: f64,
    pub sr: f64,
    pub sr_ci95: f64,
    pub dr_mean: f64,
    pub dr_ci95: f64,
}

/// One row per `(scenario, agent)` plus an `ALL` row per agent, in first
/// appearance order.
pub fn summarize(results: &[TrialResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String)> = Vec::new();
    let mut agents: Vec<String> = Vec::new();
    for r in results {
        let k = (r.scenario.clone(), r.agent.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
        if !agents.contains(&r.agent) {
            agents.push(r.agent.clone());
        }
    }
    let row = |scenario: &str, agent: &str, group: Vec<&TrialResult>| {
        let errored = group.iter().filter(|r| r.error.is_some()).count();
        let m = compute_metrics(group.iter().copied()).ok();
        let nan = Estimate {
            mean: f64::NAN,
            ci95: f64::NAN,
        };
        SummaryRow {
            schema_version: RESULTS_SCHEMA_VERSION,
            scenario: scenario.to_string(),
            agent: agent.to_string(),
            n: m.map_or(0, |m| m.n),
            errored,
            spl_mean: m.map_or(nan, |m| m.spl).mean,
            spl_ci95: m.map_or(nan, |m| m.spl).ci95,
            sr: m.map_or(nan, |m| m.sr).mean,
            sr_ci95: m.map_or(nan, |m| m.sr).ci95,
            dr_mean: m.map_or(nan, |m| m.dr).mean,
            dr_ci95: m.map_or(nan, |m| m.dr).ci95,
        }
    };
    let mut rows: Vec<SummaryRow> = keys
        .iter()
        .map(|(s, a)| row(s, a, results.iter().filter(|r| &r.scenario == s && &r.agent == a).collect()))
        .collect();
    for a in &agents {
        rows.push(row("ALL", a, results.iter().filter(|r| &r.agent == a).collect()));
    }
    rows
}

pub fn write_summary_csv(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
