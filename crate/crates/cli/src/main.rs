use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cosearch::harness::{
    batch_jobs, default_parallelism, run_batch, run_trial_traced, summarize, write_jsonl, write_summary_csv,
    AgentKind, TrialTrace,
};
use cosearch::render::render_trajectory;
use cosearch::scenario::{load_dir, Ablation, ScenarioSpec};

#[derive(Parser)]
#[command(name = "cosearch", version, about = "Correlational object search trials and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and print its result as JSON.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = parse_agent)]
        agent: AgentKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the full step trace (JSON) here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Store a belief snapshot every K steps in the trace.
        #[arg(long, default_value_t = 10)]
        snapshot_every: u32,
        #[command(flatten)]
        planner: PlannerFlags,
    },
    /// Run every agent on every scenario in a directory.
    Bench {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: u32,
        /// Worker threads (defaults to the CPU count).
        #[arg(long, env = "COSEARCH_PARALLEL")]
        parallel: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', value_parser = parse_agent, default_value = "cospomdp,target-pomdp,greedy-nbv,random")]
        agents: Vec<AgentKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override every scenario's ablation flag.
        #[arg(long, value_parser = parse_ablation)]
        ablation: Option<Ablation>,
        #[command(flatten)]
        planner: PlannerFlags,
    },
    /// Draw a trial trace as SVG.
    Render {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Overrides applied to both planner levels.
#[derive(Args, Clone, Copy)]
struct PlannerFlags {
    #[arg(long)]
    num_sims: Option<u32>,
    #[arg(long)]
    max_depth: Option<u32>,
    #[arg(long)]
    exploration_const: Option<f64>,
}

impl PlannerFlags {
    fn apply(self, spec: &mut ScenarioSpec) -> Result<()> {
        for p in [&mut spec.hierarchy.high_level_planner, &mut spec.hierarchy.low_level_planner] {
            if let Some(n) = self.num_sims {
                p.num_sims = n;
            }
            if let Some(d) = self.max_depth {
                p.max_depth = d;
            }
            if let Some(c) = self.exploration_const {
                p.exploration_const = c;
            }
        }
        spec.validate()?;
        Ok(())
    }
}

fn parse_agent(s: &str) -> Result<AgentKind, String> {
    s.parse().map_err(|e: cosearch::Error| e.to_string())
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    match s {
        "accurate" => Ok(Ablation::Accurate),
        "wrong" => Ok(Ablation::Wrong),
        _ => Err(format!("expected accurate or wrong, got {s:?}")),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            scenario,
            agent,
            seed,
            trace,
            snapshot_every,
            planner,
        } => {
            let mut spec = ScenarioSpec::load(&scenario).with_context(|| format!("loading {}", scenario.display()))?;
            planner.apply(&mut spec)?;
            let t = run_trial_traced(&spec, agent, seed, trace.as_ref().map(|_| snapshot_every))?;
            println!("{}", serde_json::to_string(&t.result)?);
            if let Some(path) = trace {
                std::fs::write(&path, serde_json::to_string_pretty(&t)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(t.result.error.is_none())
        }
        Command::Bench {
            scenarios,
            trials,
            parallel,
            out,
            agents,
            seed,
            ablation,
            planner,
        } => {
            let mut specs = load_dir(&scenarios).with_context(|| format!("loading {}", scenarios.display()))?;
            if specs.is_empty() {
                bail!("no scenario files in {}", scenarios.display());
            }
            for s in &mut specs {
                if let Some(a) = ablation {
                    s.ablation = a;
                }
                planner.apply(s)?;
            }
            let parallel = parallel.unwrap_or_else(default_parallelism);
            log::info!("{} scenarios x {} agents x {trials} trials on {parallel} workers", specs.len(), agents.len());
            let jobs = batch_jobs(specs.len(), &agents, trials, seed);
            let results = run_batch(&specs, &jobs, parallel)?;
            std::fs::create_dir_all(&out)?;
            write_jsonl(out.join("results.jsonl"), &results)?;
            let rows = summarize(&results);
            write_summary_csv(out.join("summary.csv"), &rows)?;
            for r in rows.iter().filter(|r| r.scenario == "ALL") {
                println!(
                    "{:<14} n={:<4} SPL {:6.2} ± {:5.2}  SR {:6.2}  DR {:8.2} ± {:6.2}",
                    r.agent,
                    r.n,
                    100.0 * r.spl_mean,
                    100.0 * r.spl_ci95,
                    100.0 * r.sr,
                    r.dr_mean,
                    r.dr_ci95
                );
            }
            let errored = results.iter().filter(|r| r.error.is_some()).count();
            if errored > 0 {
                eprintln!("{errored} of {} trials failed", results.len());
            }
            Ok(errored == 0)
        }
        Command::Render { trace, out } => {
            let text = std::fs::read_to_string(&trace).with_context(|| format!("reading {}", trace.display()))?;
            let t: TrialTrace = serde_json::from_str(&text)?;
            render_trajectory(&t, &out).with_context(|| format!("writing {}", out.display()))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
