//! `ltem` subcommands: train, simulate, evaluate, league.
//!
//! Every command writes `<command>.manifest.json` next to its outputs.
//! Exit codes: 0 success, 2 configuration or input error, 3 training
//! divergence, 4 checkpoint incompatible with the scenario, 1 anything else.

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

use ltem_core::eval::{
    evaluate_records, read_records, run_league, simulate_to_file, AggregateError, LeagueConfig, LeagueError, RecordError,
    OUTPUT_FILES,
};
use ltem_core::ippo::{self, Checkpoint, CheckpointError, ConfigError, IterationMetrics, TrainConfig, TrainError, Trainer};
use ltem_core::{load_scenario, Scenario, ScenarioError};

pub mod manifest;

pub use manifest::{RunManifest, MANIFEST_SUFFIX};

pub const OUT_DIR_ENV: &str = "LTEM_OUT_DIR";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const LEAGUE_FILE: &str = "league.csv";

#[derive(Debug, Parser)]
#[command(name = "ltem", version, about = "Long-term electricity market simulator with independent PPO agents")]
pub struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one policy per agent.
    Train(TrainArgs),
    /// Roll out frozen policies and store episode records.
    Simulate(SimulateArgs),
    /// Summarize a records file into CSV tables.
    Evaluate(EvaluateArgs),
    /// Rank checkpoints in randomized lineups.
    League(LeagueArgs),
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output directory; defaults to $LTEM_OUT_DIR, then `runs`.
    #[arg(long, env = OUT_DIR_ENV, default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Training hyperparameters (TOML); defaults apply otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Iteration budget.
    #[arg(long)]
    pub budget_iters: Option<u64>,
    /// Environment-step budget.
    #[arg(long)]
    pub budget_steps: Option<u64>,
    /// Safety cap on wall-clock seconds.
    #[arg(long)]
    pub max_wall_secs: Option<u64>,
    /// Continue from a checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct LeagueArgs {
    /// Checkpoint to enter; repeat for each entrant.
    #[arg(long = "checkpoint", required = true)]
    pub checkpoints: Vec<PathBuf>,
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub rounds: usize,
    #[arg(long, default_value_t = 4)]
    pub episodes_per_lineup: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Train(TrainError),
    #[error("{path}: {source}")]
    Checkpoint { path: String, source: CheckpointError },
    #[error(transparent)]
    Records(#[from] RecordError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    League(LeagueError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn incompatible(e: &CheckpointError) -> bool {
    matches!(
        e,
        CheckpointError::TechSet
            | CheckpointError::Layout { .. }
            | CheckpointError::ObsDim { .. }
            | CheckpointError::Agents { .. }
    )
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(_) | CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Records(RecordError::Checkpoint(c)) if incompatible(c) => 4,
            CliError::Records(RecordError::Io { .. }) => 1,
            CliError::Records(_) => 2,
            CliError::Aggregate(_) => 2,
            CliError::Checkpoint { source, .. } if incompatible(source) => 4,
            CliError::Checkpoint { source: CheckpointError::Io { .. }, .. } => 2,
            CliError::Checkpoint { .. } => 2,
            CliError::Train(TrainError::Divergence { .. }) => 3,
            CliError::Train(TrainError::Config(_)) => 2,
            CliError::Train(TrainError::Checkpoint(c)) if incompatible(c) => 4,
            CliError::Train(_) => 1,
            CliError::League(LeagueError::Checkpoint { source, .. }) if incompatible(source) => 4,
            CliError::League(LeagueError::Rollout(_)) => 1,
            CliError::League(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(c) => CliError::Config(c),
            e => CliError::Train(e),
        }
    }
}

fn io_err(p: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: p.display().to_string(), source }
}

/// What a successful command produced.
#[derive(Debug)]
pub struct Outcome {
    pub manifest: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub messages: Vec<String>,
}

/// Sets the global worker pool; later calls keep the first pool.
pub fn init_workers(workers: Option<usize>) {
    let n = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    init_workers(cli.workers);
    match cli.command {
        Command::Train(a) => cmd_train(&a, |it| println!("iter {:>5}  aggregate reward {:+.6}", it.iteration, it.aggregate_reward)),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::League(a) => cmd_league(&a),
    }
}

fn file_hash(p: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(p).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => CliError::Scenario(ScenarioError::Io { path: p.to_path_buf(), source }),
        _ => CliError::Io { path: p.display().to_string(), source },
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn scenario_with_hash(p: &Path) -> Result<(Arc<Scenario>, String), CliError> {
    let hash = file_hash(p)?;
    Ok((Arc::new(load_scenario(p)?), hash))
}

fn load_checkpoint(p: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::load(p).map_err(|source| CliError::Checkpoint { path: p.display().to_string(), source })
}

fn num_envs() -> usize {
    rayon::current_num_threads()
}

/// `on_iter` sees the metrics of every finished iteration.
pub fn cmd_train(a: &TrainArgs, on_iter: impl FnMut(&IterationMetrics)) -> Result<Outcome, CliError> {
    let mut m = RunManifest::start("train");
    let (scenario, hash) = scenario_with_hash(&a.scenario)?;
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(i) = a.budget_iters {
        cfg.iterations = i;
    }
    if let Some(s) = a.budget_steps {
        cfg.max_env_steps = s;
        if a.budget_iters.is_none() {
            cfg.iterations = u64::MAX / 2;
        }
    }
    if let Some(w) = a.max_wall_secs {
        cfg.wall_clock_secs = w;
    }
    cfg.validate()?;
    m.scenario(&a.scenario, hash);
    m.seed = Some(cfg.seed);
    m.config = serde_json::to_value(&cfg).expect("config serializes");
    let out = &a.out.out;
    let mut trainer = match &a.resume {
        Some(p) => Trainer::from_checkpoint(Arc::clone(&scenario), cfg, load_checkpoint(p)?)?,
        None => Trainer::new(Arc::clone(&scenario), cfg)?,
    };
    let res = ippo::train::run(&mut trainer, out, on_iter);
    let summary = match res {
        Ok(s) => s,
        Err(e) => {
            // keep what exists so the run can be inspected
            let last_good = out.join("ckpt_last_good.ckpt");
            let metrics = out.join(ippo::train::METRICS_FILE);
            m.artifacts = [metrics, last_good].into_iter().filter(|p| p.exists()).collect();
            m.finish(out).ok();
            return Err(e.into());
        }
    };
    m.artifacts.push(summary.metrics.clone());
    m.artifacts.extend(summary.checkpoints.iter().cloned());
    let manifest = m.finish(out)?;
    let messages = vec![format!(
        "trained {} iterations ({} env steps); final checkpoint {}",
        summary.iterations,
        summary.env_steps,
        summary.final_checkpoint.display()
    )];
    Ok(Outcome { manifest, artifacts: m.artifacts, messages })
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome, CliError> {
    let mut m = RunManifest::start("simulate");
    let (scenario, hash) = scenario_with_hash(&a.scenario)?;
    let ckpt = load_checkpoint(&a.checkpoint)?;
    ckpt.check_compatible(&scenario)
        .map_err(|source| CliError::Checkpoint { path: a.checkpoint.display().to_string(), source })?;
    if a.episodes == 0 {
        return Err(CliError::Usage("--episodes must be > 0".into()));
    }
    let out = &a.out.out;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join(RECORDS_FILE);
    let tmp = out.join(format!(".{RECORDS_FILE}.tmp"));
    let label = a.checkpoint.file_name().map_or_else(|| "checkpoint".into(), |s| s.to_string_lossy().into_owned());
    simulate_to_file(&ckpt, &label, &scenario, a.episodes, a.seed, num_envs(), &tmp)?;
    std::fs::rename(&tmp, &path).map_err(io_err(&path))?;
    m.scenario(&a.scenario, hash);
    m.seed = Some(a.seed);
    m.config = serde_json::json!({
        "checkpoint": a.checkpoint,
        "checkpoint_hash": file_hash(&a.checkpoint)?,
        "episodes": a.episodes,
    });
    m.artifacts.push(path.clone());
    let manifest = m.finish(out)?;
    Ok(Outcome {
        manifest,
        artifacts: vec![path.clone()],
        messages: vec![format!("{} episodes written to {}", a.episodes, path.display())],
    })
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<Outcome, CliError> {
    let mut m = RunManifest::start("evaluate");
    let (header, recs) = read_records(&a.records)?;
    let tables = evaluate_records(&header.scenario, &recs)?;
    let out = &a.out.out;
    tables.write(out)?;
    m.scenario_hash = Some(header.scenario_hash.clone());
    m.seed = Some(header.seed);
    m.config = serde_json::json!({ "records": a.records, "records_hash": file_hash(&a.records)?, "episodes": recs.len() });
    m.artifacts = OUTPUT_FILES.iter().map(|f| out.join(f)).collect();
    let manifest = m.finish(out)?;
    Ok(Outcome {
        manifest,
        artifacts: m.artifacts,
        messages: vec![format!("{} tables written to {}", OUTPUT_FILES.len(), out.display())],
    })
}

pub fn cmd_league(a: &LeagueArgs) -> Result<Outcome, CliError> {
    let mut m = RunManifest::start("league");
    let (scenario, hash) = scenario_with_hash(&a.scenario)?;
    let mut entrants = Vec::with_capacity(a.checkpoints.len());
    for (i, p) in a.checkpoints.iter().enumerate() {
        let canon = std::fs::canonicalize(p).unwrap_or_else(|_| p.clone());
        if a.checkpoints[..i].iter().any(|q| std::fs::canonicalize(q).unwrap_or_else(|_| q.clone()) == canon) {
            return Err(CliError::Usage(format!("checkpoint {} is entered twice", p.display())));
        }
        entrants.push((p.display().to_string(), load_checkpoint(p)?));
    }
    let cfg = LeagueConfig { rounds: a.rounds, episodes_per_lineup: a.episodes_per_lineup, seed: a.seed, num_envs: num_envs() };
    let table = run_league(&entrants, &scenario, cfg).map_err(CliError::League)?;
    let out = &a.out.out;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "checkpoint", "appearances", "mean_score", "normalized"]).expect("in-memory csv");
    let mut rows: Vec<_> = table.entries.iter().collect();
    rows.sort_by_key(|e| e.rank);
    for e in rows {
        w.write_record([
            e.rank.to_string(),
            e.label.clone(),
            e.appearances.to_string(),
            e.mean_score.to_string(),
            e.normalized.to_string(),
        ])
        .expect("in-memory csv");
    }
    let bytes = w.into_inner().expect("in-memory csv");
    let path = out.join(LEAGUE_FILE);
    manifest::write_atomic(&path, &bytes).map_err(io_err(&path))?;
    m.scenario(&a.scenario, hash);
    m.seed = Some(a.seed);
    m.config = serde_json::json!({
        "checkpoints": a.checkpoints,
        "rounds": a.rounds,
        "episodes_per_lineup": a.episodes_per_lineup,
    });
    m.artifacts.push(path.clone());
    let manifest = m.finish(out)?;
    Ok(Outcome { manifest, artifacts: vec![path.clone()], messages: vec![format!("league table written to {}", path.display())] })
}
