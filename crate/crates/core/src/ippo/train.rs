//! The independent-learner training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

use super::checkpoint::{Checkpoint, CheckpointError};
use super::config::{ConfigError, TrainConfig};
use super::gae::compute_targets;
use super::loss::{normalize, ppo_loss, LossCoefs, LossError, LossStats, Sample};
use super::policy::AgentPolicy;
use super::rollout::{collect, mix_seed, RolloutError};
use crate::env::{obs_dim, ActionLayout};
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error("iteration {iteration}, agent {agent}: training diverged ({source})")]
    Divergence { iteration: u64, agent: usize, source: LossError },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Statistics of one agent for one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    pub agent: usize,
    /// Mean, min and max of the episode return over this iteration's episodes.
    pub mean_reward: f64,
    pub min_reward: f64,
    pub max_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// One metrics line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: u64,
    pub episodes: usize,
    pub env_steps: u64,
    /// Sum over agents of the mean episode return.
    pub aggregate_reward: f64,
    pub agents: Vec<AgentMetrics>,
}

pub struct Trainer {
    scenario: Arc<Scenario>,
    cfg: TrainConfig,
    pub policies: Vec<AgentPolicy>,
    pub iteration: u64,
    pub env_steps: u64,
}

impl Trainer {
    pub fn new(scenario: Arc<Scenario>, cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let layout = ActionLayout::from_scenario(&scenario);
        let od = obs_dim(&scenario);
        let policies = (0..scenario.agent_count())
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x1000 + i as u64));
                AgentPolicy::new(od, &layout, &cfg.hidden, false, &mut rng)
            })
            .collect();
        Ok(Self { scenario, cfg, policies, iteration: 0, env_steps: 0 })
    }

    pub fn from_checkpoint(scenario: Arc<Scenario>, cfg: TrainConfig, ckpt: Checkpoint) -> Result<Self, TrainError> {
        cfg.validate()?;
        ckpt.check_compatible(&scenario)?;
        Ok(Self { scenario, cfg, policies: ckpt.policies, iteration: ckpt.iteration, env_steps: 0 })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(&self.scenario, self.iteration, self.policies.clone())
    }

    fn episodes_per_batch(&self) -> usize {
        self.cfg.batch_size.div_ceil(self.scenario.total_steps())
    }

    /// Collect, estimate targets, update every agent. Parameters change only
    /// if every agent's update succeeds.
    pub fn iterate(&mut self) -> Result<IterationMetrics, TrainError> {
        let it = self.iteration;
        let cfg = &self.cfg;
        let n_ep = self.episodes_per_batch();
        let seeds: Vec<u64> = (0..n_ep).map(|e| mix_seed(mix_seed(cfg.seed, it + 1), e as u64)).collect();
        let refs: Vec<&AgentPolicy> = self.policies.iter().collect();
        let traces = collect(&self.scenario, &refs, &seeds, cfg.num_envs, true, false)?;
        let n = self.policies.len();

        let mut per_agent: Vec<Vec<Sample>> = vec![Vec::new(); n];
        let mut returns: Vec<Vec<f64>> = vec![Vec::new(); n];
        for tr in traces {
            for (i, mut s) in tr.samples.into_iter().enumerate() {
                let r: Vec<f64> = s.iter().map(|x| x.reward).collect();
                let v: Vec<f64> = s.iter().map(|x| x.old_value).collect();
                let (targets, adv) = compute_targets(&r, &v, cfg.gamma, cfg.gae_lambda);
                for ((x, t), a) in s.iter_mut().zip(targets).zip(adv) {
                    x.v_target = t;
                    x.advantage = a;
                }
                per_agent[i].extend(s);
                returns[i].push(tr.returns[i]);
            }
        }
        
        let updated: Vec<Result<(AgentPolicy, LossStats), TrainError>> = self
            .policies
            .par_iter()
            .zip(per_agent.par_iter())
            .enumerate()
            .map(|(i, (p, samples))| {
                let mut p = p.clone();
                let st = update_agent(&mut p, samples, cfg, mix_seed(mix_seed(cfg.seed, it + 1), 0x5eed_0000 + i as u64))
                    .map_err(|source| TrainError::Divergence { iteration: it, agent: i, source })?;
                Ok((p, st))
            })
            .collect();
        let mut new_policies = Vec::with_capacity(n);
        let mut stats = Vec::with_capacity(n);
        for u in updated {
            let (p, s) = u?;
            new_policies.push(p);
            stats.push(s);
        }
        self.policies = new_policies;
        self.iteration += 1;
        self.env_steps += (n_ep * self.scenario.total_steps()) as u64;
        let agents: Vec<AgentMetrics> = (0..n)
            .map(|i| {
                let r = &returns[i];
                AgentMetrics {
                    agent: i,
                    mean_reward: r.iter().sum::<f64>() / r.len() as f64,
                    min_reward: r.iter().copied().fold(f64::INFINITY, f64::min),
                    max_reward: r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    policy_loss: stats[i].policy_loss,
                    value_loss: stats[i].value_loss,
                    entropy: stats[i].entropy,
                    clip_fraction: stats[i].clip_fraction,
                }
            })
            .collect();
        Ok(IterationMetrics {
            iteration: self.iteration,
            episodes: n_ep,
            env_steps: self.env_steps,
            aggregate_reward: agents.iter().map(|a| a.mean_reward).sum(),
            agents,
        })
    }
}

/// `epochs` passes of shuffled minibatch updates. Returns the mean loss
/// statistics over all minibatches.
pub fn update_agent(p: &mut AgentPolicy, samples: &[Sample], cfg: &TrainConfig, seed: u64) -> Result<LossStats, LossError> {
    let coefs = LossCoefs { clip: cfg.clip_eps, entropy: cfg.entropy_coef, value: cfg.value_coef };
    let n_mb = (cfg.batch_size / cfg.minibatch()).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    let mut acc = LossStats::default();
    let mut count = 0.0;
    for _ in 0..cfg.epochs {
        idx.shuffle(&mut rng);
        for k in 0..n_mb {
            let (a, b) = (k * idx.len() / n_mb, (k + 1) * idx.len() / n_mb);
            if a == b {
                continue;
            }
            let batch: Vec<&Sample> = idx[a..b].iter().map(|&j| &samples[j]).collect();
            let adv = normalize(&batch.iter().map(|s| s.advantage).collect::<Vec<_>>());
            let g = ppo_loss(p, &batch, &adv, coefs)?;
            p.actor_opt.step(&mut p.actor.params, &g.actor, cfg.learning_rate);
            p.critic_opt.step(&mut p.critic.params, &g.critic, cfg.learning_rate);
            acc.loss += g.stats.loss;
            acc.policy_loss += g.stats.policy_loss;
            acc.value_loss += g.stats.value_loss;
            acc.entropy += g.stats.entropy;
            acc.clip_fraction += g.stats.clip_fraction;
            count += 1.0;
        }
    }
    if count > 0.0 {
        acc.loss /= count;
        acc.policy_loss /= count;
        acc.value_loss /= count;
        acc.entropy /= count;
        acc.clip_fraction /= count;
    }
    Ok(acc)
}

/// What a training run left on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub iterations: u64,
    pub env_steps: u64,
    pub checkpoints: Vec<PathBuf>,
    pub metrics: PathBuf,
    pub final_checkpoint: PathBuf,
}

pub const METRICS_FILE: &str = "metrics.jsonl";

pub fn checkpoint_name(iteration: u64) -> String {
    format!("ckpt_{iteration:06}.ckpt")
}

/// Trains until the iteration, step or wall-clock budget is spent, writing
/// `metrics.jsonl` and checkpoints into `out_dir`. On divergence the last
/// good parameters are saved as `ckpt_last_good.ckpt` before the error is
/// returned.
pub fn train(scenario: Arc<Scenario>, cfg: TrainConfig, out_dir: &Path) -> Result<TrainSummary, TrainError> {
    let mut t = Trainer::new(scenario, cfg)?;
    run(&mut t, out_dir, |_| {})
}

/// As [`train`], starting from an existing trainer and reporting each
/// iteration's metrics to `on_iter`.
pub fn run(t: &mut Trainer, out_dir: &Path, mut on_iter: impl FnMut(&IterationMetrics)) -> Result<TrainSummary, TrainError> {
    let io = |p: &Path| {
        let path = p.display().to_string();
        move |source| TrainError::Io { path: path.clone(), source }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let metrics_path = out_dir.join(METRICS_FILE);
    let mut metrics = std::io::BufWriter::new(std::fs::File::create(&metrics_path).map_err(io(&metrics_path))?);
    let start = Instant::now();
    let mut checkpoints = Vec::new();
    let budget = t.iteration + t.cfg.iterations;
    while t.iteration < budget {
        if t.cfg.max_env_steps > 0 && t.env_steps >= t.cfg.max_env_steps {
            break;
        }
        if t.cfg.wall_clock_secs > 0 && start.elapsed().as_secs() >= t.cfg.wall_clock_secs {
            break;
        }
        let m = match t.iterate() {
            Ok(m) => m,
            Err(e) => {
                metrics.flush().map_err(io(&metrics_path))?;
                t.checkpoint().save(out_dir.join("ckpt_last_good.ckpt"))?;
                return Err(e);
            }
        };
        serde_json::to_writer(&mut metrics, &m).expect("metrics serialize");
        metrics.write_all(b"\n").map_err(io(&metrics_path))?;
        on_iter(&m);
        if t.cfg.checkpoint_every > 0 && t.iteration % t.cfg.checkpoint_every == 0 && t.iteration < budget {
            let p = out_dir.join(checkpoint_name(t.iteration));
            t.checkpoint().save(&p)?;
            checkpoints.push(p);
        }
    }
    metrics.flush().map_err(io(&metrics_path))?;
    let final_checkpoint = out_dir.join(checkpoint_name(t.iteration));
    t.checkpoint().save(&final_checkpoint)?;
    checkpoints.push(final_checkpoint.clone());
    Ok(TrainSummary { iterations: t.iteration, env_steps: t.env_steps, checkpoints, metrics: metrics_path, final_checkpoint })
}
