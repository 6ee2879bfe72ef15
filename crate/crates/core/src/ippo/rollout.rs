//! Episode collection with frozen policies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;
use thiserror::Error;

use super::dist::DistError;
use super::loss::Sample;
use super::policy::AgentPolicy;
use crate::env::{Env, EnvError, StepInfo};
use crate::scenario::Scenario;

#[derive(Debug, Error, PartialEq)]
pub enum RolloutError {
    #[error("episode {episode}, step {step}: {source}")]
    Env { episode: usize, step: usize, source: EnvError },
    #[error("episode {episode}, step {step}, agent {agent}: {source}")]
    Dist { episode: usize, step: usize, agent: usize, source: DistError },
}

/// One finished episode.
#[derive(Clone, Debug)]
pub struct EpisodeTrace {
    /// Per agent, one sample per step; advantages not yet filled in.
    pub samples: Vec<Vec<Sample>>,
    /// Per agent, the sum of rewards.
    pub returns: Vec<f64>,
    pub infos: Vec<StepInfo>,
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one episode; agent `i` acts with `policies[i]`. `keep` controls
/// whether samples and step infos are retained.
pub fn run_episode(
    scenario: &Arc<Scenario>,
    policies: &[&AgentPolicy],
    episode: usize,
    seed: u64,
    keep_samples: bool,
    keep_infos: bool,
) -> Result<EpisodeTrace, RolloutError> {
    let mut env = Env::new(Arc::clone(scenario));
    let n = env.n_agents();
    assert_eq!(policies.len(), n, "one policy per agent");
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
    let mut out = env.reset(mix_seed(seed, 0));
    let mut samples: Vec<Vec<Sample>> = vec![Vec::new(); n];
    let mut returns = vec![0.0; n];
    let mut infos = Vec::new();
    let mut step = 0;
    while !out.done {
        let mut actions = Vec::with_capacity(n);
        let mut acts = Vec::with_capacity(n);
        for i in 0..n {
            let a = policies[i]
                .act(&out.obs[i], &out.masks[i].allowed, &mut rng)
                .map_err(|source| RolloutError::Dist { episode, step, agent: i, source })?;
            actions.push(a.actions.clone());
            acts.push(a);
        }
        let (next, info) = env.step(&actions).map_err(|source| RolloutError::Env { episode, step, source })?;
        for (i, a) in acts.into_iter().enumerate() {
            returns[i] += next.rewards[i];
            if keep_samples {
                samples[i].push(Sample {
                    obs: std::mem::take(&mut out.obs[i]),
                    mask: std::mem::take(&mut out.masks[i].allowed),
                    actions: a.actions,
                    old_log_prob: a.log_prob,
                    old_value: a.value,
                    reward: next.rewards[i],
                    advantage: 0.0,
                    v_target: 0.0,
                });
            }
        }
        if keep_infos {
            infos.push(info);
        }
        out = next;
        step += 1;
    }
    Ok(EpisodeTrace { samples, returns, infos })
}

/// Runs `seeds.len()` episodes, at most `num_envs` at a time. The output
/// order follows `seeds`, whatever the concurrency.
pub fn collect(
    scenario: &Arc<Scenario>,
    policies: &[&AgentPolicy],
    seeds: &[u64],
    num_envs: usize,
    keep_samples: bool,
    keep_infos: bool,
) -> Result<Vec<EpisodeTrace>, RolloutError> {
    let wave = num_envs.max(1);
    let mut out = Vec::with_capacity(seeds.len());
    for (w, chunk) in seeds.chunks(wave).enumerate() {
        let res: Vec<Result<EpisodeTrace, RolloutError>> = chunk
            .par_iter()
            .enumerate()
            .map(|(k, &s)| run_episode(scenario, policies, w * wave + k, s, keep_samples, keep_infos))
            .collect();
        for r in res {
            out.push(r?);
        }
    }
    Ok(out)
}
