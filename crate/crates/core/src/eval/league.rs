//! Round-robin style league: every round draws a random lineup of
//! checkpoints, one per agent slot, and plays frozen episodes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::ippo::{collect, mix_seed, AgentPolicy, Checkpoint, CheckpointError, RolloutError};
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum LeagueError {
    #[error("a league needs at least one checkpoint")]
    NoEntrants,
    #[error("duplicate league entry `{0}`")]
    Duplicate(String),
    #[error("`{label}`: {source}")]
    Checkpoint { label: String, source: CheckpointError },
    #[error(transparent)]
    Rollout(#[from] RolloutError),
}

#[derive(Clone, Copy, Debug)]
pub struct LeagueConfig {
    pub rounds: usize,
    pub episodes_per_lineup: usize,
    pub seed: u64,
    pub num_envs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeagueEntry {
    pub label: String,
    pub appearances: usize,
    /// Mean episode return per agent slot occupied.
    pub mean_score: f64,
    /// `mean_score` divided by the largest absolute mean score.
    pub normalized: f64,
    /// 1 is best.
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeagueTable {
    pub entries: Vec<LeagueEntry>,
    /// Checkpoint index per slot, per round.
    pub lineups: Vec<Vec<usize>>,
}

/// Plays the league. Entries keep the input order; `rank` orders them by
/// descending mean score, ties broken by input order.
pub fn run_league(
    entrants: &[(String, Checkpoint)],
    scenario: &Arc<Scenario>,
    cfg: LeagueConfig,
) -> Result<LeagueTable, LeagueError> {
    if entrants.is_empty() {
        return Err(LeagueError::NoEntrants);
    }
    for (i, (label, ckpt)) in entrants.iter().enumerate() {
        if entrants[..i].iter().any(|(l, _)| l == label) {
            return Err(LeagueError::Duplicate(label.clone()));
        }
        ckpt.check_compatible(scenario).map_err(|source| LeagueError::Checkpoint { label: label.clone(), source })?;
    }
    let n_agents = scenario.agent_count();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x1ea9));
    let mut totals = vec![0.0; entrants.len()];
    let mut counts = vec![0usize; entrants.len()];
    let mut lineups = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let lineup: Vec<usize> = (0..n_agents).map(|_| rng.gen_range(0..entrants.len())).collect();
        let policies: Vec<&AgentPolicy> = lineup.iter().enumerate().map(|(slot, &c)| &entrants[c].1.policies[slot]).collect();
        let round_seed = mix_seed(cfg.seed, round as u64 + 1);
        let seeds: Vec<u64> = (0..cfg.episodes_per_lineup).map(|e| mix_seed(round_seed, e as u64)).collect();
        for tr in collect(scenario, &policies, &seeds, cfg.num_envs, false, false)? {
            for (slot, &c) in lineup.iter().enumerate() {
                totals[c] += tr.returns[slot];
                counts[c] += 1;
            }
        }
        lineups.push(lineup);
    }
    let means: Vec<f64> = totals.iter().zip(&counts).map(|(t, &n)| if n > 0 { t / n as f64 } else { 0.0 }).collect();
    let scale = means.iter().fold(0.0f64, |a, m| a.max(m.abs()));
    let mut order: Vec<usize> = (0..entrants.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    let mut rank = vec![0; entrants.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r + 1;
    }
    let entries = entrants
        .iter()
        .enumerate()
        .map(|(i, (label, _))| LeagueEntry {
            label: label.clone(),
            appearances: counts[i],
            mean_score: means[i],
            normalized: if scale > 0.0 { means[i] / scale } else { 0.0 },
            rank: rank[i],
        })
        .collect();
    Ok(LeagueTable { entries, lineups })
}
