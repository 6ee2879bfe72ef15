//! Episode records: a JSON-lines file whose first line is a header carrying
//! the resolved scenario, followed by one line per episode.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

use crate::env::StepInfo;
use crate::ippo::{collect, mix_seed, AgentPolicy, Checkpoint, CheckpointError, RolloutError};
use crate::scenario::Scenario;

pub const RECORDS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Malformed { path: String, line: usize, msg: String },
    #[error("{path}: no episodes")]
    Empty { path: String },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub version: u32,
    pub scenario_hash: String,
    pub seed: u64,
    pub episodes: usize,
    /// Label of the policy in each agent slot.
    pub policies: Vec<String>,
    pub scenario: Scenario,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub seed: u64,
    /// Sum of rewards per agent.
    pub returns: Vec<f64>,
    pub steps: Vec<StepInfo>,
}

impl EpisodeRecord {
    /// Installed plus under-construction capacity per agent at the end.
    pub fn final_capacity(&self) -> Vec<f64> {
        self.steps.last().map_or_else(Vec::new, |s| s.agent_capacity.iter().map(|a| a.iter().sum()).collect())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(RecordHeader),
    Episode(EpisodeRecord),
}

/// Frozen-policy episodes with stochastic sampling. Episode `e` uses seed
/// `mix_seed(seed, e)`, so results do not depend on `num_envs`. Each
/// finished wave of episodes is handed to `sink` in order.
pub fn simulate_with(
    scenario: &Arc<Scenario>,
    policies: &[&AgentPolicy],
    episodes: usize,
    seed: u64,
    num_envs: usize,
    mut sink: impl FnMut(EpisodeRecord) -> Result<(), RecordError>,
) -> Result<(), RecordError> {
    let seeds: Vec<u64> = (0..episodes).map(|e| mix_seed(seed, e as u64)).collect();
    let wave = num_envs.max(1);
    for (w, chunk) in seeds.chunks(wave).enumerate() {
        for (k, tr) in collect(scenario, policies, chunk, wave, false, true)?.into_iter().enumerate() {
            let e = w * wave + k;
            sink(EpisodeRecord { episode: e, seed: seeds[e], returns: tr.returns, steps: tr.infos })?;
        }
    }
    Ok(())
}

pub fn simulate(
    ckpt: &Checkpoint,
    scenario: &Arc<Scenario>,
    episodes: usize,
    seed: u64,
    num_envs: usize,
) -> Result<Vec<EpisodeRecord>, RecordError> {
    ckpt.check_compatible(scenario)?;
    let refs: Vec<&AgentPolicy> = ckpt.policies.iter().collect();
    let mut out = Vec::with_capacity(episodes);
    simulate_with(scenario, &refs, episodes, seed, num_envs, |r| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

/// Streams records to `path` as they are produced.
pub fn simulate_to_file(
    ckpt: &Checkpoint,
    label: &str,
    scenario: &Arc<Scenario>,
    episodes: usize,
    seed: u64,
    num_envs: usize,
    path: &Path,
) -> Result<(), RecordError> {
    ckpt.check_compatible(scenario)?;
    let io = |source| RecordError::Io { path: path.display().to_string(), source };
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let header = RecordHeader {
        version: RECORDS_VERSION,
        scenario_hash: scenario.content_hash(),
        seed,
        episodes,
        policies: vec![label.to_string(); scenario.agent_count()],
        scenario: (**scenario).clone(),
    };
    write_line(&mut w, &Line::Header(header)).map_err(io)?;
    let refs: Vec<&AgentPolicy> = ckpt.policies.iter().collect();
    simulate_with(scenario, &refs, episodes, seed, num_envs, |r| write_line(&mut w, &Line::Episode(r)).map_err(io))?;
    w.flush().map_err(io)
}

fn write_line(w: &mut impl Write, l: &Line) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, l)?;
    w.write_all(b"\n")
}

pub fn read_records(path: &Path) -> Result<(RecordHeader, Vec<EpisodeRecord>), RecordError> {
    let p = path.display().to_string();
    let f = std::fs::File::open(path).map_err(|source| RecordError::Io { path: p.clone(), source })?;
    let mut header = None;
    let mut eps = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|source| RecordError::Io { path: p.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| RecordError::Malformed { path: p.clone(), line: i + 1, msg };
        match serde_json::from_str::<Line>(&line).map_err(|e| bad(e.to_string()))? {
            Line::Header(h) if header.is_none() && eps.is_empty() => header = Some(h),
            Line::Header(_) => return Err(bad("unexpected second header".into())),
            Line::Episode(_) if header.is_none() => return Err(bad("episode before header".into())),
            Line::Episode(e) => eps.push(e),
        }
    }
    let header = header.ok_or_else(|| RecordError::Empty { path: p.clone() })?;
    if eps.is_empty() {
        return Err(RecordError::Empty { path: p });
    }
    if header.scenario.content_hash() != header.scenario_hash {
        return Err(RecordError::Malformed { path: p, line: 1, msg: "scenario hash does not match its content".into() });
    }
    Ok((header, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ActionLayout;
    use crate::ids::TechId;
    use crate::scenario::testing;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Arc<Scenario>, Checkpoint) {
        let mut cfg = testing::config(&[TechId::Ocgt, TechId::Solar], 2);
        cfg.study_years = 1;
        let s = Arc::new(Scenario::from_parts(cfg, &testing::series()).unwrap());
        let layout = ActionLayout::from_scenario(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = (0..2).map(|_| AgentPolicy::new(crate::env::obs_dim(&s), &layout, &[8], false, &mut rng)).collect();
        let ck = Checkpoint::new(&s, 0, p);
        (s, ck)
    }

    #[test]
    fn file_round_trip_matches_memory_and_is_byte_stable() {
        let (s, ck) = setup();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        simulate_to_file(&ck, "x", &s, 3, 4, 2, &a).unwrap();
        simulate_to_file(&ck, "x", &s, 3, 4, 1, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let (h, eps) = read_records(&a).unwrap();
        assert_eq!(h.episodes, 3);
        assert_eq!(eps, simulate(&ck, &s, 3, 4, 2).unwrap());
    }

    #[test]
    fn malformed_and_empty_files_report_the_line() {
        let (s, ck) = setup();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.jsonl");
        simulate_to_file(&ck, "x", &s, 2, 0, 1, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.insert(2, "{not json");
        std::fs::write(&p, lines.join("\n")).unwrap();
        assert!(matches!(read_records(&p), Err(RecordError::Malformed { line: 3, .. })));
        std::fs::write(&p, "").unwrap();
        assert!(matches!(read_records(&p), Err(RecordError::Empty { .. })));
        std::fs::write(&p, text.lines().next().unwrap()).unwrap();
        assert!(matches!(read_records(&p), Err(RecordError::Empty { .. })));
    }
}
