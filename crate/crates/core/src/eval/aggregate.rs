//! Cross-episode aggregates and the CSV tables of an evaluation run.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

use crate::ids::{Channel, TechId};
use crate::scenario::Scenario;

use super::metrics::{compute_hhi, compute_irr, percentile};
use super::penalty::compute_penalty;
use super::records::EpisodeRecord;

pub const OUTPUT_FILES: [&str; 6] = ["hhi.csv", "penalty.csv", "irr.csv", "prices.csv", "emissions.csv", "capacity.csv"];

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("no episodes to evaluate")]
    NoEpisodes,
    #[error("episode {episode} has {got} steps, expected {expected}")]
    Ragged { episode: usize, got: usize, expected: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Consumer cost of one step per MWh served and of spot energy alone.
pub fn step_prices(info: &crate::env::StepInfo) -> (f64, f64) {
    let demand: f64 = info.demand.iter().sum::<f64>() * info.weight;
    if demand <= 0.0 {
        return (0.0, 0.0);
    }
    let system = info.spot_payments + info.cm_premiums + info.cfd_transfers - info.option_refunds;
    (info.spot_payments / demand, system / demand)
}

/// tCO2 of one step from generation and emission factors.
pub fn step_emissions(s: &Scenario, info: &crate::env::StepInfo) -> f64 {
    s.technologies.iter().map(|t| info.generation_mwh[t.id.index()] * t.emission_factor).sum()
}

/// Annual undiscounted cash of one (agent, channel, tech) cell, terminal
/// value included.
pub fn annual_flows(s: &Scenario, rec: &EpisodeRecord, agent: usize, ch: Channel, t: TechId) -> Vec<f64> {
    let mut out = vec![0.0; s.total_years() as usize];
    for info in &rec.steps {
        out[s.year_index(info.step) as usize] += info.ledgers[agent].cell(ch, t);
    }
    out
}

fn bands(v: &[f64]) -> [f64; 4] {
    [v.iter().sum::<f64>() / v.len() as f64, percentile(v, 5.0), percentile(v, 50.0), percentile(v, 95.0)]
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, AggregateError> {
    w.into_inner().map_err(|e| AggregateError::Csv(e.into_error().into()))
}

/// The six tables, rendered in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalTables {
    pub files: Vec<(&'static str, Vec<u8>)>,
}

impl EvalTables {
    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_slice())
    }

    /// Writes every table through a temporary file and a rename, so a
    /// rerun replaces earlier output.
    pub fn write(&self, dir: &Path) -> Result<(), AggregateError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| AggregateError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, bytes) in &self.files {
            let dst = dir.join(name);
            let tmp = dir.join(format!(".{name}.tmp"));
            let mut f = std::fs::File::create(&tmp).map_err(io(&tmp))?;
            f.write_all(bytes).map_err(io(&tmp))?;
            f.sync_all().map_err(io(&tmp))?;
            std::fs::rename(&tmp, &dst).map_err(io(&dst))?;
        }
        Ok(())
    }
}

pub fn evaluate_records(s: &Scenario, recs: &[EpisodeRecord]) -> Result<EvalTables, AggregateError> {
    if recs.is_empty() {
        return Err(AggregateError::NoEpisodes);
    }
    let n_steps = recs[0].steps.len();
    for r in recs {
        if r.steps.len() != n_steps {
            return Err(AggregateError::Ragged { episode: r.episode, got: r.steps.len(), expected: n_steps });
        }
    }
    let invest_channels: Vec<Channel> = [
        (Channel::Merchant, s.market.merchant_enabled),
        (Channel::Cfd, s.market.cfd_enabled),
        (Channel::Cm, s.market.cm_enabled),
    ]
    .into_iter()
    .filter_map(|(c, on)| on.then_some(c))
    .collect();

    let mut hhi = csv::Writer::from_writer(Vec::new());
    hhi.write_record(["episode", "hhi"])?;
    let mut pen = csv::Writer::from_writer(Vec::new());
    pen.write_record(["episode", "agent", "channel", "tech", "virtual_npv", "realized_npv", "invested", "penalty"])?;
    let mut irr = csv::Writer::from_writer(Vec::new());
    irr.write_record(["episode", "agent", "channel", "tech", "irr"])?;
    for r in recs {
        let h = compute_hhi(&r.final_capacity()).map(fmt).unwrap_or_default();
        hhi.write_record([r.episode.to_string(), h])?;
        for row in compute_penalty(s, r).into_iter().filter(|x| invest_channels.contains(&x.channel)) {
            pen.write_record([
                r.episode.to_string(),
                row.agent.to_string(),
                row.channel.as_str().to_string(),
                row.tech.as_str().to_string(),
                row.virtual_npv.map(fmt).unwrap_or_default(),
                fmt(row.realized_npv),
                row.invested.to_string(),
                fmt(row.penalty),
            ])?;
            if row.invested {
                let flows = annual_flows(s, r, row.agent, row.channel, row.tech);
                irr.write_record([
                    r.episode.to_string(),
                    row.agent.to_string(),
                    row.channel.as_str().to_string(),
                    row.tech.as_str().to_string(),
                    compute_irr(&flows).map(fmt).unwrap_or_default(),
                ])?;
            }
        }
    }

    let mut prices = csv::Writer::from_writer(Vec::new());
    prices.write_record(["step", "calendar_year", "spot_mean", "system_mean", "system_p5", "system_p50", "system_p95"])?;
    let mut em = csv::Writer::from_writer(Vec::new());
    em.write_record(["step", "calendar_year", "mean", "p5", "p50", "p95"])?;
    for k in 0..n_steps {
        let info0 = &recs[0].steps[k];
        let (spot, sys): (Vec<f64>, Vec<f64>) = recs.iter().map(|r| step_prices(&r.steps[k])).unzip();
        let sb = bands(&sys);
        let spot_mean = spot.iter().sum::<f64>() / spot.len() as f64;
        prices.write_record(
            [k.to_string(), info0.calendar_year.to_string()].into_iter().chain([spot_mean, sb[0], sb[1], sb[2], sb[3]].map(fmt)),
        )?;
        let e: Vec<f64> = recs.iter().map(|r| step_emissions(s, &r.steps[k])).collect();
        em.write_record([k.to_string(), info0.calendar_year.to_string()].into_iter().chain(bands(&e).map(fmt)))?;
    }

    let mut cap = csv::Writer::from_writer(Vec::new());
    cap.write_record(["year", "tech", "channel", "mean", "p5", "p50", "p95"])?;
    let mut year_end: BTreeMap<i32, usize> = BTreeMap::new();
    for (k, info) in recs[0].steps.iter().enumerate() {
        year_end.insert(info.calendar_year, k);
    }
    let channels: Vec<Channel> = std::iter::once(Channel::Existing).chain(invest_channels.iter().copied()).collect();
    for (&year, &k) in &year_end {
        for t in &s.technologies {
            for &ch in &channels {
                let v: Vec<f64> = recs.iter().map(|r| r.steps[k].system_capacity[ch.index()][t.id.index()]).collect();
                cap.write_record(
                    [year.to_string(), t.id.as_str().to_string(), ch.as_str().to_string()].into_iter().chain(bands(&v).map(fmt)),
                )?;
            }
        }
    }

    let files = vec![
        (OUTPUT_FILES[0], finish(hhi)?),
        (OUTPUT_FILES[1], finish(pen)?),
        (OUTPUT_FILES[2], finish(irr)?),
        (OUTPUT_FILES[3], finish(prices)?),
        (OUTPUT_FILES[4], finish(em)?),
        (OUTPUT_FILES[5], finish(cap)?),
    ];
    Ok(EvalTables { files })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ActionLayout;
    use crate::ippo::{AgentPolicy, Checkpoint};
    use crate::scenario::testing;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn records() -> (Arc<Scenario>, Vec<EpisodeRecord>) {
        let mut cfg = testing::config(&[TechId::Ocgt, TechId::Solar, TechId::Ccgt], 2);
        cfg.study_years = 2;
        let s = Arc::new(Scenario::from_parts(cfg, &testing::series()).unwrap());
        let layout = ActionLayout::from_scenario(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = (0..2).map(|_| AgentPolicy::new(crate::env::obs_dim(&s), &layout, &[8], true, &mut rng)).collect();
        let ck = Checkpoint::new(&s, 0, p);
        let recs = super::super::records::simulate(&ck, &s, 3, 11, 2).unwrap();
        (s, recs)
    }

    #[test]
    fn tables_have_expected_shape_and_are_reproducible() {
        let (s, recs) = records();
        let a = evaluate_records(&s, &recs).unwrap();
        let b = evaluate_records(&s, &recs).unwrap();
        assert_eq!(a, b);
        let lines = |n: &str| std::str::from_utf8(a.get(n).unwrap()).unwrap().lines().count();
        assert_eq!(lines("hhi.csv"), 1 + 3);
        assert_eq!(lines("prices.csv"), 1 + s.total_steps());
        assert_eq!(lines("emissions.csv"), 1 + s.total_steps());
        assert_eq!(lines("capacity.csv"), 1 + s.total_years() as usize * 3 * 4);
    }

    #[test]
    fn emissions_match_the_environment_and_prices_are_consistent() {
        let (s, recs) = records();
        for r in &recs {
            for i in &r.steps {
                let e = step_emissions(&s, i);
                assert!((e - i.emissions_t).abs() <= 1e-9 * e.max(1.0));
                let (spot, sys) = step_prices(i);
                assert!(spot >= 0.0 && spot <= s.market.voll + 1e-9);
                if i.cm_premiums == 0.0 && i.cfd_transfers == 0.0 && i.option_refunds == 0.0 {
                    assert_eq!(spot, sys);
                }
            }
        }
    }

    #[test]
    fn writing_replaces_previous_output() {
        let (s, recs) = records();
        let t = evaluate_records(&s, &recs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        t.write(dir.path()).unwrap();
        let first: Vec<Vec<u8>> = OUTPUT_FILES.iter().map(|n| std::fs::read(dir.path().join(n)).unwrap()).collect();
        t.write(dir.path()).unwrap();
        let second: Vec<Vec<u8>> = OUTPUT_FILES.iter().map(|n| std::fs::read(dir.path().join(n)).unwrap()).collect();
        assert_eq!(first, second);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 6);
    }
}
