//! Auction triggers and investment commitments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::QTY_STEPS;
use crate::ids::{AgentId, Channel, TechId};
use crate::market::{capacity_credits, AdequacyReport, Asset, ChannelTerms, Resource};
use crate::scenario::{cost_at_year, Scenario, Technology};

#[derive(Debug, Error, PartialEq)]
pub enum CommitError {
    #[error("agent {agent}: {tech} is not in the catalog")]
    UnknownTech { agent: AgentId, tech: TechId },
    #[error("agent {agent}: {mw} MW of {tech} is off the investment grid")]
    OffGrid { agent: AgentId, tech: TechId, mw: f64 },
    #[error("agent {agent}: {mw} MW of {tech} exceeds the cap of {cap} MW")]
    OverCap { agent: AgentId, tech: TechId, mw: f64, cap: f64 },
}

/// CAPEX of one investment, paid in equal installments over construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapexPlan {
    pub asset_id: u64,
    pub owner: AgentId,
    pub tech: TechId,
    pub channel: Channel,
    pub total: f64,
    pub first_step: usize,
    pub installments: usize,
}

impl CapexPlan {
    pub fn per_step(&self) -> f64 {
        self.total / self.installments as f64
    }

    /// Installment due at `step`, zero outside the payment window.
    pub fn due_at(&self, step: usize) -> f64 {
        if step >= self.first_step && step < self.first_step + self.installments {
            self.per_step()
        } else {
            0.0
        }
    }
}

pub fn is_on_grid(mw: f64, cap: f64) -> bool {
    if cap <= 0.0 {
        return mw == 0.0;
    }
    let x = mw / cap * (QTY_STEPS - 1) as f64;
    (x - x.round()).abs() < 1e-9 && x.round() >= 0.0 && x.round() <= (QTY_STEPS - 1) as f64
}

/// Places one investment into the construction pipeline.
pub fn commit_investment(
    next_id: &mut u64,
    agent: AgentId,
    tech: &Technology,
    mw: f64,
    terms: ChannelTerms,
    step: usize,
    calendar_year: i32,
    steps_per_year: usize,
) -> Result<(Asset, CapexPlan), CommitError> {
    if mw > tech.max_invest_mw + 1e-9 {
        return Err(CommitError::OverCap { agent, tech: tech.id, mw, cap: tech.max_invest_mw });
    }
    if !is_on_grid(mw, tech.max_invest_mw) || mw <= 0.0 {
        return Err(CommitError::OffGrid { agent, tech: tech.id, mw });
    }
    let id = *next_id;
    *next_id += 1;
    let mut asset = Asset::new(id, agent, tech.id, mw, terms, tech.construction_years, Some(tech.lifetime_years));
    asset.committed_step = Some(step);
    let total = cost_at_year(tech, calendar_year as f64).capex_per_mw() * mw;
    let plan = CapexPlan {
        asset_id: id,
        owner: agent,
        tech: tech.id,
        channel: terms.channel(),
        total,
        first_step: step,
        installments: (tech.construction_years as usize * steps_per_year).max(1),
    };
    Ok((asset, plan))
}

/// Merchant investments of one agent. Zero entries are skipped; any entry
/// off the grid or above the cap is an error and nothing is committed.
pub fn commit_merchant(
    next_id: &mut u64,
    agent: AgentId,
    decisions: &[(TechId, f64)],
    scenario: &Scenario,
    step: usize,
    calendar_year: i32,
) -> Result<Vec<(Asset, CapexPlan)>, CommitError> {
    let mut staged_id = *next_id;
    let mut out = Vec::new();
    for &(id, mw) in decisions {
        if mw == 0.0 {
            continue;
        }
        let tech = scenario.tech(id).ok_or(CommitError::UnknownTech { agent, tech: id })?;
        out.push(commit_investment(
            &mut staged_id,
            agent,
            tech,
            mw,
            ChannelTerms::Merchant,
            step,
            calendar_year,
            scenario.spy(),
        )?);
    }
    *next_id = staged_id;
    Ok(out)
}

/// Expected average MW a plant of `mw` contributes toward the RES target.
pub fn cfd_contribution(scenario: &Scenario, tech: &Technology, mw: f64) -> f64 {
    mw * scenario.mean_cf(tech.id) * tech.availability_mean
}

/// Renewable shortfall, in expected average MW, at `year_index` plus the
/// planning horizon: target share of expected demand minus the expected
/// output of renewables operating by then.
pub fn res_deficit<'a>(assets: impl IntoIterator<Item = &'a Asset>, scenario: &Scenario, year_index: u32) -> f64 {
    let h = scenario.market.planning_horizon_years;
    let year = scenario.effective_year(year_index + h);
    let target = scenario.res_target(year) * scenario.expected_avg_demand(year);
    let output: f64 = assets
        .into_iter()
        .filter(|a| a.tech.is_res() && a.operating_in(h))
        .filter_map(|a| scenario.tech(a.tech).map(|t| cfd_contribution(scenario, t, a.capacity_mw)))
        .sum();
    target - output
}

/// Firm-capacity shortfall at the critical hour of the peak day, grown to
/// `year_index` plus the planning horizon, counting assets operating by
/// then. Returns the deficit (positive means short) and the full report.
pub fn adequacy_deficit<'a>(
    assets: impl IntoIterator<Item = &'a Asset>,
    scenario: &Scenario,
    year_index: u32,
) -> (f64, AdequacyReport) {
    let h = scenario.market.planning_horizon_years;
    let year = scenario.effective_year(year_index + h);
    let resources: Vec<Resource> = assets
        .into_iter()
        .filter(|a| a.operating_in(h))
        .map(|a| Resource { tech: a.tech, capacity_mw: a.capacity_mw })
        .collect();
    let report = capacity_credits(&resources, scenario, scenario.demand_factor(year));
    (-report.adequacy_margin, report)
}
