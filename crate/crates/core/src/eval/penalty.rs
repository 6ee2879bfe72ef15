//! Distance from equilibrium: profitable entries left unexploited plus
//! losses on investments actually made.
//!
//! A virtual plant of the smallest investment lump enters at a decision
//! slot, pays CAPEX over construction, then earns as a price taker under the
//! episode's realized prices and its channel's settlement rules until the
//! episode ends, when its remaining life is valued with the same terminal
//! annuity the agents receive. For each channel and technology the best
//! entry slot counts.

use serde::{Deserialize, Serialize};

use crate::env::{absorbing_payment, discount_factor, StepInfo};
use crate::ids::{AgentId, Channel, TechId};
use crate::longterm::{settle_asset, SettleCtx, QTY_STEPS};
use crate::market::{marginal_bid, schedule_short_ess, Asset, ChannelTerms, EssUnit};
use crate::scenario::{cost_at_year, day_cf, Scenario, HOURS_PER_DAY};

use super::records::EpisodeRecord;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VirtualEntry {
    pub step: usize,
    pub terms: ChannelTerms,
}

/// Smallest non-zero investment lump.
pub fn virtual_size(max_invest_mw: f64) -> f64 {
    max_invest_mw / (QTY_STEPS - 1) as f64
}

/// NPV at step 0 of a `mw` plant of `tech` entering at `entry`, using the
/// realized `steps` of one episode.
pub fn virtual_plant_npv(s: &Scenario, steps: &[StepInfo], tech: TechId, mw: f64, entry: VirtualEntry) -> f64 {
    let t = s.tech(tech).expect("technology in catalog");
    let spy = s.spy();
    let r = s.market.discount_rate;
    let end = steps.len();
    let y0 = s.year_index(entry.step);
    let capex = cost_at_year(t, s.effective_year(y0) as f64).capex_per_mw() * mw;
    let n_inst = (t.construction_years as usize * spy).max(1);
    let mut npv = 0.0;
    for k in entry.step..(entry.step + n_inst).min(end) {
        npv -= discount_factor(r, k, spy) * capex / n_inst as f64;
    }
    let start = if t.construction_years == 0 { entry.step + 1 } else { (y0 as usize + t.construction_years as usize) * spy };
    let stop = (start + t.lifetime_years as usize * spy).min(end);
    let asset = Asset::new(u64::MAX, 0, tech, mw, entry.terms, 0, None);
    let (mut income, mut operated) = (0.0, 0usize);
    for k in start..stop {
        let info = &steps[k];
        let eff = s.effective_year(s.year_index(k));
        let costs = cost_at_year(t, eff as f64);
        let ctx = SettleCtx {
            opex_var: costs.opex_var,
            emission_factor: t.emission_factor,
            carbon_tax: info.carbon_tax,
            fixed_cost: costs.opex_fixed_per_mw_year * mw / spy as f64,
            weight: s.days_per_step(),
            premium_hours: s.hours_per_step(),
            scarcity_price: s.market.scarcity_price,
        };
        let hourly: [f64; HOURS_PER_DAY] = if tech.is_storage() {
            let p = mw * t.availability_mean;
            let unit = EssUnit { power_mw: p, energy_mwh: p * t.energy_per_mw(), efficiency: t.ess_efficiency };
            schedule_short_ess(&info.prices.map(|x| -x), &[unit])[0].net_mw
        } else {
            let bid = marginal_bid(t, info.carbon_tax, eff as f64);
            let cf = day_cf(&s.rep_days[info.window], tech);
            std::array::from_fn(|h| if info.prices[h] >= bid { mw * cf[h] * t.availability_mean } else { 0.0 })
        };
        let profit = settle_asset(&asset, &hourly, &info.prices, &ctx).profit();
        npv += discount_factor(r, k, spy) * profit;
        income += profit;
        operated += 1;
    }
    if operated > 0 && stop == end {
        let years_run = operated as f64 / spy as f64;
        let mean = income / (mw * years_run);
        let remaining = t.lifetime_years as f64 - years_run;
        npv += discount_factor(r, end - 1, spy) * mw * absorbing_payment(mean, r, remaining);
    }
    npv
}

/// Entry slots open to a newcomer in `ch` for `tech` during the study
/// period of this episode.
pub fn entry_slots(s: &Scenario, steps: &[StepInfo], ch: Channel, tech: TechId) -> Vec<VirtualEntry> {
    let Some(t) = s.tech(tech) else { return Vec::new() };
    if !t.is_investable() {
        return Vec::new();
    }
    let spy = s.spy();
    let first = s.warmup_years;
    let last = s.warmup_years + s.study_years;
    let feasible = |step: usize| {
        let y = s.year_index(step);
        (first..last).contains(&y) && t.construction_years < s.total_years() - y && !s.is_banned(tech, s.calendar_year(y))
    };
    let mut out = Vec::new();
    match ch {
        Channel::Existing => {}
        Channel::Merchant => {
            if s.market.merchant_enabled {
                for y in first..last {
                    let step = y as usize * spy + s.market.merchant_slot as usize;
                    if step < steps.len() && feasible(step) {
                        out.push(VirtualEntry { step, terms: ChannelTerms::Merchant });
                    }
                }
            }
        }
        Channel::Cfd | Channel::Cm => {
            if ch == Channel::Cfd && !tech.is_res() {
                return out;
            }
            for info in steps.iter().filter(|i| feasible(i.step)) {
                for a in info.auctions.iter().filter(|a| a.channel == ch) {
                    // an unfilled auction would have taken a bid at the ceiling
                    let price = if a.unfilled > 0.0 { a.ceiling } else { a.clearing_price };
                    let terms = if ch == Channel::Cfd {
                        ChannelTerms::Cfd { strike: price }
                    } else {
                        let credit = a.credits.map_or(0.0, |c| c[tech.index()]);
                        if credit <= 0.0 {
                            continue;
                        }
                        ChannelTerms::Cm { premium: price, firm_mw: virtual_size(t.max_invest_mw) * credit }
                    };
                    out.push(VirtualEntry { step: info.step, terms });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyRow {
    pub agent: AgentId,
    pub channel: Channel,
    pub tech: TechId,
    /// Best virtual-plant NPV; `None` when no entry slot existed.
    pub virtual_npv: Option<f64>,
    /// Discounted cash of the agent's own plants in this cell.
    pub realized_npv: f64,
    pub invested: bool,
    pub penalty: f64,
}

/// One row per agent, investment channel and technology.
pub fn compute_penalty(s: &Scenario, rec: &EpisodeRecord) -> Vec<PenaltyRow> {
    let spy = s.spy();
    let r = s.market.discount_rate;
    let techs: Vec<TechId> = s.technologies.iter().filter(|t| t.is_investable()).map(|t| t.id).collect();
    let mut virt = Vec::new();
    for ch in [Channel::Merchant, Channel::Cfd, Channel::Cm] {
        for &t in &techs {
            let mw = virtual_size(s.tech(t).expect("catalog").max_invest_mw);
            let best = entry_slots(s, &rec.steps, ch, t)
                .into_iter()
                .map(|e| virtual_plant_npv(s, &rec.steps, t, mw, e))
                .fold(None, |b: Option<f64>, v| Some(b.map_or(v, |b| b.max(v))));
            virt.push((ch, t, best));
        }
    }
    let mut rows = Vec::new();
    for agent in 0..s.agent_count() {
        for &(ch, t, v) in &virt {
            if ch == Channel::Cfd && !t.is_res() {
                continue;
            }
            let realized: f64 =
                rec.steps.iter().map(|i| discount_factor(r, i.step, spy) * i.ledgers[agent].cell(ch, t)).sum();
            let invested =
                rec.steps.iter().flat_map(|i| &i.investments).any(|x| x.agent == agent && x.channel == ch && x.tech == t);
            let loss = if invested { (-realized).max(0.0) } else { 0.0 };
            rows.push(PenaltyRow {
                agent,
                channel: ch,
                tech: t,
                virtual_npv: v,
                realized_npv: realized,
                invested,
                penalty: v.unwrap_or(0.0).max(0.0) + loss,
            });
        }
    }
    rows
}

/// Total penalty per agent.
pub fn penalty_by_agent(rows: &[PenaltyRow], n_agents: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_agents];
    for r in rows {
        out[r.agent] += r.penalty;
    }
    out
}
