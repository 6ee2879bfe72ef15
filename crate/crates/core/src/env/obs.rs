//! Observation vector: fixed-order blocks, each normalized then clipped to
//! `[-1, 1]`.

use super::{CapacityTable, EnvState};
use crate::ids::{AgentId, Channel, TechId};
use crate::scenario::{Scenario, HOURS_PER_DAY};

/// `2x / max − 1`.
pub fn norm_max(x: f64, max: f64) -> f64 {
    if max > 0.0 {
        2.0 * x / max - 1.0
    } else {
        -1.0
    }
}

/// `(a − b) / (a + b)`; two zeros map to the floor.
pub fn norm_ratio(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.abs() > 0.0 {
        (a - b) / s
    } else {
        -1.0
    }
}

/// `x / nf`.
pub fn norm_reward(x: f64, nf: f64) -> f64 {
    x / nf
}

/// `2x − 1` for fractions.
pub fn norm_unit(x: f64) -> f64 {
    2.0 * x - 1.0
}

pub(crate) struct TechSets {
    pub all: Vec<TechId>,
    pub inv: Vec<TechId>,
    pub res: Vec<TechId>,
}

impl TechSets {
    pub fn new(s: &Scenario) -> Self {
        let all: Vec<TechId> = s.tech_ids();
        let inv: Vec<TechId> = s.technologies.iter().filter(|t| t.is_investable()).map(|t| t.id).collect();
        let res = inv.iter().copied().filter(|t| t.is_res()).collect();
        Self { all, inv, res }
    }
}

pub fn obs_dim(s: &Scenario) -> usize {
    let t = TechSets::new(s);
    let (a, i, r) = (t.all.len(), t.inv.len(), t.res.len());
    HOURS_PER_DAY + 2 + 2 + 1 + 1 + 1 + 1 // prices, resources, inflows, demand
        + 4 * a // capacity, existing
        + 4 * i + 2 * r // merchant, CM, CfD
        + 2 + 2 + 2 // auction margins, prices, scarcity
        + i + 1 + 3 // credits, carbon tax, calendar
        + a + i + r + i // accumulated rewards
}

fn wind_cf(cf_on: f64, cf_off: f64, has_on: bool, has_off: bool) -> f64 {
    match (has_on, has_off) {
        (true, true) => 0.5 * (cf_on + cf_off),
        (true, false) => cf_on,
        (false, true) => cf_off,
        (false, false) => 0.0,
    }
}

pub(crate) fn build(s: &Scenario, st: &EnvState, caps: &CapacityTable, nf: f64, agent: AgentId) -> Vec<f64> {
    let sets = TechSets::new(s);
    let mut o = Vec::with_capacity(obs_dim(s));
    let spy = s.spy();
    let step = st.step.min(s.total_steps() - 1);
    let y = s.year_index(step);
    let eff = s.effective_year(y);
    let day = &s.rep_days[step % spy];
    let growth = s.demand_factor(eff);
    let max_demand = s.peak_day.max_demand() * s.demand_factor(s.last_study_year());
    let horizon_year = s.effective_year(y + s.market.planning_horizon_years);
    let lt_demand = s.expected_avg_demand(horizon_year);
    let has = |t: TechId| s.tech(t).is_some();

    for p in &st.last_prices {
        o.push(norm_max(*p, s.market.voll));
    }
    let mean = |v: &[f64; HOURS_PER_DAY]| v.iter().sum::<f64>() / HOURS_PER_DAY as f64;
    o.push(norm_unit(mean(&day.cf_solar)));
    o.push(norm_unit(wind_cf(mean(&day.cf_onshore), mean(&day.cf_offshore), has(TechId::OnshoreWind), has(TechId::OffshoreWind))));
    o.push(norm_unit(s.mean_cf(TechId::Solar)));
    o.push(norm_unit(wind_cf(
        s.mean_cf(TechId::OnshoreWind),
        s.mean_cf(TechId::OffshoreWind),
        has(TechId::OnshoreWind),
        has(TechId::OffshoreWind),
    )));
    let st_demand = day.mean_demand() * growth;
    let annual_inflow = s.rep_days.iter().map(|d| d.total_inflow()).sum::<f64>() / (s.rep_days.len() * HOURS_PER_DAY) as f64;
    o.push(norm_ratio(day.total_inflow() / HOURS_PER_DAY as f64, st_demand));
    o.push(norm_ratio(annual_inflow, lt_demand));
    o.push(norm_max(st_demand, max_demand));
    o.push(norm_max(lt_demand, max_demand));

    let n_agents = s.agent_count() as f64;
    for &t in &sets.all {
        o.push(norm_ratio(caps.agent_total(agent, t), lt_demand / n_agents));
    }
    for &t in &sets.all {
        o.push(norm_ratio(caps.system_total(t), lt_demand));
    }
    let channel_block = |o: &mut Vec<f64>, ch: Channel, techs: &[TechId]| {
        for &t in techs {
            o.push(norm_ratio(caps.agent[agent][ch.index()][t.index()], caps.agent_total(agent, t)));
        }
        for &t in techs {
            o.push(norm_ratio(caps.system[ch.index()][t.index()], caps.system_total(t)));
        }
    };
    channel_block(&mut o, Channel::Existing, &sets.all);
    channel_block(&mut o, Channel::Merchant, &sets.inv);
    channel_block(&mut o, Channel::Cfd, &sets.res);
    channel_block(&mut o, Channel::Cm, &sets.inv);

    o.push(norm_ratio(st.cfd_balance.0, st.cfd_balance.1));
    o.push(norm_ratio(st.cm_balance.0, st.cm_balance.1));
    o.push(norm_max(st.last_cfd_price, s.market.cfd_price_cap));
    o.push(norm_max(st.last_cm_price, s.market.cm_price_cap));
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    o.push(norm_unit(flag(st.open_cfd.is_some() || st.cfd_scheduled.is_some())));
    o.push(norm_unit(flag(st.open_cm.is_some() || st.cm_scheduled.is_some())));
    for &t in &sets.inv {
        o.push(norm_unit(st.credits[t.index()]));
    }
    o.push(norm_max(s.carbon_tax(eff), s.market.carbon_tax_schedule.max_value()));
    o.push(norm_max((step % spy) as f64, (spy - 1) as f64));
    o.push(norm_max(y as f64, (s.total_years() - 1) as f64));
    o.push(norm_max(st.step as f64, (s.total_steps() - 1) as f64));

    let acc = &st.accumulated[agent];
    for (ch, techs) in [(Channel::Existing, &sets.all), (Channel::Merchant, &sets.inv), (Channel::Cfd, &sets.res), (Channel::Cm, &sets.inv)] {
        for &t in techs {
            o.push(norm_reward(acc[ch.index()][t.index()], nf));
        }
    }

    debug_assert_eq!(o.len(), obs_dim(s));
    for v in &mut o {
        *v = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
    }
    o
}
