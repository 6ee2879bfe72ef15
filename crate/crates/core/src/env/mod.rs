//! Multi-agent environment: one step is one representative day standing for
//! a bimester (by default), followed by the investment slot of that step.

mod layout;
mod obs;
mod reward;

pub use layout::{decode_actions, ActionDim, ActionLayout, ActionMask, AgentDecision, DimKind};
pub use obs::{norm_max, norm_ratio, norm_reward, norm_unit, obs_dim};
pub use reward::{absorbing_payment, compute_reward, discount_factor, normalization_factor, CashFlowLedger};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::ids::{AgentId, Channel, TechId};
use crate::longterm::{
    adequacy_deficit, cfd_contribution, commit_investment, commit_merchant, res_deficit, run_auction, settle_asset,
    AuctionBid, Award, CapexPlan, CommitError, SettleCtx,
};
use crate::market::{
    available_mw, clear_hour, marginal_bid, schedule_mid_ess, schedule_short_ess, system_margins, AdequacyReport, Asset,
    Bid, ChannelTerms, EssUnit,
};
use crate::scenario::{cost_at_year, AgentRole, Scenario, HOURS_PER_DAY};

const T: usize = TechId::COUNT;
const C: usize = Channel::COUNT;
const H: usize = HOURS_PER_DAY;

/// Starting state of charge of mid-term storage, as a fraction.
const INITIAL_SOC: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("agent {agent}: index {index} in dimension {dim} is masked")]
    MaskedAction { agent: AgentId, dim: String, index: usize },
    #[error("agent {agent}: index {index} out of range in dimension {dim}")]
    BadIndex { agent: AgentId, dim: String, index: usize },
    #[error("expected {expected} action vectors (or dimensions), got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error(transparent)]
    Commit(#[from] CommitError),
    #[error("episode is over; call reset")]
    Done,
}

/// What every agent sees after `reset` or `step`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub obs: Vec<Vec<f64>>,
    pub masks: Vec<ActionMask>,
    pub rewards: Vec<f64>,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuctionRecord {
    pub channel: Channel,
    pub target: f64,
    pub ceiling: f64,
    pub clearing_price: f64,
    pub procured: f64,
    pub unfilled: f64,
    pub awards: Vec<Award>,
    /// Capacity credits used to rate bids, CM only.
    pub credits: Option<[f64; T]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvestmentRecord {
    pub agent: AgentId,
    pub tech: TechId,
    pub channel: Channel,
    pub mw: f64,
    pub asset_id: u64,
    pub capex_total: f64,
    /// Strike for CfD, premium for CM, zero for merchant.
    pub price: f64,
    pub firm_mw: f64,
    pub step: usize,
}

/// Everything measurable about one step, for evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: usize,
    pub calendar_year: i32,
    pub window: usize,
    /// Days the step stands for.
    pub weight: f64,
    pub prices: [f64; H],
    pub demand: [f64; H],
    pub lost_load: [f64; H],
    pub ess_net: [f64; H],
    /// Served energy over the step, MWh.
    pub served_mwh: f64,
    pub lost_load_mwh: f64,
    pub generation_mwh: [f64; T],
    pub emissions_t: f64,
    pub carbon_tax: f64,
    pub spot_payments: f64,
    pub cm_premiums: f64,
    pub option_refunds: f64,
    pub cfd_transfers: f64,
    pub ess_curtailed_mwh: f64,
    pub ess_spill_mwh: f64,
    pub auctions: Vec<AuctionRecord>,
    pub investments: Vec<InvestmentRecord>,
    /// Installed plus under construction, by channel and technology.
    pub system_capacity: [[f64; T]; C],
    /// Installed plus under construction per agent, by technology.
    pub agent_capacity: Vec<[f64; T]>,
    pub ledgers: Vec<CashFlowLedger>,
    pub rewards: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct OpenAuction {
    target: f64,
    report: Option<AdequacyReport>,
}

/// Capacity by channel and technology, installed plus under construction.
#[derive(Clone, Debug)]
pub(crate) struct CapacityTable {
    pub agent: Vec<[[f64; T]; C]>,
    pub system: [[f64; T]; C],
}

impl CapacityTable {
    fn build(assets: &[Asset], n_agents: usize) -> Self {
        let mut agent = vec![[[0.0; T]; C]; n_agents];
        let mut system = [[0.0; T]; C];
        for a in assets {
            let (c, t) = (a.channel().index(), a.tech.index());
            agent[a.owner][c][t] += a.capacity_mw;
            system[c][t] += a.capacity_mw;
        }
        Self { agent, system }
    }

    pub fn agent_total(&self, agent: AgentId, t: TechId) -> f64 {
        self.agent[agent].iter().map(|r| r[t.index()]).sum()
    }

    pub fn system_total(&self, t: TechId) -> f64 {
        self.system.iter().map(|r| r[t.index()]).sum()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct EnvState {
    pub step: usize,
    rng: ChaCha8Rng,
    assets: Vec<Asset>,
    capex: Vec<CapexPlan>,
    next_id: u64,
    pub cfd_scheduled: Option<u32>,
    pub cm_scheduled: Option<u32>,
    pub open_cfd: Option<OpenAuction>,
    pub open_cm: Option<OpenAuction>,
    pub last_prices: [f64; H],
    pub last_cfd_price: f64,
    pub last_cm_price: f64,
    /// (expected supply, requirement) behind each auction trigger.
    pub cfd_balance: (f64, f64),
    pub cm_balance: (f64, f64),
    pub credits: [f64; T],
    pub accumulated: Vec<[[f64; T]; C]>,
    income: [[f64; T]; C],
    mw_years: [[f64; T]; C],
    soc_targets: Vec<f64>,
    done: bool,
}

pub struct Env {
    scenario: Arc<Scenario>,
    layout: ActionLayout,
    nf: f64,
    st: EnvState,
}

impl Env {
    pub fn new(scenario: Arc<Scenario>) -> Self {
        let layout = ActionLayout::from_scenario(&scenario);
        let nf = normalization_factor(scenario.market.voll, scenario.total_years() as f64);
        let st = Self::initial_state(&scenario, scenario.seed);
        Self { scenario, layout, nf, st }
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn layout(&self) -> &ActionLayout {
        &self.layout
    }

    pub fn obs_dim(&self) -> usize {
        obs_dim(&self.scenario)
    }

    pub fn n_agents(&self) -> usize {
        self.scenario.agent_count()
    }

    pub fn normalization(&self) -> f64 {
        self.nf
    }

    pub fn current_step(&self) -> usize {
        self.st.step
    }

    pub fn assets(&self) -> &[Asset] {
        &self.st.assets
    }

    fn initial_state(s: &Scenario, seed: u64) -> EnvState {
        let mut assets = Vec::new();
        let mut next_id = 0;
        for (i, a) in s.agents.iter().enumerate() {
            for b in &a.portfolio {
                let mut asset = Asset::new(next_id, i, b.tech, b.capacity_mw, ChannelTerms::Existing, 0, b.remaining_life_years);
                if let Some(t) = s.tech(b.tech) {
                    if b.tech == TechId::EssMid {
                        asset.soc_mwh = INITIAL_SOC * b.capacity_mw * t.energy_per_mw();
                    }
                }
                assets.push(asset);
                next_id += 1;
            }
        }
        let n = s.agent_count();
        EnvState {
            step: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            assets,
            capex: Vec::new(),
            next_id,
            cfd_scheduled: None,
            cm_scheduled: None,
            open_cfd: None,
            open_cm: None,
            last_prices: [0.0; H],
            last_cfd_price: 0.0,
            last_cm_price: 0.0,
            cfd_balance: (0.0, 0.0),
            cm_balance: (0.0, 0.0),
            credits: [0.0; T],
            accumulated: vec![[[0.0; T]; C]; n],
            income: [[0.0; T]; C],
            mw_years: [[0.0; T]; C],
            soc_targets: vec![INITIAL_SOC; n],
            done: false,
        }
    }

    pub fn reset(&mut self, seed: u64) -> StepOutcome {
        self.st = Self::initial_state(&self.scenario, seed);
        self.prepare();
        let n = self.n_agents();
        self.outcome(vec![0.0; n])
    }

    /// Masks for the step about to be taken.
    pub fn masks(&self) -> Vec<ActionMask> {
        (0..self.n_agents()).map(|i| self.mask_for(i)).collect()
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        let caps = CapacityTable::build(&self.st.assets, self.n_agents());
        (0..self.n_agents()).map(|i| obs::build(&self.scenario, &self.st, &caps, self.nf, i)).collect()
    }

    fn outcome(&self, rewards: Vec<f64>) -> StepOutcome {
        let done = self.st.done;
        let masks = if done { vec![ActionMask::none(&self.layout); self.n_agents()] } else { self.masks() };
        StepOutcome { obs: self.observations(), masks, rewards, done }
    }

    fn owns_mid_ess(&self, agent: AgentId) -> bool {
        self.st.assets.iter().any(|a| a.owner == agent && a.tech == TechId::EssMid && a.is_operating())
    }

    /// Whether `agent` may put money into `t` this step at all.
    fn can_invest(&self, agent: AgentId, t: TechId) -> bool {
        let s = &*self.scenario;
        let spec = s.agent(agent);
        if spec.role == AgentRole::StorageOperator || !spec.technologies.contains(&t) {
            return false;
        }
        let y = s.year_index(self.st.step);
        let Some(tech) = s.tech(t) else { return false };
        let remaining = s.total_years() - y;
        tech.is_investable() && !s.is_banned(t, s.calendar_year(y)) && tech.construction_years < remaining
    }

    fn mask_for(&self, agent: AgentId) -> ActionMask {
        let s = &*self.scenario;
        let mut m = ActionMask::none(&self.layout);
        let slot = (self.st.step % s.spy()) as u32;
        let merchant_open = s.market.merchant_enabled && slot == s.market.merchant_slot;
        let cm_credit = |t: TechId| {
            self.st.open_cm.as_ref().and_then(|a| a.report.as_ref()).map_or(0.0, |r| r.credit(t))
        };
        let mut live_qty = [[false; T]; 3];
        for (k, d) in self.layout.dims.iter().enumerate() {
            let live = match d.kind {
                DimKind::Merchant(t) => merchant_open && self.can_invest(agent, t),
                DimKind::CfdQty(t) => {
                    let l = self.st.open_cfd.is_some() && self.can_invest(agent, t);
                    live_qty[1][t.index()] = l;
                    l
                }
                DimKind::CmQty(t) => {
                    let l = self.st.open_cm.is_some() && self.can_invest(agent, t) && cm_credit(t) > 0.0;
                    live_qty[2][t.index()] = l;
                    l
                }
                DimKind::CfdPrice(t) => live_qty[1][t.index()],
                DimKind::CmPrice(t) => live_qty[2][t.index()],
                DimKind::Soc => self.owns_mid_ess(agent),
            };
            m.set_live(&self.layout, k, live);
        }
        m
    }

    /// Opens auctions scheduled for this step's slot and refreshes the
    /// planning signals seen by agents.
    fn prepare(&mut self) {
        let s = Arc::clone(&self.scenario);
        let y = s.year_index(self.st.step);
        let slot = (self.st.step % s.spy()) as u32;
        if slot == 0 {
            self.refresh_balances(y);
        }
        if s.market.cm_enabled && slot == s.market.cm_slot && self.st.cm_scheduled == Some(y) {
            self.st.cm_scheduled = None;
            let (deficit, report) = adequacy_deficit(&self.st.assets, &s, y);
            self.st.credits = report.credits;
            self.st.open_cm = (deficit > 0.0).then(|| OpenAuction { target: deficit, report: Some(report) });
        }
        if s.market.cfd_enabled && slot == s.market.cfd_slot && self.st.cfd_scheduled == Some(y) {
            self.st.cfd_scheduled = None;
            let deficit = res_deficit(&self.st.assets, &s, y);
            self.st.open_cfd = (deficit > 0.0).then_some(OpenAuction { target: deficit, report: None });
        }
    }

    fn refresh_balances(&mut self, y: u32) {
        let s = &*self.scenario;
        let hy = s.effective_year(y + s.market.planning_horizon_years);
        let required = s.res_target(hy) * s.expected_avg_demand(hy);
        self.st.cfd_balance = (required - res_deficit(&self.st.assets, s, y), required);
        let (deficit, report) = adequacy_deficit(&self.st.assets, s, y);
        let need =
            s.peak_day.demand[report.critical_hour] * s.demand_factor(hy) * (1.0 + s.market.cm_demand_margin);
        self.st.cm_balance = (need - deficit, need);
        self.st.credits = report.credits;
    }

    fn validate(&self, actions: &[Vec<usize>]) -> Result<Vec<AgentDecision>, EnvError> {
        let n = self.n_agents();
        if actions.len() != n {
            return Err(EnvError::WrongArity { expected: n, got: actions.len() });
        }
        let offsets = self.layout.offsets();
        let mut out = Vec::with_capacity(n);
        for (agent, idx) in actions.iter().enumerate() {
            if idx.len() != self.layout.len() {
                return Err(EnvError::WrongArity { expected: self.layout.len(), got: idx.len() });
            }
            let mask = self.mask_for(agent);
            for (k, &i) in idx.iter().enumerate() {
                let dim = &self.layout.dims[k];
                if i >= dim.steps {
                    return Err(EnvError::BadIndex { agent, dim: dim.kind.to_string(), index: i });
                }
                if !mask.is_allowed(offsets[k], i) {
                    return Err(EnvError::MaskedAction { agent, dim: dim.kind.to_string(), index: i });
                }
            }
            let d = decode_actions(&self.layout, &self.scenario, idx).map_err(|(k, i)| EnvError::BadIndex {
                agent,
                dim: self.layout.dims[k].kind.to_string(),
                index: i,
            })?;
            out.push(d);
        }
        Ok(out)
    }

    pub fn step(&mut self, actions: &[Vec<usize>]) -> Result<(StepOutcome, StepInfo), EnvError> {
        if self.st.done {
            return Err(EnvError::Done);
        }
        let decisions = self.validate(actions)?;
        let s = Arc::clone(&self.scenario);
        let n = s.agent_count();
        let step = self.st.step;
        let spy = s.spy();
        let y = s.year_index(step);
        let eff = s.effective_year(y);
        let window = step % spy;
        let day = &s.rep_days[window];
        let growth = s.demand_factor(eff);
        let demand: [f64; H] = day.demand.map(|d| d * growth);
        let tax = s.carbon_tax(eff);
        let weight = s.days_per_step();

        for (i, d) in decisions.iter().enumerate() {
            if self.owns_mid_ess(i) {
                self.st.soc_targets[i] = d.soc_target;
            }
        }

        // availability
        for a in self.st.assets.iter_mut().filter(|a| a.is_operating()) {
            let tech = s.tech(a.tech).expect("asset technology in catalog");
            a.availability_draw = tech.sample_availability(&mut self.st.rng);
        }

        // storage
        let mut margins = system_margins(&self.st.assets, day, &demand);
        let mut ess_net: Vec<(usize, [f64; H])> = Vec::new();
        let short: Vec<usize> =
            (0..self.st.assets.len()).filter(|&k| self.st.assets[k].is_operating() && self.st.assets[k].tech == TechId::EssShort).collect();
        let units: Vec<EssUnit> = short
            .iter()
            .map(|&k| {
                let a = &self.st.assets[k];
                let t = s.tech(a.tech).expect("catalog");
                let p = a.capacity_mw * a.availability_draw;
                EssUnit { power_mw: p, energy_mwh: p * t.energy_per_mw(), efficiency: t.ess_efficiency }
            })
            .collect();
        for (k, sch) in short.iter().zip(schedule_short_ess(&margins, &units)) {
            for h in 0..H {
                margins[h] += sch.net_mw[h];
            }
            ess_net.push((*k, sch.net_mw));
        }
        let mid_cap: f64 =
            self.st.assets.iter().filter(|a| a.is_operating() && a.tech == TechId::EssMid).map(|a| a.capacity_mw).sum();
        let mut spill = 0.0;
        for k in 0..self.st.assets.len() {
            let a = &self.st.assets[k];
            if !(a.is_operating() && a.tech == TechId::EssMid) {
                continue;
            }
            let t = s.tech(a.tech).expect("catalog");
            let share = a.capacity_mw / mid_cap;
            let inflow = day.hydro_inflow.map(|v| v * share);
            let unit = EssUnit {
                power_mw: a.capacity_mw * a.availability_draw,
                energy_mwh: a.capacity_mw * t.energy_per_mw(),
                efficiency: t.ess_efficiency,
            };
            let sch = schedule_mid_ess(&margins, &unit, a.soc_mwh, &inflow, self.st.soc_targets[a.owner]);
            for h in 0..H {
                margins[h] += sch.net_mw[h];
            }
            spill += sch.spill_mwh * weight;
            self.st.assets[k].soc_mwh = sch.soc_end;
            ess_net.push((k, sch.net_mw));
        }

        // storage cannot deliver more than demand in any hour
        let mut curtailed = 0.0;
        let mut total_ess = [0.0; H];
        for h in 0..H {
            let dis: f64 = ess_net.iter().map(|e| e.1[h].max(0.0)).sum();
            let chg: f64 = ess_net.iter().map(|e| (-e.1[h]).max(0.0)).sum();
            if dis - chg > demand[h] && dis > 0.0 {
                let f = (demand[h] + chg) / dis;
                curtailed += (dis - chg - demand[h]) * weight;
                for e in ess_net.iter_mut() {
                    if e.1[h] > 0.0 {
                        e.1[h] *= f;
                    }
                }
            }
            total_ess[h] = ess_net.iter().map(|e| e.1[h]).sum();
        }

        // energy market
        let gens: Vec<usize> = (0..self.st.assets.len())
            .filter(|&k| self.st.assets[k].is_operating() && !self.st.assets[k].tech.is_storage())
            .collect();
        let offer: Vec<f64> = gens
            .iter()
            .map(|&k| marginal_bid(s.tech(self.st.assets[k].tech).expect("catalog"), tax, eff as f64))
            .collect();
        let mut dispatched = vec![[0.0; H]; gens.len()];
        let mut prices = [0.0; H];
        let mut lost = [0.0; H];
        for h in 0..H {
            let bids: Vec<Bid> = gens
                .iter()
                .zip(&offer)
                .map(|(&k, &p)| Bid::new(available_mw(&self.st.assets[k], day, h), p))
                .collect();
            let c = clear_hour(&bids, demand[h] - total_ess[h], s.market.voll);
            prices[h] = c.price;
            lost[h] = c.lost_load;
            for (g, q) in c.dispatched.iter().enumerate() {
                dispatched[g][h] = *q;
            }
        }

        // settlement
        let mut ledgers = vec![CashFlowLedger::default(); n];
        let mut info_gen = [0.0; T];
        let (mut emissions, mut premiums, mut refunds, mut transfers) = (0.0, 0.0, 0.0, 0.0);
        let mut hourly_of = vec![None; self.st.assets.len()];
        for (g, &k) in gens.iter().enumerate() {
            hourly_of[k] = Some(dispatched[g]);
        }
        for (k, net) in &ess_net {
            hourly_of[*k] = Some(*net);
        }
        for (k, a) in self.st.assets.iter().enumerate() {
            let Some(hourly) = hourly_of[k] else { continue };
            let tech = s.tech(a.tech).expect("catalog");
            let costs = cost_at_year(tech, eff as f64);
            let ctx = SettleCtx {
                opex_var: costs.opex_var,
                emission_factor: tech.emission_factor,
                carbon_tax: tax,
                fixed_cost: costs.opex_fixed_per_mw_year * a.capacity_mw / spy as f64,
                weight,
                premium_hours: s.hours_per_step(),
                scarcity_price: s.market.scarcity_price,
            };
            let r = settle_asset(a, &hourly, &prices, &ctx);
            let (c, t) = (a.channel(), a.tech);
            ledgers[a.owner].add_profit(c, t, r.profit());
            self.st.income[c.index()][t.index()] += r.profit();
            self.st.mw_years[c.index()][t.index()] += a.capacity_mw / spy as f64;
            if !t.is_storage() {
                info_gen[t.index()] += r.energy_mwh;
            }
            emissions += r.emissions;
            premiums += r.premium;
            refunds += r.option_refund;
            transfers += r.cfd_transfer;
        }
        let served: f64 = (0..H).map(|h| demand[h] - lost[h]).sum::<f64>() * weight;
        let spot: f64 = (0..H).map(|h| prices[h] * (demand[h] - lost[h])).sum::<f64>() * weight;

        // investment slot
        let mut investments = Vec::new();
        let mut auctions = Vec::new();
        let slot = window as u32;
        let mut new_plans = Vec::new();
        if s.market.merchant_enabled && slot == s.market.merchant_slot {
            for (i, d) in decisions.iter().enumerate() {
                for (asset, plan) in commit_merchant(&mut self.st.next_id, i, &d.merchant, &s, step, eff)? {
                    investments.push(record(&asset, &plan, 0.0, 0.0, step));
                    self.st.assets.push(asset);
                    new_plans.push(plan);
                }
            }
        }
        if let Some(open) = self.st.open_cm.take() {
            let report = open.report.expect("CM auction carries its credits");
            let bids: Vec<AuctionBid> = decisions
                .iter()
                .enumerate()
                .flat_map(|(i, d)| d.cm.iter().map(move |&(t, q, p)| (i, t, q, p)))
                .filter(|x| x.2 > 0.0)
                .map(|(i, t, q, p)| AuctionBid { agent: i, tech: t, quantity_mw: q, contribution: q * report.credit(t), price: p })
                .collect();
            let res = run_auction(&bids, open.target, s.market.cm_price_cap, s.market.pricing_rule);
            for aw in &res.awards {
                let tech = s.tech(aw.tech).expect("catalog");
                let terms = ChannelTerms::Cm { premium: aw.price, firm_mw: aw.contribution };
                let (asset, plan) = commit_investment(&mut self.st.next_id, aw.agent, tech, aw.quantity_mw, terms, step, eff, spy)?;
                investments.push(record(&asset, &plan, aw.price, aw.contribution, step));
                self.st.assets.push(asset);
                new_plans.push(plan);
            }
            if !res.awards.is_empty() {
                self.st.last_cm_price = res.clearing_price;
            }
            auctions.push(AuctionRecord {
                channel: Channel::Cm,
                target: open.target,
                ceiling: s.market.cm_price_cap,
                clearing_price: res.clearing_price,
                procured: res.procured,
                unfilled: res.unfilled,
                awards: res.awards,
                credits: Some(report.credits),
            });
        }
        if let Some(open) = self.st.open_cfd.take() {
            let bids: Vec<AuctionBid> = decisions
                .iter()
                .enumerate()
                .flat_map(|(i, d)| d.cfd.iter().map(move |&(t, q, p)| (i, t, q, p)))
                .filter(|x| x.2 > 0.0)
                .map(|(i, t, q, p)| AuctionBid {
                    agent: i,
                    tech: t,
                    quantity_mw: q,
                    contribution: cfd_contribution(&s, s.tech(t).expect("catalog"), q),
                    price: p,
                })
                .collect();
            let res = run_auction(&bids, open.target, s.market.cfd_price_cap, s.market.pricing_rule);
            for aw in &res.awards {
                let tech = s.tech(aw.tech).expect("catalog");
                let terms = ChannelTerms::Cfd { strike: aw.price };
                let (asset, plan) = commit_investment(&mut self.st.next_id, aw.agent, tech, aw.quantity_mw, terms, step, eff, spy)?;
                investments.push(record(&asset, &plan, aw.price, 0.0, step));
                self.st.assets.push(asset);
                new_plans.push(plan);
            }
            if !res.awards.is_empty() {
                self.st.last_cfd_price = res.clearing_price;
            }
            auctions.push(AuctionRecord {
                channel: Channel::Cfd,
                target: open.target,
                ceiling: s.market.cfd_price_cap,
                clearing_price: res.clearing_price,
                procured: res.procured,
                unfilled: res.unfilled,
                awards: res.awards,
                credits: None,
            });
        }
        self.st.capex.extend(new_plans);
        for p in &self.st.capex {
            let due = p.due_at(step);
            if due != 0.0 {
                ledgers[p.owner].add_investment(p.channel, p.tech, due);
            }
        }
        self.st.capex.retain(|p| p.first_step + p.installments > step + 1);

        // year end: triggers, then aging
        if window == spy - 1 {
            if s.market.cfd_enabled && res_deficit(&self.st.assets, &s, y) > 0.0 {
                self.st.cfd_scheduled = Some(y + 1);
            }
            if s.market.cm_enabled && adequacy_deficit(&self.st.assets, &s, y).0 > 0.0 {
                self.st.cm_scheduled = Some(y + 1);
            }
            let warmup = s.is_warmup(y);
            for a in self.st.assets.iter_mut() {
                if a.is_operating() {
                    if warmup && a.channel() == Channel::Existing {
                        continue;
                    }
                    if let Some(l) = a.remaining_life_years.as_mut() {
                        *l = l.saturating_sub(1);
                    }
                } else {
                    a.years_to_operation -= 1;
                }
            }
            self.st.assets.retain(|a| a.remaining_life_years != Some(0));
        }

        // terminal value of remaining life
        if step + 1 == s.total_steps() {
            let r = s.market.discount_rate;
            for a in &self.st.assets {
                let Some(life) = a.remaining_life_years else { continue };
                let (c, t) = (a.channel().index(), a.tech.index());
                let mean = if self.st.mw_years[c][t] > 0.0 { self.st.income[c][t] / self.st.mw_years[c][t] } else { 0.0 };
                ledgers[a.owner].absorbing[c][t] += a.capacity_mw * absorbing_payment(mean, r, life as f64);
            }
        }

        let rewards: Vec<f64> =
            ledgers.iter().map(|l| compute_reward(l, step, s.market.discount_rate, spy, self.nf)).collect();
        for (i, l) in ledgers.iter().enumerate() {
            for c in Channel::ALL {
                for t in TechId::ALL {
                    self.st.accumulated[i][c.index()][t.index()] += l.cell(c, t);
                }
            }
        }

        let caps = CapacityTable::build(&self.st.assets, n);
        let info = StepInfo {
            step,
            calendar_year: s.calendar_year(y),
            window,
            weight,
            prices,
            demand,
            lost_load: lost,
            ess_net: total_ess,
            served_mwh: served,
            lost_load_mwh: lost.iter().sum::<f64>() * weight,
            generation_mwh: info_gen,
            emissions_t: emissions,
            carbon_tax: tax,
            spot_payments: spot,
            cm_premiums: premiums,
            option_refunds: refunds,
            cfd_transfers: transfers,
            ess_curtailed_mwh: curtailed,
            ess_spill_mwh: spill,
            auctions,
            investments,
            system_capacity: caps.system,
            agent_capacity: (0..n).map(|i| TechId::ALL.map(|t| caps.agent_total(i, t))).collect(),
            ledgers,
            rewards: rewards.clone(),
        };

        self.st.last_prices = prices;
        self.st.step += 1;
        self.st.done = self.st.step == s.total_steps();
        if !self.st.done {
            self.prepare();
        }
        Ok((self.outcome(rewards), info))
    }
}

fn record(a: &Asset, p: &CapexPlan, price: f64, firm_mw: f64, step: usize) -> InvestmentRecord {
    InvestmentRecord {
        agent: a.owner,
        tech: a.tech,
        channel: a.channel(),
        mw: a.capacity_mw,
        asset_id: a.id,
        capex_total: p.total,
        price,
        firm_mw,
        step,
    }
}
