//! Per-step profit of each entry channel. Hourly quantities refer to the
//! representative day; `SettleCtx::weight` scales them to the step.

use serde::{Deserialize, Serialize};

use crate::market::{Asset, ChannelTerms};

/// Cost and scaling inputs shared by the settlement functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettleCtx {
    /// Currency per MWh.
    pub opex_var: f64,
    /// tCO2 per MWh.
    pub emission_factor: f64,
    /// Currency per tCO2.
    pub carbon_tax: f64,
    /// Fixed cost of the asset for this step, currency.
    pub fixed_cost: f64,
    /// Days the representative day stands for.
    pub weight: f64,
    /// Hours over which the capacity premium accrues this step.
    pub premium_hours: f64,
    /// Reliability-option strike, currency per MWh.
    pub scarcity_price: f64,
}

impl SettleCtx {
    pub fn unit_cost(&self) -> f64 {
        self.opex_var + self.emission_factor * self.carbon_tax
    }
}

/// Decomposed cash flows of one asset for one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    /// Energy sold (or, for storage, net of energy bought), MWh.
    pub energy_mwh: f64,
    /// Income from energy at the price the channel pays.
    pub energy_revenue: f64,
    pub variable_cost: f64,
    pub fixed_cost: f64,
    pub premium: f64,
    /// Reliability-option refund paid back to consumers.
    pub option_refund: f64,
    /// Part of `energy_revenue` paid by consumers on top of the spot price
    /// (negative when spot exceeds the strike).
    pub cfd_transfer: f64,
    /// tCO2.
    pub emissions: f64,
}

impl Settlement {
    pub fn profit(&self) -> f64 {
        self.energy_revenue - self.variable_cost - self.fixed_cost + self.premium - self.option_refund
    }
}

fn spot_energy(dispatched: &[f64], prices: &[f64], ctx: &SettleCtx) -> Settlement {
    let q: f64 = dispatched.iter().sum::<f64>() * ctx.weight;
    let revenue: f64 = dispatched.iter().zip(prices).map(|(q, p)| q * p).sum::<f64>() * ctx.weight;
    Settlement {
        energy_mwh: q,
        energy_revenue: revenue,
        variable_cost: q * ctx.unit_cost(),
        fixed_cost: ctx.fixed_cost,
        emissions: q * ctx.emission_factor,
        ..Default::default()
    }
}

fn option_terms(s: &mut Settlement, prices: &[f64], premium: f64, firm_mw: f64, ctx: &SettleCtx) {
    s.premium = firm_mw * premium * ctx.premium_hours;
    s.option_refund = prices.iter().map(|p| (p - ctx.scarcity_price).max(0.0) * firm_mw).sum::<f64>() * ctx.weight;
}

/// `π·Q − (C_var + C_CO2)·Q − C_fix`.
pub fn settle_merchant(dispatched: &[f64], prices: &[f64], ctx: &SettleCtx) -> Settlement {
    spot_energy(dispatched, prices, ctx)
}

/// Output is paid at the strike whatever the spot price; the difference to
/// spot is settled with consumers.
pub fn settle_cfd(dispatched: &[f64], prices: &[f64], strike: f64, ctx: &SettleCtx) -> Settlement {
    let mut s = spot_energy(dispatched, prices, ctx);
    let spot_revenue = s.energy_revenue;
    s.energy_revenue = s.energy_mwh * strike;
    s.cfd_transfer = s.energy_revenue - spot_revenue;
    s
}

/// Merchant income plus the capacity premium on firm capacity, minus the
/// reliability-option refund `Σ_h max(π_h − strike, 0) · firm` which applies
/// whether or not the plant ran.
pub fn settle_cm(dispatched: &[f64], prices: &[f64], premium: f64, firm_mw: f64, ctx: &SettleCtx) -> Settlement {
    let mut s = spot_energy(dispatched, prices, ctx);
    option_terms(&mut s, prices, premium, firm_mw, ctx);
    s
}

/// Storage arbitrage `Σ_h π_h·(discharge_h − charge_h) − C_fix`, with the
/// capacity-market terms when the unit holds a capacity contract.
pub fn settle_ess(net_mw: &[f64], prices: &[f64], terms: &ChannelTerms, ctx: &SettleCtx) -> Settlement {
    let revenue: f64 = net_mw.iter().zip(prices).map(|(q, p)| q * p).sum::<f64>() * ctx.weight;
    let mut s = Settlement {
        energy_mwh: net_mw.iter().sum::<f64>() * ctx.weight,
        energy_revenue: revenue,
        fixed_cost: ctx.fixed_cost,
        ..Default::default()
    };
    if let ChannelTerms::Cm { premium, firm_mw } = *terms {
        option_terms(&mut s, prices, premium, firm_mw, ctx);
    }
    s
}

/// Dispatches on the asset's channel. `hourly` is dispatched energy for
/// generators and net discharge for storage.
pub fn settle_asset(asset: &Asset, hourly: &[f64], prices: &[f64], ctx: &SettleCtx) -> Settlement {
    if asset.tech.is_storage() {
        return settle_ess(hourly, prices, &asset.terms, ctx);
    }
    match asset.terms {
        ChannelTerms::Existing | ChannelTerms::Merchant => settle_merchant(hourly, prices, ctx),
        ChannelTerms::Cfd { strike } => settle_cfd(hourly, prices, strike, ctx),
        ChannelTerms::Cm { premium, firm_mw } => settle_cm(hourly, prices, premium, firm_mw, ctx),
    }
}
