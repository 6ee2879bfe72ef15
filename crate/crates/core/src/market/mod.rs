//! The equivalent short-term market: hourly merit-order clearing, storage
//! scheduling against system margins, and the adequacy/capacity-credit
//! calculation used by the capacity market.

mod adequacy;
mod asset;
mod storage;

pub use adequacy::{capacity_credits, AdequacyReport, Resource};
pub use asset::{Asset, ChannelTerms};
pub use storage::{schedule_mid_ess, schedule_short_ess, EssSchedule, EssUnit};

use serde::{Deserialize, Serialize};

use crate::scenario::{day_cf, RepresentativeDay, Technology, HOURS_PER_DAY};

/// One supply offer for one hour.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    /// MWh.
    pub quantity: f64,
    /// Currency per MWh.
    pub price: f64,
}

impl Bid {
    pub fn new(quantity: f64, price: f64) -> Self {
        Self { quantity, price }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HourlyClearing {
    pub price: f64,
    /// MWh per bid, in input order.
    pub dispatched: Vec<f64>,
    pub lost_load: f64,
    pub demand_served: f64,
}

/// Short-run offer price: variable cost plus carbon pass-through.
pub fn marginal_bid(tech: &Technology, carbon_tax: f64, year: f64) -> f64 {
    crate::scenario::cost_at_year(tech, year).opex_var + tech.emission_factor * carbon_tax
}

/// Merit-order clearing against inelastic demand valued at `voll`.
///
/// Offers priced above `voll` are never dispatched, since shedding load is
/// cheaper. Offers tied on price at the margin share the residual demand in
/// proportion to their quantities. Zero demand clears at price 0.
pub fn clear_hour(bids: &[Bid], demand: f64, voll: f64) -> HourlyClearing {
    let mut dispatched = vec![0.0; bids.len()];
    if demand <= 0.0 {
        return HourlyClearing { price: 0.0, dispatched, lost_load: 0.0, demand_served: 0.0 };
    }
    let mut order: Vec<usize> = (0..bids.len()).filter(|&i| bids[i].quantity > 0.0 && bids[i].price <= voll).collect();
    order.sort_by(|&a, &b| bids[a].price.total_cmp(&bids[b].price).then(a.cmp(&b)));

    let mut remaining = demand;
    let mut price = 0.0;
    let mut i = 0;
    while i < order.len() && remaining > 0.0 {
        let p = bids[order[i]].price;
        let mut j = i;
        let mut group = 0.0;
        while j < order.len() && bids[order[j]].price == p {
            group += bids[order[j]].quantity;
            j += 1;
        }
        let share = if group <= remaining { 1.0 } else { remaining / group };
        for &k in &order[i..j] {
            dispatched[k] = bids[k].quantity * share;
        }
        remaining = if group <= remaining { remaining - group } else { 0.0 };
        price = p;
        i = j;
    }
    let lost_load = remaining.max(0.0);
    if lost_load > 0.0 {
        price = voll;
    }
    HourlyClearing { price, dispatched, lost_load, demand_served: demand - lost_load }
}

/// Available generation capacity of one asset at hour `h`.
pub fn available_mw(asset: &Asset, day: &RepresentativeDay, h: usize) -> f64 {
    if asset.tech.is_storage() {
        return 0.0;
    }
    asset.capacity_mw * day_cf(day, asset.tech)[h] * asset.availability_draw
}

/// Hourly surplus of available generation over demand. Storage is excluded;
/// `demand` is the already-grown profile.
pub fn system_margins<'a>(
    assets: impl IntoIterator<Item = &'a Asset>,
    day: &RepresentativeDay,
    demand: &[f64; HOURS_PER_DAY],
) -> [f64; HOURS_PER_DAY] {
    let mut m = demand.map(|d| -d);
    for a in assets {
        if !a.is_operating() {
            continue;
        }
        for (h, v) in m.iter_mut().enumerate() {
            *v += available_mw(a, day, h);
        }
    }
    m
}
