//! Expected adequacy at the peak-demand day and the resulting capacity
//! credits.

use serde::{Deserialize, Serialize};

use super::storage::{schedule_short_ess, EssUnit};
use crate::ids::TechId;
use crate::scenario::{day_cf, Scenario, HOURS_PER_DAY};

/// Capacity counted in an adequacy check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub tech: TechId,
    pub capacity_mw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdequacyReport {
    /// Expected available fraction at the critical hour, by `TechId` index.
    pub credits: [f64; TechId::COUNT],
    pub critical_hour: usize,
    /// Margin at the critical hour, MW. Negative means a shortfall.
    pub adequacy_margin: f64,
    pub margins: [f64; HOURS_PER_DAY],
}

impl AdequacyReport {
    pub fn credit(&self, id: TechId) -> f64 {
        self.credits[id.index()]
    }
}

/// Dispatches expected resources against the peak day with demand scaled by
/// `demand_factor × (1 + cm_demand_margin)`. Generation counts at
/// `capacity × CF × availability_mean`; storage runs its daily cycle at
/// availability-weighted ratings.
pub fn capacity_credits(resources: &[Resource], scenario: &Scenario, demand_factor: f64) -> AdequacyReport {
    let day = &scenario.peak_day;
    let scale = demand_factor * (1.0 + scenario.market.cm_demand_margin);
    let mut margins: [f64; HOURS_PER_DAY] = day.demand.map(|d| -d * scale);

    let mut cap_by_tech = [0.0; TechId::COUNT];
    for r in resources {
        cap_by_tech[r.tech.index()] += r.capacity_mw;
    }
    for t in &scenario.technologies {
        let cap = cap_by_tech[t.id.index()];
        if t.is_storage() || cap <= 0.0 {
            continue;
        }
        let cf = day_cf(day, t.id);
        for h in 0..HOURS_PER_DAY {
            margins[h] += cap * cf[h] * t.availability_mean;
        }
    }

    let storage: Vec<_> = scenario
        .technologies
        .iter()
        .filter(|t| t.is_storage() && cap_by_tech[t.id.index()] > 0.0)
        .collect();
    let units: Vec<EssUnit> = storage
        .iter()
        .map(|t| {
            let cap = cap_by_tech[t.id.index()] * t.availability_mean;
            EssUnit { power_mw: cap, energy_mwh: cap * t.energy_per_mw(), efficiency: t.ess_efficiency }
        })
        .collect();
    let schedules = schedule_short_ess(&margins, &units);
    let mut ess_net = [[0.0; HOURS_PER_DAY]; TechId::COUNT];
    for (t, s) in storage.iter().zip(&schedules) {
        ess_net[t.id.index()] = s.net_mw;
        for h in 0..HOURS_PER_DAY {
            margins[h] += s.net_mw[h];
        }
    }

    let mut critical_hour = 0;
    for h in 1..HOURS_PER_DAY {
        if margins[h] < margins[critical_hour] {
            critical_hour = h;
        }
    }

    let mut credits = [0.0; TechId::COUNT];
    for t in &scenario.technologies {
        let i = t.id.index();
        credits[i] = if t.is_storage() {
            let cap = cap_by_tech[i];
            if cap > 0.0 {
                (ess_net[i][critical_hour] / cap).clamp(0.0, 1.0)
            } else {
                t.availability_mean
            }
        } else {
            (day_cf(day, t.id)[critical_hour] * t.availability_mean).clamp(0.0, 1.0)
        };
    }
    AdequacyReport { credits, critical_hour, adequacy_margin: margins[critical_hour], margins }
}
