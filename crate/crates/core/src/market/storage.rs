//! Greedy storage scheduling against hourly system margins.
//!
//! Schedules are per-hour net power at the grid side (positive =
//! discharge). Efficiency losses are taken on charging: drawing `c` MWh from
//! the grid stores `c × efficiency`.

use serde::{Deserialize, Serialize};

use crate::scenario::HOURS_PER_DAY;

const H: usize = HOURS_PER_DAY;
const TOL: f64 = 1e-9;

/// Ratings of one storage unit for the step, availability already applied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssUnit {
    pub power_mw: f64,
    pub energy_mwh: f64,
    pub efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssSchedule {
    /// MW, positive = discharge.
    pub net_mw: [f64; H],
    pub soc_start: f64,
    pub soc_end: f64,
    /// Inflow that could not be stored, MWh.
    pub spill_mwh: f64,
}

impl EssSchedule {
    pub fn idle(soc: f64) -> Self {
        Self { net_mw: [0.0; H], soc_start: soc, soc_end: soc, spill_mwh: 0.0 }
    }

    pub fn charged_mwh(&self) -> f64 {
        self.net_mw.iter().filter(|v| **v < 0.0).map(|v| -v).sum()
    }

    pub fn discharged_mwh(&self) -> f64 {
        self.net_mw.iter().filter(|v| **v > 0.0).sum()
    }

    /// State of charge after each hour, starting from `soc_start`, with
    /// `inflow` added and spill removed as the scheduler did.
    pub fn soc_path(&self, efficiency: f64, inflow: &[f64; H], capacity: f64) -> [f64; H] {
        let mut soc = self.soc_start;
        let mut out = [0.0; H];
        for h in 0..H {
            soc += inflow[h] + stored(self.net_mw[h], efficiency);
            soc = soc.min(capacity);
            out[h] = soc;
        }
        out
    }
}

fn stored(net: f64, eff: f64) -> f64 {
    if net < 0.0 {
        -net * eff
    } else {
        -net
    }
}

/// Charge hours first: highest margin, earliest hour on ties.
fn charge_order(margins: &[f64; H]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..H).collect();
    idx.sort_by(|&a, &b| margins[b].total_cmp(&margins[a]).then(a.cmp(&b)));
    idx
}

/// Discharge hours first: lowest margin, latest hour on ties.
fn discharge_order(margins: &[f64; H]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..H).collect();
    idx.sort_by(|&a, &b| margins[a].total_cmp(&margins[b]).then(b.cmp(&a)));
    idx
}

/// Largest stored energy a full cycle can move in one day when charge and
/// discharge may not share an hour.
fn cycle_bound(unit: &EssUnit) -> f64 {
    (1..H)
        .map(|k| (k as f64 * unit.power_mw * unit.efficiency).min((H - k) as f64 * unit.power_mw))
        .fold(0.0, f64::max)
}

/// One balanced cycle: charge `stored/η` at the best charge hours, then
/// discharge `stored` at the best remaining discharge hours.
fn base_cycle(margins: &[f64; H], unit: &EssUnit, energy: f64) -> [f64; H] {
    let mut net = [0.0; H];
    if unit.power_mw <= 0.0 || energy <= 0.0 || unit.efficiency <= 0.0 {
        return net;
    }
    let s = energy.min(cycle_bound(unit));
    let mut to_charge = s / unit.efficiency;
    let mut used = [false; H];
    for h in charge_order(margins) {
        if to_charge <= TOL {
            break;
        }
        let q = to_charge.min(unit.power_mw);
        net[h] = -q;
        used[h] = true;
        to_charge -= q;
    }
    let mut to_discharge = s;
    for h in discharge_order(margins) {
        if to_discharge <= TOL {
            break;
        }
        if used[h] {
            continue;
        }
        let q = to_discharge.min(unit.power_mw);
        net[h] = q;
        to_discharge -= q;
    }
    net
}

fn start_for_path(net: &[f64; H], eff: f64) -> f64 {
    let mut cum = 0.0;
    let mut lo: f64 = 0.0;
    for v in net {
        cum += stored(*v, eff);
        lo = lo.min(cum);
    }
    -lo
}

/// Schedules short-term storage units one after another, each against the
/// margins left by the previous ones. Each unit runs one complete cycle and
/// ends the day at its starting state of charge.
pub fn schedule_short_ess(margins: &[f64; H], units: &[EssUnit]) -> Vec<EssSchedule> {
    let mut m = *margins;
    units
        .iter()
        .map(|u| {
            let net = base_cycle(&m, u, u.energy_mwh);
            for h in 0..H {
                m[h] += net[h];
            }
            let soc = start_for_path(&net, u.efficiency);
            EssSchedule { net_mw: net, soc_start: soc, soc_end: soc, spill_mwh: 0.0 }
        })
        .collect()
}

/// Schedules a mid-term unit: a balanced base cycle, shifted by the net
/// energy needed to move `soc_start` plus inflows toward
/// `target_soc × energy`, then simulated hour by hour with state-of-charge
/// limits. Inflow beyond capacity spills. Unreachable targets end at the
/// nearest reachable state of charge.
pub fn schedule_mid_ess(
    margins: &[f64; H],
    unit: &EssUnit,
    soc_start: f64,
    inflow: &[f64; H],
    target_soc: f64,
) -> EssSchedule {
    let cap = unit.energy_mwh.max(0.0);
    let p = unit.power_mw.max(0.0);
    let eff = unit.efficiency;
    let soc0 = soc_start.clamp(0.0, cap);
    let target = target_soc.clamp(0.0, 1.0) * cap;
    if p <= 0.0 && cap <= 0.0 {
        let spill: f64 = inflow.iter().sum();
        return EssSchedule { net_mw: [0.0; H], soc_start: soc0, soc_end: soc0, spill_mwh: spill + (soc_start - soc0).max(0.0) };
    }

    let mut net = base_cycle(margins, unit, cap);
    let natural_end = soc0 + inflow.iter().sum::<f64>();
    let delta = target - natural_end;
    if delta > TOL {
        let mut need = delta / eff;
        for h in charge_order(margins) {
            let room = net[h] + p;
            let q = need.min(room).max(0.0);
            net[h] -= q;
            need -= q;
            if need <= TOL {
                break;
            }
        }
    } else if delta < -TOL {
        let mut need = -delta;
        for h in discharge_order(margins) {
            let room = p - net[h];
            let q = need.min(room).max(0.0);
            net[h] += q;
            need -= q;
            if need <= TOL {
                break;
            }
        }
    }

    let (mut path, _) = simulate(&mut net, soc0, inflow, cap, eff);

    // Close the remaining gap to the target from the last hour backward.
    let mut gap = target - path[H - 1];
    if gap > TOL {
        for h in (0..H).rev() {
            let headroom = path[h..].iter().fold(f64::INFINITY, |a, v| a.min(cap - v));
            let q = (gap / eff).min(net[h] + p).min(headroom.max(0.0) / eff).max(0.0);
            if q > 0.0 {
                net[h] -= q;
                for v in &mut path[h..] {
                    *v += q * eff;
                }
                gap -= q * eff;
            }
            if gap <= TOL {
                break;
            }
        }
    } else if gap < -TOL {
        for h in (0..H).rev() {
            let avail = path[h..].iter().fold(f64::INFINITY, |a, v| a.min(*v));
            let q = (-gap).min(p - net[h]).min(avail.max(0.0)).max(0.0);
            if q > 0.0 {
                net[h] += q;
                for v in &mut path[h..] {
                    *v -= q;
                }
                gap += q;
            }
            if gap >= -TOL {
                break;
            }
        }
    }
    let (path, spill) = simulate(&mut net, soc0, inflow, cap, eff);
    EssSchedule { net_mw: net, soc_start: soc0, soc_end: path[H - 1], spill_mwh: spill }
}

/// Runs a schedule hour by hour, trimming discharge to the energy held and
/// charge to the headroom left. Returns the state-of-charge path and spill.
fn simulate(net: &mut [f64; H], soc0: f64, inflow: &[f64; H], cap: f64, eff: f64) -> ([f64; H], f64) {
    let mut spill = 0.0;
    let mut soc = soc0;
    let mut path = [0.0; H];
    for h in 0..H {
        soc += inflow[h];
        if net[h] > 0.0 {
            let q = net[h].min(soc.max(0.0));
            net[h] = q;
            soc -= q;
        } else if net[h] < 0.0 {
            let room = (cap - soc).max(0.0);
            let q = (-net[h]).min(room / eff);
            net[h] = -q;
            soc += q * eff;
        }
        if soc > cap {
            spill += soc - cap;
            soc = cap;
        }
        path[h] = soc;
    }
    (path, spill)
}
