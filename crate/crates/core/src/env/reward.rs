//! Per-step cash-flow ledger, discounted reward and the terminal annuity.

use serde::{Deserialize, Serialize};

use crate::ids::{Channel, TechId};

const C: usize = Channel::COUNT;
const T: usize = TechId::COUNT;

/// One agent's cash flows for one step, by entry channel and technology.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CashFlowLedger {
    /// Operating profit (revenue minus operating costs, plus contract terms).
    pub profit: [[f64; T]; C],
    /// CAPEX installments paid.
    pub investment: [[f64; T]; C],
    /// Terminal payment for remaining asset life.
    pub absorbing: [[f64; T]; C],
}

impl CashFlowLedger {
    pub fn add_profit(&mut self, ch: Channel, t: TechId, v: f64) {
        self.profit[ch.index()][t.index()] += v;
    }

    pub fn add_investment(&mut self, ch: Channel, t: TechId, v: f64) {
        self.investment[ch.index()][t.index()] += v;
    }

    /// Merchant profit, existing assets included.
    pub fn p_m(&self) -> f64 {
        sum(&self.profit[Channel::Existing.index()]) + sum(&self.profit[Channel::Merchant.index()])
    }

    pub fn p_cm(&self) -> f64 {
        sum(&self.profit[Channel::Cm.index()])
    }

    pub fn p_cfd(&self) -> f64 {
        sum(&self.profit[Channel::Cfd.index()])
    }

    pub fn ic(&self, ch: Channel) -> f64 {
        sum(&self.investment[ch.index()])
    }

    /// Net undiscounted cash of the step, terminal payments included.
    pub fn net(&self) -> f64 {
        let absorbing: f64 = self.absorbing.iter().map(|r| sum(r)).sum();
        self.p_m() + self.p_cm() + self.p_cfd()
            - self.ic(Channel::Existing)
            - self.ic(Channel::Merchant)
            - self.ic(Channel::Cm)
            - self.ic(Channel::Cfd)
            + absorbing
    }

    /// Profit minus investment for one cell, used by the accumulated-reward
    /// observations.
    pub fn cell(&self, ch: Channel, t: TechId) -> f64 {
        self.profit[ch.index()][t.index()] - self.investment[ch.index()][t.index()]
            + self.absorbing[ch.index()][t.index()]
    }
}

fn sum(v: &[f64]) -> f64 {
    v.iter().sum()
}

/// Reward normalization: `VoLL² × episode length in years`.
pub fn normalization_factor(voll: f64, env_length_years: f64) -> f64 {
    voll * voll * env_length_years
}

/// `(1 + r)^(−step / steps_per_year)`.
pub fn discount_factor(r: f64, step: usize, steps_per_year: usize) -> f64 {
    (1.0 + r).powf(-(step as f64) / steps_per_year as f64)
}

/// Discounted, normalized reward of one step.
pub fn compute_reward(ledger: &CashFlowLedger, step: usize, r: f64, steps_per_year: usize, nf: f64) -> f64 {
    ledger.net() * discount_factor(r, step, steps_per_year) / nf
}

/// Present value of `mean_income` per year over `remaining_years`.
pub fn absorbing_payment(mean_income: f64, r: f64, remaining_years: f64) -> f64 {
    if remaining_years <= 0.0 {
        return 0.0;
    }
    if r == 0.0 {
        return mean_income * remaining_years;
    }
    // expm1/ln_1p keep precision as r approaches zero
    mean_income * -(-remaining_years * r.ln_1p()).exp_m1() / r
}
