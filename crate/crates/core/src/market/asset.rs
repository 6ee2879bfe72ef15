use serde::{Deserialize, Serialize};

use crate::ids::{AgentId, Channel, TechId};

/// Channel-specific contract terms. The variant fixes the asset's entry
/// channel for its whole life.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "snake_case")]
pub enum ChannelTerms {
    Existing,
    Merchant,
    /// Strike in currency per MWh.
    Cfd { strike: f64 },
    /// Premium in currency per MW-firm per hour; firm capacity in MW.
    Cm { premium: f64, firm_mw: f64 },
}

impl ChannelTerms {
    pub fn channel(&self) -> Channel {
        match self {
            ChannelTerms::Existing => Channel::Existing,
            ChannelTerms::Merchant => Channel::Merchant,
            ChannelTerms::Cfd { .. } => Channel::Cfd,
            ChannelTerms::Cm { .. } => Channel::Cm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Asset {
    pub id: u64,
    pub owner: AgentId,
    pub tech: TechId,
    pub capacity_mw: f64,
    pub terms: ChannelTerms,
    /// Whole years until the asset starts operating; 0 once operating.
    pub years_to_operation: u32,
    /// Operating years left; `None` never retires within the episode.
    pub remaining_life_years: Option<u32>,
    /// Availability realized for the current step, in {0, 0.5, 1}.
    pub availability_draw: f64,
    /// Mid-term storage state of charge, MWh.
    pub soc_mwh: f64,
    /// Step at which the investment was committed; `None` for existing assets.
    pub committed_step: Option<usize>,
}

impl Asset {
    pub fn new(
        id: u64,
        owner: AgentId,
        tech: TechId,
        capacity_mw: f64,
        terms: ChannelTerms,
        years_to_operation: u32,
        remaining_life_years: Option<u32>,
    ) -> Self {
        debug_assert!(capacity_mw > 0.0);
        if let ChannelTerms::Cm { firm_mw, .. } = terms {
            debug_assert!(firm_mw <= capacity_mw + 1e-9);
        }
        Self {
            id,
            owner,
            tech,
            capacity_mw,
            terms,
            years_to_operation,
            remaining_life_years,
            availability_draw: 1.0,
            soc_mwh: 0.0,
            committed_step: None,
        }
    }

    pub fn channel(&self) -> Channel {
        self.terms.channel()
    }

    pub fn is_operating(&self) -> bool {
        self.years_to_operation == 0
    }

    /// Whether the asset will be operating `years` from now and not yet
    /// retired by then.
    pub fn operating_in(&self, years: u32) -> bool {
        self.years_to_operation <= years
            && self.remaining_life_years.map_or(true, |l| l + self.years_to_operation > years)
    }
}
