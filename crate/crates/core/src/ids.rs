//! Identifiers shared across the simulator.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Index of an agent in the scenario roster.
pub type AgentId = usize;

/// Generation and storage technologies known to the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechId {
    Solar,
    OnshoreWind,
    OffshoreWind,
    Coal,
    Ocgt,
    Ccgt,
    EssShort,
    EssMid,
}

impl TechId {
    pub const ALL: [TechId; 8] = [
        TechId::Solar,
        TechId::OnshoreWind,
        TechId::OffshoreWind,
        TechId::Coal,
        TechId::Ocgt,
        TechId::Ccgt,
        TechId::EssShort,
        TechId::EssMid,
    ];
    pub const COUNT: usize = 8;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_res(self) -> bool {
        matches!(self, TechId::Solar | TechId::OnshoreWind | TechId::OffshoreWind)
    }

    pub fn is_storage(self) -> bool {
        matches!(self, TechId::EssShort | TechId::EssMid)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TechId::Solar => "solar",
            TechId::OnshoreWind => "onshore_wind",
            TechId::OffshoreWind => "offshore_wind",
            TechId::Coal => "coal",
            TechId::Ocgt => "ocgt",
            TechId::Ccgt => "ccgt",
            TechId::EssShort => "ess_short",
            TechId::EssMid => "ess_mid",
        }
    }
}

impl fmt::Display for TechId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The route through which an asset entered the system. Every asset carries
/// exactly one channel for its whole life.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Existing,
    Merchant,
    Cfd,
    Cm,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Existing, Channel::Merchant, Channel::Cfd, Channel::Cm];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Existing => "existing",
            Channel::Merchant => "merchant",
            Channel::Cfd => "cfd",
            Channel::Cm => "cm",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
