//! Technology catalog entries, cost interpolation and the three-point
//! availability ("downtime index") distribution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::curve::YearCurve;
use crate::ids::TechId;

/// Fixed operating cost, either as a percentage of CAPEX per year or as an
/// absolute currency-per-MW-year curve (the storage table quotes the latter).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedOpex {
    /// Percent of CAPEX per MW-year (e.g. `2.5` for 2.5 %).
    PctOfCapex(f64),
    /// Currency per MW-year.
    PerMwYear(YearCurve),
}

/// Probabilities of the 0 %, 50 % and 100 % availability outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityDist {
    pub p0: f64,
    pub p50: f64,
    pub p100: f64,
}

impl AvailabilityDist {
    /// Solves the two moment equations
    /// `0.5 p50 + p100 = mean` and `0.25 p50 + p100 = mean² + std²`.
    pub fn from_moments(mean: f64, std: f64) -> Option<Self> {
        if !(mean.is_finite() && std.is_finite()) || std < 0.0 {
            return None;
        }
        let second = mean * mean + std * std;
        let p50 = 4.0 * (mean - second);
        let p100 = mean - 0.5 * p50;
        let p0 = 1.0 - p50 - p100;
        const EPS: f64 = 1e-12;
        let ok = |p: f64| (-EPS..=1.0 + EPS).contains(&p);
        if !(ok(p0) && ok(p50) && ok(p100)) {
            return None;
        }
        Some(Self { p0: p0.clamp(0.0, 1.0), p50: p50.clamp(0.0, 1.0), p100: p100.clamp(0.0, 1.0) })
    }

    pub fn mean(&self) -> f64 {
        0.5 * self.p50 + self.p100
    }

    pub fn std(&self) -> f64 {
        let m = self.mean();
        (0.25 * self.p50 + self.p100 - m * m).max(0.0).sqrt()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        if u < self.p0 {
            0.0
        } else if u < self.p0 + self.p50 {
            0.5
        } else {
            1.0
        }
    }
}

/// Costs of a technology evaluated at one calendar year.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TechCosts {
    /// Thousand currency per MW.
    pub capex_k_per_mw: f64,
    /// Currency per MW-year.
    pub opex_fixed_per_mw_year: f64,
    /// Currency per MWh.
    pub opex_var: f64,
}

impl TechCosts {
    pub fn capex_per_mw(&self) -> f64 {
        self.capex_k_per_mw * 1000.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Technology {
    pub id: TechId,
    /// Thousand currency per MW, by calendar year.
    pub capex: YearCurve,
    pub opex_fixed: FixedOpex,
    /// Currency per MWh.
    pub opex_var: f64,
    /// tCO2 per MWh.
    pub emission_factor: f64,
    pub construction_years: u32,
    pub lifetime_years: u32,
    /// MW per agent per decision.
    pub max_invest_mw: f64,
    pub availability_mean: f64,
    pub availability_std: f64,
    /// Energy-to-power ratio; storage only.
    pub ess_duration_hours: Option<f64>,
    /// Round-trip efficiency applied on charging; storage only.
    pub ess_efficiency: f64,
    pub availability: AvailabilityDist,
}

impl Technology {
    pub fn is_res(&self) -> bool {
        self.id.is_res()
    }

    pub fn is_storage(&self) -> bool {
        self.id.is_storage()
    }

    pub fn is_investable(&self) -> bool {
        self.max_invest_mw > 0.0 && self.id != TechId::EssMid
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let field = |f: &str| format!("technologies.{}.{}", self.id, f);
        if self.capex.anchors().iter().any(|a| a.1 <= 0.0) {
            return Err(ScenarioError::invalid(field("capex"), "must be strictly positive at every anchor"));
        }
        if !(self.availability_mean > 0.0 && self.availability_mean <= 1.0) {
            return Err(ScenarioError::invalid(field("availability_mean"), "must lie in (0, 1]"));
        }
        if self.availability_std < 0.0 {
            return Err(ScenarioError::invalid(field("availability_std"), "must be >= 0"));
        }
        if (self.is_res() || self.is_storage()) && self.emission_factor != 0.0 {
            return Err(ScenarioError::invalid(
                field("emission_factor"),
                "renewable and storage technologies must have zero emissions",
            ));
        }
        if self.emission_factor < 0.0 || self.opex_var < 0.0 {
            return Err(ScenarioError::invalid(field("opex_var"), "costs and emissions must be >= 0"));
        }
        if self.lifetime_years == 0 {
            return Err(ScenarioError::invalid(field("lifetime_years"), "must be > 0"));
        }
        if self.max_invest_mw < 0.0 {
            return Err(ScenarioError::invalid(field("max_invest_mw"), "must be >= 0"));
        }
        if self.is_storage() {
            match self.ess_duration_hours {
                Some(d) if d > 0.0 => {}
                _ => return Err(ScenarioError::invalid(field("ess_duration_hours"), "storage needs a positive duration")),
            }
            if !(self.ess_efficiency > 0.0 && self.ess_efficiency <= 1.0) {
                return Err(ScenarioError::invalid(field("ess_efficiency"), "must lie in (0, 1]"));
            }
        }
        if let FixedOpex::PctOfCapex(p) = self.opex_fixed {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(ScenarioError::invalid(field("opex_fixed_pct"), "must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn sample_availability<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.availability.sample(rng)
    }

    /// Storage energy capacity per MW of power rating.
    pub fn energy_per_mw(&self) -> f64 {
        self.ess_duration_hours.unwrap_or(0.0)
    }
}

/// Draws the availability of one plant for one step from the technology's
/// cached three-point distribution.
pub fn sample_availability<R: Rng + ?Sized>(rng: &mut R, tech: &Technology) -> f64 {
    tech.sample_availability(rng)
}

/// Costs at `year`, linearly interpolated between anchors and held constant
/// beyond them.
pub fn cost_at_year(tech: &Technology, year: f64) -> TechCosts {
    let capex_k_per_mw = tech.capex.at(year);
    let opex_fixed_per_mw_year = match &tech.opex_fixed {
        FixedOpex::PctOfCapex(pct) => capex_k_per_mw * 1000.0 * pct / 100.0,
        FixedOpex::PerMwYear(c) => c.at(year),
    };
    TechCosts { capex_k_per_mw, opex_fixed_per_mw_year, opex_var: tech.opex_var }
}
