//! Run configuration: schema, validation, time-series loading and the
//! derived quantities (representative days, peak day, mean capacity factors)
//! every other module reads.
//!
//! A scenario file is TOML. Time series are one CSV per series with a header
//! row, resolved relative to the scenario file. See `scenarios/` for
//! complete examples.

mod series;
mod tech;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::curve::YearCurve;
use crate::ids::{AgentId, TechId};

pub use series::{
    build_peak_day, build_representative_days, read_series_csv, resample_to_hourly, HourlySeries,
    RepresentativeDay, HOURS_PER_DAY,
};
pub use tech::{cost_at_year, sample_availability, AvailabilityDist, FixedOpex, TechCosts, Technology};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("invalid value for `{field}`: {msg}")]
    Invalid { field: String, msg: String },
    #[error("time-series file not found: {path}")]
    MissingSeries { path: PathBuf },
    #[error("time series has {hours} hours, at least {needed} needed")]
    SeriesTooShort { hours: usize, needed: usize },
    #[error("non-finite value in series `{series}` at index {index}")]
    NonFinite { series: String, index: usize },
    #[error("unsupported schema_version {found} (expected {expected})")]
    UnsupportedSchema { found: u32, expected: u32 },
}

impl ScenarioError {
    pub fn invalid(field: impl Into<String>, msg: impl Into<String>) -> Self {
        ScenarioError::Invalid { field: field.into(), msg: msg.into() }
    }

    pub(crate) fn parse(path: &Path, msg: impl Into<String>) -> Self {
        ScenarioError::Parse { path: path.to_path_buf(), msg: msg.into() }
    }

    /// The offending field path, when the error concerns one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ScenarioError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PricingRule {
    #[default]
    Marginal,
    PayAsBid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    #[default]
    Genco,
    /// Operates mid-term storage only; never invests.
    StorageOperator,
}

/// Investment ban on a technology from a calendar year on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechBan {
    pub tech: TechId,
    pub from_year: i32,
}

/// Market design switches, policy schedules and auction parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketDesign {
    /// Currency per MWh; spot price cap.
    pub voll: f64,
    /// Annual fraction.
    pub discount_rate: f64,
    /// Annual fraction applied to the base demand profile.
    #[serde(default)]
    pub demand_growth: f64,
    /// Currency per tCO2 by calendar year.
    pub carbon_tax_schedule: YearCurve,
    /// Renewable share of expected demand by calendar year.
    pub res_target_curve: YearCurve,
    #[serde(default = "yes")]
    pub merchant_enabled: bool,
    #[serde(default)]
    pub cfd_enabled: bool,
    #[serde(default)]
    pub cm_enabled: bool,
    /// Currency per MWh.
    #[serde(default = "default_cfd_cap")]
    pub cfd_price_cap: f64,
    /// Currency per MW of firm capacity per hour.
    #[serde(default = "default_cm_cap")]
    pub cm_price_cap: f64,
    /// Reliability-option strike, currency per MWh.
    #[serde(default = "default_scarcity")]
    pub scarcity_price: f64,
    #[serde(default)]
    pub pricing_rule: PricingRule,
    pub planning_horizon_years: u32,
    /// Fractional margin added to the grown peak demand in adequacy checks.
    #[serde(default)]
    pub cm_demand_margin: f64,
    #[serde(default)]
    pub merchant_slot: u32,
    #[serde(default = "default_cm_slot")]
    pub cm_slot: u32,
    #[serde(default = "default_cfd_slot")]
    pub cfd_slot: u32,
    #[serde(default)]
    pub bans: Vec<TechBan>,
}

fn yes() -> bool {
    true
}
fn default_cfd_cap() -> f64 {
    200.0
}
fn default_cm_cap() -> f64 {
    40.0
}
fn default_scarcity() -> f64 {
    500.0
}
fn default_cm_slot() -> u32 {
    2
}
fn default_cfd_slot() -> u32 {
    4
}

/// One technology entry as written in the scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechConfig {
    pub id: TechId,
    /// Thousand currency per MW by calendar year.
    pub capex_k_per_mw: YearCurve,
    /// Percent of CAPEX per MW-year.
    #[serde(default)]
    pub opex_fixed_pct: Option<f64>,
    /// Currency per MW-year by calendar year; alternative to the percentage.
    #[serde(default)]
    pub opex_fixed_per_mw_year: Option<YearCurve>,
    /// Currency per MWh.
    #[serde(default)]
    pub opex_var: f64,
    /// tCO2 per MWh.
    #[serde(default)]
    pub emission_factor: f64,
    pub construction_years: u32,
    pub lifetime_years: u32,
    #[serde(default)]
    pub max_invest_mw: f64,
    #[serde(default = "default_avail_mean")]
    pub availability_mean: f64,
    #[serde(default = "default_avail_std")]
    pub availability_std: f64,
    #[serde(default)]
    pub ess_duration_hours: Option<f64>,
    #[serde(default = "default_efficiency")]
    pub ess_efficiency: f64,
}

fn default_avail_mean() -> f64 {
    0.925
}
fn default_avail_std() -> f64 {
    0.23
}
fn default_efficiency() -> f64 {
    0.9
}

impl TechConfig {
    pub fn resolve(&self) -> Result<Technology, ScenarioError> {
        let field = |f: &str| format!("technologies.{}.{}", self.id, f);
        let opex_fixed = match (&self.opex_fixed_pct, &self.opex_fixed_per_mw_year) {
            (Some(p), None) => FixedOpex::PctOfCapex(*p),
            (None, Some(c)) => FixedOpex::PerMwYear(c.clone()),
            (None, None) => FixedOpex::PctOfCapex(0.0),
            (Some(_), Some(_)) => {
                return Err(ScenarioError::invalid(
                    field("opex_fixed_pct"),
                    "give either opex_fixed_pct or opex_fixed_per_mw_year, not both",
                ))
            }
        };
        let availability = AvailabilityDist::from_moments(self.availability_mean, self.availability_std)
            .ok_or_else(|| {
                ScenarioError::invalid(
                    field("availability_std"),
                    format!(
                        "moments ({}, {}) admit no distribution on {{0, 0.5, 1}}",
                        self.availability_mean, self.availability_std
                    ),
                )
            })?;
        let t = Technology {
            id: self.id,
            capex: self.capex_k_per_mw.clone(),
            opex_fixed,
            opex_var: self.opex_var,
            emission_factor: self.emission_factor,
            construction_years: self.construction_years,
            lifetime_years: self.lifetime_years,
            max_invest_mw: self.max_invest_mw,
            availability_mean: self.availability_mean,
            availability_std: self.availability_std,
            ess_duration_hours: self.ess_duration_hours,
            ess_efficiency: if self.id.is_storage() { self.ess_efficiency } else { 1.0 },
            availability,
        };
        t.validate()?;
        Ok(t)
    }
}

/// Existing capacity held by an agent at episode start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldingConfig {
    pub tech: TechId,
    pub capacity_mw: f64,
    /// Years until retirement, counted from the first study year.
    #[serde(default)]
    pub remaining_life_years: Option<u32>,
    /// Fraction of `capacity_mw` still installed by calendar year. Expanded
    /// into blocks that retire at each year where the fraction drops.
    #[serde(default)]
    pub decommissioning: Option<YearCurve>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub name: String,
    #[serde(default)]
    pub role: AgentRole,
    /// Technologies this agent may invest in. Empty means every investable
    /// technology in the catalog.
    #[serde(default)]
    pub technologies: Vec<TechId>,
    #[serde(default)]
    pub holdings: Vec<HoldingConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeseriesConfig {
    /// Directory holding the CSVs, relative to the scenario file.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_resolution")]
    pub resolution_minutes: u32,
    pub demand: PathBuf,
    #[serde(default = "one")]
    pub demand_scale: f64,
    #[serde(default)]
    pub cf_solar: Option<PathBuf>,
    #[serde(default)]
    pub cf_onshore: Option<PathBuf>,
    #[serde(default)]
    pub cf_offshore: Option<PathBuf>,
    #[serde(default)]
    pub hydro_inflow: Option<PathBuf>,
}

fn default_resolution() -> u32 {
    60
}
fn one() -> f64 {
    1.0
}

/// The scenario file as parsed, before validation and series loading.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    /// First study year.
    pub base_year: i32,
    pub study_years: u32,
    #[serde(default = "default_warmup")]
    pub warmup_years: u32,
    #[serde(default = "default_cooldown")]
    pub cooldown_years: u32,
    #[serde(default = "default_spy")]
    pub steps_per_year: u32,
    #[serde(default)]
    pub seed: u64,
    pub market: MarketDesign,
    pub timeseries: Option<TimeseriesConfig>,
    pub technologies: Vec<TechConfig>,
    pub agents: Vec<AgentConfig>,
}

fn default_warmup() -> u32 {
    2
}
fn default_cooldown() -> u32 {
    3
}
fn default_spy() -> u32 {
    6
}

/// Existing capacity after expansion of decommissioning curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialBlock {
    pub tech: TechId,
    pub capacity_mw: f64,
    /// `None` means the block outlives the episode.
    pub remaining_life_years: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    pub role: AgentRole,
    pub technologies: Vec<TechId>,
    pub portfolio: Vec<InitialBlock>,
}

/// Validated, immutable run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub base_year: i32,
    pub study_years: u32,
    pub warmup_years: u32,
    pub cooldown_years: u32,
    pub steps_per_year: u32,
    pub seed: u64,
    pub market: MarketDesign,
    /// Catalog in `TechId` order.
    pub technologies: Vec<Technology>,
    pub agents: Vec<AgentSpec>,
    /// One day per window of the year.
    pub rep_days: Vec<RepresentativeDay>,
    pub peak_day: RepresentativeDay,
    /// Mean capacity factor over the representative days, by `TechId` index.
    pub mean_cf: [f64; TechId::COUNT],
}

impl Scenario {
    /// Validates a parsed configuration against already-loaded series.
    pub fn from_parts(cfg: ScenarioConfig, series: &HourlySeries) -> Result<Self, ScenarioError> {
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::UnsupportedSchema { found: cfg.schema_version, expected: SCHEMA_VERSION });
        }
        if cfg.study_years == 0 {
            return Err(ScenarioError::invalid("study_years", "must be > 0"));
        }
        if !(1..=12).contains(&cfg.steps_per_year) {
            return Err(ScenarioError::invalid("steps_per_year", "must lie in 1..=12"));
        }
        validate_market(&cfg.market, cfg.steps_per_year)?;

        let mut technologies = Vec::with_capacity(cfg.technologies.len());
        for t in &cfg.technologies {
            if technologies.iter().any(|x: &Technology| x.id == t.id) {
                return Err(ScenarioError::invalid(format!("technologies.{}", t.id), "listed twice"));
            }
            technologies.push(t.resolve()?);
        }
        technologies.sort_by_key(|t| t.id);
        if technologies.is_empty() {
            return Err(ScenarioError::invalid("technologies", "catalog is empty"));
        }

        let has = |id: TechId| technologies.iter().any(|t| t.id == id);
        if cfg.agents.is_empty() {
            return Err(ScenarioError::invalid("agents", "roster is empty"));
        }
        let total_years = cfg.warmup_years + cfg.study_years + cfg.cooldown_years;
        let mut agents = Vec::with_capacity(cfg.agents.len());
        for (i, a) in cfg.agents.iter().enumerate() {
            let field = |f: &str| format!("agents[{i}].{f}");
            let techs: Vec<TechId> = match a.role {
                AgentRole::StorageOperator => Vec::new(),
                AgentRole::Genco if a.technologies.is_empty() => technologies
                    .iter()
                    .filter(|t| t.is_investable())
                    .map(|t| t.id)
                    .collect(),
                AgentRole::Genco => {
                    let mut v = a.technologies.clone();
                    v.sort();
                    v.dedup();
                    v
                }
            };
            for t in &techs {
                if !has(*t) {
                    return Err(ScenarioError::invalid(field("technologies"), format!("`{t}` is not in the catalog")));
                }
            }
            let mut portfolio = Vec::new();
            for (j, h) in a.holdings.iter().enumerate() {
                let hf = format!("agents[{i}].holdings[{j}]");
                if !has(h.tech) {
                    return Err(ScenarioError::invalid(format!("{hf}.tech"), format!("`{}` is not in the catalog", h.tech)));
                }
                if !(h.capacity_mw > 0.0 && h.capacity_mw.is_finite()) {
                    return Err(ScenarioError::invalid(format!("{hf}.capacity_mw"), "must be > 0"));
                }
                portfolio.extend(expand_holding(h, cfg.base_year, total_years, &hf)?);
            }
            agents.push(AgentSpec { name: a.name.clone(), role: a.role, technologies: techs, portfolio });
        }

        // The planning horizon must cover the slowest build among technologies
        // any agent can invest in.
        let max_build = agents
            .iter()
            .flat_map(|a| a.technologies.iter())
            .filter_map(|id| technologies.iter().find(|t| t.id == *id))
            .filter(|t| t.is_investable())
            .map(|t| t.construction_years)
            .max()
            .unwrap_or(0);
        if cfg.market.planning_horizon_years < max_build {
            return Err(ScenarioError::invalid(
                "market.planning_horizon_years",
                format!("{} is shorter than the longest construction time {max_build}", cfg.market.planning_horizon_years),
            ));
        }

        let windows = cfg.steps_per_year as usize;
        let rep_days = build_representative_days(series, windows)?;
        let peak_day = build_peak_day(series, windows)?;
        for (name, d) in rep_days.iter().map(|d| ("rep_days", d)).chain(std::iter::once(("peak_day", &peak_day))) {
            check_day(name, d)?;
        }

        let mut mean_cf = [0.0; TechId::COUNT];
        for id in TechId::ALL {
            mean_cf[id.index()] = match id {
                TechId::Solar | TechId::OnshoreWind | TechId::OffshoreWind => {
                    let n = (rep_days.len() * HOURS_PER_DAY) as f64;
                    rep_days.iter().map(|d| day_cf(d, id).iter().sum::<f64>()).sum::<f64>() / n
                }
                TechId::EssShort | TechId::EssMid => 0.0,
                _ => 1.0,
            };
        }
        for t in &technologies {
            if t.is_res() && has(t.id) && mean_cf[t.id.index()] <= 0.0 {
                return Err(ScenarioError::invalid(
                    format!("timeseries.{}", cf_series_name(t.id)),
                    format!("`{}` is in the catalog but its capacity-factor series is missing or zero", t.id),
                ));
            }
        }

        Ok(Scenario {
            name: cfg.name,
            base_year: cfg.base_year,
            study_years: cfg.study_years,
            warmup_years: cfg.warmup_years,
            cooldown_years: cfg.cooldown_years,
            steps_per_year: cfg.steps_per_year,
            seed: cfg.seed,
            market: cfg.market,
            technologies,
            agents,
            rep_days,
            peak_day,
            mean_cf,
        })
    }

    pub fn total_years(&self) -> u32 {
        self.warmup_years + self.study_years + self.cooldown_years
    }

    pub fn total_steps(&self) -> usize {
        (self.total_years() * self.steps_per_year) as usize
    }

    pub fn spy(&self) -> usize {
        self.steps_per_year as usize
    }

    /// Episode year index (0-based, warm-up included) of a step.
    pub fn year_index(&self, step: usize) -> u32 {
        (step / self.spy()) as u32
    }

    /// Calendar year at an episode year index. Warm-up years precede the
    /// base year.
    pub fn calendar_year(&self, year_index: u32) -> i32 {
        self.base_year + year_index as i32 - self.warmup_years as i32
    }

    /// Calendar year used for costs, demand and policy. Warm-up and
    /// cool-down years are held at the first and last study year so the
    /// episode starts and ends under stable conditions.
    pub fn effective_year(&self, year_index: u32) -> i32 {
        self.calendar_year(year_index).clamp(self.base_year, self.last_study_year())
    }

    pub fn last_study_year(&self) -> i32 {
        self.base_year + self.study_years as i32 - 1
    }

    pub fn is_warmup(&self, year_index: u32) -> bool {
        year_index < self.warmup_years
    }

    pub fn demand_factor(&self, calendar_year: i32) -> f64 {
        let n = (calendar_year - self.base_year).max(0);
        (1.0 + self.market.demand_growth).powi(n)
    }

    pub fn tech(&self, id: TechId) -> Option<&Technology> {
        self.technologies.iter().find(|t| t.id == id)
    }

    pub fn tech_ids(&self) -> Vec<TechId> {
        self.technologies.iter().map(|t| t.id).collect()
    }

    pub fn mean_cf(&self, id: TechId) -> f64 {
        self.mean_cf[id.index()]
    }

    pub fn carbon_tax(&self, calendar_year: i32) -> f64 {
        self.market.carbon_tax_schedule.at(calendar_year as f64)
    }

    pub fn res_target(&self, calendar_year: i32) -> f64 {
        self.market.res_target_curve.at(calendar_year as f64)
    }

    /// Expected average hourly demand (MW) over a calendar year.
    pub fn expected_avg_demand(&self, calendar_year: i32) -> f64 {
        let base = self.rep_days.iter().map(|d| d.mean_demand()).sum::<f64>() / self.rep_days.len() as f64;
        base * self.demand_factor(calendar_year)
    }

    /// Calendar days one step stands for.
    pub fn days_per_step(&self) -> f64 {
        365.0 / self.steps_per_year as f64
    }

    pub fn hours_per_step(&self) -> f64 {
        8760.0 / self.steps_per_year as f64
    }

    pub fn is_banned(&self, id: TechId, calendar_year: i32) -> bool {
        self.market.bans.iter().any(|b| b.tech == id && calendar_year >= b.from_year)
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, id: AgentId) -> &AgentSpec {
        &self.agents[id]
    }

    /// Stable hash of the technology catalog ids; guards checkpoint reuse.
    pub fn tech_set_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for t in &self.technologies {
            h.update(t.id.as_str().as_bytes());
            h.update([0u8]);
        }
        h.finalize().into()
    }

    /// sha256 over the canonical JSON form of the resolved scenario.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&json))
    }
}

pub fn day_cf(day: &RepresentativeDay, id: TechId) -> &[f64; HOURS_PER_DAY] {
    const ONES: [f64; HOURS_PER_DAY] = [1.0; HOURS_PER_DAY];
    match id {
        TechId::Solar => &day.cf_solar,
        TechId::OnshoreWind => &day.cf_onshore,
        TechId::OffshoreWind => &day.cf_offshore,
        _ => &ONES,
    }
}

fn cf_series_name(id: TechId) -> &'static str {
    match id {
        TechId::Solar => "cf_solar",
        TechId::OnshoreWind => "cf_onshore",
        TechId::OffshoreWind => "cf_offshore",
        _ => "",
    }
}

fn check_day(name: &str, d: &RepresentativeDay) -> Result<(), ScenarioError> {
    let cfs = d.cf_solar.iter().chain(&d.cf_onshore).chain(&d.cf_offshore);
    if cfs.clone().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(ScenarioError::invalid(format!("timeseries ({name})"), "capacity factors must lie in [0, 1]"));
    }
    if d.demand.iter().any(|v| *v < 0.0) || d.hydro_inflow.iter().any(|v| *v < 0.0) {
        return Err(ScenarioError::invalid(format!("timeseries ({name})"), "demand and inflow must be >= 0"));
    }
    Ok(())
}

fn validate_market(m: &MarketDesign, spy: u32) -> Result<(), ScenarioError> {
    let f = |s: &str| format!("market.{s}");
    if !(m.voll > 0.0 && m.voll.is_finite()) {
        return Err(ScenarioError::invalid(f("voll"), "must be > 0"));
    }
    if !(m.discount_rate > 0.0 && m.discount_rate.is_finite()) {
        return Err(ScenarioError::invalid(f("discount_rate"), "must be > 0"));
    }
    if !m.demand_growth.is_finite() || m.demand_growth <= -1.0 {
        return Err(ScenarioError::invalid(f("demand_growth"), "must be > -1"));
    }
    if m.res_target_curve.min_value() < 0.0 || m.res_target_curve.max_value() > 1.0 {
        return Err(ScenarioError::invalid(f("res_target_curve"), "values must lie in [0, 1]"));
    }
    if m.carbon_tax_schedule.min_value() < 0.0 {
        return Err(ScenarioError::invalid(f("carbon_tax_schedule"), "values must be >= 0"));
    }
    if m.cfd_enabled && !(m.cfd_price_cap > 0.0) {
        return Err(ScenarioError::invalid(f("cfd_price_cap"), "must be > 0 when CfD auctions are enabled"));
    }
    if m.cm_enabled && !(m.cm_price_cap > 0.0) {
        return Err(ScenarioError::invalid(f("cm_price_cap"), "must be > 0 when the capacity market is enabled"));
    }
    if !(m.scarcity_price >= 0.0 && m.scarcity_price <= m.voll) {
        return Err(ScenarioError::invalid(f("scarcity_price"), "must lie in [0, voll]"));
    }
    if !(m.cm_demand_margin > -1.0 && m.cm_demand_margin.is_finite()) {
        return Err(ScenarioError::invalid(f("cm_demand_margin"), "must be > -1"));
    }
    for (name, s) in [("merchant_slot", m.merchant_slot), ("cm_slot", m.cm_slot), ("cfd_slot", m.cfd_slot)] {
        if s >= spy {
            return Err(ScenarioError::invalid(f(name), format!("must be < steps_per_year ({spy})")));
        }
    }
    Ok(())
}

/// Splits a holding into blocks by retirement year.
fn expand_holding(h: &HoldingConfig, base_year: i32, total_years: u32, field: &str) -> Result<Vec<InitialBlock>, ScenarioError> {
    match (&h.decommissioning, h.remaining_life_years) {
        (Some(_), Some(_)) => Err(ScenarioError::invalid(
            format!("{field}.decommissioning"),
            "give either remaining_life_years or decommissioning, not both",
        )),
        (None, life) => Ok(vec![InitialBlock { tech: h.tech, capacity_mw: h.capacity_mw, remaining_life_years: life }]),
        (Some(curve), None) => {
            if curve.min_value() < 0.0 || curve.max_value() > 1.0 {
                return Err(ScenarioError::invalid(format!("{field}.decommissioning"), "fractions must lie in [0, 1]"));
            }
            let mut out = Vec::new();
            let mut prev = curve.at(base_year as f64);
            let start = prev;
            for k in 1..=total_years {
                let f = curve.at((base_year + k as i32) as f64);
                if f > prev + 1e-12 {
                    return Err(ScenarioError::invalid(format!("{field}.decommissioning"), "must be non-increasing"));
                }
                if prev - f > 1e-12 {
                    out.push(InitialBlock { tech: h.tech, capacity_mw: h.capacity_mw * (prev - f), remaining_life_years: Some(k) });
                }
                prev = f;
            }
            if prev > 1e-12 {
                out.push(InitialBlock { tech: h.tech, capacity_mw: h.capacity_mw * prev, remaining_life_years: None });
            }
            debug_assert!((out.iter().map(|b| b.capacity_mw).sum::<f64>() - h.capacity_mw * start).abs() < 1e-6);
            Ok(out)
        }
    }
}

/// Reads and validates a scenario file. Time-series paths are resolved
/// relative to the file's directory.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    let cfg: ScenarioConfig = toml::from_str(&text).map_err(|e| ScenarioError::parse(path, e.to_string()))?;
    let ts = cfg
        .timeseries
        .clone()
        .ok_or_else(|| ScenarioError::invalid("timeseries", "section is required in a scenario file"))?;
    let root = path.parent().unwrap_or(Path::new(".")).join(ts.dir.clone().unwrap_or_default());
    let series = load_series(&root, &ts)?;
    Scenario::from_parts(cfg, &series)
}

fn load_series(root: &Path, ts: &TimeseriesConfig) -> Result<HourlySeries, ScenarioError> {
    let read = |name: &str, p: &Path| -> Result<Vec<f64>, ScenarioError> {
        let full = root.join(p);
        let raw = read_series_csv(&full)?;
        resample_to_hourly(&raw, ts.resolution_minutes)
            .map_err(|msg| ScenarioError::invalid(format!("timeseries.{name}"), msg))
    };
    let demand: Vec<f64> = read("demand", &ts.demand)?.into_iter().map(|v| v * ts.demand_scale).collect();
    let n = demand.len();
    let opt = |name: &str, p: &Option<PathBuf>| -> Result<Vec<f64>, ScenarioError> {
        match p {
            Some(p) => read(name, p),
            None => Ok(vec![0.0; n]),
        }
    };
    Ok(HourlySeries {
        cf_solar: opt("cf_solar", &ts.cf_solar)?,
        cf_onshore: opt("cf_onshore", &ts.cf_onshore)?,
        cf_offshore: opt("cf_offshore", &ts.cf_offshore)?,
        hydro_inflow: opt("hydro_inflow", &ts.hydro_inflow)?,
        demand,
    })
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    #[test]
    fn minimal_two_agent_config() {
        let s = scenario(&[TechId::Ccgt], 2);
        assert_eq!(s.agent_count(), 2);
        assert_eq!(s.agents[0].technologies, vec![TechId::Ccgt]);
        assert_eq!(s.total_steps(), 7 * 6);
    }

    #[test]
    fn res_target_out_of_range_names_field() {
        let mut c = config(&[TechId::Ccgt], 2);
        c.market.res_target_curve = YearCurve::new(vec![(2030.0, 1.2)]).unwrap();
        let e = Scenario::from_parts(c, &series()).unwrap_err();
        assert_eq!(e.field(), Some("market.res_target_curve"));
    }

    #[test]
    fn infeasible_availability_rejected() {
        let mut c = config(&[TechId::Ccgt], 1);
        c.technologies[0].availability_mean = 0.5;
        c.technologies[0].availability_std = 0.6;
        let e = Scenario::from_parts(c, &series()).unwrap_err();
        assert_eq!(e.field(), Some("technologies.ccgt.availability_std"));
    }

    #[test]
    fn short_planning_horizon_rejected() {
        let mut c = config(&[TechId::OffshoreWind, TechId::Ccgt], 1);
        c.market.planning_horizon_years = 3;
        let e = Scenario::from_parts(c, &series()).unwrap_err();
        assert_eq!(e.field(), Some("market.planning_horizon_years"));
    }

    #[test]
    fn missing_cf_series_for_res_rejected() {
        let c = config(&[TechId::Solar], 1);
        let mut s = series();
        s.cf_solar = vec![0.0; s.len()];
        assert!(Scenario::from_parts(c, &s).is_err());
    }

    #[test]
    fn decommissioning_curve_expands_to_blocks() {
        let h = HoldingConfig {
            tech: TechId::Coal,
            capacity_mw: 1000.0,
            remaining_life_years: None,
            decommissioning: Some(YearCurve::new(vec![(2020.0, 1.0), (2022.0, 0.5), (2024.0, 0.0)]).unwrap()),
        };
        let blocks = expand_holding(&h, 2020, 10, "x").unwrap();
        let total: f64 = blocks.iter().map(|b| b.capacity_mw).sum();
        assert!((total - 1000.0).abs() < 1e-9);
        assert_eq!(blocks.last().unwrap().remaining_life_years, Some(4));
        assert!(blocks.iter().all(|b| b.remaining_life_years.is_some()));
    }

    #[test]
    fn calendar_and_warmup() {
        let s = scenario(&[TechId::Ccgt], 1);
        assert_eq!(s.calendar_year(0), 2019);
        assert_eq!(s.effective_year(0), 2020);
        assert!(s.is_warmup(0));
        assert!(!s.is_warmup(1));
        assert_eq!(s.calendar_year(s.year_index(6)), 2020);
        let last = s.total_years() - 1;
        assert_eq!(s.calendar_year(last), 2025);
        assert_eq!(s.effective_year(last), 2024);
    }

    #[test]
    fn content_hash_is_stable() {
        let a = scenario(&[TechId::Ccgt], 2);
        let b = scenario(&[TechId::Ccgt], 2);
        assert_eq!(a.content_hash(), b.content_hash());
        let c = scenario(&[TechId::Ccgt, TechId::Solar], 2);
        assert_ne!(a.tech_set_hash(), c.tech_set_hash());
    }

    #[test]
    fn toml_round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let s = series();
        let write = |name: &str, v: &[f64]| {
            let mut out = String::from("value\n");
            for x in v {
                out.push_str(&format!("{x}\n"));
            }
            std::fs::write(dir.path().join(name), out).unwrap();
        };
        write("demand.csv", &s.demand);
        write("solar.csv", &s.cf_solar);
        let toml = r#"
schema_version = 1
base_year = 2020
study_years = 5

[market]
voll = 4000.0
discount_rate = 0.08
carbon_tax_schedule = [[2020.0, 0.0]]
res_target_curve = [[2025, 0.21], [2040, 0.9]]
planning_horizon_years = 4

[timeseries]
demand = "demand.csv"
cf_solar = "solar.csv"

[[technologies]]
id = "solar"
capex_k_per_mw = [[2020.0, 562.0], [2040.0, 323.0]]
opex_fixed_pct = 2.5
opex_var = 1.0
construction_years = 2
lifetime_years = 35
max_invest_mw = 4000.0

[[agents]]
name = "g1"

[[agents]]
name = "g2"
[[agents.holdings]]
tech = "solar"
capacity_mw = 100.0
"#;
        let p = dir.path().join("s.toml");
        std::fs::write(&p, toml).unwrap();
        let sc = load_scenario(&p).unwrap();
        assert_eq!(sc.agent_count(), 2);
        assert_eq!(sc.market.voll, 4000.0);
        assert_eq!(sc.res_target(2030), 0.21 + (0.9 - 0.21) / 3.0);
        assert_eq!(sc.agents[1].portfolio.len(), 1);

        std::fs::remove_file(dir.path().join("solar.csv")).unwrap();
        assert!(matches!(load_scenario(&p), Err(ScenarioError::MissingSeries { .. })));
        assert!(matches!(load_scenario(dir.path().join("nope.toml")), Err(ScenarioError::Io { .. })));
    }
}
