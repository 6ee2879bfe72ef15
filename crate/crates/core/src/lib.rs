//! Multi-agent long-term electricity market simulator.
//!
//! Generation companies invest through merchant entry, Contract-for-Difference
//! auctions and capacity-market (Reliability Option) auctions. Each agent is
//! trained with its own PPO actor/critic pair ([`ippo`]), and trained policies
//! are evaluated with the metrics in [`eval`].
//!
//! Module map:
//!
//! - [`scenario`]: run configuration, time series, representative days,
//!   technology catalog.
//! - [`market`]: hourly spot clearing, storage scheduling, adequacy and
//!   capacity credits.
//! - [`longterm`]: auctions, settlement of each entry channel, merchant
//!   commitments.
//! - [`env`]: the episodic multi-agent environment.
//! - [`ippo`]: networks, PPO loss, optimizer, rollouts, training, checkpoints.
//! - [`eval`]: frozen-policy simulation, HHI, penalty, IRR, league, summaries.

pub mod curve;
pub mod env;
pub mod eval;
pub mod ids;
pub mod ippo;
pub mod longterm;
pub mod market;
pub mod scenario;

pub use ids::{AgentId, Channel, TechId};
pub use scenario::{load_scenario, Scenario, ScenarioError};
