//! Frozen-policy simulation and the evaluation metrics.

mod aggregate;
mod league;
mod metrics;
mod penalty;
mod records;

pub use aggregate::{annual_flows, evaluate_records, step_emissions, step_prices, AggregateError, EvalTables, OUTPUT_FILES};
pub use league::{run_league, LeagueConfig, LeagueEntry, LeagueError, LeagueTable};
pub use metrics::{compute_hhi, compute_irr, percentile, MetricError, IRR_HI, IRR_LO, IRR_TOL};
pub use penalty::{compute_penalty, entry_slots, penalty_by_agent, virtual_plant_npv, virtual_size, PenaltyRow, VirtualEntry};
pub use records::{
    read_records, simulate, simulate_to_file, simulate_with, EpisodeRecord, RecordError, RecordHeader, RECORDS_VERSION,
};
