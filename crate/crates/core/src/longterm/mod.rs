//! Long-term investment channels: merchant commitments, CfD auctions with
//! two-way settlement and capacity-market auctions settled as reliability
//! options.

mod auction;
mod planning;
mod settlement;

pub use auction::{run_auction, AuctionBid, AuctionResult, Award};
pub use planning::{
    adequacy_deficit, cfd_contribution, commit_investment, commit_merchant, is_on_grid, res_deficit, CapexPlan,
    CommitError,
};
pub use settlement::{settle_cfd, settle_cm, settle_ess, settle_merchant, settle_asset, SettleCtx, Settlement};

/// Discretization of investment quantities: `0, 1/3, 2/3, 1` of the cap.
pub const QTY_STEPS: usize = 4;
/// Discretization of auction price bids over `[0, ceiling]`.
pub const PRICE_STEPS: usize = 12;
/// Discretization of the mid-term storage target over `[0, 1]`.
pub const SOC_STEPS: usize = 7;

/// Value of grid index `idx` on a uniform grid of `steps` points over
/// `[0, max]`.
pub fn grid_value(idx: usize, steps: usize, max: f64) -> f64 {
    if steps <= 1 {
        return 0.0;
    }
    idx as f64 / (steps - 1) as f64 * max
}
