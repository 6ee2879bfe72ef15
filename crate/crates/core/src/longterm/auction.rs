use serde::{Deserialize, Serialize};

use crate::ids::{AgentId, TechId};
use crate::scenario::PricingRule;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuctionBid {
    pub agent: AgentId,
    pub tech: TechId,
    /// Installed MW offered.
    pub quantity_mw: f64,
    /// What the bid counts toward the target: expected average MW for CfD,
    /// firm MW for the capacity market.
    pub contribution: f64,
    pub price: f64,
}

impl AuctionBid {
    /// A bid whose contribution equals its installed quantity.
    pub fn new(agent: AgentId, tech: TechId, quantity_mw: f64, price: f64) -> Self {
        Self { agent, tech, quantity_mw, contribution: quantity_mw, price }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Award {
    pub agent: AgentId,
    pub tech: TechId,
    pub quantity_mw: f64,
    pub contribution: f64,
    /// Price paid to this winner.
    pub price: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuctionResult {
    /// Price of the last accepted bid; 0 when nothing is accepted.
    pub clearing_price: f64,
    pub awards: Vec<Award>,
    pub procured: f64,
    /// Target not covered by the awards.
    pub unfilled: f64,
}

/// Single-sided lumpy auction. Bids are ranked by price, then larger
/// contribution, then agent id, and accepted in full until the cumulative
/// contribution reaches `target`. Bids above `ceiling` and bids with no
/// contribution are dropped.
pub fn run_auction(bids: &[AuctionBid], target: f64, ceiling: f64, rule: PricingRule) -> AuctionResult {
    let mut valid: Vec<&AuctionBid> = bids
        .iter()
        .filter(|b| b.contribution > 0.0 && b.quantity_mw > 0.0 && b.price >= 0.0 && b.price <= ceiling)
        .collect();
    valid.sort_by(|a, b| {
        a.price
            .total_cmp(&b.price)
            .then(b.contribution.total_cmp(&a.contribution))
            .then(a.agent.cmp(&b.agent))
            .then(a.tech.cmp(&b.tech))
    });

    let mut accepted = Vec::new();
    let mut procured = 0.0;
    for b in valid {
        if procured >= target {
            break;
        }
        procured += b.contribution;
        accepted.push(*b);
    }
    let clearing_price = accepted.last().map_or(0.0, |b| b.price);
    let awards = accepted
        .into_iter()
        .map(|b| Award {
            agent: b.agent,
            tech: b.tech,
            quantity_mw: b.quantity_mw,
            contribution: b.contribution,
            price: match rule {
                PricingRule::Marginal => clearing_price,
                PricingRule::PayAsBid => b.price,
            },
        })
        .collect();
    AuctionResult { clearing_price, awards, procured, unfilled: (target - procured).max(0.0) }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bid(agent: AgentId, q: f64, p: f64) -> AuctionBid {
        AuctionBid::new(agent, TechId::Solar, q, p)
    }

    #[test]
    fn single_lump_over_procures() {
        let r = run_auction(&[bid(0, 10.0, 50.0)], 5.0, 200.0, PricingRule::Marginal);
        assert_eq!(r.awards.len(), 1);
        assert_eq!(r.awards[0].quantity_mw, 10.0);
        assert_eq!(r.clearing_price, 50.0);
        assert_eq!(r.unfilled, 0.0);
    }

    #[test]
    fn three_bid_hand_case() {
        let bids = [bid(0, 10.0, 20.0), bid(1, 10.0, 30.0), bid(2, 10.0, 90.0)];
        let r = run_auction(&bids, 15.0, 200.0, PricingRule::Marginal);
        assert_eq!(r.awards.iter().map(|a| a.agent).collect::<Vec<_>>(), vec![0, 1]);
        assert!(r.awards.iter().all(|a| a.price == 30.0));
        let r = run_auction(&bids, 15.0, 200.0, PricingRule::PayAsBid);
        assert_eq!(r.awards.iter().map(|a| a.price).collect::<Vec<_>>(), vec![20.0, 30.0]);
    }

    #[test]
    fn zero_quantity_auction_is_empty() {
        let r = run_auction(&[bid(0, 0.0, 10.0), bid(1, 0.0, 5.0)], 7.0, 200.0, PricingRule::Marginal);
        assert!(r.awards.is_empty());
        assert_eq!(r.unfilled, 7.0);
    }

    /// Exhaustive lumpy clearing. A feasible acceptance is price-closed
    /// (every bid cheaper than an accepted one is accepted) and covers the
    /// target; among those, the lowest marginal price wins, then the fewest
    /// lumps, then the largest procured total. When the target cannot be
    /// covered every bid is accepted. Returns (clearing price, sorted
    /// (price, contribution) of winners).
    pub(crate) fn brute_force(bids: &[AuctionBid], target: f64, ceiling: f64) -> (f64, Vec<(f64, f64)>) {
        let v: Vec<&AuctionBid> =
            bids.iter().filter(|b| b.contribution > 0.0 && b.quantity_mw > 0.0 && b.price <= ceiling).collect();
        let n = v.len();
        let mut best: Option<(f64, u32, f64, u32)> = None;
        for mask in 1u32..(1 << n) {
            let inc = |i: usize| mask >> i & 1 == 1;
            let max_p = (0..n).filter(|&i| inc(i)).map(|i| v[i].price).fold(f64::MIN, f64::max);
            if (0..n).any(|i| !inc(i) && v[i].price < max_p) {
                continue;
            }
            let total: f64 = (0..n).filter(|&i| inc(i)).map(|i| v[i].contribution).sum();
            if total < target {
                continue;
            }
            let k = mask.count_ones();
            let better = match best {
                None => true,
                Some((bp, bk, bt, _)) => (max_p, k) < (bp, bk) || (max_p == bp && k == bk && total > bt),
            };
            if better {
                best = Some((max_p, k, total, mask));
            }
        }
        let mask = match best {
            Some(b) => b.3,
            None => (1u32 << n) - 1,
        };
        let mut winners: Vec<(f64, f64)> =
            (0..n).filter(|i| mask >> i & 1 == 1).map(|i| (v[i].price, v[i].contribution)).collect();
        winners.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let price = winners.iter().map(|w| w.0).fold(0.0, f64::max);
        (price, winners)
    }

    pub(crate) fn bids_strategy() -> impl Strategy<Value = (Vec<AuctionBid>, f64)> {
        (proptest::collection::vec((0u32..4, 0u32..12, 0usize..4), 0..=6), 1u32..60).prop_map(|(raw, t)| {
            let bids = raw
                .into_iter()
                .enumerate()
                .map(|(i, (q, p, a))| AuctionBid::new(a * 10 + i, TechId::Ccgt, q as f64 * 10.0, p as f64 * 10.0))
                .collect();
            (bids, t as f64)
        })
    }

    proptest! {
        #[test]
        fn marginal_rule_matches_enumeration((bids, target) in bids_strategy()) {
            let ceiling = 100.0;
            let r = run_auction(&bids, target, ceiling, PricingRule::Marginal);
            let (price, winners) = brute_force(&bids, target, ceiling);
            let mut got: Vec<(f64, f64)> = r.awards.iter().map(|a| {
                let b = bids.iter().find(|b| b.agent == a.agent).unwrap();
                (b.price, a.contribution)
            }).collect();
            got.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            prop_assert_eq!(got, winners);
            prop_assert_eq!(r.clearing_price, price);
            prop_assert!(r.clearing_price <= ceiling);
            prop_assert!(r.procured <= target + bids.iter().map(|b| b.contribution).fold(0.0, f64::max));
        }
    }
}
