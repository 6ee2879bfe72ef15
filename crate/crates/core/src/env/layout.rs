//! Multi-discrete action layout, masks and decoding.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::ids::TechId;
use crate::longterm::{grid_value, PRICE_STEPS, QTY_STEPS, SOC_STEPS};
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "tech", rename_all = "snake_case")]
pub enum DimKind {
    Merchant(TechId),
    CfdQty(TechId),
    CfdPrice(TechId),
    CmQty(TechId),
    CmPrice(TechId),
    Soc,
}

impl fmt::Display for DimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimKind::Merchant(t) => write!(f, "merchant_qty[{t}]"),
            DimKind::CfdQty(t) => write!(f, "cfd_qty[{t}]"),
            DimKind::CfdPrice(t) => write!(f, "cfd_price[{t}]"),
            DimKind::CmQty(t) => write!(f, "cm_qty[{t}]"),
            DimKind::CmPrice(t) => write!(f, "cm_price[{t}]"),
            DimKind::Soc => write!(f, "soc_target"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionDim {
    pub kind: DimKind,
    pub steps: usize,
}

/// Ordered action dimensions: merchant quantities, CfD quantities, CfD
/// prices, CM quantities, CM prices, storage target.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionLayout {
    pub dims: Vec<ActionDim>,
}

impl ActionLayout {
    /// Investable technologies enter the merchant and CM blocks; investable
    /// renewables enter the CfD blocks.
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let inv: Vec<TechId> = scenario.technologies.iter().filter(|t| t.is_investable()).map(|t| t.id).collect();
        let res: Vec<TechId> = inv.iter().copied().filter(|t| t.is_res()).collect();
        Self::from_sets(&inv, &res)
    }

    pub fn from_sets(investable: &[TechId], res: &[TechId]) -> Self {
        let mut dims = Vec::new();
        let mut push = |kind, steps| dims.push(ActionDim { kind, steps });
        for &t in investable {
            push(DimKind::Merchant(t), QTY_STEPS);
        }
        for &t in res {
            push(DimKind::CfdQty(t), QTY_STEPS);
        }
        for &t in res {
            push(DimKind::CfdPrice(t), PRICE_STEPS);
        }
        for &t in investable {
            push(DimKind::CmQty(t), QTY_STEPS);
        }
        for &t in investable {
            push(DimKind::CmPrice(t), PRICE_STEPS);
        }
        push(DimKind::Soc, SOC_STEPS);
        Self { dims }
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Total number of logits across dimensions.
    pub fn total_choices(&self) -> usize {
        self.dims.iter().map(|d| d.steps).sum()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d.steps).collect()
    }

    /// Start of each dimension's block in the flat logit vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.dims.len());
        let mut acc = 0;
        for d in &self.dims {
            off.push(acc);
            acc += d.steps;
        }
        off
    }

    pub fn position(&self, kind: DimKind) -> Option<usize> {
        self.dims.iter().position(|d| d.kind == kind)
    }

    /// One line per dimension, used to report layout mismatches.
    pub fn describe(&self) -> Vec<String> {
        self.dims.iter().map(|d| format!("{}x{}", d.kind, d.steps)).collect()
    }
}

/// Allowed indices per dimension, flattened in layout order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionMask {
    pub allowed: Vec<bool>,
}

impl ActionMask {
    pub fn all(layout: &ActionLayout) -> Self {
        Self { allowed: vec![true; layout.total_choices()] }
    }

    /// Only index 0 allowed in every dimension.
    pub fn none(layout: &ActionLayout) -> Self {
        let mut allowed = vec![false; layout.total_choices()];
        for o in layout.offsets() {
            allowed[o] = true;
        }
        Self { allowed }
    }

    pub fn set_live(&mut self, layout: &ActionLayout, dim: usize, live: bool) {
        let off = layout.offsets()[dim];
        for i in 1..layout.dims[dim].steps {
            self.allowed[off + i] = live;
        }
        self.allowed[off] = true;
    }

    pub fn is_allowed(&self, offset: usize, idx: usize) -> bool {
        self.allowed[offset + idx]
    }
}

/// Decoded action of one agent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentDecision {
    /// MW per technology.
    pub merchant: Vec<(TechId, f64)>,
    /// (tech, MW, price).
    pub cfd: Vec<(TechId, f64, f64)>,
    /// (tech, MW, price).
    pub cm: Vec<(TechId, f64, f64)>,
    pub soc_target: f64,
}

/// Maps grid indices to quantities and prices. Caller checks the mask.
pub fn decode_actions(layout: &ActionLayout, scenario: &Scenario, idx: &[usize]) -> Result<AgentDecision, (usize, usize)> {
    let cap = |t: TechId| scenario.tech(t).map_or(0.0, |x| x.max_invest_mw);
    let mut d = AgentDecision::default();
    let mut cfd_q = Vec::new();
    let mut cm_q = Vec::new();
    for (k, (dim, &i)) in layout.dims.iter().zip(idx).enumerate() {
        if i >= dim.steps {
            return Err((k, i));
        }
        match dim.kind {
            DimKind::Merchant(t) => d.merchant.push((t, grid_value(i, dim.steps, cap(t)))),
            DimKind::CfdQty(t) => cfd_q.push((t, grid_value(i, dim.steps, cap(t)))),
            DimKind::CfdPrice(t) => {
                let q = cfd_q.iter().find(|x: &&(TechId, f64)| x.0 == t).map_or(0.0, |x| x.1);
                d.cfd.push((t, q, grid_value(i, dim.steps, scenario.market.cfd_price_cap)));
            }
            DimKind::CmQty(t) => cm_q.push((t, grid_value(i, dim.steps, cap(t)))),
            DimKind::CmPrice(t) => {
                let q = cm_q.iter().find(|x: &&(TechId, f64)| x.0 == t).map_or(0.0, |x| x.1);
                d.cm.push((t, q, grid_value(i, dim.steps, scenario.market.cm_price_cap)));
            }
            DimKind::Soc => d.soc_target = grid_value(i, dim.steps, 1.0),
        }
    }
    Ok(d)
}
