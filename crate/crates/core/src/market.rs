//! Merit-order clearing of the frequency-reserve market and the cascade of
//! fictitious clearings, one per unit, that prices what each unit would cost
//! the system if it were the largest contingency.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    required_reserve, Contingency, DynamicsError, Service, Side, SystemSnapshot,
};
use crate::exec::Execution;

pub const MW_PER_GW: f64 = 1000.0;

/// A generator or load whose capacity is its potential contingency size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: String,
    pub capacity_gw: f64,
    pub side: Side,
    #[serde(default)]
    pub technology: String,
    /// Pre-reform unit, exempt from allocation.
    #[serde(default)]
    pub existing: bool,
}

impl Unit {
    pub fn new(id: impl Into<String>, capacity_gw: f64, side: Side) -> Self {
        Unit {
            id: id.into(),
            capacity_gw,
            side,
            technology: String::new(),
            existing: false,
        }
    }

    pub fn contingency(&self) -> Contingency {
        Contingency {
            size_gw: self.capacity_gw,
            side: self.side,
        }
    }
}

/// An offer to provide reserve. A zero price models free headroom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReserveBid {
    pub provider_id: String,
    /// Currency per MW per hour.
    pub price: f64,
    pub quantity_gw: f64,
    pub side: Service,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PricingRule {
    /// Every accepted MW is paid the marginal price.
    #[default]
    PayAsClear,
    PayAsBid,
}

impl PricingRule {
    pub fn as_str(self) -> &'static str {
        match self {
            PricingRule::PayAsClear => "pay-as-clear",
            PricingRule::PayAsBid => "pay-as-bid",
        }
    }
}

impl std::str::FromStr for PricingRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pay-as-clear" => Ok(PricingRule::PayAsClear),
            "pay-as-bid" => Ok(PricingRule::PayAsBid),
            other => Err(format!(
                "unknown pricing rule '{other}' (expected pay-as-clear or pay-as-bid)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearedBid {
    pub provider_id: String,
    pub price: f64,
    pub offered_gw: f64,
    pub accepted_gw: f64,
    /// Currency per hour paid to this provider.
    pub payment_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearingResult {
    pub requirement_gw: f64,
    /// Accepted bids in merit order.
    pub cleared: Vec<ClearedBid>,
    pub marginal_price: f64,
    /// Currency per hour.
    pub total_cost_rate: f64,
    pub pricing_rule: PricingRule,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("invalid requirement {0} GW")]
    InvalidRequirement(f64),
    #[error("bid {index} ('{provider_id}'): {message}")]
    InvalidBid {
        index: usize,
        provider_id: String,
        message: String,
    },
    #[error(
        "reserve scarcity: {requirement_gw} GW required, {available_gw} GW offered (shortfall {shortfall_gw} GW)"
    )]
    Scarcity {
        requirement_gw: f64,
        available_gw: f64,
        shortfall_gw: f64,
    },
}

fn validate_bids(bids: &[ReserveBid]) -> Result<(), MarketError> {
    for (index, bid) in bids.iter().enumerate() {
        let message = if !(bid.price.is_finite() && bid.price >= 0.0) {
            format!("price must be >= 0, got {}", bid.price)
        } else if !(bid.quantity_gw.is_finite() && bid.quantity_gw > 0.0) {
            format!("quantity_gw must be > 0, got {}", bid.quantity_gw)
        } else {
            continue;
        };
        return Err(MarketError::InvalidBid {
            index,
            provider_id: bid.provider_id.clone(),
            message,
        });
    }
    Ok(())
}

/// Accepts bids in ascending price order until `requirement_gw` is met.
///
/// Bids sharing the marginal price are accepted pro-rata to their offered
/// quantity, so the outcome does not depend on bid order.
pub fn clear_market(
    requirement_gw: f64,
    bids: &[ReserveBid],
    pricing_rule: PricingRule,
) -> Result<ClearingResult, MarketError> {
    if !(requirement_gw.is_finite() && requirement_gw >= 0.0) {
        return Err(MarketError::InvalidRequirement(requirement_gw));
    }
    validate_bids(bids)?;
    if requirement_gw == 0.0 {
        return Ok(ClearingResult {
            requirement_gw,
            cleared: Vec::new(),
            marginal_price: 0.0,
            total_cost_rate: 0.0,
            pricing_rule,
        });
    }

    let available: f64 = bids.iter().map(|b| b.quantity_gw).sum();
    if available < requirement_gw * (1.0 - 1e-12) {
        return Err(MarketError::Scarcity {
            requirement_gw,
            available_gw: available,
            shortfall_gw: requirement_gw - available,
        });
    }

    let mut order: Vec<usize> = (0..bids.len()).collect();
    order.sort_by(|&a, &b| bids[a].price.total_cmp(&bids[b].price));

    let mut accepted: Vec<(usize, f64)> = Vec::new();
    let mut remaining = requirement_gw;
    let mut start = 0;
    while start < order.len() && remaining > 0.0 {
        let price = bids[order[start]].price;
        let end = start
            + order[start..]
                .iter()
                .take_while(|&&i| bids[i].price == price)
                .count();
        let group = &order[start..end];
        let offered: f64 = group.iter().map(|&i| bids[i].quantity_gw).sum();
        if offered <= remaining {
            accepted.extend(group.iter().map(|&i| (i, bids[i].quantity_gw)));
            remaining -= offered;
        } else {
            let fraction = remaining / offered;
            accepted.extend(group.iter().map(|&i| (i, bids[i].quantity_gw * fraction)));
            remaining = 0.0;
        }
        start = end;
    }

    let marginal_price = accepted.last().map_or(0.0, |&(i, _)| bids[i].price);
    let cleared: Vec<ClearedBid> = accepted
        .into_iter()
        .map(|(i, qty)| {
            let bid = &bids[i];
            let paid_price = match pricing_rule {
                PricingRule::PayAsClear => marginal_price,
                PricingRule::PayAsBid => bid.price,
            };
            ClearedBid {
                provider_id: bid.provider_id.clone(),
                price: bid.price,
                offered_gw: bid.quantity_gw,
                accepted_gw: qty,
                payment_rate: qty * MW_PER_GW * paid_price,
            }
        })
        .collect();

    let total_cost_rate = match pricing_rule {
        PricingRule::PayAsClear => requirement_gw * MW_PER_GW * marginal_price,
        PricingRule::PayAsBid => cleared.iter().map(|c| c.payment_rate).sum(),
    };

    Ok(ClearingResult {
        requirement_gw,
        cleared,
        marginal_price,
        total_cost_rate,
        pricing_rule,
    })
}

/// Standalone cost of one unit: the market cost if it were the largest contingency.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeEntry {
    pub unit_id: String,
    pub capacity_gw: f64,
    pub side: Side,
    pub requirement_gw: f64,
    /// Currency per hour.
    pub standalone_cost_rate: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CascadeError {
    #[error("fleet is empty")]
    EmptyFleet,
    #[error("duplicate unit id '{0}'")]
    DuplicateUnit(String),
    #[error("unit '{unit_id}': {message}")]
    InvalidUnit { unit_id: String, message: String },
    #[error("unit '{unit_id}': {source}")]
    Market {
        unit_id: String,
        #[source]
        source: MarketError,
    },
    #[error("unit '{unit_id}': {source}")]
    Dynamics {
        unit_id: String,
        #[source]
        source: DynamicsError,
    },
}

impl CascadeError {
    pub fn is_scarcity(&self) -> bool {
        matches!(
            self,
            CascadeError::Market {
                source: MarketError::Scarcity { .. },
                ..
            } | CascadeError::Dynamics {
                source: DynamicsError::RocofInfeasible { .. },
                ..
            }
        )
    }
}

pub(crate) fn validate_units(units: &[Unit]) -> Result<(), CascadeError> {
    if units.is_empty() {
        return Err(CascadeError::EmptyFleet);
    }
    let mut seen = HashSet::new();
    for unit in units {
        if !(unit.capacity_gw.is_finite() && unit.capacity_gw >= 0.0) {
            return Err(CascadeError::InvalidUnit {
                unit_id: unit.id.clone(),
                message: format!("capacity_gw must be >= 0, got {}", unit.capacity_gw),
            });
        }
        if !seen.insert(unit.id.as_str()) {
            return Err(CascadeError::DuplicateUnit(unit.id.clone()));
        }
    }
    Ok(())
}

/// Cascade order: generation side first, then capacity descending, then id.
pub fn cascade_order(units: &[Unit]) -> Vec<&Unit> {
    let mut sorted: Vec<&Unit> = units.iter().collect();
    sorted.sort_by(|a, b| {
        a.side
            .cmp(&b.side)
            .then(b.capacity_gw.total_cmp(&a.capacity_gw))
            .then_with(|| a.id.cmp(&b.id))
    });
    sorted
}

fn bids_for(bids: &[ReserveBid], service: Service) -> Vec<ReserveBid> {
    bids.iter().filter(|b| b.side == service).cloned().collect()
}

/// Clears the market for the contingency of a single unit.
pub fn clear_for_unit(
    snapshot: &SystemSnapshot,
    unit: &Unit,
    bids: &[ReserveBid],
    pricing_rule: PricingRule,
) -> Result<ClearingResult, CascadeError> {
    let requirement = required_reserve(snapshot, unit.contingency()).map_err(|source| {
        CascadeError::Dynamics {
            unit_id: unit.id.clone(),
            source,
        }
    })?;
    let side_bids = bids_for(bids, unit.side.service());
    clear_market(requirement, &side_bids, pricing_rule).map_err(|source| CascadeError::Market {
        unit_id: unit.id.clone(),
        source,
    })
}

/// Runs one fictitious clearing per unit with the snapshot's bids held fixed.
/// Generation units clear against under-frequency bids, demand units against
/// over-frequency bids.
pub fn fictitious_cost_cascade(
    snapshot: &SystemSnapshot,
    units: &[Unit],
    bids: &[ReserveBid],
    pricing_rule: PricingRule,
) -> Result<Vec<CascadeEntry>, CascadeError> {
    fictitious_cost_cascade_with(snapshot, units, bids, pricing_rule, Execution::default())
}

pub fn fictitious_cost_cascade_with(
    snapshot: &SystemSnapshot,
    units: &[Unit],
    bids: &[ReserveBid],
    pricing_rule: PricingRule,
    exec: Execution,
) -> Result<Vec<CascadeEntry>, CascadeError> {
    validate_units(units)?;
    snapshot
        .validate()
        .map_err(|source| CascadeError::Dynamics {
            unit_id: String::new(),
            source,
        })?;
    validate_bids(bids).map_err(|source| CascadeError::Market {
        unit_id: String::new(),
        source,
    })?;
    let under = bids_for(bids, Service::UnderFrequency);
    let over = bids_for(bids, Service::OverFrequency);
    let ordered = cascade_order(units);

    exec.map(&ordered, |unit| {
        let side_bids = match unit.side.service() {
            Service::UnderFrequency => &under,
            Service::OverFrequency => &over,
        };
        let requirement = required_reserve(snapshot, unit.contingency()).map_err(|source| {
            CascadeError::Dynamics {
                unit_id: unit.id.clone(),
                source,
            }
        })?;
        let clearing = clear_market(requirement, side_bids, pricing_rule).map_err(|source| {
            CascadeError::Market {
                unit_id: unit.id.clone(),
                source,
            }
        })?;
        Ok(CascadeEntry {
            unit_id: unit.id.clone(),
            capacity_gw: unit.capacity_gw,
            side: unit.side,
            requirement_gw: requirement,
            standalone_cost_rate: clearing.total_cost_rate,
        })
    })
    .into_iter()
    .collect()
}
