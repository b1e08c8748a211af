//! Project viability under the allocated ancillary-services cost, and the
//! plant-splitting what-if.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::SharingRule;
use crate::market::Unit;
use crate::scenario::{run_pipeline, PipelineError, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct YearEntry {
    pub revenues_electricity: f64,
    pub revenues_ancillary: f64,
    pub cost_fuel: f64,
    pub cost_ancillary: f64,
    pub cost_others: f64,
}

impl YearEntry {
    pub fn net(&self) -> f64 {
        self.revenues_electricity + self.revenues_ancillary
            - self.cost_fuel
            - self.cost_ancillary
            - self.cost_others
    }
}

/// Lifetime cash-flow summary of a project, one entry per year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViabilityLedger {
    pub lifetime_years: u32,
    pub years: Vec<YearEntry>,
    pub cost_investment: f64,
    pub profit_sought: f64,
}

impl ViabilityLedger {
    /// A ledger repeating the same year `lifetime_years` times.
    pub fn uniform(
        lifetime_years: u32,
        year: YearEntry,
        cost_investment: f64,
        profit_sought: f64,
    ) -> Self {
        ViabilityLedger {
            lifetime_years,
            years: vec![year; lifetime_years as usize],
            cost_investment,
            profit_sought,
        }
    }

    /// Every monetary entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        ViabilityLedger {
            lifetime_years: self.lifetime_years,
            years: self
                .years
                .iter()
                .map(|y| YearEntry {
                    revenues_electricity: y.revenues_electricity * factor,
                    revenues_ancillary: y.revenues_ancillary * factor,
                    cost_fuel: y.cost_fuel * factor,
                    cost_ancillary: y.cost_ancillary * factor,
                    cost_others: y.cost_others * factor,
                })
                .collect(),
            cost_investment: self.cost_investment * factor,
            profit_sought: self.profit_sought * factor,
        }
    }

    pub fn validate(&self) -> Result<(), InvestmentError> {
        if self.lifetime_years < 1 {
            return Err(InvestmentError::Ledger(
                "lifetime_years must be >= 1".into(),
            ));
        }
        if self.years.len() != self.lifetime_years as usize {
            return Err(InvestmentError::Ledger(format!(
                "years has {} entries, expected lifetime_years = {}",
                self.years.len(),
                self.lifetime_years
            )));
        }
        for (i, y) in self.years.iter().enumerate() {
            let costs = [
                ("cost_fuel", y.cost_fuel),
                ("cost_ancillary", y.cost_ancillary),
                ("cost_others", y.cost_others),
            ];
            for (name, v) in costs {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(InvestmentError::Ledger(format!(
                        "years[{i}].{name} must be >= 0, got {v}"
                    )));
                }
            }
            if !(y.revenues_electricity.is_finite() && y.revenues_ancillary.is_finite()) {
                return Err(InvestmentError::Ledger(format!(
                    "years[{i}]: revenues must be finite"
                )));
            }
        }
        for (name, v) in [
            ("cost_investment", self.cost_investment),
            ("profit_sought", self.profit_sought),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(InvestmentError::Ledger(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viability {
    pub viable: bool,
    pub net_margin: f64,
}

#[derive(Debug, Error)]
pub enum InvestmentError {
    #[error("invalid ledger: {0}")]
    Ledger(String),
    #[error("unit '{0}' is not in the scenario fleet")]
    UnknownUnit(String),
    #[error("invalid split: {0}")]
    Split(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Lifetime net cash flow less investment and sought profit; viable when non-negative.
pub fn evaluate_viability(ledger: &ViabilityLedger) -> Result<Viability, InvestmentError> {
    ledger.validate()?;
    let operating: f64 = ledger.years.iter().map(YearEntry::net).sum();
    let net_margin = operating - ledger.cost_investment - ledger.profit_sought;
    Ok(Viability {
        viable: net_margin >= 0.0,
        net_margin,
    })
}

/// Σ over snapshots of `weight_hours × allocated cost rate` for one unit.
pub fn annual_ancillary_cost(
    scenario: &Scenario,
    unit_id: &str,
    rule: SharingRule,
) -> Result<f64, InvestmentError> {
    if !scenario.fleet.iter().any(|u| u.id == unit_id) {
        return Err(InvestmentError::UnknownUnit(unit_id.to_string()));
    }
    let mut scenario = scenario.clone();
    scenario.allocation_rule = rule;
    let report = run_pipeline(&scenario)?;
    Ok(report
        .annual_costs
        .iter()
        .find(|a| a.unit_id == unit_id)
        .map_or(0.0, |a| a.annual_cost))
}

/// Cost penalties of building `k` smaller units instead of one. Always
/// supplied by the caller; there is no sensible default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitAdjustments {
    /// Extra fuel cost per year from lower efficiency.
    pub fuel_cost_per_year: f64,
    /// Extra up-front investment from losing economies of scale.
    pub investment_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartSnapshot {
    pub snapshot_label: String,
    pub requirement_gw: f64,
    pub allocated_cost_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationReport {
    pub configuration: String,
    pub parts: u32,
    pub part_capacity_gw: f64,
    /// Standalone requirement and allocation of one part, per snapshot.
    pub per_part: Vec<PartSnapshot>,
    /// All parts together, per year.
    pub annual_ancillary_cost: f64,
    pub viability: Viability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitComparison {
    pub unsplit: ConfigurationReport,
    pub split: ConfigurationReport,
    /// Name of the configuration with the larger margin; ties go to the unsplit plant.
    pub winner: String,
}

impl SplitComparison {
    pub fn configurations(&self) -> [&ConfigurationReport; 2] {
        [&self.unsplit, &self.split]
    }
}

fn part_ids(unit: &Unit, parts: u32) -> Vec<String> {
    if parts == 1 {
        vec![unit.id.clone()]
    } else {
        (1..=parts).map(|k| format!("{}#{k}", unit.id)).collect()
    }
}

fn evaluate_configuration(
    scenario: &Scenario,
    unit: &Unit,
    parts: u32,
    ledger: &ViabilityLedger,
    extra_fuel: f64,
    extra_investment: f64,
) -> Result<ConfigurationReport, InvestmentError> {
    let part_capacity = unit.capacity_gw / parts as f64;
    let ids = part_ids(unit, parts);
    let mut config = scenario.clone();
    config.fleet.retain(|u| u.id != unit.id);
    config.fleet.extend(ids.iter().map(|id| Unit {
        id: id.clone(),
        capacity_gw: part_capacity,
        ..unit.clone()
    }));
    config.sweep = None;
    let report = run_pipeline(&config)?;

    let per_part = report
        .snapshots
        .iter()
        .map(|snap| {
            let entry = snap
                .side(unit.side)
                .and_then(|s| s.cascade.iter().find(|e| e.unit_id == ids[0]))
                .expect("part is in the fleet");
            PartSnapshot {
                snapshot_label: snap.label.clone(),
                requirement_gw: entry.requirement_gw,
                allocated_cost_rate: snap.allocated(&ids[0]).unwrap_or(0.0),
            }
        })
        .collect();
    let annual: f64 = report
        .annual_costs
        .iter()
        .filter(|a| ids.contains(&a.unit_id))
        .map(|a| a.annual_cost)
        .sum();

    let mut ledger = ledger.clone();
    for year in ledger.years.iter_mut() {
        year.cost_ancillary = annual;
        year.cost_fuel += extra_fuel;
    }
    ledger.cost_investment += extra_investment;
    let viability = evaluate_viability(&ledger)?;

    Ok(ConfigurationReport {
        configuration: if parts == 1 {
            "unsplit".to_string()
        } else {
            format!("split-{parts}x{part_capacity}gw")
        },
        parts,
        part_capacity_gw: part_capacity,
        per_part,
        annual_ancillary_cost: annual,
        viability,
    })
}

/// Compares building `unit` as one plant against `parts` equal units.
///
/// `unit` replaces any fleet unit with the same id. The ledger's
/// `cost_ancillary` entries are overwritten with each configuration's
/// computed annual cost; the split configuration also carries `adjustments`.
pub fn compare_split(
    scenario: &Scenario,
    unit: &Unit,
    parts: u32,
    ledger: &ViabilityLedger,
    adjustments: &SplitAdjustments,
) -> Result<SplitComparison, InvestmentError> {
    if parts == 0 {
        return Err(InvestmentError::Split("parts must be >= 1".into()));
    }
    if !(unit.capacity_gw.is_finite() && unit.capacity_gw / parts as f64 > 0.0) {
        return Err(InvestmentError::Split(format!(
            "capacity {} GW split {parts} ways leaves no capacity per part",
            unit.capacity_gw
        )));
    }
    for (name, v) in [
        ("fuel_cost_per_year", adjustments.fuel_cost_per_year),
        ("investment_cost", adjustments.investment_cost),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(InvestmentError::Split(format!(
                "{name} must be >= 0, got {v}"
            )));
        }
    }
    ledger.validate()?;

    let unsplit = evaluate_configuration(scenario, unit, 1, ledger, 0.0, 0.0)?;
    let split = if parts == 1 {
        unsplit.clone()
    } else {
        evaluate_configuration(
            scenario,
            unit,
            parts,
            ledger,
            adjustments.fuel_cost_per_year,
            adjustments.investment_cost,
        )?
    };
    let winner = if split.viability.net_margin > unsplit.viability.net_margin {
        split.configuration.clone()
    } else {
        unsplit.configuration.clone()
    };
    Ok(SplitComparison {
        unsplit,
        split,
        winner,
    })
}
