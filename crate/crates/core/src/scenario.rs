//! Scenario documents and the three-step pipeline: real clearing, fictitious
//! cascade, cost sharing. Also the capacity sweep behind allocation curves.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{
    allocate, cutoff_size, filter_existing, AllocationError, AllocationResult, Claim, SharingRule,
    ZERO_SHARE,
};
use crate::dynamics::{DynamicsError, Service, Side, SystemSnapshot};
use crate::exec::Execution;
use crate::market::{
    clear_for_unit, fictitious_cost_cascade_with, CascadeEntry, CascadeError, ClearingResult,
    PricingRule, ReserveBid, Unit,
};

pub const HOURS_PER_YEAR: f64 = 8760.0;

/// One snapshot with its bid stack and optional per-snapshot capacity edits
/// (e.g. a plant running part-loaded during low-inertia hours).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotCase {
    #[serde(flatten)]
    pub system: SystemSnapshot,
    pub bids: Vec<ReserveBid>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub capacity_overrides_gw: BTreeMap<String, f64>,
}

impl SnapshotCase {
    /// Fleet as seen in this snapshot, overrides applied.
    pub fn effective_fleet(&self, fleet: &[Unit]) -> Vec<Unit> {
        fleet
            .iter()
            .map(|u| {
                let mut unit = u.clone();
                if let Some(&cap) = self.capacity_overrides_gw.get(&u.id) {
                    unit.capacity_gw = cap;
                }
                unit
            })
            .collect()
    }
}

fn default_probe_id() -> String {
    "probe".to_string()
}

fn default_probe_side() -> Side {
    Side::Generation
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub capacity_gw: Vec<f64>,
    #[serde(default = "default_probe_id")]
    pub probe_id: String,
    #[serde(default = "default_probe_side")]
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub allocation_rule: SharingRule,
    #[serde(default)]
    pub pricing_rule: PricingRule,
    pub fleet: Vec<Unit>,
    pub snapshots: Vec<SnapshotCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn field_error(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("scenario serialises");
        text.push('\n');
        text
    }

    pub fn snapshot(&self, label: &str) -> Option<&SnapshotCase> {
        self.snapshots.iter().find(|s| s.system.label == label)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.fleet.is_empty() {
            return Err(field_error("fleet", "must contain at least one unit"));
        }
        let mut ids = HashSet::new();
        for (i, unit) in self.fleet.iter().enumerate() {
            if unit.id.is_empty() {
                return Err(field_error(format!("fleet[{i}].id"), "must not be empty"));
            }
            if !ids.insert(unit.id.as_str()) {
                return Err(field_error(
                    format!("fleet[{i}].id"),
                    format!("duplicate id '{}'", unit.id),
                ));
            }
            if !(unit.capacity_gw.is_finite() && unit.capacity_gw >= 0.0) {
                return Err(field_error(
                    format!("fleet[{i}].capacity_gw"),
                    format!("must be >= 0, got {}", unit.capacity_gw),
                ));
            }
        }

        if self.snapshots.is_empty() {
            return Err(field_error(
                "snapshots",
                "must contain at least one snapshot",
            ));
        }
        let mut labels = HashSet::new();
        let mut hours = 0.0;
        for (i, case) in self.snapshots.iter().enumerate() {
            let snap = &case.system;
            if let Err(DynamicsError::InvalidInput { field, message }) = snap.validate() {
                return Err(field_error(format!("snapshots[{i}].{field}"), message));
            }
            if !labels.insert(snap.label.as_str()) {
                return Err(field_error(
                    format!("snapshots[{i}].label"),
                    format!("duplicate label '{}'", snap.label),
                ));
            }
            hours += snap.weight_hours;
            for (j, bid) in case.bids.iter().enumerate() {
                if !(bid.price.is_finite() && bid.price >= 0.0) {
                    return Err(field_error(
                        format!("snapshots[{i}].bids[{j}].price"),
                        format!("must be >= 0, got {}", bid.price),
                    ));
                }
                if !(bid.quantity_gw.is_finite() && bid.quantity_gw > 0.0) {
                    return Err(field_error(
                        format!("snapshots[{i}].bids[{j}].quantity_gw"),
                        format!("must be > 0, got {}", bid.quantity_gw),
                    ));
                }
            }
            for (id, &cap) in &case.capacity_overrides_gw {
                if !ids.contains(id.as_str()) {
                    return Err(field_error(
                        format!("snapshots[{i}].capacity_overrides_gw.{id}"),
                        "no unit with this id in fleet",
                    ));
                }
                if !(cap.is_finite() && cap >= 0.0) {
                    return Err(field_error(
                        format!("snapshots[{i}].capacity_overrides_gw.{id}"),
                        format!("must be >= 0, got {cap}"),
                    ));
                }
            }
            let fleet = case.effective_fleet(&self.fleet);
            for side in [Side::Generation, Side::Demand] {
                let needs = fleet.iter().any(|u| u.side == side && u.capacity_gw > 0.0);
                let service = side.service();
                if needs && !case.bids.iter().any(|b| b.side == service) {
                    return Err(field_error(
                        format!("snapshots[{i}].bids"),
                        format!(
                            "fleet has {} units but no {} bids",
                            side.as_str(),
                            service.as_str()
                        ),
                    ));
                }
            }
        }
        if hours > HOURS_PER_YEAR {
            return Err(field_error(
                "snapshots.weight_hours",
                format!("total {hours} h exceeds {HOURS_PER_YEAR} h per year"),
            ));
        }

        if let Some(sweep) = &self.sweep {
            validate_grid(&sweep.capacity_gw)?;
            if ids.contains(sweep.probe_id.as_str()) {
                return Err(field_error(
                    "sweep.probe_id",
                    format!("'{}' clashes with a fleet unit", sweep.probe_id),
                ));
            }
        }
        Ok(())
    }
}

fn validate_grid(grid: &[f64]) -> Result<(), ScenarioError> {
    if grid.is_empty() {
        return Err(field_error("sweep.capacity_gw", "must not be empty"));
    }
    for (i, &c) in grid.iter().enumerate() {
        if !(c.is_finite() && c > 0.0) {
            return Err(field_error(
                format!("sweep.capacity_gw[{i}]"),
                format!("must be > 0, got {c}"),
            ));
        }
        if i > 0 && c <= grid[i - 1] {
            return Err(field_error(
                format!("sweep.capacity_gw[{i}]"),
                "grid must be strictly ascending",
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("snapshot '{label}': {source}")]
    Cascade {
        label: String,
        #[source]
        source: CascadeError,
    },
    #[error("snapshot '{label}': {source}")]
    Allocation {
        label: String,
        #[source]
        source: AllocationError,
    },
}

impl PipelineError {
    /// Scarcity or RoCoF infeasibility, as opposed to bad input.
    pub fn is_scarcity(&self) -> bool {
        matches!(self, PipelineError::Cascade { source, .. } if source.is_scarcity())
    }
}

/// Steps 1–3 for one side (under- or over-frequency) of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SideReport {
    pub side: Side,
    pub largest_unit_id: String,
    /// Step 1: the real market, sized by the largest unit.
    pub clearing: ClearingResult,
    /// Step 2, in cascade order.
    pub cascade: Vec<CascadeEntry>,
    /// Step 3 before the existing-unit exemption.
    pub raw_allocation: AllocationResult,
    /// Step 3 after moving existing units' shares to the residual.
    pub allocation: AllocationResult,
    pub cutoff_size_gw: f64,
}

impl SideReport {
    pub fn service(&self) -> Service {
        self.side.service()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotReport {
    pub label: String,
    pub weight_hours: f64,
    pub fleet: Vec<Unit>,
    pub sides: Vec<SideReport>,
}

impl SnapshotReport {
    pub fn side(&self, side: Side) -> Option<&SideReport> {
        self.sides.iter().find(|s| s.side == side)
    }

    /// Allocated cost rate of a unit after the exemption, if it is in this snapshot.
    pub fn allocated(&self, unit_id: &str) -> Option<f64> {
        self.sides
            .iter()
            .find_map(|s| s.allocation.share_of(unit_id))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnualCost {
    pub unit_id: String,
    pub side: Side,
    pub annual_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario_name: String,
    pub rule: SharingRule,
    pub pricing_rule: PricingRule,
    pub snapshots: Vec<SnapshotReport>,
    /// Fleet order.
    pub annual_costs: Vec<AnnualCost>,
}

impl RunReport {
    pub fn snapshot(&self, label: &str) -> Option<&SnapshotReport> {
        self.snapshots.iter().find(|s| s.label == label)
    }
}

/// Runs the pipeline for a single snapshot of an already-validated scenario.
pub fn run_snapshot(
    scenario: &Scenario,
    case: &SnapshotCase,
    exec: Execution,
) -> Result<SnapshotReport, PipelineError> {
    let label = case.system.label.clone();
    let fleet = case.effective_fleet(&scenario.fleet);
    let cascade = fictitious_cost_cascade_with(
        &case.system,
        &fleet,
        &case.bids,
        scenario.pricing_rule,
        exec,
    )
    .map_err(|source| PipelineError::Cascade {
        label: label.clone(),
        source,
    })?;

    let mut sides = Vec::new();
    for side in [Side::Generation, Side::Demand] {
        let entries: Vec<CascadeEntry> =
            cascade.iter().filter(|e| e.side == side).cloned().collect();
        let Some(largest) = entries.first() else {
            continue;
        };
        let largest_unit = fleet
            .iter()
            .find(|u| u.id == largest.unit_id)
            .expect("cascade entries come from the fleet");
        let clearing = clear_for_unit(
            &case.system,
            largest_unit,
            &case.bids,
            scenario.pricing_rule,
        )
        .map_err(|source| PipelineError::Cascade {
            label: label.clone(),
            source,
        })?;
        let claims: Vec<Claim> = entries.iter().map(Claim::from).collect();
        let raw = allocate(&claims, scenario.allocation_rule).map_err(|source| {
            PipelineError::Allocation {
                label: label.clone(),
                source,
            }
        })?;
        let cutoff = cutoff_size(&raw, &fleet);
        let allocation = filter_existing(&fleet, &raw);
        sides.push(SideReport {
            side,
            largest_unit_id: largest.unit_id.clone(),
            clearing,
            cascade: entries,
            raw_allocation: raw,
            allocation,
            cutoff_size_gw: cutoff,
        });
    }

    Ok(SnapshotReport {
        label,
        weight_hours: case.system.weight_hours,
        fleet,
        sides,
    })
}

pub fn run_pipeline(scenario: &Scenario) -> Result<RunReport, PipelineError> {
    run_pipeline_with(scenario, Execution::default())
}

/// Snapshots are evaluated independently; the report keeps scenario order.
pub fn run_pipeline_with(scenario: &Scenario, exec: Execution) -> Result<RunReport, PipelineError> {
    scenario.validate()?;
    // nested loops stay sequential; the outer level carries the parallelism
    let snapshots = exec
        .map(&scenario.snapshots, |case| {
            run_snapshot(scenario, case, Execution::Sequential)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let annual_costs = scenario
        .fleet
        .iter()
        .map(|unit| AnnualCost {
            unit_id: unit.id.clone(),
            side: unit.side,
            annual_cost: snapshots
                .iter()
                .map(|s| s.weight_hours * s.allocated(&unit.id).unwrap_or(0.0))
                .sum(),
        })
        .collect();

    Ok(RunReport {
        scenario_name: scenario.name.clone(),
        rule: scenario.allocation_rule,
        pricing_rule: scenario.pricing_rule,
        snapshots,
        annual_costs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub capacity_gw: f64,
    pub snapshot_label: String,
    /// Probe's allocated cost rate, or the error message for this grid point.
    pub outcome: Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    /// Grid order, then scenario snapshot order.
    pub points: Vec<SweepPoint>,
    /// Largest grid capacity allocated zero, per snapshot in scenario order.
    pub cutoffs: Vec<(String, Option<f64>)>,
}

impl SweepTable {
    pub fn curve(&self, label: &str) -> Vec<(f64, Result<f64, String>)> {
        self.points
            .iter()
            .filter(|p| p.snapshot_label == label)
            .map(|p| (p.capacity_gw, p.outcome.clone()))
            .collect()
    }
}

/// Scenario with a probe unit of the given capacity appended to the fleet.
pub fn with_probe(scenario: &Scenario, capacity_gw: f64) -> Scenario {
    let (id, side) = scenario
        .sweep
        .as_ref()
        .map_or((default_probe_id(), default_probe_side()), |s| {
            (s.probe_id.clone(), s.side)
        });
    let mut probed = scenario.clone();
    probed.fleet.push(Unit {
        id,
        capacity_gw,
        side,
        technology: "probe".to_string(),
        existing: false,
    });
    probed.sweep = None;
    probed
}

pub fn sweep_allocation_curve(
    scenario: &Scenario,
    grid: &[f64],
) -> Result<SweepTable, ScenarioError> {
    sweep_allocation_curve_with(scenario, grid, Execution::default())
}

/// Inserts a probe unit at each grid capacity and records its allocated cost
/// per snapshot. Failures at a grid point are recorded and the sweep continues.
pub fn sweep_allocation_curve_with(
    scenario: &Scenario,
    grid: &[f64],
    exec: Execution,
) -> Result<SweepTable, ScenarioError> {
    scenario.validate()?;
    validate_grid(grid)?;
    let probe_id = scenario
        .sweep
        .as_ref()
        .map_or_else(default_probe_id, |s| s.probe_id.clone());
    if scenario.fleet.iter().any(|u| u.id == probe_id) {
        return Err(field_error(
            "sweep.probe_id",
            format!("'{probe_id}' clashes with a fleet unit"),
        ));
    }

    let rows = exec.map(grid, |&capacity| {
        let probed = with_probe(scenario, capacity);
        let valid = probed.validate().map_err(|e| e.to_string());
        probed
            .snapshots
            .iter()
            .map(|case| {
                let outcome = valid.clone().and_then(|()| {
                    run_snapshot(&probed, case, Execution::Sequential)
                        .map_err(|e| e.to_string())
                        .map(|r| r.allocated(&probe_id).unwrap_or(0.0))
                });
                SweepPoint {
                    capacity_gw: capacity,
                    snapshot_label: case.system.label.clone(),
                    outcome,
                }
            })
            .collect::<Vec<_>>()
    });
    let points: Vec<SweepPoint> = rows.into_iter().flatten().collect();

    let cutoffs = scenario
        .snapshots
        .iter()
        .map(|case| {
            let label = &case.system.label;
            let cutoff = points
                .iter()
                .filter(|p| &p.snapshot_label == label)
                .filter(|p| matches!(p.outcome, Ok(v) if v < ZERO_SHARE))
                .map(|p| p.capacity_gw)
                .fold(None, |acc: Option<f64>, c| {
                    Some(acc.map_or(c, |a| a.max(c)))
                });
            (label.clone(), cutoff)
        })
        .collect();

    Ok(SweepTable { points, cutoffs })
}
