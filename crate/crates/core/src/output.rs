//! CSV emission. Every table has a header row and floats are printed with
//! 9 significant digits (`%.9g` style).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dynamics::FrequencyTrace;
use crate::investment::SplitComparison;
use crate::market::ClearingResult;
use crate::scenario::{RunReport, SweepTable};

const SIG_DIGITS: usize = 9;

/// Formats like C's `%.9g`: fixed or scientific depending on magnitude,
/// trailing zeros stripped.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIG_DIGITS as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

type CsvResult = Result<(), csv::Error>;

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_trace_csv<W: Write>(w: W, trace: &FrequencyTrace) -> CsvResult {
    let mut out = writer(w);
    out.write_record(["time_s", "delta_f_hz"])?;
    for (t, d) in trace.times_s.iter().zip(&trace.deviations_hz) {
        out.write_record([fmt_sig(*t), fmt_sig(*d)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_clearing_csv<W: Write>(w: W, clearing: &ClearingResult) -> CsvResult {
    let mut out = writer(w);
    out.write_record(["bid_id", "accepted_gw", "price", "payment_rate"])?;
    for c in &clearing.cleared {
        out.write_record([
            c.provider_id.clone(),
            fmt_sig(c.accepted_gw),
            fmt_sig(c.price),
            fmt_sig(c.payment_rate),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Allocation table for one snapshot: the plain per-unit columns.
pub fn write_allocation_csv<W: Write>(w: W, report: &RunReport, snapshot_label: &str) -> CsvResult {
    let mut out = writer(w);
    out.write_record([
        "unit_id",
        "capacity_gw",
        "side",
        "standalone_cost_rate",
        "allocated_cost_rate",
        "rule",
    ])?;
    if let Some(snap) = report.snapshot(snapshot_label) {
        for side in &snap.sides {
            for entry in &side.cascade {
                out.write_record([
                    entry.unit_id.clone(),
                    fmt_sig(entry.capacity_gw),
                    entry.side.as_str().to_string(),
                    fmt_sig(entry.standalone_cost_rate),
                    fmt_sig(side.allocation.share_of(&entry.unit_id).unwrap_or(0.0)),
                    report.rule.as_str().to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: W, table: &SweepTable) -> CsvResult {
    let mut out = writer(w);
    out.write_record([
        "capacity_gw",
        "snapshot_label",
        "allocated_cost_rate",
        "status",
    ])?;
    for p in &table.points {
        let (value, status) = match &p.outcome {
            Ok(v) => (fmt_sig(*v), "ok".to_string()),
            Err(e) => (String::new(), e.clone()),
        };
        out.write_record([
            fmt_sig(p.capacity_gw),
            p.snapshot_label.clone(),
            value,
            status,
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_cutoffs_csv<W: Write>(w: W, table: &SweepTable) -> CsvResult {
    let mut out = writer(w);
    out.write_record(["snapshot_label", "cutoff_size_gw"])?;
    for (label, cutoff) in &table.cutoffs {
        out.write_record([label.clone(), cutoff.map_or_else(String::new, fmt_sig)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_split_csv<W: Write>(w: W, comparison: &SplitComparison) -> CsvResult {
    let mut out = writer(w);
    out.write_record([
        "configuration",
        "annual_ancillary_cost",
        "net_margin",
        "viable",
    ])?;
    for c in comparison.configurations() {
        out.write_record([
            c.configuration.clone(),
            fmt_sig(c.annual_ancillary_cost),
            fmt_sig(c.viability.net_margin),
            c.viability.viable.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes every table of a pipeline run into `dir`:
/// `summary.csv`, `clearing.csv`, `allocation.csv`, `annual_costs.csv`, and
/// `sweep.csv` / `sweep_cutoffs.csv` when a sweep is given.
pub fn write_run_dir(
    dir: &Path,
    report: &RunReport,
    sweep: Option<&SweepTable>,
) -> Result<(), csv::Error> {
    fs::create_dir_all(dir)?;

    let mut summary = writer(fs::File::create(dir.join("summary.csv"))?);
    summary.write_record([
        "snapshot_label",
        "side",
        "largest_unit_id",
        "requirement_gw",
        "marginal_price",
        "total_cost_rate",
        "allocated_cost_rate",
        "residual_cost_rate",
        "cutoff_size_gw",
        "rule",
        "pricing_rule",
    ])?;
    for snap in &report.snapshots {
        for side in &snap.sides {
            let allocated: f64 = side
                .allocation
                .shares
                .iter()
                .map(|s| s.allocated_cost_rate)
                .sum();
            summary.write_record([
                snap.label.clone(),
                side.service().as_str().to_string(),
                side.largest_unit_id.clone(),
                fmt_sig(side.clearing.requirement_gw),
                fmt_sig(side.clearing.marginal_price),
                fmt_sig(side.clearing.total_cost_rate),
                fmt_sig(allocated),
                fmt_sig(side.allocation.residual_cost_rate),
                fmt_sig(side.cutoff_size_gw),
                report.rule.as_str().to_string(),
                report.pricing_rule.as_str().to_string(),
            ])?;
        }
    }
    summary.flush()?;

    let mut clearing = writer(fs::File::create(dir.join("clearing.csv"))?);
    clearing.write_record([
        "snapshot_label",
        "side",
        "bid_id",
        "accepted_gw",
        "price",
        "payment_rate",
    ])?;
    for snap in &report.snapshots {
        for side in &snap.sides {
            for c in &side.clearing.cleared {
                clearing.write_record([
                    snap.label.clone(),
                    side.service().as_str().to_string(),
                    c.provider_id.clone(),
                    fmt_sig(c.accepted_gw),
                    fmt_sig(c.price),
                    fmt_sig(c.payment_rate),
                ])?;
            }
        }
    }
    clearing.flush()?;

    let mut allocation = writer(fs::File::create(dir.join("allocation.csv"))?);
    allocation.write_record([
        "snapshot_label",
        "unit_id",
        "capacity_gw",
        "side",
        "requirement_gw",
        "standalone_cost_rate",
        "allocated_cost_rate",
        "rule",
    ])?;
    for snap in &report.snapshots {
        for side in &snap.sides {
            for entry in &side.cascade {
                allocation.write_record([
                    snap.label.clone(),
                    entry.unit_id.clone(),
                    fmt_sig(entry.capacity_gw),
                    entry.side.as_str().to_string(),
                    fmt_sig(entry.requirement_gw),
                    fmt_sig(entry.standalone_cost_rate),
                    fmt_sig(side.allocation.share_of(&entry.unit_id).unwrap_or(0.0)),
                    report.rule.as_str().to_string(),
                ])?;
            }
        }
    }
    allocation.flush()?;

    let mut annual = writer(fs::File::create(dir.join("annual_costs.csv"))?);
    annual.write_record(["unit_id", "side", "annual_ancillary_cost"])?;
    for a in &report.annual_costs {
        annual.write_record([
            a.unit_id.clone(),
            a.side.as_str().to_string(),
            fmt_sig(a.annual_cost),
        ])?;
    }
    annual.flush()?;

    if let Some(table) = sweep {
        write_sweep_csv(fs::File::create(dir.join("sweep.csv"))?, table)?;
        write_sweep_cutoffs_csv(fs::File::create(dir.join("sweep_cutoffs.csv"))?, table)?;
    }
    Ok(())
}
