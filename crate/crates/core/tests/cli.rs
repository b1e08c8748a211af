mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn freqshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqshare"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = freqshare(&[
        "simulate",
        "--inertia-gws",
        "100",
        "--contingency-gw",
        "1.8",
        "--reserve-gw",
        "4",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("secure=false"), "{stderr}");
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("time_s,delta_f_hz"));
    assert_eq!(lines.next(), Some("0,0"));
    assert_eq!(trace.lines().count(), 30_002);
}

#[test]
fn simulate_rocof_infeasible_exits_3() {
    let out = freqshare(&[
        "simulate",
        "--inertia-gws",
        "100",
        "--contingency-gw",
        "1.8",
        "--rocof-limit-hz-per-s",
        "0.2",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn clear_bid_file() {
    let dir = tempfile::tempdir().unwrap();
    let bids = dir.path().join("bids.csv");
    fs::write(
        &bids,
        "provider_id,price,quantity_gw,side\nc,12,4,under-frequency\nfree,0,0.5,under-frequency\nb,5,2,under-frequency\nx,1,9,over-frequency\n",
    )
    .unwrap();
    let out = freqshare(&[
        "clear",
        "--bids",
        path_str(&bids),
        "--requirement-gw",
        "5.0625",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("clearing.csv")).unwrap();
    assert_eq!(
        csv,
        "bid_id,accepted_gw,price,payment_rate\nfree,0.5,0,6000\nb,2,5,24000\nc,2.5625,12,30750\n"
    );

    let scarce = freqshare(&["clear", "--bids", path_str(&bids), "--requirement-gw", "10"]);
    assert_eq!(scarce.status.code(), Some(3));
    let stderr = String::from_utf8(scarce.stderr).unwrap();
    assert!(stderr.contains("shortfall 3.5"), "{stderr}");
}

#[test]
fn allocate_snapshot_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = freqshare(&[
        "allocate",
        "--scenario",
        path_str(&common::bundled_scenario_path()),
        "--snapshot",
        "high-inertia",
        "--rule",
        "proportional",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("allocation.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("unit_id,capacity_gw,side,standalone_cost_rate,allocated_cost_rate,rule")
    );
    assert!(lines.all(|l| l.ends_with(",proportional")));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn validation_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut scenario = common::bundled_scenario();
    scenario.fleet.clear();
    let path = dir.path().join("empty.json");
    fs::write(&path, scenario.to_json_string()).unwrap();
    let out = freqshare(&[
        "run",
        "--scenario",
        path_str(&path),
        "--out",
        path_str(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("fleet"));

    let mut scenario = common::bundled_scenario();
    scenario.snapshots[1].bids[0].quantity_gw = 0.0;
    fs::write(&path, scenario.to_json_string()).unwrap();
    let out = freqshare(&[
        "run",
        "--scenario",
        path_str(&path),
        "--out",
        path_str(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("snapshots[1].bids[0].quantity_gw"));

    fs::write(&path, "{ not json").unwrap();
    let out = freqshare(&[
        "run",
        "--scenario",
        path_str(&path),
        "--out",
        path_str(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scarcity_in_run_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut scenario = common::bundled_scenario();
    scenario.fleet[0].capacity_gw = 3.5;
    let path = dir.path().join("scarce.json");
    fs::write(&path, scenario.to_json_string()).unwrap();
    let out = freqshare(&[
        "run",
        "--scenario",
        path_str(&path),
        "--out",
        path_str(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn viability_plain_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.json");
    fs::write(
        &ledger,
        r#"{"lifetime_years": 2,
            "years": [
              {"revenues_electricity": 100, "revenues_ancillary": 10, "cost_fuel": 30, "cost_ancillary": 20, "cost_others": 10},
              {"revenues_electricity": 100, "revenues_ancillary": 10, "cost_fuel": 30, "cost_ancillary": 20, "cost_others": 10}
            ],
            "cost_investment": 80, "profit_sought": 15}"#,
    )
    .unwrap();
    let out = freqshare(&["viability", "--ledger", path_str(&ledger)]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "viable,net_margin\ntrue,5\n"
    );

    let out = freqshare(&[
        "viability",
        "--ledger",
        path_str(&ledger),
        "--scenario",
        path_str(&common::bundled_scenario_path()),
        "--unit-id",
        "candidate",
        "--capacity-gw",
        "2",
        "--parts",
        "2",
        "--fuel-penalty-per-year",
        "0",
        "--investment-penalty",
        "0",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("split.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "configuration,annual_ancillary_cost,net_margin,viable"
    );
    assert!(lines[1].starts_with("unsplit,"));
    assert!(lines[2].starts_with("split-2x1gw,"));

    // penalties are mandatory for a split
    let out = freqshare(&[
        "viability",
        "--ledger",
        path_str(&ledger),
        "--scenario",
        path_str(&common::bundled_scenario_path()),
        "--unit-id",
        "candidate",
        "--capacity-gw",
        "2",
        "--parts",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_with_explicit_grid() {
    let out = freqshare(&[
        "sweep",
        "--scenario",
        path_str(&common::bundled_scenario_path()),
        "--grid",
        "0.3,1.0,3.0",
    ]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "capacity_gw,snapshot_label,allocated_cost_rate,status"
    );
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[1], "0.3,low-inertia,0,ok");
    assert!(lines[5].starts_with("3,low-inertia,,"));
    assert!(lines[5].contains("scarcity"));
}
