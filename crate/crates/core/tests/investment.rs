mod common;

use std::collections::BTreeMap;

use freqshare::dynamics::{Service, Side, SystemSnapshot};
use freqshare::investment::{
    annual_ancillary_cost, compare_split, evaluate_viability, InvestmentError, SplitAdjustments,
    ViabilityLedger, YearEntry,
};
use freqshare::market::{PricingRule, ReserveBid, Unit};
use freqshare::scenario::{run_pipeline, SnapshotCase};
use freqshare::{Scenario, SharingRule};
use proptest::prelude::*;

fn ledger() -> ViabilityLedger {
    ViabilityLedger::uniform(
        20,
        YearEntry {
            revenues_electricity: 5.0e8,
            revenues_ancillary: 0.0,
            cost_fuel: 2.0e8,
            cost_ancillary: 0.0,
            cost_others: 5.0e7,
        },
        3.0e9,
        5.0e8,
    )
}

fn one_unit_scenario(weight: f64) -> Scenario {
    let mut snap = SystemSnapshot::new("only", 200.0, 10.0);
    snap.weight_hours = weight;
    Scenario {
        name: "single".into(),
        allocation_rule: SharingRule::AirportShapley,
        pricing_rule: PricingRule::PayAsClear,
        fleet: vec![Unit::new("gen", 0.5, Side::Generation)],
        snapshots: vec![SnapshotCase {
            system: snap,
            bids: vec![ReserveBid {
                provider_id: "p".into(),
                price: 0.08,
                quantity_gw: 1.0,
                side: Service::UnderFrequency,
            }],
            capacity_overrides_gw: BTreeMap::new(),
        }],
        sweep: None,
    }
}

#[test]
fn single_snapshot_annual_cost() {
    // 0.5 GW sized at its own capacity: 500 MW × 0.08 = 40 per hour
    let cost = annual_ancillary_cost(
        &one_unit_scenario(1000.0),
        "gen",
        SharingRule::AirportShapley,
    )
    .unwrap();
    assert!((cost - 40_000.0).abs() < 1e-6, "{cost}");
}

#[test]
fn unit_below_cutoff_pays_nothing_all_year() {
    let scenario = common::bundled_scenario();
    let cost = annual_ancillary_cost(&scenario, "ccgt-1", SharingRule::AirportShapley).unwrap();
    assert_eq!(cost, 0.0);
}

#[test]
fn two_snapshot_weighted_sum() {
    // Bundled scenario, offshore-wind-1 (1.2 GW). Hand computation:
    // low inertia (E=100): requirements 5.0625, 2.25, 2.25, 1.5625, 0.4 GW; pay-as-clear costs
    //   nuclear 60750, winds 2250×7=15750, interconnector 1562.5×7=10937.5, ccgt 0.
    //   Shapley for a wind: 0 + 10937.5/4 + (15750−10937.5)/3 = 2734.375 + 1604.1667 = 4338.5417
    // high inertia (E=200): requirements 2.53125, 1.2, 1.2, 1.0, 0.4 GW; costs
    //   nuclear 2531.25×7=17718.75, winds 1200×4=4800, interconnector 1000×4=4000, ccgt 0.
    //   Shapley for a wind: 4000/4 + 800/3 = 1266.6667
    let expected =
        2000.0 * (10_937.5 / 4.0 + 4_812.5 / 3.0) + 6760.0 * (4_000.0 / 4.0 + 800.0 / 3.0);
    let scenario = common::bundled_scenario();
    let cost =
        annual_ancillary_cost(&scenario, "offshore-wind-1", SharingRule::AirportShapley).unwrap();
    assert!((cost - expected).abs() < 1e-6, "{cost} vs {expected}");
}

#[test]
fn unknown_unit_is_rejected() {
    let err = annual_ancillary_cost(
        &common::bundled_scenario(),
        "nope",
        SharingRule::AirportShapley,
    )
    .unwrap_err();
    assert!(matches!(err, InvestmentError::UnknownUnit(_)));
}

#[test]
fn split_below_cutoff_changes_nothing() {
    let scenario = common::bundled_scenario();
    let unit = Unit::new("candidate", 0.4, Side::Generation);
    let adjustments = SplitAdjustments {
        fuel_cost_per_year: 1.0e6,
        investment_cost: 1.0e7,
    };
    let cmp = compare_split(&scenario, &unit, 2, &ledger(), &adjustments).unwrap();
    assert_eq!(cmp.unsplit.annual_ancillary_cost, 0.0);
    assert_eq!(cmp.split.annual_ancillary_cost, 0.0);
    assert_eq!(cmp.winner, "unsplit");
    assert!(cmp.split.viability.net_margin < cmp.unsplit.viability.net_margin);
}

#[test]
fn split_into_one_part_is_identity() {
    let scenario = common::bundled_scenario();
    let unit = Unit::new("candidate", 2.0, Side::Generation);
    let adjustments = SplitAdjustments {
        fuel_cost_per_year: 0.0,
        investment_cost: 0.0,
    };
    let cmp = compare_split(&scenario, &unit, 1, &ledger(), &adjustments).unwrap();
    assert_eq!(cmp.unsplit, cmp.split);
}

#[test]
fn split_two_gw_plant() {
    let scenario = common::bundled_scenario();
    let unit = Unit::new("candidate", 2.0, Side::Generation);
    let adjustments = SplitAdjustments {
        fuel_cost_per_year: 0.0,
        investment_cost: 0.0,
    };
    let cmp = compare_split(&scenario, &unit, 2, &ledger(), &adjustments).unwrap();
    let low_unsplit = &cmp.unsplit.per_part[0];
    let low_split = &cmp.split.per_part[0];
    assert_eq!(low_unsplit.snapshot_label, "low-inertia");
    assert!((low_unsplit.requirement_gw - 6.25).abs() < 1e-12);
    assert!((low_split.requirement_gw - 1.5625).abs() < 1e-12);
    for (a, b) in cmp.unsplit.per_part.iter().zip(&cmp.split.per_part) {
        assert!(b.allocated_cost_rate < a.allocated_cost_rate);
    }
    assert!(cmp.split.viability.net_margin >= cmp.unsplit.viability.net_margin);
}

#[test]
fn split_validation() {
    let scenario = common::bundled_scenario();
    let adjustments = SplitAdjustments {
        fuel_cost_per_year: 0.0,
        investment_cost: 0.0,
    };
    let zero = Unit::new("candidate", 0.0, Side::Generation);
    assert!(matches!(
        compare_split(&scenario, &zero, 2, &ledger(), &adjustments),
        Err(InvestmentError::Split(_))
    ));
    let unit = Unit::new("candidate", 1.0, Side::Generation);
    assert!(compare_split(&scenario, &unit, 0, &ledger(), &adjustments).is_err());
    let negative = SplitAdjustments {
        fuel_cost_per_year: -1.0,
        investment_cost: 0.0,
    };
    assert!(compare_split(&scenario, &unit, 2, &ledger(), &negative).is_err());
}

#[test]
fn removing_the_largest_unit_never_raises_market_cost() {
    let scenario = common::bundled_scenario();
    let full = run_pipeline(&scenario).unwrap();
    let mut reduced = scenario.clone();
    reduced.fleet.retain(|u| u.id != "nuclear-1");
    let smaller = run_pipeline(&reduced).unwrap();
    for (a, b) in full.snapshots.iter().zip(&smaller.snapshots) {
        let before = a.side(Side::Generation).unwrap().clearing.total_cost_rate;
        let after = b.side(Side::Generation).unwrap().clearing.total_cost_rate;
        assert!(after <= before);
    }
}

proptest! {
    #[test]
    fn viability_scales_linearly(
        elec in 0.0f64..1e3, anc_rev in 0.0f64..1e2, fuel in 0.0f64..1e3,
        anc in 0.0f64..1e2, other in 0.0f64..1e2, years in 1u32..30,
        invest in 0.0f64..1e4, profit in 0.0f64..1e3, factor in 0.01f64..100.0,
    ) {
        let year = YearEntry { revenues_electricity: elec, revenues_ancillary: anc_rev, cost_fuel: fuel, cost_ancillary: anc, cost_others: other };
        let ledger = ViabilityLedger::uniform(years, year, invest, profit);
        let base = evaluate_viability(&ledger).unwrap();
        let scaled = evaluate_viability(&ledger.scaled(factor)).unwrap();
        let tol = 1e-9 * (1.0 + base.net_margin.abs() * factor + (elec + fuel) * years as f64 * factor);
        prop_assert!((scaled.net_margin - factor * base.net_margin).abs() <= tol);
        if base.net_margin.abs() * factor > tol {
            prop_assert_eq!(scaled.viable, base.viable);
        }
    }

    #[test]
    fn splitting_never_raises_part_cost(capacity in 0.2f64..2.6, parts in 2u32..4) {
        let scenario = common::bundled_scenario();
        let unit = Unit::new("candidate", capacity, Side::Generation);
        let adjustments = SplitAdjustments { fuel_cost_per_year: 0.0, investment_cost: 0.0 };
        let cmp = compare_split(&scenario, &unit, parts, &ledger(), &adjustments);
        prop_assume!(cmp.is_ok());
        let cmp = cmp.unwrap();
        for (a, b) in cmp.unsplit.per_part.iter().zip(&cmp.split.per_part) {
            prop_assert!(b.allocated_cost_rate <= a.allocated_cost_rate + 1e-9);
            prop_assert!(b.requirement_gw <= a.requirement_gw);
        }
    }
}
