use freqshare::dynamics::{Service, Side, SystemSnapshot};
use freqshare::market::{
    clear_for_unit, clear_market, fictitious_cost_cascade, PricingRule, ReserveBid, Unit,
};
use proptest::prelude::*;

fn bids_strategy() -> impl Strategy<Value = Vec<ReserveBid>> {
    prop::collection::vec((0u32..6, 0.05f64..3.0), 1..8).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (tier, qty))| ReserveBid {
                provider_id: format!("p{i}"),
                // coarse price tiers so ties actually happen
                price: tier as f64 * 2.5,
                quantity_gw: qty,
                side: Service::UnderFrequency,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn clearing_invariants(bids in bids_strategy(), fraction in 0.0f64..1.0) {
        let available: f64 = bids.iter().map(|b| b.quantity_gw).sum();
        let requirement = available * fraction;
        let clear = clear_market(requirement, &bids, PricingRule::PayAsClear).unwrap();
        let bid = clear_market(requirement, &bids, PricingRule::PayAsBid).unwrap();

        let accepted: f64 = clear.cleared.iter().map(|c| c.accepted_gw).sum();
        prop_assert!((accepted - requirement).abs() < 1e-9);
        for c in &clear.cleared {
            prop_assert!(c.accepted_gw <= c.offered_gw + 1e-15);
            prop_assert!(c.price <= clear.marginal_price);
        }
        for pair in clear.cleared.windows(2) {
            prop_assert!(pair[0].price <= pair[1].price);
        }
        // every bid priced below the margin is fully accepted and listed
        let cheaper = bids.iter().filter(|b| b.price < clear.marginal_price).count();
        let listed_cheaper = clear.cleared.iter().filter(|c| c.price < clear.marginal_price).count();
        prop_assert_eq!(cheaper, listed_cheaper);
        prop_assert!(clear.total_cost_rate >= bid.total_cost_rate - 1e-9);
    }

    #[test]
    fn cascade_invariants(
        caps in prop::collection::vec(0.0f64..2.0, 1..7),
        inertia in 80.0f64..250.0,
        bids in bids_strategy(),
        pay_as_bid in any::<bool>(),
    ) {
        let snap = SystemSnapshot::new("prop", inertia, 10.0);
        let mut bids = bids;
        bids.push(ReserveBid { provider_id: "backstop".into(), price: 50.0, quantity_gw: 20.0, side: Service::UnderFrequency });
        let rule = if pay_as_bid { PricingRule::PayAsBid } else { PricingRule::PayAsClear };
        let mut units: Vec<Unit> = caps.iter().enumerate().map(|(i, &c)| Unit::new(format!("u{i}"), c, Side::Generation)).collect();
        // a twin of the first unit
        units.push(Unit::new("twin", caps[0], Side::Generation));

        let cascade = fictitious_cost_cascade(&snap, &units, &bids, rule).unwrap();
        for pair in cascade.windows(2) {
            prop_assert!(pair[0].capacity_gw >= pair[1].capacity_gw);
            prop_assert!(pair[0].standalone_cost_rate >= pair[1].standalone_cost_rate);
        }
        let cost = |id: &str| cascade.iter().find(|e| e.unit_id == id).unwrap().standalone_cost_rate;
        prop_assert_eq!(cost("u0"), cost("twin"));

        let largest = units.iter().max_by(|a, b| a.capacity_gw.total_cmp(&b.capacity_gw)).unwrap();
        let real = clear_for_unit(&snap, largest, &bids, rule).unwrap();
        prop_assert_eq!(cascade[0].standalone_cost_rate, real.total_cost_rate);
    }
}
