//! Frequency-containment cost allocation for low-inertia power systems.
//!
//! The pipeline sizes the reserve needed to keep the frequency nadir within
//! its security limit ([`dynamics`]), clears the reserve market by merit
//! order for the largest unit and for every smaller unit as if it were the
//! largest ([`market`]), and shares the real market cost among units with a
//! cooperative-game rule ([`allocation`]). [`investment`] turns allocated
//! costs into project viability, and [`scenario`] ties it all together.

pub mod allocation;
pub mod dynamics;
pub mod exec;
pub mod investment;
pub mod market;
pub mod output;
pub mod scenario;

pub use allocation::{allocate, AllocationResult, SharingRule};
pub use dynamics::{
    required_reserve, simulate_frequency, Contingency, Service, Side, SystemSnapshot,
};
pub use exec::Execution;
pub use market::{clear_market, fictitious_cost_cascade, PricingRule, ReserveBid, Unit};
pub use scenario::{run_pipeline, sweep_allocation_curve, Scenario};
