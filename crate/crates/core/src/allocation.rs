//! Cost-sharing rules that distribute the real market cost among units from
//! their standalone (fictitious-market) costs.
//!
//! The underlying cooperative game is the airport game `c(S) = max_{i∈S} c_i`:
//! a coalition needs only as much reserve as its largest member.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::market::{CascadeEntry, Unit};

/// Shares below this are treated as zero for cut-off detection.
pub const ZERO_SHARE: f64 = 1e-9;

/// Largest player count accepted by the permutation enumeration (10! orderings).
pub const BRUTE_FORCE_MAX_PLAYERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SharingRule {
    /// Shapley value of the airport game via sequential segments.
    #[default]
    AirportShapley,
    /// Total scaled in proportion to standalone cost.
    Proportional,
    /// Marginal-cost vector for the arrival order largest-first: the largest
    /// unit pays its full standalone cost and every later arrival adds nothing.
    Incremental,
    /// Shapley value by enumerating every arrival order.
    BruteShapley,
}

impl SharingRule {
    pub const ALL: [SharingRule; 4] = [
        SharingRule::AirportShapley,
        SharingRule::Proportional,
        SharingRule::Incremental,
        SharingRule::BruteShapley,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SharingRule::AirportShapley => "airport-shapley",
            SharingRule::Proportional => "proportional",
            SharingRule::Incremental => "incremental",
            SharingRule::BruteShapley => "brute-shapley",
        }
    }
}

impl std::str::FromStr for SharingRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SharingRule::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| {
                format!("unknown sharing rule '{s}' (expected airport-shapley, proportional, incremental or brute-shapley)")
            })
    }
}

/// One player's claim: its standalone cost rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    pub unit_id: String,
    pub standalone_cost_rate: f64,
}

impl From<&CascadeEntry> for Claim {
    fn from(entry: &CascadeEntry) -> Self {
        Claim {
            unit_id: entry.unit_id.clone(),
            standalone_cost_rate: entry.standalone_cost_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Share {
    pub unit_id: String,
    /// Currency per hour.
    pub allocated_cost_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub rule: SharingRule,
    /// Same order as the claims passed to [`allocate`].
    pub shares: Vec<Share>,
    pub total_cost_rate: f64,
    /// Cost moved off exempt (existing) units and socialised.
    pub residual_cost_rate: f64,
}

impl AllocationResult {
    pub fn share_of(&self, unit_id: &str) -> Option<f64> {
        self.shares
            .iter()
            .find(|s| s.unit_id == unit_id)
            .map(|s| s.allocated_cost_rate)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("no claims to allocate")]
    Empty,
    #[error("claim '{unit_id}': standalone cost must be finite and >= 0, got {cost}")]
    NegativeCost { unit_id: String, cost: f64 },
    #[error(
        "brute-shapley enumerates n! orderings and accepts at most {max} players, got {players}; \
         use airport-shapley, which computes the same value in closed form"
    )]
    TooManyPlayers { players: usize, max: usize },
}

pub fn allocate(claims: &[Claim], rule: SharingRule) -> Result<AllocationResult, AllocationError> {
    allocate_with(claims, rule, Execution::default())
}

pub fn allocate_with(
    claims: &[Claim],
    rule: SharingRule,
    exec: Execution,
) -> Result<AllocationResult, AllocationError> {
    if claims.is_empty() {
        return Err(AllocationError::Empty);
    }
    for c in claims {
        if !(c.standalone_cost_rate.is_finite() && c.standalone_cost_rate >= 0.0) {
            return Err(AllocationError::NegativeCost {
                unit_id: c.unit_id.clone(),
                cost: c.standalone_cost_rate,
            });
        }
    }
    let costs: Vec<f64> = claims.iter().map(|c| c.standalone_cost_rate).collect();
    let values = match rule {
        SharingRule::AirportShapley => airport_shapley(&costs),
        SharingRule::Proportional => proportional(&costs),
        SharingRule::Incremental => incremental(&costs),
        SharingRule::BruteShapley => brute_shapley_with(&costs, exec)?,
    };
    let total = costs.iter().copied().fold(0.0, f64::max);
    Ok(AllocationResult {
        rule,
        shares: claims
            .iter()
            .zip(values)
            .map(|(c, v)| Share {
                unit_id: c.unit_id.clone(),
                allocated_cost_rate: v,
            })
            .collect(),
        total_cost_rate: total,
        residual_cost_rate: 0.0,
    })
}

/// Sequential-segments Shapley value for the airport game.
///
/// With costs sorted ascending `c_1 ≤ … ≤ c_n` and `c_0 = 0`, the segment
/// `c_j − c_{j−1}` is needed by players `j..n` and split equally among them.
pub fn airport_shapley(costs: &[f64]) -> Vec<f64> {
    let n = costs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));

    let mut shares = vec![0.0; n];
    let mut running = 0.0;
    let mut prev = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        running += (costs[i] - prev) / (n - rank) as f64;
        prev = costs[i];
        shares[i] = running;
    }
    shares
}

fn proportional(costs: &[f64]) -> Vec<f64> {
    let sum: f64 = costs.iter().sum();
    let total = costs.iter().copied().fold(0.0, f64::max);
    if sum == 0.0 {
        return vec![0.0; costs.len()];
    }
    costs.iter().map(|c| c / sum * total).collect()
}

fn incremental(costs: &[f64]) -> Vec<f64> {
    let mut shares = vec![0.0; costs.len()];
    // first claim holding the maximum arrives first (claims come in cascade order)
    let mut largest = 0;
    for (i, &c) in costs.iter().enumerate() {
        if c > costs[largest] {
            largest = i;
        }
    }
    shares[largest] = costs[largest];
    shares
}

/// Exact Shapley value of the airport game by enumerating all `n!` orderings.
pub fn brute_shapley(costs: &[f64]) -> Result<Vec<f64>, AllocationError> {
    brute_shapley_with(costs, Execution::default())
}

/// Orderings are split into blocks by their first two players; each block is
/// summed sequentially and blocks are reduced in index order, so the result
/// is identical for every execution strategy.
pub fn brute_shapley_with(costs: &[f64], exec: Execution) -> Result<Vec<f64>, AllocationError> {
    let n = costs.len();
    if n > BRUTE_FORCE_MAX_PLAYERS {
        return Err(AllocationError::TooManyPlayers {
            players: n,
            max: BRUTE_FORCE_MAX_PLAYERS,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![costs[0]]);
    }

    let prefixes: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();

    // Tally, exactly, how often player i raises the ceiling from player k's cost
    // (k = n: from zero). Floating point only enters in the final weighted sum.
    let width = n + 1;
    let blocks = exec.map(&prefixes, |&(a, b)| {
        let mut rest: Vec<usize> = (0..n).filter(|&i| i != a && i != b).collect();
        let mut tally = vec![0u64; n * width];
        permute_heap(&mut rest, |tail| {
            let mut ceiling = 0.0_f64;
            let mut holder = n;
            for &i in [a, b].iter().chain(tail.iter()) {
                let c = costs[i];
                if c > ceiling {
                    tally[i * width + holder] += 1;
                    ceiling = c;
                    holder = i;
                }
            }
        });
        tally
    });

    let mut tally = vec![0u64; n * width];
    for block in blocks {
        for (t, s) in tally.iter_mut().zip(block) {
            *t += s;
        }
    }
    let orderings: f64 = (1..=n).map(|k| k as f64).product();
    Ok((0..n)
        .map(|i| {
            (0..width)
                .filter(|&k| tally[i * width + k] > 0)
                .map(|k| {
                    let from = if k == n { 0.0 } else { costs[k] };
                    (costs[i] - from) * (tally[i * width + k] as f64 / orderings)
                })
                .sum()
        })
        .collect())
}

/// Heap's algorithm, iterative form. Visits every permutation of `items` once.
fn permute_heap(items: &mut [usize], mut visit: impl FnMut(&[usize])) {
    let n = items.len();
    visit(items);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Largest capacity whose share is (numerically) zero; 0 when every unit pays.
pub fn cutoff_size(allocation: &AllocationResult, units: &[Unit]) -> f64 {
    let capacity: HashMap<&str, f64> = units
        .iter()
        .map(|u| (u.id.as_str(), u.capacity_gw))
        .collect();
    allocation
        .shares
        .iter()
        .filter(|s| s.allocated_cost_rate < ZERO_SHARE)
        .filter_map(|s| capacity.get(s.unit_id.as_str()).copied())
        .fold(0.0, f64::max)
}

/// Moves the shares of existing units into the socialised residual.
pub fn filter_existing(units: &[Unit], allocation: &AllocationResult) -> AllocationResult {
    let existing: std::collections::HashSet<&str> = units
        .iter()
        .filter(|u| u.existing)
        .map(|u| u.id.as_str())
        .collect();
    let mut out = allocation.clone();
    for share in out.shares.iter_mut() {
        if existing.contains(share.unit_id.as_str()) {
            out.residual_cost_rate += share.allocated_cost_rate;
            share.allocated_cost_rate = 0.0;
        }
    }
    out
}
