#![allow(dead_code)]

use std::path::PathBuf;

use freqshare::Scenario;

pub fn bundled_scenario_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/gb_illustrative.json")
}

pub fn bundled_scenario() -> Scenario {
    Scenario::from_path(bundled_scenario_path()).expect("bundled scenario parses")
}

/// Shapley value of `c(S) = max_{i∈S} costs[i]` from the coalition formula
/// `φ_i = Σ_{S ∌ i} |S|! (n−|S|−1)! / n! · (c(S ∪ {i}) − c(S))`.
///
/// Independent of both the closed form and the permutation enumeration.
pub fn subset_shapley(costs: &[f64]) -> Vec<f64> {
    let n = costs.len();
    let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    let n_fact = fact(n);
    let value = |mask: usize| {
        (0..n)
            .filter(|&j| mask & (1 << j) != 0)
            .map(|j| costs[j])
            .fold(0.0, f64::max)
    };
    (0..n)
        .map(|i| {
            let mut phi = 0.0;
            for mask in 0..(1usize << n) {
                if mask & (1 << i) != 0 {
                    continue;
                }
                let size = mask.count_ones() as usize;
                let weight = fact(size) * fact(n - size - 1) / n_fact;
                phi += weight * (value(mask | (1 << i)) - value(mask));
            }
            phi
        })
        .collect()
}
