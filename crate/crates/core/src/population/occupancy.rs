//! Goodness of fit of token occupancies against the stationary law.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::engine::{replica_rng, step, EventOrder, InitialPlacement, PopulationState, SimulationSettings};
use super::traps::TrapProfile;
use crate::error::{Error, Result};
use crate::kernel::TransitionKernel;
use crate::policy::{Controller, PolicySpec};

/// Cells with an expected count below this are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyReport {
    pub counts: Vec<u64>,
    pub expected: Vec<f64>,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Original cells pooled into each tested cell, where pooling happened.
    pub merged: Vec<Vec<usize>>,
}

/// Chi-square test of observed counts against `total * probs`, pooling small
/// cells (smallest expected first) until every pooled cell expects at least
/// [`MIN_EXPECTED`].
pub fn chi_square(counts: &[u64], probs: &[f64]) -> Result<OccupancyReport> {
    let total: u64 = counts.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|p| p * total as f64).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| expected[a].total_cmp(&expected[b]).then(a.cmp(&b)));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    let mut mass = 0.0;
    for u in order {
        current.push(u);
        mass += expected[u];
        if mass >= MIN_EXPECTED {
            groups.push(std::mem::take(&mut current));
            mass = 0.0;
        }
    }
    if !current.is_empty() {
        match groups.last_mut() {
            Some(g) => g.extend(current),
            None => groups.push(current),
        }
    }
    if groups.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} cell(s) with expected count >= {MIN_EXPECTED}",
            groups.len()
        )));
    }
    let statistic: f64 = groups
        .iter()
        .map(|g| {
            let o: u64 = g.iter().map(|&u| counts[u]).sum();
            let e: f64 = g.iter().map(|&u| expected[u]).sum();
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = groups.len() - 1;
    let p_value = ChiSquared::new(dof as f64).expect("positive degrees of freedom").sf(statistic);
    let merged = groups.into_iter().filter(|g| g.len() > 1).collect();
    Ok(OccupancyReport { counts: counts.to_vec(), expected, statistic, dof, p_value, merged })
}

/// Runs `replicas` populations of `z` free walkers from `start` for
/// `t_sample` steps and tests their pooled occupancy against the stationary
/// law.
pub fn occupancy_check(
    k: &TransitionKernel,
    z: u64,
    t_sample: u64,
    replicas: u64,
    seed: u64,
    start: usize,
) -> Result<OccupancyReport> {
    let n = k.node_count();
    let controller = Controller::Fixed(PolicySpec::passive(n));
    let traps = TrapProfile::none(n);
    let settings = SimulationSettings {
        z0: z,
        horizon: t_sample.max(1),
        z_cap: u64::MAX,
        init: InitialPlacement::Node(start),
        ..Default::default()
    };
    let mut counts = vec![0u64; n];
    for r in 0..replicas {
        let mut rng = replica_rng(seed, r);
        let mut state = PopulationState::new(k, &controller, &settings, &mut rng)?;
        for _ in 0..t_sample {
            step(&mut state, k, &traps, &controller, EventOrder::TrapFirst, &mut rng, None);
        }
        for (c, o) in counts.iter_mut().zip(state.occupancy(n)) {
            *c += o;
        }
    }
    chi_square(&counts, k.stationary().probs())
}
