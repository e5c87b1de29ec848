//! Seeded synthesis of an APX-like day on the three-bus feeder.
//!
//! Prices follow a typical day-ahead profile (night trough, morning ramp,
//! midday plateau, evening peak) with seeded noise, then are pushed above the
//! cap in the target hours and below it everywhere else. Demand at the load
//! bus has a midday and an evening peak. Distributed generation is capacity
//! limited below demand in every hour, so the import is always marginal and
//! the uncapped price at every bus equals `a_trans`. The result is verified by
//! solving the uncapped OPF hour by hour.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeneratorSite, HourlyData, Scenario, ScenarioError, Strictness};
use crate::grid::Network;
use crate::market::{build_opf_single, MarketError};
use crate::scalar::Scalar;
use crate::storage::StorageSpec;

/// Seed of the bundled scenario.
pub const DEFAULT_SEED: u64 = 2019;

/// €/MWh, hour 1 first.
const PRICE_SHAPE: [f64; 24] = [
    48.0, 45.0, 42.0, 40.0, 41.0, 46.0, 55.0, 66.0, 80.0, 84.0, 83.0, 79.0, 77.0, 70.0, 64.0, 62.0, 68.0, 82.0, 88.0,
    80.0, 70.0, 62.0, 56.0, 50.0,
];

/// MW at the load bus, hour 1 first.
const DEMAND_SHAPE: [f64; 24] = [
    2.72, 2.68, 2.65, 2.64, 2.66, 2.72, 2.80, 2.88, 2.95, 3.00, 3.02, 3.00, 2.96, 2.90, 2.84, 2.82, 2.88, 2.98, 3.05,
    3.00, 2.92, 2.85, 2.79, 2.75,
];

const A_DIST: f64 = 20.0;
const MIN_RESIDUAL: f64 = 0.15;
/// Share of storage capacity one contiguous block of capped hours may need.
const BLOCK_ENERGY_SHARE: f64 = 0.85;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTargets {
    /// One-based hours whose uncapped price must exceed the cap; all others stay below.
    pub exceed_hours: BTreeSet<usize>,
    pub pi_des: f64,
    pub horizon: usize,
    pub dist_capacity: f64,
    pub storage_capacity: f64,
    pub storage_power: f64,
    pub initial_soc: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            exceed_hours: (9..=13).chain(18..=20).collect(),
            pi_des: 75.0,
            horizon: 24,
            dist_capacity: 2.5,
            storage_capacity: 2.6,
            storage_power: 1.0,
            initial_soc: 0.75,
        }
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (x * f).round() / f
}

/// Uncapped price at the load bus for every hour, from the plain OPF.
pub fn uncapped_lmp<T: Scalar>(scenario: &Scenario<T>) -> Result<Vec<T>, MarketError> {
    (0..scenario.horizon())
        .map(|t| {
            let model = build_opf_single(&scenario.network, &scenario.dispatch_inputs(t))?;
            let sol = model.solve()?;
            model.extract_lmp(&sol, &scenario.load_bus, 0)
        })
        .collect()
}

pub fn synthesize_apx_like(seed: u64, targets: &CalibrationTargets) -> Result<Scenario<f64>, ScenarioError> {
    let fail = |m: String| Err(ScenarioError::CalibrationFailed(m));
    let horizon = targets.horizon;
    let pi = targets.pi_des;
    if horizon == 0 {
        return fail("horizon must be positive".into());
    }
    if let Some(h) = targets.exceed_hours.iter().find(|&&h| h == 0 || h > horizon) {
        return fail(format!("target hour {h} outside 1..={horizon}"));
    }
    if !(pi.is_finite() && pi > A_DIST + 10.0) {
        return fail(format!("cap {pi} leaves no room for import prices above distributed cost {A_DIST}"));
    }
    if !(targets.dist_capacity >= 0.0 && targets.storage_capacity >= 0.0 && targets.storage_power >= 0.0) {
        return fail("capacities must be non-negative".into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exceeds = |h: usize| targets.exceed_hours.contains(&h);

    let mut a_trans = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let shape = PRICE_SHAPE[t % 24] + rng.gen_range(-4.0..4.0);
        let price = if exceeds(t + 1) {
            shape.max(pi + 3.0) + rng.gen_range(1.0..8.0)
        } else {
            shape.min(pi - rng.gen_range(4.0..12.0)).max(A_DIST + 8.0)
        };
        a_trans.push(round_to(price, 2));
    }

    let mut residual: Vec<f64> = (0..horizon)
        .map(|t| {
            let demand = DEMAND_SHAPE[t % 24] * targets.dist_capacity / 2.5 + rng.gen_range(-0.03..0.03);
            (demand - targets.dist_capacity).max(MIN_RESIDUAL)
        })
        .collect();
    // Each run of capped hours must be coverable from a charged device.
    let budget = BLOCK_ENERGY_SHARE * targets.storage_capacity;
    let mut t = 0;
    while t < horizon {
        if !exceeds(t + 1) {
            t += 1;
            continue;
        }
        let start = t;
        while t < horizon && exceeds(t + 1) {
            residual[t] = residual[t].min(targets.storage_power);
            t += 1;
        }
        let need: f64 = residual[start..t].iter().sum();
        if need > budget && need > 0.0 {
            let scale = budget / need;
            residual[start..t].iter_mut().for_each(|r| *r *= scale);
        }
    }

    let max_price = a_trans.iter().cloned().fold(pi, f64::max);
    let b_load = round_to((max_price + 25.0).max(150.0), 0);
    let hours = (0..horizon)
        .map(|t| {
            let demand_hi = round_to(targets.dist_capacity + residual[t], 3);
            HourlyData {
                a_trans: a_trans[t],
                a_dist: A_DIST,
                b_load,
                demand_lo: round_to(0.9 * demand_hi, 3),
                demand_hi,
                pi_des: pi,
            }
        })
        .collect();

    let scenario = Scenario {
        name: format!("apx-like-seed-{seed}"),
        network: Network::three_bus(0.1, 100.0),
        transmission: GeneratorSite {
            bus: "1".into(),
            capacity: f64::INFINITY,
        },
        distributed: GeneratorSite {
            bus: "2".into(),
            capacity: targets.dist_capacity,
        },
        load_bus: "3".into(),
        hours,
        storage: vec![StorageSpec {
            host_bus: "3".into(),
            capacity: targets.storage_capacity,
            power_bound: targets.storage_power,
            loss: 0.0,
            initial_soc: targets.initial_soc,
        }],
    };
    scenario.validate(Strictness::Strict)?;

    let lmp = uncapped_lmp(&scenario).map_err(|e| ScenarioError::CalibrationFailed(e.to_string()))?;
    let realized: BTreeSet<usize> = lmp
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > pi)
        .map(|(t, _)| t + 1)
        .collect();
    if realized != targets.exceed_hours {
        return fail(format!(
            "uncapped prices exceed the cap in hours {realized:?}, targets were {:?}",
            targets.exceed_hours
        ));
    }
    Ok(scenario)
}
