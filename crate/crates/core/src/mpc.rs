//! Receding-horizon operation of a storage device and the savings it buys.
//!
//! Every hour the controller solves the hedged multi-period OPF over the next
//! `H` hours (truncated at the end of the day), commits the first step, and
//! advances the device through [`StorageState::step_soc`]. The recorded price
//! of an hour is the balance dual of the first step of that plan: it is the
//! price at which the committed action is marginal. Fixing the flex and
//! re-solving would leave the dual degenerate exactly in the hours where the
//! device sets the price.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lp::{LpError, LpSolution};
use crate::market::{build_hedged_opf_horizon, build_opf_single, HorizonOptions, MarketError, MarketModel};
use crate::scalar::Scalar;
use crate::scenario::{Scenario, DISTRIBUTED, TRANSMISSION};
use crate::storage::{StorageError, StorageSpec, StorageState, SOC_TOLERANCE};

/// Flex below this magnitude is solver noise and committed as zero.
const FLEX_NOISE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T> {
    /// One-based hour.
    pub hour: usize,
    /// €/MWh, network bus order.
    pub lmp: Vec<T>,
    /// MW, positive when discharging.
    pub flex: T,
    /// Stored energy at the end of the hour, MWh.
    pub soc: T,
    pub import_trans: T,
    pub gen_dist: T,
    pub load: T,
    /// Price at the load bus times load served, €.
    pub step_cost: T,
    /// Objective of the program solved for this hour.
    pub objective: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub buses: Vec<String>,
    pub load_bus: String,
    /// Lookahead; zero for the baseline without storage.
    pub horizon: usize,
    /// Hours the run was meant to cover.
    pub length: usize,
    pub storage: Option<StorageSpec<T>>,
    pub steps: Vec<StepRecord<T>>,
}

#[derive(Debug, Error)]
pub enum MpcError<T: std::fmt::Debug = f64> {
    #[error("lookahead must be at least one hour")]
    InvalidHorizon,
    #[error("infeasible at hour {hour}: {source}")]
    Infeasible {
        hour: usize,
        #[source]
        source: MarketError,
        partial: Box<Trajectory<T>>,
    },
    #[error("hour {hour}: {source}")]
    Market {
        hour: usize,
        #[source]
        source: MarketError,
    },
    #[error("hour {hour}: {source}")]
    Storage {
        hour: usize,
        #[source]
        source: StorageError,
    },
    #[error("trajectory covers {found} of {expected} hours")]
    IncompleteTrajectory { expected: usize, found: usize },
    #[error("load bus `{0}` not in the network")]
    UnknownLoadBus(String),
}

/// Result of one lookahead solve.
#[derive(Debug, Clone)]
pub struct Plan<T> {
    /// Net injection per step of the window, MW.
    pub flex: Vec<T>,
    /// Stored energy at the end of each step, MWh.
    pub energy: Vec<T>,
    pub objective: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn is_complete(&self) -> bool {
        self.steps.len() == self.length
    }

    fn load_slot(&self) -> usize {
        self.buses.iter().position(|b| *b == self.load_bus).unwrap_or(0)
    }

    /// Price at the load bus for every recorded hour.
    pub fn load_lmp(&self) -> Vec<T> {
        let slot = self.load_slot();
        self.steps.iter().map(|s| s.lmp[slot]).collect()
    }

    pub fn total_cost(&self) -> T {
        self.steps.iter().map(|s| s.step_cost).sum()
    }

    pub fn energy_served(&self) -> T {
        self.steps.iter().map(|s| s.load).sum()
    }

    /// Energy-weighted price paid at the load bus, €/MWh; zero when nothing was served.
    pub fn cost_per_mwh(&self) -> T {
        let served = self.energy_served();
        if served > T::zero() {
            self.total_cost() / served
        } else {
            T::zero()
        }
    }

    /// Hours whose price at the load bus exceeds `cap + tol`.
    pub fn hours_above(&self, cap: &[T], tol: T) -> Vec<usize> {
        let slot = self.load_slot();
        self.steps
            .iter()
            .filter(|s| s.lmp[slot] > cap[s.hour - 1] + tol)
            .map(|s| s.hour)
            .collect()
    }

    /// Replays the committed flex through [`StorageState::step_soc`] from the
    /// initial state and returns the energy path.
    pub fn replay(&self) -> Result<Vec<T>, StorageError> {
        let Some(spec) = &self.storage else {
            return Ok(vec![T::zero(); self.steps.len()]);
        };
        let mut state = spec.initial_state()?;
        self.steps
            .iter()
            .map(|s| {
                state = state.step_soc(s.flex)?;
                Ok(state.energy)
            })
            .collect()
    }

    /// Checks the record against the storage dynamics and its own arithmetic.
    pub fn validate(&self) -> Result<(), String> {
        let tol = T::lit(SOC_TOLERANCE);
        let slot = self.load_slot();
        for (i, s) in self.steps.iter().enumerate() {
            if s.hour != i + 1 {
                return Err(format!("row {} carries hour {}", i + 1, s.hour));
            }
            if s.lmp.len() != self.buses.len() {
                return Err(format!("hour {}: {} prices for {} buses", s.hour, s.lmp.len(), self.buses.len()));
            }
            let cost = s.lmp[slot] * s.load;
            if (cost - s.step_cost).abs() > T::lit(1e-6) * T::one().max(cost.abs()) {
                return Err(format!("hour {}: step cost {} differs from price times load {}", s.hour, s.step_cost, cost));
            }
        }
        let replayed = self.replay().map_err(|e| e.to_string())?;
        for (s, e) in self.steps.iter().zip(replayed) {
            if (s.soc - e).abs() > tol {
                return Err(format!("hour {}: recorded soc {} but replay gives {}", s.hour, s.soc, e));
            }
        }
        if let Some(spec) = &self.storage {
            for s in &self.steps {
                if s.flex.abs() > spec.power_bound + tol {
                    return Err(format!("hour {}: flex {} beyond power bound", s.hour, s.flex));
                }
            }
        }
        Ok(())
    }
}

fn clean_flex<T: Scalar>(flex: T, state: &StorageState<T>) -> Result<T, StorageError> {
    let flex = if flex.abs() < T::lit(FLEX_NOISE) { T::zero() } else { flex };
    let (lo, hi) = state.feasible_flex_bounds()?;
    Ok(flex.max(lo).min(hi))
}

fn lp_infeasible(e: &MarketError) -> bool {
    matches!(e, MarketError::Solver(LpError::Infeasible))
}

fn solve_window<T: Scalar>(
    scenario: &Scenario<T>,
    state: &StorageState<T>,
    t: usize,
    horizon: usize,
) -> Result<(MarketModel<T>, LpSolution<T>), MarketError> {
    let end = (t + horizon).min(scenario.horizon());
    let window: Vec<_> = (t..end).map(|k| scenario.dispatch_inputs(k)).collect();
    let model = build_hedged_opf_horizon(&scenario.network, &window, std::slice::from_ref(state), &HorizonOptions::default())?;
    let sol = model.solve()?;
    Ok((model, sol))
}

/// Plans the device over hours `t..t+horizon` (zero-based, truncated at the
/// end of the scenario) from `state`.
pub fn plan<T: Scalar>(
    scenario: &Scenario<T>,
    state: &StorageState<T>,
    t: usize,
    horizon: usize,
) -> Result<Plan<T>, MarketError> {
    if horizon == 0 || t >= scenario.horizon() {
        return Err(MarketError::InvalidInputs("empty planning window".into()));
    }
    let (model, sol) = solve_window(scenario, state, t, horizon)?;
    let host = &state.spec.host_bus;
    Ok(Plan {
        flex: (0..model.steps()).map(|k| model.flex(&sol, host, k)).collect(),
        energy: (0..model.steps())
            .map(|k| model.energy(&sol, host, k).unwrap_or_else(T::zero))
            .collect(),
        objective: sol.objective,
    })
}

fn record<T: Scalar>(
    scenario: &Scenario<T>,
    model: &MarketModel<T>,
    sol: &LpSolution<T>,
    t: usize,
    flex: T,
    soc: T,
) -> Result<StepRecord<T>, MarketError> {
    let lmp = scenario
        .network
        .buses
        .iter()
        .map(|b| model.extract_lmp(sol, &b.id, 0))
        .collect::<Result<Vec<_>, _>>()?;
    let slot = scenario.network.bus_index(&scenario.load_bus).expect("validated");
    let load = model.consumption(sol, 0, 0);
    Ok(StepRecord {
        hour: t + 1,
        flex,
        soc,
        import_trans: model.generation(sol, TRANSMISSION, 0),
        gen_dist: model.generation(sol, DISTRIBUTED, 0),
        load,
        step_cost: lmp[slot] * load,
        objective: sol.objective,
        lmp,
    })
}

fn empty_trajectory<T: Scalar>(scenario: &Scenario<T>, horizon: usize, storage: Option<StorageSpec<T>>) -> Result<Trajectory<T>, MpcError<T>> {
    if scenario.network.bus_index(&scenario.load_bus).is_none() {
        return Err(MpcError::UnknownLoadBus(scenario.load_bus.clone()));
    }
    Ok(Trajectory {
        buses: scenario.network.buses.iter().map(|b| b.id.clone()).collect(),
        load_bus: scenario.load_bus.clone(),
        horizon,
        length: scenario.horizon(),
        storage,
        steps: Vec::with_capacity(scenario.horizon()),
    })
}

fn step_error<T: Scalar>(traj: Trajectory<T>, hour: usize, source: MarketError) -> MpcError<T> {
    if lp_infeasible(&source) {
        MpcError::Infeasible {
            hour,
            source,
            partial: Box::new(traj),
        }
    } else {
        MpcError::Market { hour, source }
    }
}

/// Runs the controller with lookahead `horizon` over the whole scenario.
pub fn run_receding<T: Scalar>(
    scenario: &Scenario<T>,
    spec: &StorageSpec<T>,
    horizon: usize,
) -> Result<Trajectory<T>, MpcError<T>> {
    if horizon == 0 {
        return Err(MpcError::InvalidHorizon);
    }
    let mut traj = empty_trajectory(scenario, horizon, Some(spec.clone()))?;
    let mut state = spec.initial_state().map_err(|source| MpcError::Storage { hour: 1, source })?;
    let host = spec.host_bus.clone();
    for t in 0..scenario.horizon() {
        let hour = t + 1;
        let (model, sol) = match solve_window(scenario, &state, t, horizon) {
            Ok(x) => x,
            Err(e) => return Err(step_error(traj, hour, e)),
        };
        let flex = clean_flex(model.flex(&sol, &host, 0), &state).map_err(|source| MpcError::Storage { hour, source })?;
        state = state.step_soc(flex).map_err(|source| MpcError::Storage { hour, source })?;
        let rec = record(scenario, &model, &sol, t, flex, state.energy).map_err(|source| MpcError::Market { hour, source })?;
        log::debug!("H={horizon} hour {hour}: flex {} soc {}", rec.flex, rec.soc);
        traj.steps.push(rec);
    }
    Ok(traj)
}

/// Hour-by-hour OPF without storage or price caps.
pub fn run_baseline<T: Scalar>(scenario: &Scenario<T>) -> Result<Trajectory<T>, MpcError<T>> {
    let mut traj = empty_trajectory(scenario, 0, None)?;
    for t in 0..scenario.horizon() {
        let hour = t + 1;
        let solved = build_opf_single(&scenario.network, &scenario.dispatch_inputs(t)).and_then(|m| {
            let sol = m.solve()?;
            Ok((m, sol))
        });
        let (model, sol) = match solved {
            Ok(x) => x,
            Err(e) => return Err(step_error(traj, hour, e)),
        };
        let rec = record(scenario, &model, &sol, t, T::zero(), T::zero()).map_err(|source| MpcError::Market { hour, source })?;
        traj.steps.push(rec);
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSavings<T> {
    pub horizon: usize,
    pub cost_per_mwh: T,
    pub saving_vs_baseline: T,
    /// Saving over the run without lookahead (`H = 1`), when that run is present.
    pub forecast_gain: Option<T>,
    /// `forecast_gain` as a percentage of the `H = 1` saving over the baseline.
    pub forecast_gain_percent: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavingsReport<T> {
    pub baseline_cost_per_mwh: T,
    pub horizons: Vec<HorizonSavings<T>>,
}

impl<T: Scalar> SavingsReport<T> {
    pub fn get(&self, horizon: usize) -> Option<&HorizonSavings<T>> {
        self.horizons.iter().find(|h| h.horizon == horizon)
    }
}

/// Percentage by which `gain` increases the saving `reference`; `None` when
/// the reference is zero.
pub fn forecast_gain_percent<T: Scalar>(gain: T, reference: T) -> Option<T> {
    (reference != T::zero()).then(|| T::lit(100.0) * gain / reference)
}

/// Compares each run with the baseline and with the run without lookahead.
pub fn savings<T: Scalar>(
    runs: &BTreeMap<usize, Trajectory<T>>,
    baseline: &Trajectory<T>,
) -> Result<SavingsReport<T>, MpcError<T>> {
    for traj in std::iter::once(baseline).chain(runs.values()) {
        if !traj.is_complete() {
            return Err(MpcError::IncompleteTrajectory {
                expected: traj.length,
                found: traj.steps.len(),
            });
        }
    }
    let base = baseline.cost_per_mwh();
    let myopic = runs.get(&1).map(Trajectory::cost_per_mwh);
    let horizons = runs
        .iter()
        .map(|(&h, traj)| {
            let cost = traj.cost_per_mwh();
            let gain = myopic.map(|m| m - cost);
            HorizonSavings {
                horizon: h,
                cost_per_mwh: cost,
                saving_vs_baseline: base - cost,
                forecast_gain: gain,
                forecast_gain_percent: gain.zip(myopic).and_then(|(g, m)| forecast_gain_percent(g, base - m)),
            }
        })
        .collect();
    Ok(SavingsReport {
        baseline_cost_per_mwh: base,
        horizons,
    })
}
