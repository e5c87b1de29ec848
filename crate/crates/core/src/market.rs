//! Market-clearing programs: plain and price-capped dispatch, single-period
//! DC-OPF, and the multi-period OPF coupled to storage.
//!
//! All programs maximize welfare, `Σ utility·P_L − Σ cost·P_G`, and in the
//! hedged forms subtract `π_des · flex` at every price-constrained bus. Nodal
//! balance rows are written as `injections − withdrawals − outflow = 0`, so the
//! raw dual of a balance row is minus the price a load pays there;
//! [`MarketModel::extract_lmp`] applies that sign once.
//!
//! Capping the dual price of a bus at `π_des` is equivalent to offering an
//! unbounded, non-negative supply at that price on the primal side. Its
//! dispatch is the flexibility required to enforce the cap.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::grid::{GridError, Network};
use crate::lp::{self, LinearProgram, LpError, LpSolution, Relation, RowId, Sense, VarId};
use crate::scalar::Scalar;
use crate::storage::{StorageError, StorageState};

/// Default lexicographic penalty on `|flex|` in the storage-coupled program, €/MWh.
pub const DEFAULT_FLEX_PENALTY: f64 = 1e-7;

const SYSTEM: &str = "system";

#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T> {
    pub name: String,
    pub bus: String,
    /// MW; may be infinite.
    pub capacity: T,
    /// €/MWh.
    pub cost: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load<T> {
    pub name: String,
    pub bus: String,
    pub min: T,
    pub max: T,
    /// €/MWh.
    pub utility: T,
}

/// One period of market data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DispatchInputs<T> {
    pub generators: Vec<Generator<T>>,
    pub loads: Vec<Load<T>>,
    /// Maximum willingness to pay per price-constrained bus, €/MWh. An infinite
    /// cap removes the flexibility offer at that bus.
    pub price_caps: BTreeMap<String, T>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("market needs at least one generator and one load")]
    EmptyMarket,
    #[error("no price cap given for price-constrained bus `{0}`")]
    MissingPriceCap(String),
    #[error("invalid market inputs: {0}")]
    InvalidInputs(String),
    #[error("unknown bus `{0}`")]
    UnknownBus(String),
    #[error("invalid network: {0:?}")]
    Grid(Vec<GridError>),
    #[error("storage host `{0}` is not a price-constrained bus of the network")]
    MissingStorageHost(String),
    #[error("no balance row for bus `{bus}` at step {step}")]
    NoSuchRow { bus: String, step: usize },
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Solver(#[from] LpError),
}

impl<T: Scalar> DispatchInputs<T> {
    pub fn validate(&self) -> Result<(), MarketError> {
        let bad = |m: String| Err(MarketError::InvalidInputs(m));
        for g in &self.generators {
            if !(g.capacity >= T::zero()) {
                return bad(format!("generator `{}` has negative capacity", g.name));
            }
            if !g.cost.is_finite() {
                return bad(format!("generator `{}` has non-finite cost", g.name));
            }
        }
        for l in &self.loads {
            if !(l.min <= l.max) || !l.min.is_finite() || !l.max.is_finite() {
                return bad(format!("load `{}` has invalid bounds", l.name));
            }
            if !l.utility.is_finite() {
                return bad(format!("load `{}` has non-finite utility", l.name));
            }
        }
        for (bus, &pi) in &self.price_caps {
            if !(pi > T::zero()) {
                return bad(format!("price cap at `{bus}` must be positive"));
            }
        }
        Ok(())
    }

    /// Same market with every cap raised to `+∞`.
    pub fn uncapped(&self) -> Self {
        let mut out = self.clone();
        out.price_caps.values_mut().for_each(|p| *p = T::infinity());
        out
    }
}

/// Flexibility columns at one bus and step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlexVars {
    /// Signed injection, discharge positive.
    Single(VarId),
    /// Non-negative discharge and charge columns; net injection is their difference.
    Split { discharge: VarId, charge: VarId },
}

/// A built program together with the index maps needed to read its solution.
#[derive(Debug, Clone)]
pub struct MarketModel<T> {
    pub lp: LinearProgram<T>,
    steps: usize,
    /// Bus ids in network order; a single pseudo-bus for copper-plate models.
    buses: Vec<String>,
    copper_plate: bool,
    balance: Vec<Vec<RowId>>,
    theta: Vec<Vec<VarId>>,
    generation: Vec<Vec<VarId>>,
    consumption: Vec<Vec<VarId>>,
    flex: Vec<BTreeMap<String, FlexVars>>,
    storage: Vec<StorageColumns>,
}

#[derive(Debug, Clone)]
struct StorageColumns {
    host: String,
    energy: Vec<VarId>,
    soc_rows: Vec<RowId>,
}

impl<T: Scalar> MarketModel<T> {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn solve(&self) -> Result<LpSolution<T>, MarketError> {
        Ok(lp::solve(&self.lp)?)
    }

    fn bus_slot(&self, bus: &str, step: usize) -> Result<usize, MarketError> {
        let missing = || MarketError::NoSuchRow {
            bus: bus.to_string(),
            step,
        };
        if step >= self.steps {
            return Err(missing());
        }
        if self.copper_plate {
            return Ok(0);
        }
        self.buses.iter().position(|b| b == bus).ok_or_else(missing)
    }

    pub fn balance_row(&self, bus: &str, step: usize) -> Result<RowId, MarketError> {
        let slot = self.bus_slot(bus, step)?;
        Ok(self.balance[step][slot])
    }

    /// Locational marginal price at `bus`, positive when loads pay.
    pub fn extract_lmp(&self, sol: &LpSolution<T>, bus: &str, step: usize) -> Result<T, MarketError> {
        if !sol.is_optimal() {
            return Err(LpError::NotOptimal(sol.status).into());
        }
        let row = self.balance_row(bus, step)?;
        Ok(-sol.dual(row))
    }

    /// Net flexibility injected at `bus`; zero where the bus offers none.
    pub fn flex(&self, sol: &LpSolution<T>, bus: &str, step: usize) -> T {
        match self.flex.get(step).and_then(|m| m.get(bus)) {
            Some(FlexVars::Single(v)) => sol.value(*v),
            Some(FlexVars::Split { discharge, charge }) => sol.value(*discharge) - sol.value(*charge),
            None => T::zero(),
        }
    }

    pub fn flex_vars(&self, bus: &str, step: usize) -> Option<FlexVars> {
        self.flex.get(step).and_then(|m| m.get(bus)).copied()
    }

    /// Output of generator `idx` (input order) at `step`.
    pub fn generation(&self, sol: &LpSolution<T>, idx: usize, step: usize) -> T {
        sol.value(self.generation[step][idx])
    }

    pub fn generation_var(&self, idx: usize, step: usize) -> VarId {
        self.generation[step][idx]
    }

    pub fn consumption(&self, sol: &LpSolution<T>, idx: usize, step: usize) -> T {
        sol.value(self.consumption[step][idx])
    }

    pub fn consumption_var(&self, idx: usize, step: usize) -> VarId {
        self.consumption[step][idx]
    }

    /// Bus angles at `step`, in network bus order. Empty for copper-plate models.
    pub fn angles(&self, sol: &LpSolution<T>, step: usize) -> Vec<T> {
        self.theta
            .get(step)
            .map(|vs| vs.iter().map(|&v| sol.value(v)).collect())
            .unwrap_or_default()
    }

    /// Stored energy at the end of `step` for the storage hosted at `bus`.
    pub fn energy(&self, sol: &LpSolution<T>, bus: &str, step: usize) -> Option<T> {
        self.storage
            .iter()
            .find(|s| s.host == bus)
            .map(|s| sol.value(s.energy[step]))
    }

    pub fn energy_var(&self, bus: &str, step: usize) -> Option<VarId> {
        self.storage.iter().find(|s| s.host == bus).map(|s| s.energy[step])
    }

    pub fn soc_row(&self, bus: &str, step: usize) -> Option<RowId> {
        self.storage.iter().find(|s| s.host == bus).map(|s| s.soc_rows[step])
    }
}

/// Quantities of one solved period, keyed for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeResult<T> {
    /// Flexibility dispatched per price-constrained bus, MW, never negative.
    pub flex_required: BTreeMap<String, T>,
    pub lmp: BTreeMap<String, T>,
    /// MW per generator, input order.
    pub dispatch: Vec<T>,
    /// MW per load, input order.
    pub consumption: Vec<T>,
    pub objective: T,
}

impl<T: Scalar> HedgeResult<T> {
    fn collect(
        model: &MarketModel<T>,
        inputs: &DispatchInputs<T>,
        price_buses: &[String],
        sol: &LpSolution<T>,
    ) -> Result<Self, MarketError> {
        let mut lmp = BTreeMap::new();
        for bus in price_buses {
            lmp.insert(bus.clone(), model.extract_lmp(sol, bus, 0)?);
        }
        let flex_required = model.flex[0]
            .keys()
            .map(|bus| (bus.clone(), model.flex(sol, bus, 0).max(T::zero())))
            .collect();
        Ok(Self {
            flex_required,
            lmp,
            dispatch: (0..inputs.generators.len()).map(|g| model.generation(sol, g, 0)).collect(),
            consumption: (0..inputs.loads.len()).map(|l| model.consumption(sol, l, 0)).collect(),
            objective: sol.objective,
        })
    }
}

/// Builder state shared by all formulations.
struct Assembly<T> {
    lp: LinearProgram<T>,
    balance: Vec<Vec<RowId>>,
    theta: Vec<Vec<VarId>>,
    generation: Vec<Vec<VarId>>,
    consumption: Vec<Vec<VarId>>,
    flex: Vec<BTreeMap<String, FlexVars>>,
}

impl<T: Scalar> Assembly<T> {
    fn new() -> Self {
        Self {
            lp: LinearProgram::new(Sense::Maximize),
            balance: Vec::new(),
            theta: Vec::new(),
            generation: Vec::new(),
            consumption: Vec::new(),
            flex: Vec::new(),
        }
    }

    fn add_market_columns(&mut self, inputs: &DispatchInputs<T>, step: usize) {
        let lp = &mut self.lp;
        let gens = inputs
            .generators
            .iter()
            .map(|g| lp.add_variable(format!("pg[{}@{step}]", g.name), T::zero(), g.capacity, -g.cost))
            .collect();
        let loads = inputs
            .loads
            .iter()
            .map(|l| lp.add_variable(format!("pl[{}@{step}]", l.name), l.min, l.max, l.utility))
            .collect();
        self.generation.push(gens);
        self.consumption.push(loads);
    }

    /// One balance row per network bus, DC flows through angle columns, and
    /// optional line limits.
    fn add_network_step(&mut self, network: &Network<T>, inputs: &DispatchInputs<T>, step: usize) -> Result<(), MarketError> {
        self.add_market_columns(inputs, step);
        let slack = network.slack_index().ok_or(MarketError::Grid(vec![GridError::NoSlack]))?;
        let inf = T::infinity();
        let theta: Vec<VarId> = network
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let (lo, hi) = if i == slack { (T::zero(), T::zero()) } else { (-inf, inf) };
                self.lp.add_variable(format!("theta[{}@{step}]", b.id), lo, hi, T::zero())
            })
            .collect();

        let mut rows: Vec<Vec<(VarId, T)>> = vec![Vec::new(); network.buses.len()];
        let locate = |bus: &str| network.bus_index(bus).ok_or_else(|| MarketError::UnknownBus(bus.to_string()));
        for (g, &v) in inputs.generators.iter().zip(&self.generation[step]) {
            rows[locate(&g.bus)?].push((v, T::one()));
        }
        for (l, &v) in inputs.loads.iter().zip(&self.consumption[step]) {
            rows[locate(&l.bus)?].push((v, -T::one()));
        }
        for line in &network.lines {
            let f = locate(&line.from)?;
            let t = locate(&line.to)?;
            let b = network.base_mva / line.reactance;
            // Outflow from `f` is b(θf − θt); it leaves f's balance and enters t's.
            rows[f].push((theta[f], -b));
            rows[f].push((theta[t], b));
            rows[t].push((theta[f], b));
            rows[t].push((theta[t], -b));
            if let Some(limit) = line.flow_limit {
                let flow = [(theta[f], b), (theta[t], -b)];
                let tag = format!("{}-{}@{step}", line.from, line.to);
                self.lp.add_constraint(format!("flow_max[{tag}]"), flow, Relation::Le, limit);
                self.lp.add_constraint(format!("flow_min[{tag}]"), flow, Relation::Ge, -limit);
            }
        }
        let balance = network
            .buses
            .iter()
            .zip(rows)
            .map(|(bus, coeffs)| {
                self.lp
                    .add_constraint(format!("balance[{}@{step}]", bus.id), coeffs, Relation::Eq, T::zero())
            })
            .collect();
        self.balance.push(balance);
        self.theta.push(theta);
        self.flex.push(BTreeMap::new());
        Ok(())
    }

    fn add_copper_plate_step(&mut self, inputs: &DispatchInputs<T>, step: usize) {
        self.add_market_columns(inputs, step);
        let coeffs: Vec<(VarId, T)> = self.generation[step]
            .iter()
            .map(|&v| (v, T::one()))
            .chain(self.consumption[step].iter().map(|&v| (v, -T::one())))
            .collect();
        let row = self
            .lp
            .add_constraint(format!("balance[{SYSTEM}@{step}]"), coeffs, Relation::Eq, T::zero());
        self.balance.push(vec![row]);
        self.theta.push(Vec::new());
        self.flex.push(BTreeMap::new());
    }

    /// Unbounded non-negative flexibility priced at the cap; skipped for an infinite cap.
    fn add_required_flex(&mut self, bus: &str, slot: usize, cap: T, step: usize) {
        if !cap.is_finite() {
            return;
        }
        let v = self
            .lp
            .add_variable(format!("flex[{bus}@{step}]"), T::zero(), T::infinity(), -cap);
        self.lp.add_to_row(self.balance[step][slot], v, T::one());
        self.flex[step].insert(bus.to_string(), FlexVars::Single(v));
    }

    fn finish(self, steps: usize, buses: Vec<String>, copper_plate: bool, storage: Vec<StorageColumns>) -> MarketModel<T> {
        MarketModel {
            lp: self.lp,
            steps,
            buses,
            copper_plate,
            balance: self.balance,
            theta: self.theta,
            generation: self.generation,
            consumption: self.consumption,
            flex: self.flex,
            storage,
        }
    }
}

fn check_market<T: Scalar>(inputs: &DispatchInputs<T>) -> Result<(), MarketError> {
    if inputs.generators.is_empty() || inputs.loads.is_empty() {
        return Err(MarketError::EmptyMarket);
    }
    inputs.validate()
}

fn check_network<T: Scalar>(network: &Network<T>) -> Result<(), MarketError> {
    network.validate().map_err(MarketError::Grid)
}

/// Caps for every price-constrained bus of `network`, in network order.
fn caps_for<T: Scalar>(network: &Network<T>, inputs: &DispatchInputs<T>) -> Result<Vec<(usize, String, T)>, MarketError> {
    network
        .buses
        .iter()
        .enumerate()
        .filter(|(_, b)| b.price_constrained)
        .map(|(i, b)| {
            inputs
                .price_caps
                .get(&b.id)
                .map(|&pi| (i, b.id.clone(), pi))
                .ok_or_else(|| MarketError::MissingPriceCap(b.id.clone()))
        })
        .collect()
}

fn copper_plate_buses<T>(inputs: &DispatchInputs<T>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    inputs
        .generators
        .iter()
        .map(|g| g.bus.clone())
        .chain(inputs.loads.iter().map(|l| l.bus.clone()))
        .chain(inputs.price_caps.keys().cloned())
        .filter(|b| seen.insert(b.clone()))
        .collect()
}

/// Welfare-maximizing dispatch without network or price constraints; one
/// system-wide balance row whose price applies at every bus.
pub fn build_economic_dispatch<T: Scalar>(inputs: &DispatchInputs<T>) -> Result<MarketModel<T>, MarketError> {
    check_market(inputs)?;
    let mut asm = Assembly::new();
    asm.add_copper_plate_step(inputs, 0);
    Ok(asm.finish(1, vec![SYSTEM.to_string()], true, Vec::new()))
}

/// Economic dispatch plus a flexibility column per capped bus, priced at its cap.
pub fn build_hedged_dispatch<T: Scalar>(inputs: &DispatchInputs<T>) -> Result<MarketModel<T>, MarketError> {
    check_market(inputs)?;
    if inputs.price_caps.is_empty() {
        return Err(MarketError::MissingPriceCap(SYSTEM.to_string()));
    }
    let mut asm = Assembly::new();
    asm.add_copper_plate_step(inputs, 0);
    for (bus, &cap) in &inputs.price_caps {
        asm.add_required_flex(bus, 0, cap, 0);
    }
    Ok(asm.finish(1, copper_plate_buses(inputs), true, Vec::new()))
}

/// Single-period DC-OPF with no flexibility; the unhedged reference.
pub fn build_opf_single<T: Scalar>(network: &Network<T>, inputs: &DispatchInputs<T>) -> Result<MarketModel<T>, MarketError> {
    check_network(network)?;
    check_market(inputs)?;
    let mut asm = Assembly::new();
    asm.add_network_step(network, inputs, 0)?;
    Ok(asm.finish(1, bus_ids(network), false, Vec::new()))
}

/// Single-period DC-OPF with unbounded required flexibility at every
/// price-constrained bus.
pub fn build_hedged_opf_single<T: Scalar>(network: &Network<T>, inputs: &DispatchInputs<T>) -> Result<MarketModel<T>, MarketError> {
    check_network(network)?;
    check_market(inputs)?;
    let caps = caps_for(network, inputs)?;
    let mut asm = Assembly::new();
    asm.add_network_step(network, inputs, 0)?;
    for (slot, bus, cap) in caps {
        asm.add_required_flex(&bus, slot, cap, 0);
    }
    Ok(asm.finish(1, bus_ids(network), false, Vec::new()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonOptions<T> {
    /// Cost per MWh of charge or discharge, breaking ties toward idling.
    pub flex_penalty: T,
}

impl<T: Scalar> Default for HorizonOptions<T> {
    fn default() -> Self {
        Self {
            flex_penalty: T::lit(DEFAULT_FLEX_PENALTY),
        }
    }
}

/// Multi-period DC-OPF over `window.len()` steps with storage-limited
/// flexibility.
///
/// Per step and storage: discharge and charge columns in `[0, power_bound]`,
/// energy in `[0, capacity]`, and the chain
/// `energy_h = energy_{h-1} − loss − (discharge_h − charge_h)` seeded from the
/// current state. Price-constrained buses without storage offer no flexibility.
pub fn build_hedged_opf_horizon<T: Scalar>(
    network: &Network<T>,
    window: &[DispatchInputs<T>],
    storage: &[StorageState<T>],
    opts: &HorizonOptions<T>,
) -> Result<MarketModel<T>, MarketError> {
    check_network(network)?;
    if window.is_empty() {
        return Err(MarketError::InvalidInputs("horizon window is empty".into()));
    }
    for s in storage {
        s.spec.validate()?;
        let hosted = network
            .buses
            .iter()
            .any(|b| b.id == s.spec.host_bus && b.price_constrained);
        if !hosted {
            return Err(MarketError::MissingStorageHost(s.spec.host_bus.clone()));
        }
    }
    let mut asm = Assembly::new();
    let mut caps_per_step = Vec::with_capacity(window.len());
    for (step, inputs) in window.iter().enumerate() {
        check_market(inputs)?;
        let caps = caps_for(network, inputs)?;
        if let Some((_, bus, _)) = caps.iter().find(|(_, _, c)| !c.is_finite()) {
            return Err(MarketError::InvalidInputs(format!(
                "price cap at `{bus}` must be finite when storage is dispatched"
            )));
        }
        asm.add_network_step(network, inputs, step)?;
        caps_per_step.push(caps);
    }

    let eps = opts.flex_penalty;
    let mut columns = Vec::with_capacity(storage.len());
    for s in storage {
        let spec = &s.spec;
        let host = &spec.host_bus;
        let slot = network.bus_index(host).expect("checked above");
        let mut energy = Vec::with_capacity(window.len());
        let mut soc_rows = Vec::with_capacity(window.len());
        for (step, caps) in caps_per_step.iter().enumerate() {
            let cap = caps
                .iter()
                .find(|(_, b, _)| b == host)
                .map(|c| c.2)
                .expect("host is price-constrained");
            let lp = &mut asm.lp;
            let dis = lp.add_variable(format!("dis[{host}@{step}]"), T::zero(), spec.power_bound, -cap - eps);
            let chg = lp.add_variable(format!("chg[{host}@{step}]"), T::zero(), spec.power_bound, cap - eps);
            let e = lp.add_variable(format!("energy[{host}@{step}]"), T::zero(), spec.capacity, T::zero());
            let mut coeffs = vec![(e, T::one()), (dis, T::one()), (chg, -T::one())];
            let rhs = match energy.last() {
                Some(&prev) => {
                    coeffs.push((prev, -T::one()));
                    -spec.loss
                }
                None => s.energy - spec.loss,
            };
            soc_rows.push(lp.add_constraint(format!("soc[{host}@{step}]"), coeffs, Relation::Eq, rhs));
            let row = asm.balance[step][slot];
            asm.lp.add_to_row(row, dis, T::one());
            asm.lp.add_to_row(row, chg, -T::one());
            asm.flex[step].insert(
                host.clone(),
                FlexVars::Split {
                    discharge: dis,
                    charge: chg,
                },
            );
            energy.push(e);
        }
        columns.push(StorageColumns {
            host: host.clone(),
            energy,
            soc_rows,
        });
    }
    Ok(asm.finish(window.len(), bus_ids(network), false, columns))
}

fn bus_ids<T>(network: &Network<T>) -> Vec<String> {
    network.buses.iter().map(|b| b.id.clone()).collect()
}

/// Solves the single-period hedged OPF and packages required flexibility,
/// prices and dispatch.
pub fn compute_flex_required<T: Scalar>(network: &Network<T>, inputs: &DispatchInputs<T>) -> Result<HedgeResult<T>, MarketError> {
    let model = build_hedged_opf_single(network, inputs)?;
    let sol = model.solve()?;
    HedgeResult::collect(&model, inputs, &bus_ids(network), &sol)
}

/// Copper-plate counterpart of [`compute_flex_required`].
pub fn hedge_dispatch<T: Scalar>(inputs: &DispatchInputs<T>) -> Result<HedgeResult<T>, MarketError> {
    let model = build_hedged_dispatch(inputs)?;
    let sol = model.solve()?;
    HedgeResult::collect(&model, inputs, &copper_plate_buses(inputs), &sol)
}
