//! Price hedging with demand-side flexibility.
//!
//! Capping a bus's marginal price at a consumer's willingness to pay turns
//! into a flexibility variable in the dispatch LP; its optimal value is the
//! flexibility required. [`mpc`] then checks whether a storage device run
//! under receding-horizon control can deliver it.
//!
//! Everything numeric is generic over [`scalar::Scalar`]; the aliases below
//! fix the usual `f64` choice.

pub mod grid;
pub mod lp;
pub mod market;
pub mod mpc;
pub mod report;
pub mod scalar;
pub mod scenario;
pub mod storage;

pub type LinearProgram = lp::LinearProgram<f64>;
pub type LpSolution = lp::LpSolution<f64>;
pub type Network = grid::Network<f64>;
pub type DispatchInputs = market::DispatchInputs<f64>;
pub type HedgeResult = market::HedgeResult<f64>;
pub type MarketModel = market::MarketModel<f64>;
pub type StorageSpec = storage::StorageSpec<f64>;
pub type StorageState = storage::StorageState<f64>;
pub type Scenario = scenario::Scenario<f64>;
pub type Trajectory = mpc::Trajectory<f64>;
pub type SavingsReport = mpc::SavingsReport<f64>;
