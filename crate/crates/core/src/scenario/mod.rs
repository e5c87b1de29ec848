//! Hourly market scenarios on a fixed network: prices, demand, caps and storage.

mod io;
mod synth;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::grid::Network;
use crate::market::{DispatchInputs, Generator, Load};
use crate::scalar::{cast, Scalar};
use crate::storage::StorageSpec;

pub use io::{bundled_scenario, load_scenario, load_scenario_from_str, resolve_source, save_scenario, ScenarioSource, SCENARIO_DIR_ENV};
pub use synth::{synthesize_apx_like, uncapped_lmp, CalibrationTargets, DEFAULT_SEED};

/// Index of the transmission import in [`Scenario::dispatch_inputs`].
pub const TRANSMISSION: usize = 0;
/// Index of the distributed generator in [`Scenario::dispatch_inputs`].
pub const DISTRIBUTED: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSite<T> {
    pub bus: String,
    /// MW; infinite when unlimited.
    pub capacity: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HourlyData<T> {
    /// Wholesale import price, €/MWh.
    pub a_trans: T,
    /// Distributed generation cost, €/MWh.
    pub a_dist: T,
    /// Load utility, €/MWh.
    pub b_load: T,
    pub demand_lo: T,
    pub demand_hi: T,
    /// Maximum willingness to pay, €/MWh.
    pub pi_des: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub name: String,
    pub network: Network<T>,
    pub transmission: GeneratorSite<T>,
    pub distributed: GeneratorSite<T>,
    pub load_bus: String,
    pub hours: Vec<HourlyData<T>>,
    pub storage: Vec<StorageSpec<T>>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {file} at line {line}, column {column}: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("scenario invalid ({invariant}): {detail}")]
    Validation { invariant: &'static str, detail: String },
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
}

fn invalid(invariant: &'static str, detail: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        invariant,
        detail: detail.into(),
    }
}

/// Whether soft modelling assumptions are errors or warnings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Lenient,
    Strict,
}

impl<T: Scalar> Scenario<T> {
    pub fn horizon(&self) -> usize {
        self.hours.len()
    }

    pub fn price_constrained_buses(&self) -> Vec<String> {
        self.network.price_constrained().map(|b| b.id.clone()).collect()
    }

    /// Market data of hour index `t` (zero-based): the import at index
    /// [`TRANSMISSION`], distributed generation at [`DISTRIBUTED`], one load,
    /// and the hour's cap at every price-constrained bus.
    pub fn dispatch_inputs(&self, t: usize) -> DispatchInputs<T> {
        let h = &self.hours[t];
        DispatchInputs {
            generators: vec![
                Generator {
                    name: "trans".into(),
                    bus: self.transmission.bus.clone(),
                    capacity: self.transmission.capacity,
                    cost: h.a_trans,
                },
                Generator {
                    name: "dist".into(),
                    bus: self.distributed.bus.clone(),
                    capacity: self.distributed.capacity,
                    cost: h.a_dist,
                },
            ],
            loads: vec![Load {
                name: "load".into(),
                bus: self.load_bus.clone(),
                min: h.demand_lo,
                max: h.demand_hi,
                utility: h.b_load,
            }],
            price_caps: self
                .network
                .price_constrained()
                .map(|b| (b.id.clone(), h.pi_des))
                .collect(),
        }
    }

    pub fn with_pi_des(mut self, pi_des: T) -> Self {
        self.hours.iter_mut().for_each(|h| h.pi_des = pi_des);
        self
    }

    /// Checks every invariant; soft ones become warnings under [`Strictness::Lenient`].
    pub fn validate(&self, strictness: Strictness) -> Result<Vec<String>, ScenarioError> {
        self.network
            .validate()
            .map_err(|errs| invalid("network", format!("{errs:?}")))?;
        if self.hours.is_empty() {
            return Err(invalid("series length", "scenario has no hours"));
        }
        let bus_exists = |id: &str| self.network.bus_index(id).is_some();
        for (role, bus) in [
            ("transmission bus", &self.transmission.bus),
            ("distributed bus", &self.distributed.bus),
            ("load bus", &self.load_bus),
        ] {
            if !bus_exists(bus) {
                return Err(invalid("bus reference", format!("{role} `{bus}` is not in the network")));
            }
        }
        for site in [&self.transmission, &self.distributed] {
            if !(site.capacity >= T::zero()) {
                return Err(invalid("generator capacity", format!("capacity at `{}` is negative", site.bus)));
            }
        }
        let constrained: BTreeSet<String> = self.price_constrained_buses().into_iter().collect();
        for s in &self.storage {
            s.validate()
                .map_err(|e| invalid("storage", e.to_string()))?;
            if !constrained.contains(&s.host_bus) {
                return Err(invalid(
                    "storage host",
                    format!("storage host `{}` is not price-constrained", s.host_bus),
                ));
            }
        }

        let mut warnings = Vec::new();
        let mut soft = |invariant: &'static str, detail: String| -> Result<(), ScenarioError> {
            match strictness {
                Strictness::Strict => Err(invalid(invariant, detail)),
                Strictness::Lenient => {
                    warnings.push(format!("{invariant}: {detail}"));
                    Ok(())
                }
            }
        };
        for (t, h) in self.hours.iter().enumerate() {
            let hour = t + 1;
            let values = [h.a_trans, h.a_dist, h.b_load, h.demand_lo, h.demand_hi];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(invalid("finite series", format!("hour {hour} has a non-finite value")));
            }
            if !(h.demand_lo <= h.demand_hi) {
                return Err(invalid("demand bounds", format!("hour {hour}: demand_lo > demand_hi")));
            }
            if !(h.pi_des > T::zero()) {
                return Err(invalid("price cap", format!("hour {hour}: pi_des must be positive")));
            }
            if !(h.a_dist < h.a_trans) {
                soft(
                    "a_dist < a_trans",
                    format!("hour {hour}: a_dist {} is not below a_trans {}", h.a_dist, h.a_trans),
                )?;
            }
            if !(h.b_load > h.pi_des) {
                soft(
                    "b_load > pi_des",
                    format!("hour {hour}: b_load {} is not above pi_des {}", h.b_load, h.pi_des),
                )?;
            }
        }
        Ok(warnings)
    }

    pub fn cast<U: Scalar>(&self) -> Scenario<U> {
        Scenario {
            name: self.name.clone(),
            network: self.network.cast(),
            transmission: GeneratorSite {
                bus: self.transmission.bus.clone(),
                capacity: cast(self.transmission.capacity),
            },
            distributed: GeneratorSite {
                bus: self.distributed.bus.clone(),
                capacity: cast(self.distributed.capacity),
            },
            load_bus: self.load_bus.clone(),
            hours: self
                .hours
                .iter()
                .map(|h| HourlyData {
                    a_trans: cast(h.a_trans),
                    a_dist: cast(h.a_dist),
                    b_load: cast(h.b_load),
                    demand_lo: cast(h.demand_lo),
                    demand_hi: cast(h.demand_hi),
                    pi_des: cast(h.pi_des),
                })
                .collect(),
            storage: self.storage.iter().map(StorageSpec::cast).collect(),
        }
    }
}
