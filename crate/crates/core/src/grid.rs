//! Network topology and lossless DC power-flow relations.
//!
//! Angles are radians, reactances per-unit, power in MW on the network's
//! MVA base. Lines are undirected; the stored `from → to` orientation fixes
//! the sign of reported flows.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Generator,
    Load,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bus {
    pub id: String,
    pub kind: BusKind,
    /// Member of the price-constrained set: its LMP is capped and it may host flexibility.
    pub price_constrained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line<T> {
    pub from: String,
    pub to: String,
    pub reactance: T,
    /// Thermal limit in MW; `None` means unlimited.
    pub flow_limit: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line<T>>,
    pub base_mva: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("network is not connected; unreachable from `{0}`: {1:?}")]
    Disconnected(String, Vec<String>),
    #[error("network has no slack bus")]
    NoSlack,
    #[error("network has {0} slack buses, expected exactly one")]
    MultipleSlack(usize),
    #[error("line {0}-{1} has non-positive or non-finite reactance")]
    BadReactance(String, String),
    #[error("line {0}-{1} is a self-loop")]
    SelfLoop(String, String),
    #[error("duplicate line between {0} and {1}")]
    DuplicateLine(String, String),
    #[error("line {0}-{1} has a negative flow limit")]
    BadFlowLimit(String, String),
    #[error("line references unknown bus `{0}`")]
    UnknownBus(String),
    #[error("duplicate bus id `{0}`")]
    DuplicateBus(String),
    #[error("base MVA must be positive and finite")]
    BadBase,
}

/// Flow on `line` from its `from` end, in MW.
#[inline]
pub fn dc_flow<T: Scalar>(theta_from: T, theta_to: T, line: &Line<T>, base_mva: T) -> T {
    (theta_from - theta_to) / line.reactance * base_mva
}

impl<T: Scalar> Network<T> {
    /// The three-bus feeder: bus 1 is the slack (transmission connection),
    /// bus 2 hosts distributed generation and bus 3 the price-requesting load.
    /// All three lines share `reactance` and are unlimited.
    pub fn three_bus(reactance: T, base_mva: T) -> Self {
        let bus = |id: &str, kind, price_constrained| Bus {
            id: id.to_string(),
            kind,
            price_constrained,
        };
        let line = |from: &str, to: &str| Line {
            from: from.to_string(),
            to: to.to_string(),
            reactance,
            flow_limit: None,
        };
        Self {
            buses: vec![
                bus("1", BusKind::Slack, false),
                bus("2", BusKind::Generator, false),
                bus("3", BusKind::Load, true),
            ],
            lines: vec![line("1", "2"), line("1", "3"), line("2", "3")],
            base_mva,
        }
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn slack_index(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.kind == BusKind::Slack)
    }

    pub fn price_constrained(&self) -> impl Iterator<Item = &Bus> {
        self.buses.iter().filter(|b| b.price_constrained)
    }

    /// Flow on line `idx` for a vector of bus angles indexed like `self.buses`.
    pub fn line_flow(&self, idx: usize, theta: &[T]) -> T {
        let line = &self.lines[idx];
        let f = self.bus_index(&line.from).expect("validated network");
        let t = self.bus_index(&line.to).expect("validated network");
        dc_flow(theta[f], theta[t], line, self.base_mva)
    }

    /// Collects every violated invariant rather than stopping at the first.
    pub fn validate(&self) -> Result<(), Vec<GridError>> {
        let mut errors = Vec::new();
        if !(self.base_mva > T::zero() && self.base_mva.is_finite()) {
            errors.push(GridError::BadBase);
        }
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, b) in self.buses.iter().enumerate() {
            if index.insert(b.id.as_str(), i).is_some() {
                errors.push(GridError::DuplicateBus(b.id.clone()));
            }
        }
        match self.buses.iter().filter(|b| b.kind == BusKind::Slack).count() {
            0 => errors.push(GridError::NoSlack),
            1 => {}
            k => errors.push(GridError::MultipleSlack(k)),
        }

        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); self.buses.len()];
        for line in &self.lines {
            let ends = (index.get(line.from.as_str()), index.get(line.to.as_str()));
            let (Some(&f), Some(&t)) = ends else {
                for id in [&line.from, &line.to] {
                    if !index.contains_key(id.as_str()) {
                        errors.push(GridError::UnknownBus(id.clone()));
                    }
                }
                continue;
            };
            if !(line.reactance > T::zero() && line.reactance.is_finite()) {
                errors.push(GridError::BadReactance(line.from.clone(), line.to.clone()));
            }
            if matches!(line.flow_limit, Some(l) if !(l >= T::zero())) {
                errors.push(GridError::BadFlowLimit(line.from.clone(), line.to.clone()));
            }
            if f == t {
                errors.push(GridError::SelfLoop(line.from.clone(), line.to.clone()));
                continue;
            }
            if !seen.insert((f.min(t), f.max(t))) {
                errors.push(GridError::DuplicateLine(line.from.clone(), line.to.clone()));
            }
            adjacency[f].push(t);
            adjacency[t].push(f);
        }

        if !self.buses.is_empty() {
            let mut reached = vec![false; self.buses.len()];
            let mut queue = VecDeque::from([0]);
            reached[0] = true;
            while let Some(u) = queue.pop_front() {
                for &v in &adjacency[u] {
                    if !reached[v] {
                        reached[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            let missing: Vec<String> = self
                .buses
                .iter()
                .zip(&reached)
                .filter(|(_, r)| !**r)
                .map(|(b, _)| b.id.clone())
                .collect();
            if !missing.is_empty() {
                errors.push(GridError::Disconnected(self.buses[0].id.clone(), missing));
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        use crate::scalar::cast;
        Network {
            buses: self.buses.clone(),
            lines: self
                .lines
                .iter()
                .map(|l| Line {
                    from: l.from.clone(),
                    to: l.to.clone(),
                    reactance: cast(l.reactance),
                    flow_limit: l.flow_limit.map(cast),
                })
                .collect(),
            base_mva: cast(self.base_mva),
        }
    }
}
