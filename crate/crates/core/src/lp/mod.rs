//! Linear programs with named rows and columns, and a bounded-variable simplex
//! solver that reports exact basis duals.
//!
//! # Dual sign convention
//!
//! Every reported dual is the sensitivity of the optimal objective to the
//! right-hand side of its row, `∂z*/∂rhs`, in the program's own sense. For a
//! maximization this makes the dual of a `≤` row non-negative and the dual of
//! a `≥` row non-positive; for a minimization the signs flip. Equality rows
//! are unrestricted. Reduced costs follow the same convention:
//! `d_j = c_j - Σ_i y_i a_ij`.

mod dense;
mod simplex;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

pub use simplex::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable<T> {
    pub name: String,
    pub lower: T,
    pub upper: T,
    pub objective: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub name: String,
    pub coeffs: Vec<(VarId, T)>,
    pub relation: Relation,
    pub rhs: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("malformed linear program: {0}")]
    MalformedProgram(String),
    #[error("solution is not optimal ({0:?})")]
    NotOptimal(Status),
    #[error("simplex iteration limit of {0} reached")]
    IterationLimit(usize),
}

/// A linear program over box-bounded variables and named linear rows.
///
/// Immutable once handed to the solver; builders mutate it only while
/// assembling.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    sense: Sense,
    variables: Vec<Variable<T>>,
    constraints: Vec<Constraint<T>>,
    var_index: HashMap<String, VarId>,
    row_index: HashMap<String, RowId>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            variables: Vec::new(),
            constraints: Vec::new(),
            var_index: HashMap::new(),
            row_index: HashMap::new(),
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn variables(&self) -> &[Variable<T>] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Adds a variable. Duplicate names are accepted here and rejected by
    /// [`LinearProgram::validate`].
    pub fn add_variable(&mut self, name: impl Into<String>, lower: T, upper: T, objective: T) -> VarId {
        let id = VarId(self.variables.len());
        let name = name.into();
        self.var_index.entry(name.clone()).or_insert(id);
        self.variables.push(Variable {
            name,
            lower,
            upper,
            objective,
        });
        id
    }

    /// Adds a row. Repeated entries for the same variable are summed.
    pub fn add_constraint<I>(&mut self, name: impl Into<String>, coeffs: I, relation: Relation, rhs: T) -> RowId
    where
        I: IntoIterator<Item = (VarId, T)>,
    {
        let mut merged: Vec<(VarId, T)> = Vec::new();
        for (var, coef) in coeffs {
            match merged.iter_mut().find(|(v, _)| *v == var) {
                Some(entry) => entry.1 = entry.1 + coef,
                None => merged.push((var, coef)),
            }
        }
        let id = RowId(self.constraints.len());
        let name = name.into();
        self.row_index.entry(name.clone()).or_insert(id);
        self.constraints.push(Constraint {
            name,
            coeffs: merged,
            relation,
            rhs,
        });
        id
    }

    /// Adds `coef` to the entry of `var` in `row`.
    pub fn add_to_row(&mut self, row: RowId, var: VarId, coef: T) {
        let coeffs = &mut self.constraints[row.0].coeffs;
        match coeffs.iter_mut().find(|(v, _)| *v == var) {
            Some(entry) => entry.1 = entry.1 + coef,
            None => coeffs.push((var, coef)),
        }
    }

    pub fn set_bounds(&mut self, var: VarId, lower: T, upper: T) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn set_objective(&mut self, var: VarId, objective: T) {
        self.variables[var.0].objective = objective;
    }

    pub fn variable(&self, var: VarId) -> &Variable<T> {
        &self.variables[var.0]
    }

    pub fn constraint(&self, row: RowId) -> &Constraint<T> {
        &self.constraints[row.0]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_index.get(name).copied()
    }

    pub fn row_id(&self, name: &str) -> Option<RowId> {
        self.row_index.get(name).copied()
    }

    /// Checks the structural invariants: unique names, declared variables,
    /// ordered finite-or-infinite bounds and finite data.
    pub fn validate(&self) -> Result<(), LpError> {
        let bad = |msg: String| Err(LpError::MalformedProgram(msg));
        if self.var_index.len() != self.variables.len() {
            return bad("duplicate variable name".into());
        }
        if self.row_index.len() != self.constraints.len() {
            return bad("duplicate constraint name".into());
        }
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() {
                return bad(format!("variable `{}` has a NaN bound", v.name));
            }
            if v.lower > v.upper {
                return bad(format!("variable `{}` has lower bound above upper bound", v.name));
            }
            if v.lower == T::infinity() || v.upper == T::neg_infinity() {
                return bad(format!("variable `{}` has an empty bound interval", v.name));
            }
            if !v.objective.is_finite() {
                return bad(format!("variable `{}` has a non-finite objective coefficient", v.name));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return bad(format!("constraint `{}` has a non-finite right-hand side", c.name));
            }
            for &(var, coef) in &c.coeffs {
                if var.0 >= self.variables.len() {
                    return bad(format!("constraint `{}` references undeclared variable {}", c.name, var.0));
                }
                if !coef.is_finite() {
                    return bad(format!("constraint `{}` has a non-finite coefficient", c.name));
                }
            }
        }
        Ok(())
    }

    /// Objective value of an arbitrary point.
    pub fn objective_at(&self, x: &[T]) -> T {
        self.variables
            .iter()
            .zip(x)
            .map(|(v, &xj)| if v.objective == T::zero() { T::zero() } else { v.objective * xj })
            .sum()
    }

    /// Left-hand side of a row evaluated at `x`.
    pub fn row_activity(&self, row: RowId, x: &[T]) -> T {
        self.constraints[row.0]
            .coeffs
            .iter()
            .map(|&(v, a)| a * x[v.0])
            .sum()
    }
}

/// Result of a solve. Vectors are empty unless `status` is [`Status::Optimal`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: Status,
    pub primal: Vec<T>,
    pub duals: Vec<T>,
    pub reduced_costs: Vec<T>,
    pub objective: T,
    pub iterations: usize,
}

impl<T: Scalar> LpSolution<T> {
    pub(crate) fn non_optimal(status: Status, iterations: usize) -> Self {
        Self {
            status,
            primal: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective: T::nan(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, var: VarId) -> T {
        self.primal[var.0]
    }

    pub fn dual(&self, row: RowId) -> T {
        self.duals[row.0]
    }

    /// Turns an infeasible or unbounded status into the matching error.
    pub fn require_optimal(self) -> Result<Self, LpError> {
        match self.status {
            Status::Optimal => Ok(self),
            Status::Infeasible => Err(LpError::Infeasible),
            Status::Unbounded => Err(LpError::Unbounded),
        }
    }
}

/// Solves `lp`, returning infeasible and unbounded programs as a status.
pub fn solve_with_status<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>, LpError> {
    simplex::solve(lp, &SolverOptions::default())
}

/// Solves `lp`; anything but an optimum is an error.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>, LpError> {
    solve_with_status(lp)?.require_optimal()
}

/// Objective of the dual program evaluated at the solution's multipliers:
/// `Σ y_i b_i` plus the bound terms `d_j · (active bound of x_j)`.
///
/// Recomputed from the program data and `sol.duals` only, so it is an
/// independent check of strong duality.
pub fn dual_objective<T: Scalar>(lp: &LinearProgram<T>, sol: &LpSolution<T>) -> Result<T, LpError> {
    if sol.status != Status::Optimal {
        return Err(LpError::NotOptimal(sol.status));
    }
    let mut reduced: Vec<T> = lp.variables.iter().map(|v| v.objective).collect();
    let mut total = T::zero();
    for (c, &y) in lp.constraints.iter().zip(&sol.duals) {
        total = total + y * c.rhs;
        for &(var, a) in &c.coeffs {
            reduced[var.0] = reduced[var.0] - y * a;
        }
    }
    let tol = T::feasibility_tolerance();
    for ((v, &d), &x) in lp.variables.iter().zip(&reduced).zip(&sol.primal) {
        // At an optimum of a maximization a positive reduced cost pins the
        // variable to its upper bound; the roles swap when minimizing.
        let pushes_up = match lp.sense {
            Sense::Maximize => d > T::zero(),
            Sense::Minimize => d < T::zero(),
        };
        let bound = if pushes_up { v.upper } else { v.lower };
        let term = if d.abs() <= tol || !bound.is_finite() { d * x } else { d * bound };
        total = total + term;
    }
    Ok(total)
}

/// Largest violation of a row or a bound at `x`.
pub fn primal_residual<T: Scalar>(lp: &LinearProgram<T>, x: &[T]) -> T {
    let mut worst = T::zero();
    for (i, c) in lp.constraints.iter().enumerate() {
        let lhs = lp.row_activity(RowId(i), x);
        let viol = match c.relation {
            Relation::Le => (lhs - c.rhs).max(T::zero()),
            Relation::Ge => (c.rhs - lhs).max(T::zero()),
            Relation::Eq => (lhs - c.rhs).abs(),
        };
        worst = worst.max(viol);
    }
    for (v, &xj) in lp.variables.iter().zip(x) {
        worst = worst.max((v.lower - xj).max(T::zero()));
        worst = worst.max((xj - v.upper).max(T::zero()));
    }
    worst
}

/// Largest `|y_i · slack_i|` over inequality rows.
pub fn complementary_slackness_residual<T: Scalar>(lp: &LinearProgram<T>, sol: &LpSolution<T>) -> T {
    lp.constraints
        .iter()
        .enumerate()
        .filter(|(_, c)| c.relation != Relation::Eq)
        .map(|(i, c)| {
            let slack = c.rhs - lp.row_activity(RowId(i), &sol.primal);
            (sol.duals[i] * slack).abs()
        })
        .fold(T::zero(), T::max)
}
