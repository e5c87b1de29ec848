//! Two-phase bounded-variable primal simplex on a dense tableau.
//!
//! Every row gets a slack column (`a_i x + s_i = b_i`, with the slack's box
//! encoding the relation) and an artificial column used only by phase one.
//! Nonbasic variables sit at one of their bounds, or at zero when free.
//! Pricing and the ratio test both use Bland's smallest-index rule. The final
//! basis is refactored from the original data so that primal values and
//! duals do not carry the accumulated tableau round-off.

use super::dense::Lu;
use super::{LinearProgram, LpError, LpSolution, Relation, Sense, Status};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Default)]
pub struct SolverOptions {
    /// Overrides the default pivot budget, which scales with the problem size.
    pub max_iterations: Option<usize>,
}

pub(super) fn solve<T: Scalar>(lp: &LinearProgram<T>, opts: &SolverOptions) -> Result<LpSolution<T>, LpError> {
    lp.validate()?;
    let mut tab = Tableau::new(lp);
    let budget = opts
        .max_iterations
        .unwrap_or(20_000 + 50 * (tab.m + tab.n));

    tab.set_phase_one_costs();
    if let Outcome::Unbounded = tab.iterate(budget)? {
        // Phase one is bounded below by zero.
        unreachable!("phase one cannot be unbounded");
    }
    let infeasibility: T = tab.artificial_range().map(|j| tab.x[j]).sum();
    let scale = lp
        .constraints()
        .iter()
        .map(|c| c.rhs.abs())
        .fold(T::one(), T::max);
    if infeasibility > T::feasibility_tolerance() * T::lit(10.0) * scale {
        return Ok(LpSolution::non_optimal(Status::Infeasible, tab.iterations));
    }
    tab.expel_artificials();

    tab.set_phase_two_costs();
    if let Outcome::Unbounded = tab.iterate(budget)? {
        return Ok(LpSolution::non_optimal(Status::Unbounded, tab.iterations));
    }
    Ok(tab.finish(lp))
}

enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau<T> {
    m: usize,
    n: usize,
    ncols: usize,
    /// Dense copy of the structural constraint matrix, row-major `m × n`.
    a: Vec<T>,
    b: Vec<T>,
    /// `B⁻¹ [A | I | Σ]`, row-major `m × ncols`.
    tab: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    x: Vec<T>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    /// Sign of each row's artificial column in the original system.
    art_sign: Vec<T>,
    /// Minimization costs of the structural columns.
    cost_min: Vec<T>,
    cost: Vec<T>,
    d: Vec<T>,
    iterations: usize,
}

impl<T: Scalar> Tableau<T> {
    fn new(lp: &LinearProgram<T>) -> Self {
        let m = lp.num_constraints();
        let n = lp.num_variables();
        let ncols = n + 2 * m;
        let zero = T::zero();
        let inf = T::infinity();

        let mut a = vec![zero; m * n];
        let mut b = vec![zero; m];
        for (i, c) in lp.constraints().iter().enumerate() {
            for &(v, coef) in &c.coeffs {
                a[i * n + v.0] = coef;
            }
            b[i] = c.rhs;
        }

        let mut lower = vec![zero; ncols];
        let mut upper = vec![zero; ncols];
        let mut x = vec![zero; ncols];
        let flip = match lp.sense() {
            Sense::Minimize => T::one(),
            Sense::Maximize => -T::one(),
        };
        let mut cost_min = vec![zero; n];
        for (j, v) in lp.variables().iter().enumerate() {
            lower[j] = v.lower;
            upper[j] = v.upper;
            x[j] = if v.lower.is_finite() {
                v.lower
            } else if v.upper.is_finite() {
                v.upper
            } else {
                zero
            };
            cost_min[j] = flip * v.objective;
        }
        for (i, c) in lp.constraints().iter().enumerate() {
            let s = n + i;
            let (lo, hi) = match c.relation {
                Relation::Le => (zero, inf),
                Relation::Ge => (-inf, zero),
                Relation::Eq => (zero, zero),
            };
            lower[s] = lo;
            upper[s] = hi;
        }

        let mut tab = vec![zero; m * ncols];
        let mut basis = vec![0; m];
        let mut basic_row = vec![None; ncols];
        let mut art_sign = vec![T::one(); m];
        for i in 0..m {
            let s = n + i;
            let art = n + m + i;
            let activity: T = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            let r = b[i] - activity;
            let row = &mut tab[i * ncols..(i + 1) * ncols];
            if r >= lower[s] && r <= upper[s] {
                row[..n].copy_from_slice(&a[i * n..(i + 1) * n]);
                row[s] = T::one();
                x[s] = r;
                basis[i] = s;
                basic_row[s] = Some(i);
            } else {
                let s_val = r.max(lower[s]).min(upper[s]);
                let excess = r - s_val;
                let sigma = if excess > zero { T::one() } else { -T::one() };
                // Row divided by sigma so the artificial enters with +1.
                for j in 0..n {
                    row[j] = sigma * a[i * n + j];
                }
                row[s] = sigma;
                row[art] = T::one();
                x[s] = s_val;
                x[art] = excess.abs();
                upper[art] = inf;
                art_sign[i] = sigma;
                basis[i] = art;
                basic_row[art] = Some(i);
            }
        }

        Self {
            m,
            n,
            ncols,
            a,
            b,
            tab,
            lower,
            upper,
            x,
            basis,
            basic_row,
            art_sign,
            cost_min,
            cost: vec![zero; ncols],
            d: vec![zero; ncols],
            iterations: 0,
        }
    }

    fn artificial_range(&self) -> std::ops::Range<usize> {
        self.n + self.m..self.ncols
    }

    fn set_phase_one_costs(&mut self) {
        self.cost.iter_mut().for_each(|c| *c = T::zero());
        for j in self.artificial_range() {
            if self.upper[j] > T::zero() {
                self.cost[j] = T::one();
            }
        }
        self.price();
    }

    fn set_phase_two_costs(&mut self) {
        self.cost.iter_mut().for_each(|c| *c = T::zero());
        self.cost[..self.n].copy_from_slice(&self.cost_min);
        self.price();
    }

    /// Recomputes reduced costs `d = c - c_B B⁻¹ [A I Σ]` from the tableau.
    fn price(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.tab[i * self.ncols..(i + 1) * self.ncols];
            for (dj, &t) in self.d.iter_mut().zip(row) {
                *dj = *dj - cb * t;
            }
        }
        for &k in &self.basis {
            self.d[k] = T::zero();
        }
    }

    /// Bland's rule: first column whose reduced cost improves the objective
    /// in a direction its bounds allow.
    fn entering(&self) -> Option<(usize, T)> {
        let tol = T::feasibility_tolerance();
        (0..self.ncols).find_map(|j| {
            if self.basic_row[j].is_some() {
                return None;
            }
            let dj = self.d[j];
            if dj < -tol && self.x[j] < self.upper[j] {
                Some((j, T::one()))
            } else if dj > tol && self.x[j] > self.lower[j] {
                Some((j, -T::one()))
            } else {
                None
            }
        })
    }

    fn iterate(&mut self, budget: usize) -> Result<Outcome, LpError> {
        let piv_tol = T::pivot_tolerance();
        loop {
            let Some((j, dir)) = self.entering() else {
                return Ok(Outcome::Optimal);
            };
            if self.iterations >= budget {
                return Err(LpError::IterationLimit(budget));
            }
            self.iterations += 1;

            // (step, leaving variable, row, hits upper bound)
            let span = self.upper[j] - self.lower[j];
            let mut best: Option<(T, usize, Option<usize>, bool)> = if span.is_finite() {
                Some((span, j, None, dir > T::zero()))
            } else {
                None
            };
            for i in 0..self.m {
                let alpha = self.tab[i * self.ncols + j];
                if alpha.abs() <= piv_tol {
                    continue;
                }
                let k = self.basis[i];
                let rate = -alpha * dir;
                let (step, to_upper) = if rate < T::zero() {
                    if !self.lower[k].is_finite() {
                        continue;
                    }
                    ((self.x[k] - self.lower[k]) / -rate, false)
                } else {
                    if !self.upper[k].is_finite() {
                        continue;
                    }
                    ((self.upper[k] - self.x[k]) / rate, true)
                };
                let step = step.max(T::zero());
                let better = match best {
                    None => true,
                    Some((t, var, _, _)) => step < t - piv_tol || (step <= t + piv_tol && k < var),
                };
                if better {
                    best = Some((step, k, Some(i), to_upper));
                }
            }
            let Some((step, leaving, row, to_upper)) = best else {
                return Ok(Outcome::Unbounded);
            };

            if step > T::zero() {
                self.x[j] = self.x[j] + dir * step;
                for i in 0..self.m {
                    let alpha = self.tab[i * self.ncols + j];
                    if alpha != T::zero() {
                        let k = self.basis[i];
                        self.x[k] = self.x[k] - alpha * dir * step;
                    }
                }
            }
            match row {
                None => {
                    self.x[j] = if to_upper { self.upper[j] } else { self.lower[j] };
                }
                Some(r) => {
                    self.x[leaving] = if to_upper { self.upper[leaving] } else { self.lower[leaving] };
                    self.pivot(r, j);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let inv = T::one() / self.tab[r * nc + j];
        for v in &mut self.tab[r * nc..(r + 1) * nc] {
            *v = *v * inv;
        }
        self.tab[r * nc + j] = T::one();
        let (head, rest) = self.tab.split_at_mut(r * nc);
        let (pivot_row, tail) = rest.split_at_mut(nc);
        for row in head.chunks_exact_mut(nc).chain(tail.chunks_exact_mut(nc)) {
            let f = row[j];
            if f == T::zero() {
                continue;
            }
            for (v, &p) in row.iter_mut().zip(pivot_row.iter()) {
                *v = *v - f * p;
            }
            row[j] = T::zero();
        }
        let f = self.d[j];
        if f != T::zero() {
            for (v, &p) in self.d.iter_mut().zip(pivot_row.iter()) {
                *v = *v - f * p;
            }
        }
        self.d[j] = T::zero();

        let leaving = self.basis[r];
        self.basic_row[leaving] = None;
        self.basis[r] = j;
        self.basic_row[j] = Some(r);
    }

    /// Pivots zero-level artificials out of the basis and fixes every
    /// artificial at zero. Rows where no replacement exists are redundant and
    /// keep their artificial basic, pinned by its `[0, 0]` box.
    fn expel_artificials(&mut self) {
        let piv_tol = T::pivot_tolerance();
        let arts = self.artificial_range();
        for r in 0..self.m {
            if !arts.contains(&self.basis[r]) {
                continue;
            }
            let art = self.basis[r];
            let candidate = (0..self.n + self.m)
                .filter(|&j| self.basic_row[j].is_none())
                .map(|j| (j, self.tab[r * self.ncols + j].abs()))
                .filter(|&(_, v)| v > piv_tol)
                .fold(None, |best: Option<(usize, T)>, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                });
            self.x[art] = T::zero();
            if let Some((j, _)) = candidate {
                self.pivot(r, j);
            }
        }
        for j in arts {
            self.upper[j] = T::zero();
            if self.basic_row[j].is_none() {
                self.x[j] = T::zero();
            }
        }
    }

    fn basis_column(&self, k: usize, out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        if k < self.n {
            for i in 0..self.m {
                out[i] = self.a[i * self.n + k];
            }
        } else if k < self.n + self.m {
            out[k - self.n] = T::one();
        } else {
            let i = k - self.n - self.m;
            out[i] = self.art_sign[i];
        }
    }

    fn finish(mut self, lp: &LinearProgram<T>) -> LpSolution<T> {
        let (m, n) = (self.m, self.n);
        let mut y_min = vec![T::zero(); m];
        if m > 0 {
            // Column-major assembly of B, then transpose into row-major.
            let mut bmat = vec![T::zero(); m * m];
            let mut col = vec![T::zero(); m];
            for (c, &k) in self.basis.iter().enumerate() {
                self.basis_column(k, &mut col);
                for i in 0..m {
                    bmat[i * m + c] = col[i];
                }
            }
            let mut rhs = self.b.clone();
            for j in 0..n {
                if self.basic_row[j].is_none() && self.x[j] != T::zero() {
                    for i in 0..m {
                        rhs[i] = rhs[i] - self.a[i * n + j] * self.x[j];
                    }
                }
            }
            for i in 0..m {
                let s = n + i;
                if self.basic_row[s].is_none() {
                    rhs[i] = rhs[i] - self.x[s];
                }
            }
            let cb: Vec<T> = self.basis.iter().map(|&k| if k < n { self.cost_min[k] } else { T::zero() }).collect();
            match Lu::factor(m, bmat, T::epsilon()) {
                Some(lu) => {
                    let xb = lu.solve(&rhs);
                    for (r, &k) in self.basis.iter().enumerate() {
                        self.x[k] = xb[r];
                    }
                    y_min = lu.solve_transpose(&cb);
                }
                None => {
                    log::warn!("final basis is numerically singular; keeping tableau values");
                    for i in 0..m {
                        let s = n + i;
                        y_min[i] = (0..m).map(|r| cb[r] * self.tab[r * self.ncols + s]).sum();
                    }
                }
            }
        }

        let flip = match lp.sense() {
            Sense::Minimize => T::one(),
            Sense::Maximize => -T::one(),
        };
        let duals: Vec<T> = y_min.iter().map(|&y| flip * y).collect();
        let primal: Vec<T> = self.x[..n].to_vec();
        let mut reduced: Vec<T> = lp.variables().iter().map(|v| v.objective).collect();
        for i in 0..m {
            if duals[i] == T::zero() {
                continue;
            }
            for j in 0..n {
                reduced[j] = reduced[j] - duals[i] * self.a[i * n + j];
            }
        }
        LpSolution {
            status: Status::Optimal,
            objective: lp.objective_at(&primal),
            primal,
            duals,
            reduced_costs: reduced,
            iterations: self.iterations,
        }
    }
}
