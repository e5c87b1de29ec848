//! Independent oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

pub mod instances;

use pricehedge::lp::{LinearProgram, Relation, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random feasible LP with finite boxes on every variable, so it is bounded.
/// Integer coefficients in [-10, 10]; right-hand sides built around a random
/// interior point so feasibility is guaranteed.
pub fn random_bounded_lp(seed: u64, max_vars: usize, max_rows: usize) -> LinearProgram<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(0..=max_rows);
    let sense = if rng.gen_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    let mut lp = LinearProgram::new(sense);
    let mut point = Vec::with_capacity(n);
    let mut vars = Vec::with_capacity(n);
    for j in 0..n {
        let lo = rng.gen_range(-5..=0) as f64;
        let hi = lo + rng.gen_range(1..=10) as f64;
        let c = rng.gen_range(-10..=10) as f64;
        vars.push(lp.add_variable(format!("x{j}"), lo, hi, c));
        point.push(rng.gen_range(lo..=hi));
    }
    for i in 0..m {
        let mut coeffs = Vec::new();
        let mut lhs = 0.0;
        for (j, &v) in vars.iter().enumerate() {
            if rng.gen_bool(0.7) {
                let a = rng.gen_range(-10..=10) as f64;
                lhs += a * point[j];
                coeffs.push((v, a));
            }
        }
        let (rel, rhs) = match rng.gen_range(0..3) {
            0 => (Relation::Le, (lhs + rng.gen_range(0..=5) as f64).ceil()),
            1 => (Relation::Ge, (lhs - rng.gen_range(0..=5) as f64).floor()),
            _ => (Relation::Eq, lhs),
        };
        lp.add_constraint(format!("r{i}"), coeffs, rel, rhs);
    }
    lp
}

/// Best objective over all basic feasible points, found by intersecting every
/// n-subset of row hyperplanes and finite bounds. Exponential; meant for n ≤ 4.
pub fn vertex_enumeration(lp: &LinearProgram<f64>) -> Option<f64> {
    let n = lp.num_variables();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in lp.constraints() {
        let mut a = vec![0.0; n];
        for &(v, coef) in &c.coeffs {
            a[v.0] += coef;
        }
        planes.push((a, c.rhs));
    }
    for (j, v) in lp.variables().iter().enumerate() {
        for bound in [v.lower, v.upper] {
            if bound.is_finite() {
                let mut a = vec![0.0; n];
                a[j] = 1.0;
                planes.push((a, bound));
            }
        }
    }
    let mut best: Option<f64> = None;
    let mut chosen = Vec::with_capacity(n);
    enumerate_subsets(planes.len(), n, 0, &mut chosen, &mut |subset| {
        let rows: Vec<&(Vec<f64>, f64)> = subset.iter().map(|&k| &planes[k]).collect();
        if let Some(x) = gauss_solve(&rows) {
            if is_feasible(lp, &x, 1e-7) {
                let z = lp.objective_at(&x);
                best = Some(match (best, lp.sense()) {
                    (None, _) => z,
                    (Some(b), Sense::Maximize) => b.max(z),
                    (Some(b), Sense::Minimize) => b.min(z),
                });
            }
        }
    });
    best
}

fn enumerate_subsets(total: usize, k: usize, start: usize, chosen: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    for i in start..total {
        chosen.push(i);
        enumerate_subsets(total, k, i + 1, chosen, f);
        chosen.pop();
    }
}

fn gauss_solve(rows: &[&(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .map(|(a, b)| {
            let mut r = a.clone();
            r.push(*b);
            r
        })
        .collect();
    for col in 0..n {
        let p = (col..n).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())?;
        if m[p][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, p);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

pub fn is_feasible(lp: &LinearProgram<f64>, x: &[f64], tol: f64) -> bool {
    for (v, &xj) in lp.variables().iter().zip(x) {
        if xj < v.lower - tol || xj > v.upper + tol {
            return false;
        }
    }
    lp.constraints().iter().all(|c| {
        let lhs: f64 = c.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum();
        match c.relation {
            Relation::Le => lhs <= c.rhs + tol,
            Relation::Ge => lhs >= c.rhs - tol,
            Relation::Eq => (lhs - c.rhs).abs() <= tol,
        }
    })
}
