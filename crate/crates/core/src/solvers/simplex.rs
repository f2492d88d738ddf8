//! Dense two-phase primal simplex with Bland's rule.
//!
//! This is the reference oracle for the transport-polytope inner problems and
//! the backend of the `lp` solver path. It is written for exactness on small
//! dense problems, not for speed.

use crate::error::{Error, Result};

const EPS: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Constraint { coeffs, relation: Relation::Le, rhs }
    }
    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Constraint { coeffs, relation: Relation::Ge, rhs }
    }
    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Constraint { coeffs, relation: Relation::Eq, rhs }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<&LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

struct Tableau {
    /// (m + 1) x (cols + 1); last row is the cost row, last column the rhs.
    a: Vec<Vec<f64>>,
    m: usize,
    cols: usize,
    basis: Vec<usize>,
    active: Vec<bool>,
    n_structural: usize,
    art_start: usize,
}

impl Tableau {
    fn rhs(&self, row: usize) -> f64 {
        self.a[row][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.a[row][col];
        let inv = 1.0 / piv;
        for v in self.a[row].iter_mut() {
            *v *= inv;
        }
        for r in 0..=self.m {
            if r == row {
                continue;
            }
            let factor = self.a[r][col];
            if factor == 0.0 {
                continue;
            }
            for c in 0..=self.cols {
                self.a[r][c] -= factor * self.a[row][c];
            }
            self.a[r][col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Bland's rule iteration loop. `allow` filters entering columns.
    fn run(&mut self, allow: impl Fn(usize) -> bool) -> Result<bool> {
        let max_iters = 50_000usize.max(200 * (self.m + self.cols));
        for _ in 0..max_iters {
            let mut entering = None;
            for j in 0..self.cols {
                if allow(j) && self.a[self.m][j] < -EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return Ok(true) };

            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.m {
                if !self.active[r] {
                    continue;
                }
                let a_rj = self.a[r][j];
                if a_rj > EPS {
                    let ratio = self.rhs(r) / a_rj;
                    let better = match leaving {
                        None => true,
                        Some((best_r, best_ratio)) => {
                            ratio < best_ratio - EPS
                                || (ratio < best_ratio + EPS
                                    && self.basis[r] < self.basis[best_r])
                        }
                    };
                    if better {
                        leaving = Some((r, ratio));
                    }
                }
            }
            match leaving {
                Some((r, _)) => self.pivot(r, j),
                None => return Ok(false), // column unbounded below
            }
        }
        Err(Error::solver("simplex iteration limit reached"))
    }

    fn set_cost_row(&mut self, costs: &[f64]) {
        for c in 0..=self.cols {
            self.a[self.m][c] = 0.0;
        }
        for (j, &cj) in costs.iter().enumerate() {
            self.a[self.m][j] = cj;
        }
        // Price out the basic columns.
        for r in 0..self.m {
            if !self.active[r] {
                continue;
            }
            let cb = self.a[self.m][self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            for c in 0..=self.cols {
                self.a[self.m][c] -= cb * self.a[r][c];
            }
        }
    }
}

/// Solve `min objective . x` subject to `constraints` and `x >= 0`.
pub fn reference_lp(objective: &[f64], constraints: &[Constraint]) -> Result<LpOutcome> {
    let n = objective.len();
    for (i, c) in constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(Error::input(format!(
                "constraint {i} has {} coefficients, expected {n}",
                c.coeffs.len()
            )));
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("constraint {i} has non-finite data")));
        }
    }
    let m = constraints.len();

    // Normalize to rhs >= 0.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.relation, c.rhs))
        .collect();
    for (coeffs, rel, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            for v in coeffs.iter_mut() {
                *v = -*v;
            }
            *rhs = -*rhs;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = n + n_slack + n_art;
    let art_start = n + n_slack;

    let mut a = vec![vec![0.0; cols + 1]; m + 1];
    let mut basis = vec![0usize; m];
    let mut slack_idx = n;
    let mut art_idx = art_start;
    for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        a[r][..n].copy_from_slice(coeffs);
        a[r][cols] = *rhs;
        match rel {
            Relation::Le => {
                a[r][slack_idx] = 1.0;
                basis[r] = slack_idx;
                slack_idx += 1;
            }
            Relation::Ge => {
                a[r][slack_idx] = -1.0;
                slack_idx += 1;
                a[r][art_idx] = 1.0;
                basis[r] = art_idx;
                art_idx += 1;
            }
            Relation::Eq => {
                a[r][art_idx] = 1.0;
                basis[r] = art_idx;
                art_idx += 1;
            }
        }
    }

    let mut t = Tableau {
        a,
        m,
        cols,
        basis,
        active: vec![true; m],
        n_structural: n,
        art_start,
    };

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for j in art_start..cols {
            phase1[j] = 1.0;
        }
        t.set_cost_row(&phase1);
        let bounded = t.run(|_| true)?;
        debug_assert!(bounded, "phase 1 objective is bounded below by zero");
        let infeas = -t.a[t.m][t.cols];
        if infeas > FEAS_TOL {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive any leftover artificials out of the basis.
        for r in 0..t.m {
            if t.basis[r] >= t.art_start {
                let col = (0..t.art_start).find(|&j| t.a[r][j].abs() > EPS);
                match col {
                    Some(j) => t.pivot(r, j),
                    None => t.active[r] = false, // redundant row
                }
            }
        }
    }

    // Phase 2: original objective, artificial columns barred.
    t.set_cost_row(objective);
    let art_start = t.art_start;
    let bounded = t.run(|j| j < art_start)?;
    if !bounded {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; n];
    for r in 0..t.m {
        if t.active[r] && t.basis[r] < t.n_structural {
            x[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal(LpSolution { value, x }))
}
