//! Inner problems as explicit transport-polytope linear programs.
//!
//! The decision variables are the adversary row `gamma` over the
//! support-reachable states, the nominal row `gamma_hat` over the
//! nominal-reachable states, and the transport plan `pi` coupling them. This
//! is the reference route the dual solver is checked against.

use crate::error::{Error, Result};
use crate::solvers::simplex::{reference_lp, Constraint, LpOutcome};
use crate::solvers::InnerProblem;

struct VarLayout {
    n_support: usize,
    n_nominal: usize,
}

impl VarLayout {
    fn gamma(&self, i: usize) -> usize {
        i
    }
    fn gamma_hat(&self, j: usize) -> usize {
        self.n_support + j
    }
    fn plan(&self, i: usize, j: usize) -> usize {
        self.n_support + self.n_nominal + i * self.n_nominal + j
    }
    fn total(&self) -> usize {
        self.n_support + self.n_nominal + self.n_support * self.n_nominal
    }
}

fn polytope_constraints(p: &InnerProblem, layout: &VarLayout) -> Vec<Constraint> {
    let (nw, nn) = (layout.n_support, layout.n_nominal);
    let nv = layout.total();
    let mut cons = Vec::with_capacity(2 * nn + nn + nw + 2);

    // Interval bounds on the nominal row.
    for j in 0..nn {
        let mut lo = vec![0.0; nv];
        lo[layout.gamma_hat(j)] = 1.0;
        cons.push(Constraint::ge(lo.clone(), p.row_low[j]));
        cons.push(Constraint::le(lo, p.row_high[j]));
    }
    // The nominal row is a distribution.
    let mut norm = vec![0.0; nv];
    for j in 0..nn {
        norm[layout.gamma_hat(j)] = 1.0;
    }
    cons.push(Constraint::eq(norm, 1.0));
    // Plan marginals: columns sum to the nominal row, rows to the adversary row.
    for j in 0..nn {
        let mut row = vec![0.0; nv];
        for i in 0..nw {
            row[layout.plan(i, j)] = 1.0;
        }
        row[layout.gamma_hat(j)] = -1.0;
        cons.push(Constraint::eq(row, 0.0));
    }
    for i in 0..nw {
        let mut row = vec![0.0; nv];
        for j in 0..nn {
            row[layout.plan(i, j)] = 1.0;
        }
        row[layout.gamma(i)] = -1.0;
        cons.push(Constraint::eq(row, 0.0));
    }
    // Transport budget.
    let mut cost_row = vec![0.0; nv];
    for i in 0..nw {
        for j in 0..nn {
            cost_row[layout.plan(i, j)] = p.cost[i * nn + j];
        }
    }
    cons.push(Constraint::le(cost_row, p.budget));
    cons
}

fn solve(p: &InnerProblem, maximize: bool) -> Result<(f64, Vec<f64>)> {
    p.validate()?;
    let layout = VarLayout { n_support: p.n_support(), n_nominal: p.n_nominal() };
    let cons = polytope_constraints(p, &layout);
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut objective = vec![0.0; layout.total()];
    for i in 0..layout.n_support {
        objective[layout.gamma(i)] = sign * p.values[i];
    }
    match reference_lp(&objective, &cons)? {
        LpOutcome::Optimal(sol) => {
            let row = (0..layout.n_support).map(|i| sol.x[layout.gamma(i)]).collect();
            Ok((sign * sol.value, row))
        }
        LpOutcome::Infeasible => Err(Error::model(
            "inner problem is infeasible; the interval row violates the IMDP sum conditions",
        )),
        LpOutcome::Unbounded => Err(Error::solver("inner problem LP is unbounded")),
    }
}

/// Worst-case expected value and the minimizing adversary row.
pub fn inner_min_lp(p: &InnerProblem) -> Result<(f64, Vec<f64>)> {
    solve(p, false)
}

/// Best-case expected value and the maximizing adversary row.
pub fn inner_max_lp(p: &InnerProblem) -> Result<(f64, Vec<f64>)> {
    solve(p, true)
}

/// Decide whether `candidate` belongs to the transport-constrained row set:
/// the feasibility program with the adversary row pinned to `candidate`.
pub fn membership_test(p: &InnerProblem, candidate: &[f64]) -> Result<bool> {
    p.validate()?;
    if candidate.len() != p.n_support() {
        return Err(Error::input("candidate length does not match the support set"));
    }
    let total: f64 = candidate.iter().sum();
    if candidate.iter().any(|v| *v < -1e-9) || (total - 1.0).abs() > 1e-7 {
        return Err(Error::input("candidate must be a distribution over the support set"));
    }

    let (nw, nn) = (p.n_support(), p.n_nominal());
    // Variables: gamma_hat (nn) then pi (nw * nn).
    let nv = nn + nw * nn;
    let gamma_hat = |j: usize| j;
    let plan = |i: usize, j: usize| nn + i * nn + j;

    let mut cons = Vec::with_capacity(3 * nn + nw + 2);
    for j in 0..nn {
        let mut row = vec![0.0; nv];
        row[gamma_hat(j)] = 1.0;
        cons.push(Constraint::ge(row.clone(), p.row_low[j]));
        cons.push(Constraint::le(row, p.row_high[j]));
    }
    let mut norm = vec![0.0; nv];
    for j in 0..nn {
        norm[gamma_hat(j)] = 1.0;
    }
    cons.push(Constraint::eq(norm, 1.0));
    for j in 0..nn {
        let mut row = vec![0.0; nv];
        for i in 0..nw {
            row[plan(i, j)] = 1.0;
        }
        row[gamma_hat(j)] = -1.0;
        cons.push(Constraint::eq(row, 0.0));
    }
    for i in 0..nw {
        let mut row = vec![0.0; nv];
        for j in 0..nn {
            row[plan(i, j)] = 1.0;
        }
        cons.push(Constraint::eq(row, candidate[i].max(0.0)));
    }
    let mut cost_row = vec![0.0; nv];
    for i in 0..nw {
        for j in 0..nn {
            cost_row[plan(i, j)] = p.cost[i * nn + j];
        }
    }
    cons.push(Constraint::le(cost_row, p.budget));

    match reference_lp(&vec![0.0; nv], &cons)? {
        LpOutcome::Optimal(_) => Ok(true),
        LpOutcome::Infeasible => Ok(false),
        LpOutcome::Unbounded => Err(Error::solver("feasibility program cannot be unbounded")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::imdp::imdp_inner_min;

    /// Single nominal state with unit mass; a second support state at unit
    /// transport cost carries value zero.
    fn two_state_problem<'a>() -> InnerProblem<'a> {
        InnerProblem {
            values: &[1.0, 0.0],
            row_low: &[1.0],
            row_high: &[1.0],
            cost: &[0.0, 1.0],
            nominal_in_support: &[0],
            budget: 0.5,
        }
    }

    #[test]
    fn transport_tradeoff_hand_solution() {
        let p = two_state_problem();
        let (value, row) = inner_min_lp(&p).unwrap();
        assert!((value - 0.5).abs() < 1e-9);
        assert!((row[0] - 0.5).abs() < 1e-9);
        assert!((row[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_budget_with_positive_costs_collapses_to_imdp() {
        let values = [0.3, 0.9, 0.5];
        let row_low = [0.1, 0.2, 0.1];
        let row_high = [0.8, 0.7, 0.6];
        let cost = [
            0.0, 1.0, 2.0, //
            1.0, 0.0, 1.0, //
            2.0, 1.0, 0.0,
        ];
        let p = InnerProblem {
            values: &values,
            row_low: &row_low,
            row_high: &row_high,
            cost: &cost,
            nominal_in_support: &[0, 1, 2],
            budget: 0.0,
        };
        let (lp_value, _) = inner_min_lp(&p).unwrap();
        let (imdp_value, _) = imdp_inner_min(&row_low, &row_high, &values).unwrap();
        assert!((lp_value - imdp_value).abs() < 1e-9);
    }

    #[test]
    fn constant_values_on_a_simplex() {
        let values = [0.7, 0.7];
        let p = InnerProblem {
            values: &values,
            row_low: &[0.2, 0.1],
            row_high: &[0.9, 0.8],
            cost: &[0.0, 0.3, 0.3, 0.0],
            nominal_in_support: &[0, 1],
            budget: 0.1,
        };
        let (value, _) = inner_min_lp(&p).unwrap();
        assert!((value - 0.7).abs() < 1e-9);
    }

    #[test]
    fn membership_identity_transport() {
        // Any row inside the interval bounds is a member via the identity plan.
        let values = [0.3, 0.9];
        let p = InnerProblem {
            values: &values,
            row_low: &[0.2, 0.1],
            row_high: &[0.9, 0.8],
            cost: &[0.0, 0.5, 0.5, 0.0],
            nominal_in_support: &[0, 1],
            budget: 0.0,
        };
        assert!(membership_test(&p, &[0.5, 0.5]).unwrap());
        assert!(membership_test(&p, &[0.9, 0.1]).unwrap());
    }

    #[test]
    fn membership_rejects_over_budget_moves() {
        // Moving 0.5 of mass across a cost-1 pair needs budget 0.5.
        let p = two_state_problem();
        let tight = InnerProblem { budget: 0.4, ..p.clone() };
        assert!(!membership_test(&tight, &[0.5, 0.5]).unwrap());
        assert!(membership_test(&p, &[0.5, 0.5]).unwrap());
    }

    #[test]
    fn infeasible_interval_row_is_a_model_error() {
        let p = InnerProblem {
            values: &[0.5],
            row_low: &[0.2],
            row_high: &[0.4],
            cost: &[0.0],
            nominal_in_support: &[0],
            budget: 0.0,
        };
        assert!(inner_min_lp(&p).is_err());
    }
}
