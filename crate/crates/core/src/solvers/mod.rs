//! Inner-problem solvers: the min/max over the transport-constrained row set.
//!
//! Three routes compute the same quantity on different principles: a primal
//! simplex on the transport polytope ([`lp`]), a two-variable concave dual
//! solved by golden-section search ([`dual`]), and the classic sort-based
//! assignment for decoupled interval rows ([`imdp`]).

pub mod dual;
pub mod imdp;
pub mod lp;
pub mod simplex;

use crate::error::{Error, Result};

/// One inner optimization instance for a state-action pair.
///
/// `values` holds the value-vector entries for the support-reachable states.
/// `row_low`/`row_high` bound the nominal row over the nominal-reachable
/// states, which are a subset of the support-reachable ones;
/// `nominal_in_support[j]` is the position of nominal state `j` in the support
/// list. `cost[i * n_nominal + j]` is the transport cost from nominal state
/// `j` to support state `i`.
#[derive(Debug, Clone)]
pub struct InnerProblem<'a> {
    pub values: &'a [f64],
    pub row_low: &'a [f64],
    pub row_high: &'a [f64],
    pub cost: &'a [f64],
    pub nominal_in_support: &'a [usize],
    pub budget: f64,
}

impl<'a> InnerProblem<'a> {
    pub fn n_support(&self) -> usize {
        self.values.len()
    }

    pub fn n_nominal(&self) -> usize {
        self.row_low.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (nw, nn) = (self.n_support(), self.n_nominal());
        if nn == 0 || nw == 0 {
            return Err(Error::model("inner problem has an empty index set"));
        }
        if self.row_high.len() != nn
            || self.nominal_in_support.len() != nn
            || self.cost.len() != nw * nn
        {
            return Err(Error::model("inner problem field lengths disagree"));
        }
        if self.nominal_in_support.iter().any(|&p| p >= nw) {
            return Err(Error::model("nominal state missing from the support set"));
        }
        if !(self.budget >= 0.0) {
            return Err(Error::model("transport budget must be nonnegative"));
        }
        if self.values.iter().any(|v| !(*v >= -1e-12 && *v <= 1.0 + 1e-12)) {
            return Err(Error::model("inner problem values must lie in [0, 1]"));
        }
        row_feasible(self.row_low, self.row_high)
    }

    /// Smallest strictly positive transport cost, if any.
    pub fn min_positive_cost(&self) -> Option<f64> {
        let mut best = f64::INFINITY;
        for &c in self.cost {
            if c > 0.0 && c < best {
                best = c;
            }
        }
        best.is_finite().then_some(best)
    }

    /// True when mass can move between two distinct states at zero cost.
    pub fn has_free_cross_transport(&self) -> bool {
        let nn = self.n_nominal();
        for i in 0..self.n_support() {
            for j in 0..nn {
                if self.cost[i * nn + j] == 0.0 && self.nominal_in_support[j] != i {
                    return true;
                }
            }
        }
        false
    }

    /// Value entries at the nominal states.
    pub fn nominal_values(&self) -> Vec<f64> {
        self.nominal_in_support.iter().map(|&p| self.values[p]).collect()
    }
}

/// Interval-row feasibility from the IMDP definition:
/// `0 <= low <= high <= 1` entrywise and `sum(low) <= 1 <= sum(high)`.
pub fn row_feasible(row_low: &[f64], row_high: &[f64]) -> Result<()> {
    if row_low.len() != row_high.len() {
        return Err(Error::model("interval row lengths disagree"));
    }
    let tol = 1e-9;
    for (l, h) in row_low.iter().zip(row_high) {
        if !(*l >= -tol && *l <= *h + tol && *h <= 1.0 + tol) {
            return Err(Error::model(format!("interval entry [{l}, {h}] is infeasible")));
        }
    }
    let lo: f64 = row_low.iter().sum();
    let hi: f64 = row_high.iter().sum();
    if lo > 1.0 + tol || hi < 1.0 - tol {
        return Err(Error::model(format!(
            "interval row sums [{lo}, {hi}] do not bracket 1"
        )));
    }
    Ok(())
}
