//! Concave dual of the inner problems, solved by golden-section search.
//!
//! For the minimization, the dual objective in the two scalar multipliers
//! `(lambda, mu)` is
//!
//! ```text
//! G(lambda, mu) = sum_j min{ low_j (h_j(mu) - lambda), high_j (h_j(mu) - lambda) }
//!                 - mu * budget + lambda,
//! h_j(mu)       = min_i { p_i + mu c(i, j) },
//! ```
//!
//! and for fixed `mu` the optimal `lambda` lies in the finite set
//! `{h_j(mu)}`. The profile `g(mu) = max_lambda G` is concave and
//! non-increasing past `max_i p_i / c_min`, which bounds the search interval.
//! By weak duality every evaluated `g(mu)` is a valid lower bound on the
//! primal minimum, so early termination stays sound. The maximization mirrors
//! all of this with signs flipped.

use crate::error::{Error, Result};
use crate::solvers::imdp::{imdp_inner_max, imdp_inner_min};
use crate::solvers::InnerProblem;

const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

/// Worst-case expected value via the dual, to interval tolerance `tol`.
pub fn inner_min_dual(p: &InnerProblem, tol: f64) -> Result<f64> {
    solve(p, tol, Sense::Min, &mut |_| {})
}

/// [`inner_min_dual`] that also reports every golden-section iterate; each is
/// a valid lower bound on the primal minimum.
pub fn inner_min_dual_traced(
    p: &InnerProblem,
    tol: f64,
    trace: &mut Vec<f64>,
) -> Result<f64> {
    solve(p, tol, Sense::Min, &mut |v| trace.push(v))
}

/// Best-case expected value via the mirrored dual.
pub fn inner_max_dual(p: &InnerProblem, tol: f64) -> Result<f64> {
    solve(p, tol, Sense::Max, &mut |_| {})
}

/// [`inner_max_dual`] reporting iterates; each is a valid upper bound.
pub fn inner_max_dual_traced(
    p: &InnerProblem,
    tol: f64,
    trace: &mut Vec<f64>,
) -> Result<f64> {
    solve(p, tol, Sense::Max, &mut |v| trace.push(v))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sense {
    Min,
    Max,
}

fn solve(
    p: &InnerProblem,
    tol: f64,
    sense: Sense,
    record: &mut dyn FnMut(f64),
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::input("dual tolerance must be positive"));
    }
    p.validate()?;

    // Zero budget with strictly positive cross costs pins the transport plan
    // to the diagonal; the problem is then a plain interval row.
    if p.budget == 0.0 && !p.has_free_cross_transport() {
        let nominal_values = p.nominal_values();
        let (value, _) = match sense {
            Sense::Min => imdp_inner_min(p.row_low, p.row_high, &nominal_values)?,
            Sense::Max => imdp_inner_max(p.row_low, p.row_high, &nominal_values)?,
        };
        record(value);
        return Ok(value);
    }

    let max_value = p.values.iter().fold(0.0f64, |a, &b| a.max(b));
    let mu_max = match p.min_positive_cost() {
        // All relevant costs are zero: the profile is constant in mu.
        None => 0.0,
        Some(c_min) => max_value / c_min,
    };

    let mut h = vec![0.0; p.n_nominal()];
    let mut eval = |mu: f64| -> f64 {
        let v = profile(p, mu, sense, &mut h);
        record(v);
        v
    };

    let mut best = eval(0.0);
    if mu_max > 0.0 {
        best = pick(best, eval(mu_max), sense);
        let (mut a, mut b) = (0.0, mu_max);
        let resp = 2.0 - GOLDEN_RATIO;
        let mut x1 = a + resp * (b - a);
        let mut x2 = b - resp * (b - a);
        let mut f1 = eval(x1);
        let mut f2 = eval(x2);
        best = pick(best, pick(f1, f2, sense), sense);
        while b - a > tol {
            let keep_left = match sense {
                Sense::Min => f1 > f2, // maximizing g
                Sense::Max => f1 < f2, // minimizing the mirrored profile
            };
            if keep_left {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = a + resp * (b - a);
                f1 = eval(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = b - resp * (b - a);
                f2 = eval(x2);
            }
            best = pick(best, pick(f1, f2, sense), sense);
        }
    }
    Ok(best)
}

fn pick(a: f64, b: f64, sense: Sense) -> f64 {
    match sense {
        Sense::Min => a.max(b), // dual of a min problem is maximized
        Sense::Max => a.min(b),
    }
}

/// `g(mu)` (respectively the mirrored profile), with the inner `lambda`
/// optimization done by the finite search over `{h_j(mu)}`.
fn profile(p: &InnerProblem, mu: f64, sense: Sense, h: &mut [f64]) -> f64 {
    let nn = p.n_nominal();
    match sense {
        Sense::Min => {
            for j in 0..nn {
                let mut m = f64::INFINITY;
                for (i, &v) in p.values.iter().enumerate() {
                    m = m.min(v + mu * p.cost[i * nn + j]);
                }
                h[j] = m;
            }
            let mut best = f64::NEG_INFINITY;
            for &lambda in h.iter() {
                let mut s = 0.0;
                for j in 0..nn {
                    let x = h[j] - lambda;
                    s += (p.row_low[j] * x).min(p.row_high[j] * x);
                }
                best = best.max(s - mu * p.budget + lambda);
            }
            best
        }
        Sense::Max => {
            for j in 0..nn {
                let mut m = f64::NEG_INFINITY;
                for (i, &v) in p.values.iter().enumerate() {
                    m = m.max(v - mu * p.cost[i * nn + j]);
                }
                h[j] = m;
            }
            let mut best = f64::INFINITY;
            for &lambda in h.iter() {
                let mut s = 0.0;
                for j in 0..nn {
                    let x = h[j] - lambda;
                    s += (p.row_low[j] * x).max(p.row_high[j] * x);
                }
                best = best.min(s + mu * p.budget + lambda);
            }
            best
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::lp::{inner_max_lp, inner_min_lp};

    const TOL: f64 = 1e-8;

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
    fn piecewise_linear_hand_solution() {
        // g(mu) = min(1, mu) - 0.5 mu, maximized at mu = 1 with value 0.5.
        let v = inner_min_dual(&two_state_problem(), TOL).unwrap();
        assert!((v - 0.5).abs() < 1e-7);
    }

    #[test]
    fn zero_budget_positive_costs_equals_imdp() {
        let values = [0.3, 0.9, 0.5];
        let p = InnerProblem {
            values: &values,
            row_low: &[0.1, 0.2, 0.1],
            row_high: &[0.8, 0.7, 0.6],
            cost: &[0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0],
            nominal_in_support: &[0, 1, 2],
            budget: 0.0,
        };
        let v = inner_min_dual(&p, TOL).unwrap();
        let (expect, _) = imdp_inner_min(p.row_low, p.row_high, &values).unwrap();
        assert!((v - expect).abs() < 1e-7);
        let v = inner_max_dual(&p, TOL).unwrap();
        let (expect, _) = imdp_inner_max(p.row_low, p.row_high, &values).unwrap();
        assert!((v - expect).abs() < 1e-7);
    }

    #[test]
    fn dominant_budget_concentrates_on_extremes() {
        let values = [0.3, 0.9, 0.5, 0.1];
        let cost = [
            0.0, 0.5, 1.0, //
            0.5, 0.0, 0.5, //
            1.0, 0.5, 0.0, //
            2.0, 1.5, 1.0,
        ];
        let p = InnerProblem {
            values: &values,
            row_low: &[0.1, 0.2, 0.1],
            row_high: &[0.8, 0.7, 0.6],
            cost: &cost,
            nominal_in_support: &[0, 1, 2],
            budget: 2.5, // exceeds every transport cost
        };
        let v = inner_min_dual(&p, TOL).unwrap();
        assert!((v - 0.1).abs() < 1e-7);
        let v = inner_max_dual(&p, TOL).unwrap();
        assert!((v - 0.9).abs() < 1e-7);
    }

    #[test]
    fn matches_lp_and_iterates_stay_one_sided() {
        let values = [0.2, 0.8, 0.5, 0.9, 0.0];
        let cost = [
            0.0, 0.3, 0.8, //
            0.3, 0.0, 0.2, //
            0.8, 0.2, 0.0, //
            0.1, 0.4, 0.9, //
            0.6, 0.5, 0.1,
        ];
        let p = InnerProblem {
            values: &values,
            row_low: &[0.1, 0.3, 0.2],
            row_high: &[0.5, 0.8, 0.4],
            cost: &cost,
            nominal_in_support: &[0, 1, 2],
            budget: 0.05,
        };
        let (lp_min, _) = inner_min_lp(&p).unwrap();
        let mut trace = Vec::new();
        let dual_min = inner_min_dual_traced(&p, TOL, &mut trace).unwrap();
        assert!((lp_min - dual_min).abs() < 1e-6);
        for it in &trace {
            assert!(*it <= lp_min + 1e-9, "iterate {it} exceeds the primal minimum {lp_min}");
        }

        let (lp_max, _) = inner_max_lp(&p).unwrap();
        let mut trace = Vec::new();
        let dual_max = inner_max_dual_traced(&p, TOL, &mut trace).unwrap();
        assert!((lp_max - dual_max).abs() < 1e-6);
        for it in &trace {
            assert!(*it >= lp_max - 1e-9, "iterate {it} undercuts the primal maximum {lp_max}");
        }
    }

    #[test]
    fn free_cross_transport_at_zero_budget_is_not_collapsed() {
        // Two touching states: mass moves freely even with no budget.
        let values = [0.9, 0.1];
        let p = InnerProblem {
            values: &values,
            row_low: &[1.0],
            row_high: &[1.0],
            cost: &[0.0, 0.0],
            nominal_in_support: &[0],
            budget: 0.0,
        };
        let v = inner_min_dual(&p, TOL).unwrap();
        assert!((v - 0.1).abs() < 1e-7);
        let v = inner_max_dual(&p, TOL).unwrap();
        assert!((v - 0.9).abs() < 1e-7);
    }

    #[test]
    fn bad_tolerance_rejected() {
        assert!(inner_min_dual(&two_state_problem(), 0.0).is_err());
        assert!(inner_min_dual(&two_state_problem(), -1.0).is_err());
    }
}
