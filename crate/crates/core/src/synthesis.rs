//! Robust dynamic programming over the abstraction and strategy extraction.
//!
//! The lower sweep takes, per state, the best action against the worst
//! admissible row; the upper sweep evaluates a fixed strategy against the best
//! admissible row. Finite horizons record a time-indexed strategy; infinite
//! horizons iterate to a fixed point and extract a stationary strategy by
//! backward reachability so that tied argmax actions can never form
//! zero-progress loops.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abstraction::{AbstractRow, RobustAbstraction};
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::solvers::dual::{inner_max_dual, inner_min_dual};
use crate::solvers::lp::{inner_max_lp, inner_min_lp};
use crate::types::{Horizon, SolverKind, Strategy, ValueFunction};
use crate::validation::e_avg;

/// Knobs for the dynamic programming loop.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub solver: SolverKind,
    /// Sup-norm convergence threshold for infinite horizons.
    pub tol: f64,
    /// Golden-section interval tolerance for the dual solver.
    pub dual_tol: f64,
    /// Positivity floor for argmax membership and worst-case mass tests.
    pub tol_pos: f64,
    /// Sweep cap for infinite horizons.
    pub iter_cap: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            solver: SolverKind::Dual,
            tol: 1e-6,
            dual_tol: 1e-8,
            tol_pos: 1e-9,
            iter_cap: 100_000,
        }
    }
}

/// Sweep counts of a finished synthesis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Iterations {
    pub lower_sweeps: usize,
    pub upper_sweeps: usize,
}

/// Output of [`value_iteration`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub lower: ValueFunction,
    pub upper: ValueFunction,
    pub strategy: Strategy,
    pub e_avg: f64,
    pub iterations: Iterations,
    #[serde(skip)]
    pub per_sweep_times: Vec<Duration>,
}

fn solve_min(row: &AbstractRow, values: &[f64], budget: f64, opts: &SynthesisOptions) -> Result<f64> {
    let mut buf = Vec::new();
    let gathered = row.gather(values, &mut buf);
    let p = row.problem(gathered, budget);
    let v = match opts.solver {
        SolverKind::Dual | SolverKind::ImdpBaseline => inner_min_dual(&p, opts.dual_tol)?,
        SolverKind::Lp => inner_min_lp(&p)?.0,
    };
    Ok(v.clamp(0.0, 1.0))
}

fn solve_max(row: &AbstractRow, values: &[f64], budget: f64, opts: &SynthesisOptions) -> Result<f64> {
    let mut buf = Vec::new();
    let gathered = row.gather(values, &mut buf);
    let p = row.problem(gathered, budget);
    let v = match opts.solver {
        SolverKind::Dual | SolverKind::ImdpBaseline => inner_max_dual(&p, opts.dual_tol)?,
        SolverKind::Lp => inner_max_lp(&p)?.0,
    };
    Ok(v.clamp(0.0, 1.0))
}

/// One lower sweep: `new[q] = max_a min_row E[value]`, with 1 on targets and
/// 0 at the unsafe state. Returns the new value and per-state argmax actions
/// (ties to the smallest index).
pub fn bellman_lower(
    abstraction: &RobustAbstraction,
    value: &ValueFunction,
    opts: &SynthesisOptions,
) -> Result<(ValueFunction, Vec<usize>)> {
    value.validate()?;
    if value.len() != abstraction.n_states {
        return Err(Error::input("value length does not match the abstraction"));
    }
    let results: Vec<(f64, usize)> = (0..abstraction.n_states)
        .into_par_iter()
        .map(|q| -> Result<(f64, usize)> {
            if abstraction.is_target(q) {
                return Ok((1.0, 0));
            }
            if q == abstraction.unsafe_id {
                return Ok((0.0, 0));
            }
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..abstraction.n_actions {
                let v = solve_min(abstraction.row(q, a), &value.values, abstraction.budget, opts)?;
                if v > best {
                    best = v;
                    best_a = a;
                }
            }
            Ok((best, best_a))
        })
        .collect::<Result<Vec<_>>>()?;
    let new = ValueFunction { values: results.iter().map(|r| r.0).collect() };
    let argmax = results.into_iter().map(|r| r.1).collect();
    Ok((new, argmax))
}

/// One upper sweep under a fixed action table.
pub fn bellman_upper(
    abstraction: &RobustAbstraction,
    value: &ValueFunction,
    actions: &[usize],
    opts: &SynthesisOptions,
) -> Result<ValueFunction> {
    value.validate()?;
    if value.len() != abstraction.n_states || actions.len() != abstraction.n_states {
        return Err(Error::input("value or strategy length does not match the abstraction"));
    }
    let values: Vec<f64> = (0..abstraction.n_states)
        .into_par_iter()
        .map(|q| -> Result<f64> {
            if abstraction.is_target(q) {
                return Ok(1.0);
            }
            if q == abstraction.unsafe_id {
                return Ok(0.0);
            }
            solve_max(abstraction.row(q, actions[q]), &value.values, abstraction.budget, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValueFunction { values })
}

/// Monotonicity guard for from-zero iterations: the exact operator is
/// monotone, so a drop beyond numerical tolerance indicates a solver bug.
/// Small solver noise is floored away to keep the reported sequence monotone
/// (both old and new values are valid one-sided bounds).
fn enforce_monotone(new: &mut ValueFunction, prev: &ValueFunction) -> Result<()> {
    for (n, p) in new.values.iter_mut().zip(&prev.values) {
        if *n < p - 1e-9 {
            return Err(Error::solver(format!(
                "value iteration lost monotonicity: {n} < {p}"
            )));
        }
        if *n < *p {
            *n = *p;
        }
    }
    Ok(())
}

/// Robust dynamic programming over a finite or infinite horizon.
///
/// Finite `K`: `K` lower sweeps from the target indicator recording the
/// per-step argmax into a time-indexed strategy, then `K` upper sweeps under
/// that strategy. Infinite: lower sweeps to a fixed point, stationary
/// extraction by backward reachability, then upper sweeps under the extracted
/// strategy to a fixed point.
pub fn value_iteration(
    abstraction: &RobustAbstraction,
    horizon: Horizon,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    if matches!(horizon, Horizon::Infinite) && !(opts.tol > 0.0) {
        return Err(Error::input("infinite-horizon synthesis needs a positive tolerance"));
    }
    let n = abstraction.n_states;
    let init = ValueFunction::indicator(&abstraction.target_ids, n);
    let mut times = Vec::new();

    match horizon {
        Horizon::Finite(k) => {
            let mut lower = init.clone();
            let mut sweep_argmax: Vec<Vec<usize>> = Vec::with_capacity(k);
            for _ in 0..k {
                let t0 = Instant::now();
                let (mut new, argmax) = bellman_lower(abstraction, &lower, opts)?;
                enforce_monotone(&mut new, &lower)?;
                lower = new;
                sweep_argmax.push(argmax);
                times.push(t0.elapsed());
            }
            // The action at step k maximizes against the value with K-k-1
            // steps to go, which sweep K-k-1 recorded.
            let table: Vec<Vec<usize>> =
                (0..k).map(|step| sweep_argmax[k - step - 1].clone()).collect();

            let mut upper = init;
            for sweep in sweep_argmax.iter().take(k) {
                let t0 = Instant::now();
                upper = bellman_upper(abstraction, &upper, sweep, opts)?;
                times.push(t0.elapsed());
            }
            finish(
                abstraction,
                lower,
                upper,
                Strategy::Markovian { table },
                Iterations { lower_sweeps: k, upper_sweeps: k },
                times,
                true,
            )
        }
        Horizon::Infinite => {
            let mut lower = init.clone();
            let mut lower_sweeps = 0;
            loop {
                if lower_sweeps >= opts.iter_cap {
                    return Err(Error::solver(format!(
                        "lower value iteration did not converge within {} sweeps (last sup-norm change above {})",
                        opts.iter_cap, opts.tol
                    )));
                }
                let t0 = Instant::now();
                let (mut new, _) = bellman_lower(abstraction, &lower, opts)?;
                enforce_monotone(&mut new, &lower)?;
                let delta = new.sup_distance(&lower);
                lower = new;
                lower_sweeps += 1;
                times.push(t0.elapsed());
                if delta < opts.tol {
                    break;
                }
            }

            let stationary = extract_stationary(abstraction, &lower, opts)?;
            let table = match &stationary {
                Strategy::Stationary { table } => table.clone(),
                _ => unreachable!(),
            };

            let mut upper = init;
            let mut upper_sweeps = 0;
            loop {
                if upper_sweeps >= opts.iter_cap {
                    return Err(Error::solver(format!(
                        "upper value iteration did not converge within {} sweeps",
                        opts.iter_cap
                    )));
                }
                let t0 = Instant::now();
                let mut new = bellman_upper(abstraction, &upper, &table, opts)?;
                enforce_monotone(&mut new, &upper)?;
                let delta = new.sup_distance(&upper);
                upper = new;
                upper_sweeps += 1;
                times.push(t0.elapsed());
                if delta < opts.tol {
                    break;
                }
            }
            finish(
                abstraction,
                lower,
                upper,
                stationary,
                Iterations { lower_sweeps, upper_sweeps },
                times,
                false,
            )
        }
    }
}

fn finish(
    abstraction: &RobustAbstraction,
    lower: ValueFunction,
    mut upper: ValueFunction,
    strategy: Strategy,
    iterations: Iterations,
    per_sweep_times: Vec<Duration>,
    strict_order: bool,
) -> Result<SynthesisResult> {
    for (q, (l, u)) in lower.values.iter().zip(upper.values.iter_mut()).enumerate() {
        if *l > *u + 1e-9 {
            if strict_order {
                return Err(Error::solver(format!(
                    "bound ordering violated at state {q}: lower {l} > upper {u}"
                )));
            }
        }
        // Truncated upper iterations approach their fixed point from below;
        // the converged lower value is also a valid floor for the upper bound.
        if *u < *l {
            *u = *l;
        }
    }
    let e = e_avg(&lower.values, &upper.values)?;
    Ok(SynthesisResult {
        lower,
        upper,
        strategy,
        e_avg: e,
        iterations,
        per_sweep_times,
    })
}

/// Stationary strategy extraction by backward reachability.
///
/// Builds the argmax action sets at the converged lower value, then grows
/// nested sets from the target: a state joins once some argmax action forces
/// worst-case positive mass into the current set, and that action becomes its
/// strategy entry. States outside the positive-value region and target states
/// default to action 0.
pub fn extract_stationary(
    abstraction: &RobustAbstraction,
    p_inf: &ValueFunction,
    opts: &SynthesisOptions,
) -> Result<Strategy> {
    p_inf.validate()?;
    let n = abstraction.n_states;
    if p_inf.len() != n {
        return Err(Error::input("value length does not match the abstraction"));
    }
    let reach: Vec<bool> = p_inf.values.iter().map(|&v| v > opts.tol_pos).collect();

    // Candidate states: positive value, not target, not the unsafe state.
    let candidates: Vec<usize> = (0..n)
        .filter(|&q| reach[q] && !abstraction.is_target(q) && q != abstraction.unsafe_id)
        .collect();

    let argmax_sets: Vec<(usize, Vec<usize>)> = candidates
        .par_iter()
        .map(|&q| -> Result<(usize, Vec<usize>)> {
            let mut vals = Vec::with_capacity(abstraction.n_actions);
            for a in 0..abstraction.n_actions {
                vals.push(solve_min(
                    abstraction.row(q, a),
                    &p_inf.values,
                    abstraction.budget,
                    opts,
                )?);
            }
            let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let set = (0..abstraction.n_actions)
                .filter(|&a| vals[a] >= best - opts.tol_pos)
                .collect();
            Ok((q, set))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut table = vec![0usize; n];
    let mut in_set = vec![false; n];
    for &t in &abstraction.target_ids {
        in_set[t] = true;
    }

    let mut pending: Vec<&(usize, Vec<usize>)> = argmax_sets.iter().collect();
    let max_rounds = pending.len() + 1;
    let mut indicator = ValueFunction::zeros(n);
    for (q, flag) in in_set.iter().enumerate() {
        if *flag {
            indicator.values[q] = 1.0;
        }
    }
    for _ in 0..max_rounds {
        if pending.is_empty() {
            break;
        }
        // Membership tests for this round all use the previous round's set.
        let joined: Vec<(usize, usize)> = pending
            .par_iter()
            .map(|(q, actions)| -> Result<Option<(usize, usize)>> {
                for &a in actions {
                    let mass = solve_min(
                        abstraction.row(*q, a),
                        &indicator.values,
                        abstraction.budget,
                        opts,
                    )?;
                    if mass > opts.tol_pos {
                        return Ok(Some((*q, a)));
                    }
                }
                Ok(None)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        if joined.is_empty() {
            break;
        }
        for &(q, a) in &joined {
            table[q] = a;
            in_set[q] = true;
            indicator.values[q] = 1.0;
        }
        pending.retain(|(q, _)| !in_set[*q]);
    }

    if !pending.is_empty() {
        return Err(Error::solver(format!(
            "backward reachability stalled with {} positive-value states unreached; \
             extraction is inconsistent with the converged value",
            pending.len()
        )));
    }
    Ok(Strategy::Stationary { table: table.clone() })
}

/// Plain greedy argmax at the converged value, smallest index on ties. This
/// ignores backward reachability and can loop on value-preserving cycles; it
/// exists as the counterpoint the extraction is tested against.
pub fn extract_greedy(
    abstraction: &RobustAbstraction,
    p_inf: &ValueFunction,
    opts: &SynthesisOptions,
) -> Result<Strategy> {
    let n = abstraction.n_states;
    let table: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|q| -> Result<usize> {
            if abstraction.is_target(q) || q == abstraction.unsafe_id {
                return Ok(0);
            }
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..abstraction.n_actions {
                let v =
                    solve_min(abstraction.row(q, a), &p_inf.values, abstraction.budget, opts)?;
                if v > best {
                    best = v;
                    best_a = a;
                }
            }
            Ok(best_a)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Strategy::Stationary { table })
}

/// Interval-hull projection of the robust rows: per successor state, the
/// worst- and best-case mass over the transport-constrained set. The result
/// is the tightest decoupled interval abstraction containing every admissible
/// row, with no transport budget left.
pub fn interval_hull(
    abstraction: &RobustAbstraction,
    dual_tol: f64,
) -> Result<RobustAbstraction> {
    let rows: Vec<Vec<AbstractRow>> = (0..abstraction.n_states)
        .into_par_iter()
        .map(|q| -> Result<Vec<AbstractRow>> {
            (0..abstraction.n_actions)
                .map(|a| {
                    let row = abstraction.row(q, a);
                    if q == abstraction.unsafe_id {
                        return Ok(AbstractRow::dirac(q));
                    }
                    let nw = row.support.len();
                    let mut low = vec![0.0; nw];
                    let mut high = vec![0.0; nw];
                    let mut indicator = vec![0.0; nw];
                    for i in 0..nw {
                        indicator[i] = 1.0;
                        let p = row.problem(&indicator, abstraction.budget);
                        low[i] = inner_min_dual(&p, dual_tol)?.clamp(0.0, 1.0);
                        high[i] = inner_max_dual(&p, dual_tol)?.clamp(0.0, 1.0);
                        indicator[i] = 0.0;
                    }
                    let mut cost = vec![1.0; nw * nw];
                    for i in 0..nw {
                        cost[i * nw + i] = 0.0;
                    }
                    Ok(AbstractRow {
                        support: row.support.clone(),
                        nominal: row.support.clone(),
                        row_low: low,
                        row_high: high,
                        cost,
                        nominal_in_support: (0..nw).collect(),
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let hull = RobustAbstraction {
        n_states: abstraction.n_states,
        n_actions: abstraction.n_actions,
        rows,
        target_ids: abstraction.target_ids.clone(),
        unsafe_id: abstraction.unsafe_id,
        budget: 0.0,
    };
    hull.validate()?;
    Ok(hull)
}

/// Strategy refined to the continuous state space through the cell locator.
#[derive(Debug, Clone)]
pub struct SwitchingStrategy<'a> {
    strategy: &'a Strategy,
    partition: &'a Partition,
}

/// Couple an abstract strategy with a partition. Only the located current
/// state and the time index feed the action choice.
pub fn refine<'a>(
    strategy: &'a Strategy,
    partition: &'a Partition,
) -> Result<SwitchingStrategy<'a>> {
    if strategy.state_count() != partition.state_count() {
        return Err(Error::input(format!(
            "strategy covers {} states but the partition has {}",
            strategy.state_count(),
            partition.state_count()
        )));
    }
    Ok(SwitchingStrategy { strategy, partition })
}

impl<'a> SwitchingStrategy<'a> {
    pub fn action(&self, x: &[f64], step: usize) -> Result<usize> {
        let q = self.partition.locate(x)?;
        self.strategy.action(q, step)
    }

    pub fn horizon(&self) -> Option<usize> {
        self.strategy.horizon()
    }

    pub fn partition(&self) -> &Partition {
        self.partition
    }
}
