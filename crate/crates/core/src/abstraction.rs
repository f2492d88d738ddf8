//! Robust MDP abstraction of a switched system over a grid partition.
//!
//! Per state-action pair this produces: interval bounds on the nominal
//! transition row (discretization error), the transport-cost structure between
//! regions, and the index sets of states reachable under the nominal
//! distribution and under any distribution supported on the assumed support
//! set. The adversary may redistribute nominal rows at transport cost up to
//! `budget = radius^order`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Rect;
use crate::noise::{AmbiguitySet, NoiseModel, Support};
use crate::partition::Partition;
use crate::solvers::InnerProblem;
use crate::system::SwitchedSystem;

/// Interval extension of one mode applied to a cell.
pub fn image_box(system: &SwitchedSystem, mode: usize, cell: &Rect) -> Result<Rect> {
    system.check_mode(mode)?;
    if cell.dim() != system.dimension {
        return Err(Error::input("cell dimension does not match the system"));
    }
    Ok(system.modes[mode].image(cell))
}

/// Closed-form infimum transport cost between abstract states.
///
/// For two cells this is the box gap distance raised to the Wasserstein
/// order; touching cells have cost zero. The unsafe state sits at the distance
/// to the complement of the safe set, so cells on the outer boundary or next
/// to an obstacle reach it for free.
#[derive(Debug, Clone)]
pub struct TransportCost<'a> {
    partition: &'a Partition,
    order: f64,
}

impl<'a> TransportCost<'a> {
    pub fn new(partition: &'a Partition, order: f64) -> Result<Self> {
        if !(order >= 1.0) {
            return Err(Error::input("wasserstein order must be at least 1"));
        }
        Ok(TransportCost { partition, order })
    }

    pub fn between(&self, i: usize, j: usize) -> f64 {
        let qu = self.partition.unsafe_id();
        if i == j {
            return 0.0;
        }
        let dist_sq = if i == qu {
            self.unsafe_dist_sq(j)
        } else if j == qu {
            self.unsafe_dist_sq(i)
        } else {
            self.partition.cell(i).dist_sq(self.partition.cell(j))
        };
        dist_sq.powf(0.5 * self.order)
    }

    fn unsafe_dist_sq(&self, cell_id: usize) -> f64 {
        let cell = self.partition.cell(cell_id);
        let mut dist = cell.dist_to_complement(self.partition.safe_box());
        for obs in self.partition.obstacles() {
            dist = dist.min(cell.dist_sq(obs).sqrt());
        }
        dist * dist
    }
}

/// Sparse interval bounds on one nominal transition row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    /// Successor state ids (sorted; may include the unsafe state).
    pub ids: Vec<usize>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

/// All data the inner solvers need for one state-action pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbstractRow {
    /// States reachable under any distribution on the support set (sorted).
    pub support: Vec<usize>,
    /// States reachable under the nominal distribution (sorted subset).
    pub nominal: Vec<usize>,
    pub row_low: Vec<f64>,
    pub row_high: Vec<f64>,
    /// Transport costs, `cost[i * nominal.len() + j]`.
    pub cost: Vec<f64>,
    /// Position of each nominal state in `support`.
    pub nominal_in_support: Vec<usize>,
}

impl AbstractRow {
    pub fn dirac(state: usize) -> Self {
        AbstractRow {
            support: vec![state],
            nominal: vec![state],
            row_low: vec![1.0],
            row_high: vec![1.0],
            cost: vec![0.0],
            nominal_in_support: vec![0],
        }
    }

    /// Borrow as an inner optimization instance over `values` gathered to the
    /// support index set.
    pub fn problem<'a>(&'a self, gathered_values: &'a [f64], budget: f64) -> InnerProblem<'a> {
        InnerProblem {
            values: gathered_values,
            row_low: &self.row_low,
            row_high: &self.row_high,
            cost: &self.cost,
            nominal_in_support: &self.nominal_in_support,
            budget,
        }
    }

    pub fn gather<'a>(&self, values: &[f64], buf: &'a mut Vec<f64>) -> &'a [f64] {
        buf.clear();
        buf.extend(self.support.iter().map(|&i| values[i]));
        buf
    }
}

/// Finite robust-MDP abstraction: interval rows, transport costs, reach index
/// sets, and the transport budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustAbstraction {
    pub n_states: usize,
    pub n_actions: usize,
    /// `rows[q][a]`; the unsafe state's rows are the absorbing Dirac.
    pub rows: Vec<Vec<AbstractRow>>,
    pub target_ids: Vec<usize>,
    pub unsafe_id: usize,
    pub budget: f64,
}

impl RobustAbstraction {
    pub fn is_target(&self, q: usize) -> bool {
        self.target_ids.binary_search(&q).is_ok()
    }

    pub fn row(&self, q: usize, a: usize) -> &AbstractRow {
        &self.rows[q][a]
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.len() != self.n_states {
            return Err(Error::model("abstraction row count mismatch"));
        }
        if self.unsafe_id >= self.n_states {
            return Err(Error::model("unsafe id out of range"));
        }
        if !(self.budget >= 0.0) {
            return Err(Error::model("transport budget must be nonnegative"));
        }
        for (q, actions) in self.rows.iter().enumerate() {
            if actions.len() != self.n_actions {
                return Err(Error::model(format!("state {q} has a missing action row")));
            }
            for (a, row) in actions.iter().enumerate() {
                if row.support.windows(2).any(|w| w[0] >= w[1])
                    || row.nominal.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(Error::model(format!("row ({q},{a}) ids are not sorted")));
                }
                if row.support.iter().chain(&row.nominal).any(|&i| i >= self.n_states) {
                    return Err(Error::model(format!("row ({q},{a}) has an id out of range")));
                }
                for (k, &j) in row.nominal.iter().enumerate() {
                    let pos = row.nominal_in_support[k];
                    if row.support.get(pos) != Some(&j) {
                        return Err(Error::model(format!(
                            "row ({q},{a}): nominal state {j} missing from the support set"
                        )));
                    }
                }
                let zeros = vec![0.0; row.support.len()];
                row.problem(&zeros, self.budget)
                    .validate()
                    .map_err(|e| Error::model(format!("row ({q},{a}): {e}")))?;
                if q == self.unsafe_id && (row.nominal != vec![q] || row.row_low != vec![1.0]) {
                    return Err(Error::model("unsafe state must be absorbing"));
                }
            }
        }
        Ok(())
    }
}

/// Axis-aligned window of grid coordinates around a box, used to enumerate
/// candidate cells. Extends one cell beyond the exact range so float rounding
/// can never drop a touching cell.
struct GridWindow {
    lo: Vec<usize>,
    hi: Vec<usize>,
    counts: Vec<usize>,
}

impl GridWindow {
    fn around(partition: &Partition, b: &Rect) -> Option<GridWindow> {
        let grid = partition.grid();
        let dim = grid.dim();
        let mut lo = vec![0usize; dim];
        let mut hi = vec![0usize; dim];
        for d in 0..dim {
            if b.upper[d] < grid.safe_box.lower[d] || b.lower[d] > grid.safe_box.upper[d] {
                return None;
            }
            let base = grid.safe_box.lower[d];
            let w = grid.cell_width(d);
            let count = grid.counts[d] as isize;
            lo[d] = (((b.lower[d] - base) / w).floor() as isize - 1).clamp(0, count - 1) as usize;
            hi[d] = (((b.upper[d] - base) / w).floor() as isize + 1).clamp(0, count - 1) as usize;
        }
        Some(GridWindow { lo, hi, counts: grid.counts.clone() })
    }

    fn for_each(&self, mut f: impl FnMut(usize, &[usize])) {
        let dim = self.lo.len();
        let mut coords = self.lo.clone();
        loop {
            let mut lin = 0;
            for d in 0..dim {
                lin = lin * self.counts[d] + coords[d];
            }
            f(lin, &coords);
            let mut d = dim;
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                if coords[d] < self.hi[d] {
                    coords[d] += 1;
                    for dd in d + 1..dim {
                        coords[dd] = self.lo[dd];
                    }
                    break;
                }
            }
        }
    }
}

fn closed_touch(a: &Rect, b: &Rect) -> bool {
    (0..a.dim()).all(|d| a.lower[d] <= b.upper[d] && b.lower[d] <= a.upper[d])
}

/// Ids of the safe cells whose closure intersects `b` (sorted).
fn cells_touching(partition: &Partition, b: &Rect) -> Vec<usize> {
    let mut out = Vec::new();
    if let Some(window) = GridWindow::around(partition, b) {
        window.for_each(|lin, _| {
            if let Some(id) = partition.cell_id_by_grid(lin) {
                if closed_touch(partition.cell(id), b) {
                    out.push(id);
                }
            }
        });
    }
    out.sort_unstable();
    out
}

/// True when some part of `b` lies outside the safe region: beyond the outer
/// boundary or touching an obstacle cell.
fn touches_unsafe(partition: &Partition, b: &Rect) -> bool {
    if !b.contained_in(partition.safe_box()) {
        return true;
    }
    let grid = partition.grid();
    let mut hit = false;
    if let Some(window) = GridWindow::around(partition, b) {
        window.for_each(|lin, coords| {
            if !hit && partition.cell_id_by_grid(lin).is_none() {
                let lower: Vec<f64> = (0..grid.dim())
                    .map(|d| grid.safe_box.lower[d] + coords[d] as f64 * grid.cell_width(d))
                    .collect();
                let upper: Vec<f64> = (0..grid.dim())
                    .map(|d| grid.safe_box.lower[d] + (coords[d] + 1) as f64 * grid.cell_width(d))
                    .collect();
                if closed_touch(&Rect { lower, upper }, b) {
                    hit = true;
                }
            }
        });
    }
    hit
}

/// Interval bounds on the nominal rows of every safe state and action.
///
/// For empirical nominals the bounds count atoms whose shifted image box is
/// contained in (lower) or touches (upper) each cell. For truncated Gaussians
/// they are per-axis CDF-difference products extremized over the image box,
/// renormalized for the truncation. The unsafe column takes the residual mass.
pub fn nominal_bounds(
    system: &SwitchedSystem,
    partition: &Partition,
    nominal: &NoiseModel,
) -> Result<Vec<Vec<SparseRow>>> {
    check_dims(system, partition)?;
    nominal.validate(system.dimension)?;
    let n_safe = partition.cells().len();
    (0..n_safe)
        .into_par_iter()
        .map(|q| {
            (0..system.mode_count())
                .map(|a| {
                    let image = system.modes[a].image(partition.cell(q));
                    Ok(nominal_row(partition, &image, nominal, true))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Bounds for a single image box. When `unsafe_reachable` is false the
/// residual unsafe entry is suppressed (sound when the dilated image stays
/// inside the safe region, since the nominal is supported there too).
fn nominal_row(
    partition: &Partition,
    image: &Rect,
    nominal: &NoiseModel,
    unsafe_reachable: bool,
) -> SparseRow {
    let mut entries: Vec<(usize, f64, f64)> = Vec::new();

    match nominal {
        NoiseModel::Empirical { atoms } => {
            let m = atoms.len() as f64;
            let mut acc: std::collections::BTreeMap<usize, (u32, u32)> =
                std::collections::BTreeMap::new();
            for atom in atoms {
                let shifted = image.translate(atom);
                for id in cells_touching(partition, &shifted) {
                    let slot = acc.entry(id).or_insert((0, 0));
                    slot.1 += 1;
                    if shifted.contained_in(partition.cell(id)) {
                        slot.0 += 1;
                    }
                }
            }
            entries.extend(
                acc.into_iter().map(|(id, (lo, hi))| (id, lo as f64 / m, hi as f64 / m)),
            );
        }
        NoiseModel::TruncatedGaussian { mean, variances, truncation } => {
            let reach = image.minkowski_sum(&nominal.support_box());
            for id in cells_touching(partition, &reach) {
                let cell = partition.cell(id);
                let mut p_min = 1.0;
                let mut p_max = 1.0;
                for d in 0..partition.dim() {
                    let sigma = variances[d].sqrt();
                    let prob = |y: f64| {
                        truncated_interval_prob(
                            cell.lower[d] - y,
                            cell.upper[d] - y,
                            mean[d],
                            sigma,
                            *truncation,
                        )
                    };
                    // The interval probability is unimodal in the image point;
                    // the peak centers the cell on the noise mean.
                    let peak = 0.5 * (cell.lower[d] + cell.upper[d]) - mean[d];
                    let y_best = peak.clamp(image.lower[d], image.upper[d]);
                    p_max *= prob(y_best);
                    p_min *= prob(image.lower[d]).min(prob(image.upper[d]));
                }
                if p_max > 0.0 {
                    entries.push((id, p_min, p_max));
                }
            }
        }
    }

    let sum_low: f64 = entries.iter().map(|e| e.1).sum();
    let sum_high: f64 = entries.iter().map(|e| e.2).sum();
    if unsafe_reachable {
        let qu_high = (1.0 - sum_low).clamp(0.0, 1.0);
        let qu_low = (1.0 - sum_high).clamp(0.0, 1.0).min(qu_high);
        if qu_high > 0.0 {
            entries.push((partition.unsafe_id(), qu_low, qu_high));
        }
    }

    SparseRow {
        ids: entries.iter().map(|e| e.0).collect(),
        low: entries.iter().map(|e| e.1).collect(),
        high: entries.iter().map(|e| e.2).collect(),
    }
}

/// Truncated-normal probability of `[lo, hi]` for noise with the given mean,
/// standard deviation, and truncation (in standard deviations).
fn truncated_interval_prob(lo: f64, hi: f64, mean: f64, sigma: f64, trunc: f64) -> f64 {
    let a = mean - trunc * sigma;
    let b = mean + trunc * sigma;
    let lo = lo.max(a);
    let hi = hi.min(b);
    if lo >= hi {
        return 0.0;
    }
    let z = |x: f64| 0.5 * (1.0 + libm::erf((x - mean) / (sigma * std::f64::consts::SQRT_2)));
    let mass = z(b) - z(a);
    ((z(hi) - z(lo)) / mass).clamp(0.0, 1.0)
}

/// Nominal-reach and support-reach index sets for one state-action pair.
///
/// The support-reach set collects the states reachable by any distribution on
/// the support set (everything, for unbounded support); the nominal-reach set
/// holds the states with positive upper bound. The former always contains the
/// latter.
pub fn reach_index_sets(
    partition: &Partition,
    image: &Rect,
    support: &Support,
    nominal_row: &SparseRow,
) -> (Vec<usize>, Vec<usize>) {
    let nominal: Vec<usize> = nominal_row
        .ids
        .iter()
        .zip(&nominal_row.high)
        .filter(|(_, &h)| h > 0.0)
        .map(|(&id, _)| id)
        .collect();

    let mut support_reach: Vec<usize> = match support {
        Support::Unbounded(_) => (0..partition.state_count()).collect(),
        Support::Bounded(w) => {
            let dilated = image.minkowski_sum(w);
            let mut ids = cells_touching(partition, &dilated);
            if touches_unsafe(partition, &dilated) {
                ids.push(partition.unsafe_id());
            }
            ids
        }
    };
    support_reach.extend(&nominal);
    support_reach.sort_unstable();
    support_reach.dedup();
    (nominal, support_reach)
}

/// Assemble the full robust abstraction.
pub fn build_abstraction(
    system: &SwitchedSystem,
    partition: &Partition,
    ambiguity: &AmbiguitySet,
) -> Result<RobustAbstraction> {
    check_dims(system, partition)?;
    ambiguity.validate(system.dimension)?;
    let n_states = partition.state_count();
    let n_actions = system.mode_count();
    let unsafe_id = partition.unsafe_id();
    let cost = TransportCost::new(partition, ambiguity.order)?;

    let mut rows: Vec<Vec<AbstractRow>> = (0..unsafe_id)
        .into_par_iter()
        .map(|q| {
            (0..n_actions)
                .map(|a| {
                    let image = system.modes[a].image(partition.cell(q));
                    let qu_reachable = match &ambiguity.support {
                        Support::Unbounded(_) => true,
                        Support::Bounded(w) => touches_unsafe(partition, &image.minkowski_sum(w)),
                    };
                    let sparse = nominal_row(partition, &image, &ambiguity.nominal, qu_reachable);
                    let (nominal, support) =
                        reach_index_sets(partition, &image, &ambiguity.support, &sparse);
                    let nominal_in_support: Vec<usize> = nominal
                        .iter()
                        .map(|j| support.binary_search(j).expect("nominal inside support"))
                        .collect();
                    let mut cost_mat = vec![0.0; support.len() * nominal.len()];
                    for (i, &si) in support.iter().enumerate() {
                        for (j, &nj) in nominal.iter().enumerate() {
                            cost_mat[i * nominal.len() + j] = cost.between(si, nj);
                        }
                    }
                    AbstractRow {
                        support,
                        nominal,
                        row_low: sparse.low.clone(),
                        row_high: sparse.high.clone(),
                        cost: cost_mat,
                        nominal_in_support,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();

    rows.push(vec![AbstractRow::dirac(unsafe_id); n_actions]);

    let abstraction = RobustAbstraction {
        n_states,
        n_actions,
        rows,
        target_ids: partition.target_ids().to_vec(),
        unsafe_id,
        budget: ambiguity.budget(),
    };
    abstraction.validate()?;
    Ok(abstraction)
}

fn check_dims(system: &SwitchedSystem, partition: &Partition) -> Result<()> {
    if system.dimension != partition.dim() {
        return Err(Error::input(format!(
            "system dimension {} does not match partition dimension {}",
            system.dimension,
            partition.dim()
        )));
    }
    Ok(())
}
