//! Sort-based inner min/max for decoupled interval rows.

use crate::error::Result;
use crate::solvers::row_feasible;

/// Minimizing assignment: sort states by ascending value, grant the upper
/// bound to low-value states until the unit of mass runs out, the lower bound
/// to the rest. Ties in the sort break by state index.
///
/// Returns the expected value and the minimizing row.
pub fn imdp_inner_min(
    row_low: &[f64],
    row_high: &[f64],
    values: &[f64],
) -> Result<(f64, Vec<f64>)> {
    assign(row_low, row_high, values, false)
}

/// Mirror of [`imdp_inner_min`]: sorts by descending value.
pub fn imdp_inner_max(
    row_low: &[f64],
    row_high: &[f64],
    values: &[f64],
) -> Result<(f64, Vec<f64>)> {
    assign(row_low, row_high, values, true)
}

fn assign(
    row_low: &[f64],
    row_high: &[f64],
    values: &[f64],
    descending: bool,
) -> Result<(f64, Vec<f64>)> {
    row_feasible(row_low, row_high)?;
    let n = row_low.len();
    debug_assert_eq!(values.len(), n);

    let mut order: Vec<usize> = (0..n).collect();
    if descending {
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    } else {
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    }

    let mut row = row_low.to_vec();
    let mut remaining = 1.0 - row_low.iter().sum::<f64>();
    for &j in &order {
        if remaining <= 0.0 {
            break;
        }
        let add = (row_high[j] - row_low[j]).min(remaining);
        row[j] += add;
        remaining -= add;
    }
    let value = row.iter().zip(values).map(|(g, v)| g * v).sum();
    Ok((value, row))
}
