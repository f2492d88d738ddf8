//! Value vectors and strategies shared across synthesis and validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-state satisfaction-probability vector, entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        ValueFunction { values: vec![0.0; n] }
    }

    /// Indicator vector of a set of states.
    pub fn indicator(ids: &[usize], n: usize) -> Self {
        let mut values = vec![0.0; n];
        for &q in ids {
            values[q] = 1.0;
        }
        ValueFunction { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.iter().any(|v| !(*v >= 0.0 && *v <= 1.0)) {
            return Err(Error::model("value function entries must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for ValueFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Synthesized strategy on the abstraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Strategy {
    /// Time-indexed action table: `table[k][q]` for steps `k = 0..K`.
    Markovian { table: Vec<Vec<usize>> },
    /// Single action table: `table[q]`.
    Stationary { table: Vec<usize> },
}

impl Strategy {
    pub fn state_count(&self) -> usize {
        match self {
            Strategy::Markovian { table } => table.first().map_or(0, |row| row.len()),
            Strategy::Stationary { table } => table.len(),
        }
    }

    pub fn horizon(&self) -> Option<usize> {
        match self {
            Strategy::Markovian { table } => Some(table.len()),
            Strategy::Stationary { .. } => None,
        }
    }

    /// Action at abstract state `q` and time step `k`.
    pub fn action(&self, q: usize, k: usize) -> Result<usize> {
        match self {
            Strategy::Markovian { table } => table
                .get(k)
                .ok_or_else(|| {
                    Error::input(format!(
                        "step {k} out of range for horizon {}",
                        table.len()
                    ))
                })
                .map(|row| row[q]),
            Strategy::Stationary { table } => Ok(table[q]),
        }
    }

    pub fn validate(&self, n_states: usize, n_actions: usize) -> Result<()> {
        let check_row = |row: &[usize]| -> Result<()> {
            if row.len() != n_states {
                return Err(Error::model("strategy table has wrong state count"));
            }
            if row.iter().any(|&a| a >= n_actions) {
                return Err(Error::model("strategy stores an out-of-range action"));
            }
            Ok(())
        };
        match self {
            Strategy::Markovian { table } => table.iter().try_for_each(|r| check_row(r)),
            Strategy::Stationary { table } => check_row(table),
        }
    }
}

/// Synthesis horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

/// Which inner-problem solver backs the dynamic programming sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Concave dual reformulation solved by golden-section search.
    Dual,
    /// Reference simplex on the transport-polytope linear program.
    Lp,
    /// Decoupled interval-hull abstraction with the classic sort-based backup.
    ImdpBaseline,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_and_bounds() {
        let v = ValueFunction::indicator(&[1, 3], 4);
        assert_eq!(v.values, vec![0.0, 1.0, 0.0, 1.0]);
        assert!(v.validate().is_ok());
        let bad = ValueFunction { values: vec![1.2] };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn markovian_step_out_of_range() {
        let s = Strategy::Markovian { table: vec![vec![0, 1], vec![1, 0]] };
        assert_eq!(s.action(1, 0).unwrap(), 1);
        assert!(s.action(0, 2).is_err());
    }
}
