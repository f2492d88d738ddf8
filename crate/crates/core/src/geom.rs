//! Axis-aligned boxes and the distance computations the abstraction is built on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned box `[lower, upper]` in `R^n`.
///
/// Boundary ownership (which face belongs to which neighboring cell) is a
/// partition-level convention, not a property of the box itself; see
/// [`crate::partition::Partition::locate`]. Set-operation helpers below treat
/// boxes as closed unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Rect {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::input(format!(
                "box bounds have mismatched dimensions {} vs {}",
                lower.len(),
                upper.len()
            )));
        }
        for d in 0..lower.len() {
            if !(lower[d] <= upper[d]) {
                return Err(Error::input(format!(
                    "box lower {} > upper {} in dimension {d}",
                    lower[d], upper[d]
                )));
            }
        }
        Ok(Rect { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim()).map(|d| 0.5 * (self.lower[d] + self.upper[d])).collect()
    }

    pub fn width(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    /// Closed-box membership.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|d| self.lower[d] <= x[d] && x[d] <= self.upper[d])
    }

    /// True when the boxes overlap on a set of positive volume. Boxes that
    /// merely share a face do not count.
    pub fn intersects_open(&self, other: &Rect) -> bool {
        (0..self.dim()).all(|d| self.lower[d] < other.upper[d] && other.lower[d] < self.upper[d])
    }

    /// Closed containment `self ⊆ other`; coincident faces count as inside.
    pub fn contained_in(&self, other: &Rect) -> bool {
        (0..self.dim()).all(|d| self.lower[d] >= other.lower[d] && self.upper[d] <= other.upper[d])
    }

    pub fn translate(&self, v: &[f64]) -> Rect {
        Rect {
            lower: self.lower.iter().zip(v).map(|(a, b)| a + b).collect(),
            upper: self.upper.iter().zip(v).map(|(a, b)| a + b).collect(),
        }
    }

    /// Minkowski sum of two boxes.
    pub fn minkowski_sum(&self, other: &Rect) -> Rect {
        Rect {
            lower: self.lower.iter().zip(&other.lower).map(|(a, b)| a + b).collect(),
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a + b).collect(),
        }
    }

    /// Per-dimension gap between two boxes: zero where they overlap or touch.
    pub fn gap(&self, other: &Rect) -> Vec<f64> {
        (0..self.dim())
            .map(|d| {
                (other.lower[d] - self.upper[d])
                    .max(self.lower[d] - other.upper[d])
                    .max(0.0)
            })
            .collect()
    }

    /// Squared Euclidean infimum distance between the boxes.
    pub fn dist_sq(&self, other: &Rect) -> f64 {
        self.gap(other).iter().map(|g| g * g).sum()
    }

    /// Euclidean distance from this box to the complement of `outer`.
    ///
    /// Zero when the box touches (or pokes out of) the boundary of `outer`.
    pub fn dist_to_complement(&self, outer: &Rect) -> f64 {
        let mut best = f64::INFINITY;
        for d in 0..self.dim() {
            best = best.min(self.lower[d] - outer.lower[d]);
            best = best.min(outer.upper[d] - self.upper[d]);
        }
        best.max(0.0)
    }

    pub fn sample_uniform<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|d| {
                if self.lower[d] == self.upper[d] {
                    self.lower[d]
                } else {
                    rng.gen_range(self.lower[d]..self.upper[d])
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gap_and_distance() {
        let a = Rect::new(vec![0.0], vec![1.0]).unwrap();
        let b = Rect::new(vec![1.0], vec![2.0]).unwrap();
        let c = Rect::new(vec![2.0], vec![3.0]).unwrap();
        assert_eq!(a.dist_sq(&b), 0.0);
        assert_eq!(a.dist_sq(&c), 1.0);
        assert_eq!(c.dist_sq(&a), 1.0);
    }

    #[test]
    fn two_dim_gap_matches_sampling() {
        let a = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let b = Rect::new(vec![2.0, 2.0], vec![3.0, 3.0]).unwrap();
        assert_eq!(a.dist_sq(&b), 2.0);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut best = f64::INFINITY;
        for _ in 0..20_000 {
            let x = a.sample_uniform(&mut rng);
            let y = b.sample_uniform(&mut rng);
            let d: f64 = x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum();
            best = best.min(d);
        }
        assert!(best >= a.dist_sq(&b) - 1e-12);
        assert!(best <= a.dist_sq(&b) + 0.05);
    }

    #[test]
    fn complement_distance() {
        let outer = Rect::new(vec![0.0, 0.0], vec![4.0, 4.0]).unwrap();
        let inner = Rect::new(vec![1.0, 2.0], vec![2.0, 3.0]).unwrap();
        assert_eq!(inner.dist_to_complement(&outer), 1.0);
        let touching = Rect::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(touching.dist_to_complement(&outer), 0.0);
    }

    #[test]
    fn invalid_bounds_rejected() {
        assert!(Rect::new(vec![1.0], vec![0.0]).is_err());
        assert!(Rect::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }
}
