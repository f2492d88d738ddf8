//! Noise models and the Wasserstein ambiguity set around a nominal one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Rect;

/// Nominal noise distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Uniformly weighted atoms `v^1..v^M`.
    Empirical { atoms: Vec<Vec<f64>> },
    /// Axis-aligned Gaussian truncated at `truncation` standard deviations.
    TruncatedGaussian { mean: Vec<f64>, variances: Vec<f64>, truncation: f64 },
}

impl NoiseModel {
    pub fn dim(&self) -> usize {
        match self {
            NoiseModel::Empirical { atoms } => atoms.first().map_or(0, |a| a.len()),
            NoiseModel::TruncatedGaussian { mean, .. } => mean.len(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            NoiseModel::Empirical { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::input("empirical noise needs at least one atom"));
                }
                if atoms.iter().any(|a| a.len() != dim) {
                    return Err(Error::input("noise atom dimension mismatch"));
                }
            }
            NoiseModel::TruncatedGaussian { mean, variances, truncation } => {
                if mean.len() != dim || variances.len() != dim {
                    return Err(Error::input("gaussian noise dimension mismatch"));
                }
                if variances.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::input("gaussian variances must be positive"));
                }
                if !(*truncation > 0.0) {
                    return Err(Error::input("gaussian truncation must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Smallest box carrying all of the distribution's mass.
    pub fn support_box(&self) -> Rect {
        match self {
            NoiseModel::Empirical { atoms } => {
                let n = self.dim();
                let mut lower = vec![f64::INFINITY; n];
                let mut upper = vec![f64::NEG_INFINITY; n];
                for a in atoms {
                    for d in 0..n {
                        lower[d] = lower[d].min(a[d]);
                        upper[d] = upper[d].max(a[d]);
                    }
                }
                Rect { lower, upper }
            }
            NoiseModel::TruncatedGaussian { mean, variances, truncation } => {
                let lower = mean
                    .iter()
                    .zip(variances)
                    .map(|(m, v)| m - truncation * v.sqrt())
                    .collect();
                let upper = mean
                    .iter()
                    .zip(variances)
                    .map(|(m, v)| m + truncation * v.sqrt())
                    .collect();
                Rect { lower, upper }
            }
        }
    }
}

/// Support assumption on the true noise distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Support {
    Unbounded(UnboundedTag),
    Bounded(Rect),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnboundedTag {
    Unbounded,
}

impl Support {
    pub fn unbounded() -> Self {
        Support::Unbounded(UnboundedTag::Unbounded)
    }

    pub fn as_box(&self) -> Option<&Rect> {
        match self {
            Support::Bounded(r) => Some(r),
            Support::Unbounded(_) => None,
        }
    }
}

/// Wasserstein ball of radius `radius` (order `order`) around `nominal`,
/// together with a set known to contain the support of the true distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySet {
    pub nominal: NoiseModel,
    pub radius: f64,
    pub order: f64,
    pub support: Support,
}

impl AmbiguitySet {
    pub fn validate(&self, dim: usize) -> Result<()> {
        self.nominal.validate(dim)?;
        if !(self.radius >= 0.0) {
            return Err(Error::input("ambiguity radius must be nonnegative"));
        }
        if !(self.order >= 1.0) {
            return Err(Error::input("wasserstein order must be at least 1"));
        }
        if let Some(w) = self.support.as_box() {
            if w.dim() != dim {
                return Err(Error::input("support box dimension mismatch"));
            }
            if !self.nominal.support_box().contained_in(w) {
                return Err(Error::input(
                    "nominal distribution must be supported inside the support box",
                ));
            }
        }
        Ok(())
    }

    /// Transport budget on the abstraction: `radius^order`.
    pub fn budget(&self) -> f64 {
        self.radius.powf(self.order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_is_radius_to_the_order() {
        let amb = AmbiguitySet {
            nominal: NoiseModel::Empirical { atoms: vec![vec![0.0]] },
            radius: 5e-3,
            order: 2.0,
            support: Support::unbounded(),
        };
        assert!((amb.budget() - 2.5e-5).abs() < 1e-18);
        let zero = AmbiguitySet { radius: 0.0, ..amb };
        assert_eq!(zero.budget(), 0.0);
    }

    #[test]
    fn atoms_outside_support_rejected() {
        let amb = AmbiguitySet {
            nominal: NoiseModel::Empirical { atoms: vec![vec![0.2, 0.0]] },
            radius: 0.0,
            order: 2.0,
            support: Support::Bounded(Rect::new(vec![-0.1, -0.1], vec![0.1, 0.1]).unwrap()),
        };
        assert!(amb.validate(2).is_err());
    }

    #[test]
    fn support_json_roundtrip() {
        let b: Support = serde_json::from_str("\"unbounded\"").unwrap();
        assert_eq!(b, Support::unbounded());
        let r: Support =
            serde_json::from_str("{\"lower\":[-1.0],\"upper\":[1.0]}").unwrap();
        assert!(r.as_box().is_some());
    }
}
