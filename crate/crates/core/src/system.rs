//! Switched system dynamics: per-mode point maps and sound interval extensions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Rect;

/// Trigonometric factor used by [`Mode::PlanarTrig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Sin,
    Cos,
}

/// One switching mode: a point map together with an interval extension that
/// over-approximates its image on boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// `x -> A x + b`.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// Planar constant-speed step `x -> x + step * (cos angle, sin angle)`.
    Heading { angle: f64, step: f64 },
    /// Planar drift `x_d -> x_d + c_d + amp_d * trig_d(x_{1-d})`.
    PlanarTrig { consts: [f64; 2], amps: [f64; 2], trigs: [Trig; 2] },
}

impl Mode {
    pub fn dim_ok(&self, n: usize) -> bool {
        match self {
            Mode::Affine { matrix, offset } => {
                matrix.len() == n && matrix.iter().all(|r| r.len() == n) && offset.len() == n
            }
            Mode::Heading { .. } | Mode::PlanarTrig { .. } => n == 2,
        }
    }

    /// Point map `f_u(x)`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Mode::Affine { matrix, offset } => matrix
                .iter()
                .zip(offset)
                .map(|(row, b)| row.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>() + b)
                .collect(),
            Mode::Heading { angle, step } => {
                vec![x[0] + step * angle.cos(), x[1] + step * angle.sin()]
            }
            Mode::PlanarTrig { consts, amps, trigs } => (0..2)
                .map(|d| {
                    let arg = x[1 - d];
                    let t = match trigs[d] {
                        Trig::Sin => arg.sin(),
                        Trig::Cos => arg.cos(),
                    };
                    x[d] + consts[d] + amps[d] * t
                })
                .collect(),
        }
    }

    /// Interval extension `F_u(B) ⊇ { f_u(x) : x ∈ B }`.
    pub fn image(&self, b: &Rect) -> Rect {
        match self {
            Mode::Affine { matrix, offset } => {
                let n = b.dim();
                let mut lower = vec![0.0; n];
                let mut upper = vec![0.0; n];
                for i in 0..n {
                    let mut lo = offset[i];
                    let mut hi = offset[i];
                    for j in 0..n {
                        let a = matrix[i][j];
                        let (p, q) = (a * b.lower[j], a * b.upper[j]);
                        lo += p.min(q);
                        hi += p.max(q);
                    }
                    lower[i] = lo;
                    upper[i] = hi;
                }
                Rect { lower, upper }
            }
            Mode::Heading { angle, step } => {
                let dx = step * angle.cos();
                let dy = step * angle.sin();
                b.translate(&[dx, dy])
            }
            Mode::PlanarTrig { consts, amps, trigs } => {
                let mut lower = vec![0.0; 2];
                let mut upper = vec![0.0; 2];
                for d in 0..2 {
                    let (tlo, thi) = match trigs[d] {
                        Trig::Sin => sin_range(b.lower[1 - d], b.upper[1 - d]),
                        Trig::Cos => cos_range(b.lower[1 - d], b.upper[1 - d]),
                    };
                    let (p, q) = (amps[d] * tlo, amps[d] * thi);
                    lower[d] = b.lower[d] + consts[d] + p.min(q);
                    upper[d] = b.upper[d] + consts[d] + p.max(q);
                }
                Rect { lower, upper }
            }
        }
    }
}

/// Range of `sin` over `[lo, hi]`, tight up to rounding.
pub fn sin_range(lo: f64, hi: f64) -> (f64, f64) {
    debug_assert!(lo <= hi);
    if hi - lo >= 2.0 * std::f64::consts::PI {
        return (-1.0, 1.0);
    }
    let mut min = lo.sin().min(hi.sin());
    let mut max = lo.sin().max(hi.sin());
    // Interior critical points at pi/2 + 2k*pi (max) and -pi/2 + 2k*pi (min).
    let two_pi = 2.0 * std::f64::consts::PI;
    let half_pi = 0.5 * std::f64::consts::PI;
    let k_max = ((lo - half_pi) / two_pi).ceil();
    if half_pi + k_max * two_pi <= hi {
        max = 1.0;
    }
    let k_min = ((lo + half_pi) / two_pi).ceil();
    if -half_pi + k_min * two_pi <= hi {
        min = -1.0;
    }
    (min, max)
}

/// Range of `cos` over `[lo, hi]`.
pub fn cos_range(lo: f64, hi: f64) -> (f64, f64) {
    sin_range(lo + 0.5 * std::f64::consts::PI, hi + 0.5 * std::f64::consts::PI)
}

/// Switched stochastic system: `x_{k+1} = f_{u_k}(x_k) + v_k` with a finite
/// set of modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchedSystem {
    pub dimension: usize,
    pub modes: Vec<Mode>,
}

impl SwitchedSystem {
    pub fn new(dimension: usize, modes: Vec<Mode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::input("system needs at least one mode"));
        }
        for (i, m) in modes.iter().enumerate() {
            if !m.dim_ok(dimension) {
                return Err(Error::input(format!(
                    "mode {i} is incompatible with dimension {dimension}"
                )));
            }
        }
        Ok(SwitchedSystem { dimension, modes })
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn step(&self, mode: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_mode(mode)?;
        if x.len() != self.dimension {
            return Err(Error::input("state dimension mismatch"));
        }
        Ok(self.modes[mode].apply(x))
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes.len() {
            return Err(Error::input(format!(
                "mode index {mode} out of range (m = {})",
                self.modes.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn sin_range_examples() {
        let (lo, hi) = sin_range(0.0, std::f64::consts::PI);
        assert!((lo - 0.0).abs() < 1e-12);
        assert!((hi - 1.0).abs() < 1e-12);

        let (lo, hi) = sin_range(3.5, 6.0);
        assert!((lo - (-1.0)).abs() < 1e-12);
        assert!(hi < 0.0);
    }

    #[test]
    fn sin_range_dense_sampling() {
        let cases = [(-0.3, 0.4), (1.0, 2.5), (3.0, 9.5), (-7.0, -6.0), (0.0, 0.0)];
        for (a, b) in cases {
            let (lo, hi) = sin_range(a, b);
            let mut smin = f64::INFINITY;
            let mut smax = f64::NEG_INFINITY;
            for i in 0..=10_000 {
                let x = a + (b - a) * i as f64 / 10_000.0;
                smin = smin.min(x.sin());
                smax = smax.max(x.sin());
            }
            assert!(lo <= smin + 1e-9 && smin <= lo + 1e-6, "min mismatch on [{a},{b}]");
            assert!(hi >= smax - 1e-9 && smax >= hi - 1e-6, "max mismatch on [{a},{b}]");
        }
    }

    #[test]
    fn affine_image_is_exact_interval_arithmetic() {
        // f(x) = 2x on [1,2] -> [2,4]
        let m = Mode::Affine { matrix: vec![vec![2.0]], offset: vec![0.0] };
        let img = m.image(&Rect::new(vec![1.0], vec![2.0]).unwrap());
        assert_eq!(img.lower, vec![2.0]);
        assert_eq!(img.upper, vec![4.0]);
    }

    #[test]
    fn identity_image_is_identity() {
        let m = Mode::Affine {
            matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            offset: vec![0.0, 0.0],
        };
        let cell = Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(m.image(&cell), cell);
    }

    #[test]
    fn interval_extension_soundness_by_sampling() {
        let modes = vec![
            Mode::Affine { matrix: vec![vec![0.79, 0.035], vec![0.0, 0.825]], offset: vec![0.1, -0.2] },
            Mode::Heading { angle: 1.1, step: 1.0 },
            Mode::PlanarTrig {
                consts: [0.5, 0.0],
                amps: [0.2, 0.4],
                trigs: [Trig::Sin, Trig::Cos],
            },
        ];
        let sys = SwitchedSystem::new(2, modes).unwrap();
        let boxes = [
            Rect::new(vec![-2.0, -2.0], vec![-1.0, 0.5]).unwrap(),
            Rect::new(vec![0.3, 0.9], vec![1.7, 2.0]).unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for u in 0..sys.mode_count() {
            for b in &boxes {
                let img = sys.modes[u].image(b);
                for _ in 0..1000 {
                    let x = b.sample_uniform(&mut rng);
                    let y = sys.step(u, &x).unwrap();
                    assert!(
                        img.contains_point(&y),
                        "mode {u}: f(x) escaped the interval extension"
                    );
                }
            }
        }
    }
}
