//! Monte Carlo validation of the synthesized bounds.
//!
//! Test distributions sit inside (or on the boundary of) the ambiguity ball:
//! a translation of the nominal by a vector of norm `radius` has exactly that
//! Wasserstein distance, and for Gaussian nominals an inflated covariance
//! hits the radius through the closed-form distance between Gaussians.
//! Simulation is seeded per trial, so results do not depend on the thread
//! schedule.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{AmbiguitySet, NoiseModel};
use crate::synthesis::SwitchingStrategy;
use crate::system::SwitchedSystem;

/// Mean gap between the upper and lower bound vectors.
pub fn e_avg(lower: &[f64], upper: &[f64]) -> Result<f64> {
    if lower.len() != upper.len() {
        return Err(Error::input("bound vectors have different lengths"));
    }
    if lower.is_empty() {
        return Err(Error::input("bound vectors are empty"));
    }
    let n = lower.len() as f64;
    Ok(lower.iter().zip(upper).map(|(l, u)| u - l).sum::<f64>() / n)
}

/// How a test distribution is placed inside the ambiguity ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestDistribution {
    /// Nominal translated by a fixed vector of norm `radius`.
    Shifted,
    /// Gaussian nominal with each axis standard deviation grown by
    /// `radius / sqrt(n)` (order-2 only).
    Inflated,
}

/// Concrete sampler for a noise distribution.
#[derive(Debug, Clone)]
pub enum NoiseSampler {
    Empirical { atoms: Vec<Vec<f64>> },
    TruncatedGaussian { mean: Vec<f64>, std: Vec<f64>, truncation: f64 },
}

impl NoiseSampler {
    pub fn from_nominal(nominal: &NoiseModel) -> NoiseSampler {
        match nominal {
            NoiseModel::Empirical { atoms } => NoiseSampler::Empirical { atoms: atoms.clone() },
            NoiseModel::TruncatedGaussian { mean, variances, truncation } => {
                NoiseSampler::TruncatedGaussian {
                    mean: mean.clone(),
                    std: variances.iter().map(|v| v.sqrt()).collect(),
                    truncation: *truncation,
                }
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            NoiseSampler::Empirical { atoms } => {
                atoms[rng.gen_range(0..atoms.len())].clone()
            }
            NoiseSampler::TruncatedGaussian { mean, std, truncation } => mean
                .iter()
                .zip(std)
                .map(|(m, s)| m + s * sample_truncated_unit_normal(rng, *truncation))
                .collect(),
        }
    }
}

/// Standard normal conditioned on `|z| <= truncation`, by rejection.
fn sample_truncated_unit_normal<R: Rng>(rng: &mut R, truncation: f64) -> f64 {
    loop {
        // Box-Muller; one value per iteration keeps the stream simple.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        if z.abs() <= truncation {
            return z;
        }
    }
}

/// Build a test sampler at Wasserstein distance `radius` from the nominal.
pub fn make_test_distribution(
    ambiguity: &AmbiguitySet,
    mode: TestDistribution,
) -> Result<NoiseSampler> {
    let n = ambiguity.nominal.dim();
    match mode {
        TestDistribution::Shifted => {
            let mut shift = vec![0.0; n];
            if n > 0 {
                shift[0] = ambiguity.radius;
            }
            Ok(match &ambiguity.nominal {
                NoiseModel::Empirical { atoms } => NoiseSampler::Empirical {
                    atoms: atoms
                        .iter()
                        .map(|a| a.iter().zip(&shift).map(|(x, s)| x + s).collect())
                        .collect(),
                },
                NoiseModel::TruncatedGaussian { mean, variances, truncation } => {
                    NoiseSampler::TruncatedGaussian {
                        mean: mean.iter().zip(&shift).map(|(m, s)| m + s).collect(),
                        std: variances.iter().map(|v| v.sqrt()).collect(),
                        truncation: *truncation,
                    }
                }
            })
        }
        TestDistribution::Inflated => match &ambiguity.nominal {
            NoiseModel::Empirical { .. } => Err(Error::input(
                "inflated test distributions need a Gaussian nominal",
            )),
            NoiseModel::TruncatedGaussian { mean, variances, truncation } => {
                if (ambiguity.order - 2.0).abs() > 1e-12 {
                    return Err(Error::input(
                        "inflated test distributions are defined for order 2",
                    ));
                }
                let bump = ambiguity.radius / (n as f64).sqrt();
                Ok(NoiseSampler::TruncatedGaussian {
                    mean: mean.clone(),
                    std: variances.iter().map(|v| v.sqrt() + bump).collect(),
                    truncation: *truncation,
                })
            }
        },
    }
}

/// Order-2 Wasserstein distance between axis-aligned Gaussians.
pub fn gaussian_w2_diag(mean_a: &[f64], std_a: &[f64], mean_b: &[f64], std_b: &[f64]) -> f64 {
    let mean_sq: f64 = mean_a.iter().zip(mean_b).map(|(a, b)| (a - b) * (a - b)).sum();
    let std_sq: f64 = std_a.iter().zip(std_b).map(|(a, b)| (a - b) * (a - b)).sum();
    (mean_sq + std_sq).sqrt()
}

/// How a simulated path ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    ReachedTarget,
    HitUnsafe,
    HorizonExhausted,
}

/// One closed-loop path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub outcome: Outcome,
}

/// Aggregate of a simulation batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub trajectories: Vec<Trajectory>,
}

impl SimulationSummary {
    pub fn wilson_half_width(&self) -> f64 {
        0.5 * (self.wilson_high - self.wilson_low)
    }
}

/// 99% Wilson score interval for a binomial rate.
pub fn wilson_interval_99(successes: usize, trials: usize) -> (f64, f64) {
    let z = 2.5758293035489004; // 99.5% standard normal quantile
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Simulate the closed loop from `x0` and count reach-avoid successes.
///
/// A trial succeeds when the path enters a target cell at some step `k <= horizon`
/// having stayed in the safe region before; entering the unsafe region fails
/// it. The first `record` trajectories are returned for plotting.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    system: &SwitchedSystem,
    strategy: &SwitchingStrategy<'_>,
    x0: &[f64],
    horizon: usize,
    trials: usize,
    sampler: &NoiseSampler,
    seed: u64,
    record: usize,
) -> Result<SimulationSummary> {
    let partition = strategy.partition();
    if x0.len() != system.dimension {
        return Err(Error::input("initial state dimension mismatch"));
    }
    if trials == 0 {
        return Err(Error::input("at least one trial is required"));
    }
    if partition.locate(x0)? == partition.unsafe_id() {
        return Err(Error::input("initial state lies outside the safe region"));
    }
    if let Some(k) = strategy.horizon() {
        if horizon > k {
            return Err(Error::input(format!(
                "simulation horizon {horizon} exceeds the strategy horizon {k}"
            )));
        }
    }

    let results: Vec<(bool, Option<Trajectory>)> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<(bool, Option<Trajectory>)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64 + 1);
            let keep = trial < record;
            let mut states = if keep { vec![x0.to_vec()] } else { Vec::new() };
            let mut actions = Vec::new();

            let mut x = x0.to_vec();
            let mut outcome = Outcome::HorizonExhausted;
            let mut q = partition.locate(&x)?;
            if partition.is_target(q) {
                outcome = Outcome::ReachedTarget;
            } else {
                for k in 0..horizon {
                    let a = strategy.action(&x, k)?;
                    let noise = sampler.sample(&mut rng);
                    let mut next = system.step(a, &x)?;
                    for (v, w) in next.iter_mut().zip(&noise) {
                        *v += w;
                    }
                    x = next;
                    q = partition.locate(&x)?;
                    if keep {
                        states.push(x.clone());
                        actions.push(a);
                    }
                    if partition.is_target(q) {
                        outcome = Outcome::ReachedTarget;
                        break;
                    }
                    if q == partition.unsafe_id() {
                        outcome = Outcome::HitUnsafe;
                        break;
                    }
                }
            }
            let trajectory = keep.then(|| Trajectory { states, actions, outcome });
            Ok((outcome == Outcome::ReachedTarget, trajectory))
        })
        .collect::<Result<Vec<_>>>()?;

    let successes = results.iter().filter(|(s, _)| *s).count();
    let trajectories = results.into_iter().filter_map(|(_, t)| t).collect();
    let (wilson_low, wilson_high) = wilson_interval_99(successes, trials);
    Ok(SimulationSummary {
        trials,
        successes,
        rate: successes as f64 / trials as f64,
        wilson_low,
        wilson_high,
        trajectories,
    })
}

/// Simulate a finite Markov chain given per-state successor distributions
/// (e.g. worst-case adversary rows under a fixed strategy). Returns the
/// fraction of paths that reach a target state within the horizon.
pub fn simulate_abstract_chain(
    rows: &[Vec<(usize, f64)>],
    target_ids: &[usize],
    unsafe_id: usize,
    start: usize,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> f64 {
    let is_target = |q: usize| target_ids.binary_search(&q).is_ok();
    let successes: usize = (0..trials)
        .into_par_iter()
        .filter(|&trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64 + 1);
            let mut q = start;
            if is_target(q) {
                return true;
            }
            for _ in 0..horizon {
                let row = &rows[q];
                let mut u: f64 = rng.gen_range(0.0..1.0);
                let mut next = row.last().map(|e| e.0).unwrap_or(q);
                for &(succ, p) in row {
                    if u < p {
                        next = succ;
                        break;
                    }
                    u -= p;
                }
                q = next;
                if is_target(q) {
                    return true;
                }
                if q == unsafe_id {
                    return false;
                }
            }
            false
        })
        .count();
    successes as f64 / trials as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::noise::Support;
    use crate::partition::{GridSpec, Partition};
    use crate::synthesis::refine;
    use crate::system::Mode;
    use crate::types::Strategy;

    #[test]
    fn e_avg_edges() {
        assert_eq!(e_avg(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(e_avg(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(e_avg(&[0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn shifted_sampler_distance_is_exact() {
        let amb = AmbiguitySet {
            nominal: NoiseModel::Empirical { atoms: vec![vec![0.0, 0.0], vec![0.1, 0.0]] },
            radius: 0.05,
            order: 2.0,
            support: Support::unbounded(),
        };
        let sampler = make_test_distribution(&amb, TestDistribution::Shifted).unwrap();
        match sampler {
            NoiseSampler::Empirical { atoms } => {
                // Translation by (radius, 0): per-atom displacement norm is the radius.
                for (orig, shifted) in
                    [vec![0.0, 0.0], vec![0.1, 0.0]].iter().zip(&atoms)
                {
                    let d: f64 = orig
                        .iter()
                        .zip(shifted)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    assert!((d - 0.05).abs() < 1e-15);
                }
            }
            _ => panic!("expected an empirical sampler"),
        }
    }

    #[test]
    fn zero_radius_shift_is_nominal() {
        let amb = AmbiguitySet {
            nominal: NoiseModel::Empirical { atoms: vec![vec![0.25]] },
            radius: 0.0,
            order: 2.0,
            support: Support::unbounded(),
        };
        let sampler = make_test_distribution(&amb, TestDistribution::Shifted).unwrap();
        match sampler {
            NoiseSampler::Empirical { atoms } => assert_eq!(atoms, vec![vec![0.25]]),
            _ => panic!(),
        }
    }

    #[test]
    fn inflated_needs_gaussian() {
        let amb = AmbiguitySet {
            nominal: NoiseModel::Empirical { atoms: vec![vec![0.0]] },
            radius: 0.1,
            order: 2.0,
            support: Support::unbounded(),
        };
        assert!(make_test_distribution(&amb, TestDistribution::Inflated).is_err());
    }

    #[test]
    fn inflated_gaussian_hits_the_radius() {
        let amb = AmbiguitySet {
            nominal: NoiseModel::TruncatedGaussian {
                mean: vec![0.0, 0.0],
                variances: vec![9e-4, 9e-4],
                truncation: 4.0,
            },
            radius: 0.0127,
            order: 2.0,
            support: Support::unbounded(),
        };
        let sampler = make_test_distribution(&amb, TestDistribution::Inflated).unwrap();
        match sampler {
            NoiseSampler::TruncatedGaussian { mean, std, .. } => {
                let w2 = gaussian_w2_diag(&[0.0, 0.0], &[0.03, 0.03], &mean, &std);
                assert!((w2 - 0.0127).abs() < 1e-12);
            }
            _ => panic!(),
        }
    }

    /// Empirical quantile-coupling estimate of the per-axis distance agrees
    /// with the closed form for the inflated sampler (product measures have
    /// coordinatewise optimal couplings).
    #[test]
    fn inflated_distance_spot_check_by_sampling() {
        let amb = AmbiguitySet {
            nominal: NoiseModel::TruncatedGaussian {
                mean: vec![0.0, 0.0],
                variances: vec![9e-4, 9e-4],
                truncation: 6.0,
            },
            radius: 0.0127,
            order: 2.0,
            support: Support::unbounded(),
        };
        let nominal = NoiseSampler::from_nominal(&amb.nominal);
        let inflated = make_test_distribution(&amb, TestDistribution::Inflated).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10_000;
        let mut w2_sq = 0.0;
        for d in 0..2 {
            let mut a: Vec<f64> = (0..n).map(|_| nominal.sample(&mut rng)[d]).collect();
            let mut b: Vec<f64> = (0..n).map(|_| inflated.sample(&mut rng)[d]).collect();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            w2_sq +=
                a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64;
        }
        let est = w2_sq.sqrt();
        assert!(
            (est - 0.0127).abs() / 0.0127 < 0.10,
            "empirical transport estimate {est} strays from 0.0127"
        );
    }

    #[test]
    fn wilson_is_sane_near_extremes() {
        let (lo, hi) = wilson_interval_99(1000, 1000);
        assert!(lo > 0.99 && hi == 1.0);
        let (lo, hi) = wilson_interval_99(0, 1000);
        assert!(lo == 0.0 && hi < 0.01);
    }

    fn demo_setup() -> (SwitchedSystem, Partition) {
        let grid =
            GridSpec::new(vec![4], Rect::new(vec![0.0], vec![4.0]).unwrap()).unwrap();
        let target = Rect::new(vec![3.0], vec![4.0]).unwrap();
        let partition = Partition::new(grid, &[target], &[]).unwrap();
        // Single mode: move right by one cell.
        let system = SwitchedSystem::new(
            1,
            vec![Mode::Affine { matrix: vec![vec![1.0]], offset: vec![1.0] }],
        )
        .unwrap();
        (system, partition)
    }

    #[test]
    fn deterministic_path_reaches_target() {
        let (system, partition) = demo_setup();
        let strategy = Strategy::Stationary { table: vec![0; 5] };
        let refined = refine(&strategy, &partition).unwrap();
        let sampler = NoiseSampler::Empirical { atoms: vec![vec![0.0]] };
        let summary =
            simulate(&system, &refined, &[0.5], 4, 64, &sampler, 7, 3).unwrap();
        assert_eq!(summary.successes, 64);
        assert_eq!(summary.trajectories.len(), 3);
        let t = &summary.trajectories[0];
        assert_eq!(t.outcome, Outcome::ReachedTarget);
        assert_eq!(t.actions.len(), t.states.len() - 1);
    }

    #[test]
    fn immediate_target_counts_at_step_zero() {
        let (system, partition) = demo_setup();
        let strategy = Strategy::Stationary { table: vec![0; 5] };
        let refined = refine(&strategy, &partition).unwrap();
        let sampler = NoiseSampler::Empirical { atoms: vec![vec![0.0]] };
        let summary = simulate(&system, &refined, &[3.5], 0, 10, &sampler, 7, 1).unwrap();
        assert_eq!(summary.rate, 1.0);
    }

    #[test]
    fn horizon_mismatch_is_an_input_error() {
        let (system, partition) = demo_setup();
        let strategy = Strategy::Markovian { table: vec![vec![0; 5]; 3] };
        let refined = refine(&strategy, &partition).unwrap();
        let sampler = NoiseSampler::Empirical { atoms: vec![vec![0.0]] };
        assert!(simulate(&system, &refined, &[0.5], 4, 10, &sampler, 7, 0).is_err());
        assert!(simulate(&system, &refined, &[0.5], 3, 10, &sampler, 7, 0).is_ok());
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let (system, partition) = demo_setup();
        let strategy = Strategy::Stationary { table: vec![0; 5] };
        let refined = refine(&strategy, &partition).unwrap();
        let sampler = NoiseSampler::TruncatedGaussian {
            mean: vec![0.0],
            std: vec![0.5],
            truncation: 3.0,
        };
        let a = simulate(&system, &refined, &[0.5], 4, 256, &sampler, 42, 5).unwrap();
        let b = simulate(&system, &refined, &[0.5], 4, 256, &sampler, 42, 5).unwrap();
        assert_eq!(a.successes, b.successes);
        for (ta, tb) in a.trajectories.iter().zip(&b.trajectories) {
            assert_eq!(ta.states, tb.states);
        }
    }

    #[test]
    fn abstract_chain_simulation() {
        // 0 -> 1 -> target(2) with certainty; unsafe = 3.
        let rows = vec![
            vec![(1, 1.0)],
            vec![(2, 1.0)],
            vec![(2, 1.0)],
            vec![(3, 1.0)],
        ];
        let rate = simulate_abstract_chain(&rows, &[2], 3, 0, 10, 100, 1);
        assert_eq!(rate, 1.0);
        let rate = simulate_abstract_chain(&rows, &[2], 3, 3, 10, 100, 1);
        assert_eq!(rate, 0.0);
    }
}
