//! Max-min received-power reflection design over discrete phases.
//!
//! All routines work on per-user covariances `G_k` (or, for the geometry
//! method, on a single channel vector) and maximize `min_k v^H G_k v` over
//! reflections whose phases lie in the alphabet.

mod geometry;
mod randomization;
mod refinement;
mod relaxation;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{outer, quad_form, CMat, CVec};
use crate::phase::{PhaseAlphabet, ReflectionSet};

pub use geometry::geometry_single_user;
pub use randomization::{randomize_and_quantize, DEFAULT_DRAWS};
pub use refinement::{successive_refinement, successive_refinement_traced, RefinementStep};
pub use relaxation::{relaxed_solve, RelaxationParams, RelaxationStatus, RelaxedSolution};

/// How a reflection was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Geometry,
    SdrRefine,
    RmsRefine,
    Refinement,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Geometry => "geometry",
            Method::SdrRefine => "sdr+refine",
            Method::RmsRefine => "rms-init+refine",
            Method::Refinement => "refinement",
        })
    }
}

/// Reflection design strategy for [`optimize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Exact single-user optimum.
    Geometry,
    /// Relaxation, Gaussian randomization, then successive refinement.
    SdrRefine,
    /// Successive refinement from the best measured reflection.
    #[default]
    RmsRefine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSolution {
    pub reflection: ReflectionSet,
    /// `min_k v^H G_k v` in the units of the covariances.
    pub objective: f64,
    pub per_user: Vec<f64>,
    pub method: Method,
    /// Refinement sweeps, relaxation iterations, or candidate arcs,
    /// depending on the method.
    pub iterations: usize,
    /// Relaxation value, when a relaxation was solved.
    pub relaxed_upper_bound: Option<f64>,
    pub relaxation_status: Option<RelaxationStatus>,
    /// Some user had an all-zero covariance, so every reflection scores 0.
    pub degenerate: bool,
}

/// Per-user `v^H G_k v` and their minimum.
pub fn evaluate(covs: &[CMat], v: &ReflectionSet) -> (f64, Vec<f64>) {
    let ext = v.extended();
    let per_user: Vec<f64> = covs.iter().map(|g| quad_form(g, &ext)).collect();
    let min = per_user.iter().copied().fold(f64::INFINITY, f64::min);
    (min, per_user)
}

pub(crate) fn check_covariances(covs: &[CMat], elements: usize) -> Result<()> {
    if covs.is_empty() {
        return Err(Error::Dimension("no user covariances".into()));
    }
    for g in covs {
        if g.nrows() != elements + 1 || g.ncols() != elements + 1 {
            return Err(Error::Dimension(format!(
                "{}x{} covariance for {elements} elements",
                g.nrows(),
                g.ncols()
            )));
        }
    }
    Ok(())
}

pub(crate) fn is_zero(g: &CMat) -> bool {
    g.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

fn degenerate_solution(v0: ReflectionSet, covs: &[CMat], method: Method) -> ReflectionSolution {
    let (objective, per_user) = evaluate(covs, &v0);
    ReflectionSolution {
        reflection: v0,
        objective,
        per_user,
        method,
        iterations: 0,
        relaxed_upper_bound: None,
        relaxation_status: None,
        degenerate: true,
    }
}

/// Extra inputs for [`optimize`].
#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    /// Starting reflection for [`Strategy::RmsRefine`].
    pub initial: Option<ReflectionSet>,
    /// Gaussian randomization draws.
    pub draws: usize,
    pub relaxation: RelaxationParams,
    /// Seeds the randomization.
    pub seed: u64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            initial: None,
            draws: DEFAULT_DRAWS,
            relaxation: RelaxationParams::default(),
            seed: 0,
        }
    }
}

/// Designs a reflection for users with (estimated) stacked channels
/// `channels`, i.e. covariances `G_k = h_k h_k^H`.
pub fn optimize(
    channels: &[CVec],
    alphabet: PhaseAlphabet,
    strategy: Strategy,
    opts: &OptimizeOptions,
) -> Result<ReflectionSolution> {
    let Some(first) = channels.first() else {
        return Err(Error::Dimension("no user channels".into()));
    };
    let elements = first.len().saturating_sub(1);
    if channels.iter().any(|h| h.len() != elements + 1) {
        return Err(Error::Dimension("user channels differ in length".into()));
    }
    let covs: Vec<CMat> = channels.iter().map(outer).collect();

    match strategy {
        Strategy::Geometry => {
            if channels.len() != 1 {
                return Err(Error::GeometryNeedsSingleUser(channels.len()));
            }
            Ok(geometry_single_user(first, alphabet))
        }
        Strategy::SdrRefine => {
            if covs.iter().any(is_zero) {
                let v0 = opts
                    .initial
                    .clone()
                    .unwrap_or_else(|| ReflectionSet::uniform(alphabet, elements));
                return Ok(degenerate_solution(v0, &covs, Method::SdrRefine));
            }
            let relaxed = relaxed_solve(&covs, &opts.relaxation)?;
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let start =
                randomize_and_quantize(&relaxed.matrix, &covs, alphabet, opts.draws, &mut rng);
            let mut sol = successive_refinement(&start, &covs)?;
            sol.method = Method::SdrRefine;
            sol.relaxed_upper_bound = Some(relaxed.value);
            sol.relaxation_status = Some(relaxed.status);
            Ok(sol)
        }
        Strategy::RmsRefine => {
            let v0 = opts.initial.clone().ok_or_else(|| {
                Error::InvalidConfig("rms-init+refine needs the best measured reflection".into())
            })?;
            if v0.len() != elements || v0.alphabet() != alphabet {
                return Err(Error::Dimension(
                    "initial reflection does not match the channels".into(),
                ));
            }
            let mut sol = successive_refinement(&v0, &covs)?;
            sol.method = Method::RmsRefine;
            Ok(sol)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exhaustive_search;
    use num_complex::Complex64;
    use rand::Rng;

    fn random_channel(rng: &mut impl Rng, n: usize) -> CVec {
        CVec::from_fn(n + 1, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn random_set(rng: &mut impl Rng, a: PhaseAlphabet, n: usize) -> ReflectionSet {
        ReflectionSet::new(
            a,
            (0..n).map(|_| rng.random_range(1..=a.levels())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn geometry_rejects_multiple_users() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = PhaseAlphabet::new(1).unwrap();
        let hs = vec![random_channel(&mut rng, 3), random_channel(&mut rng, 3)];
        let err = optimize(&hs, a, Strategy::Geometry, &OptimizeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::GeometryNeedsSingleUser(2)));
    }

    #[test]
    fn default_strategy_is_linear_complexity_path() {
        assert_eq!(Strategy::default(), Strategy::RmsRefine);
    }

    #[test]
    fn single_user_strategies_never_beat_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for bits in [1, 2] {
            let a = PhaseAlphabet::new(bits).unwrap();
            for _ in 0..20 {
                let h = vec![random_channel(&mut rng, 6)];
                let geo = optimize(&h, a, Strategy::Geometry, &OptimizeOptions::default()).unwrap();
                let opts = OptimizeOptions {
                    initial: Some(random_set(&mut rng, a, 6)),
                    ..OptimizeOptions::default()
                };
                for s in [Strategy::SdrRefine, Strategy::RmsRefine] {
                    let sol = optimize(&h, a, s, &opts).unwrap();
                    assert!(sol.objective <= geo.objective * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn identical_inputs_identical_solutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = PhaseAlphabet::new(2).unwrap();
        let hs: Vec<_> = (0..3).map(|_| random_channel(&mut rng, 5)).collect();
        let opts = OptimizeOptions {
            seed: 17,
            ..OptimizeOptions::default()
        };
        let x = optimize(&hs, a, Strategy::SdrRefine, &opts).unwrap();
        let y = optimize(&hs, a, Strategy::SdrRefine, &opts).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn common_scaling_keeps_reflections() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = PhaseAlphabet::new(1).unwrap();
        for _ in 0..10 {
            let hs: Vec<_> = (0..2).map(|_| random_channel(&mut rng, 5)).collect();
            let opts = OptimizeOptions {
                initial: Some(random_set(&mut rng, a, 5)),
                seed: 5,
                ..OptimizeOptions::default()
            };
            // power-of-two scalings are exact in floating point
            for c in [0.25f64, 1024.0, 2f64.powi(-30)] {
                let scaled: Vec<_> = hs
                    .iter()
                    .map(|h| h * Complex64::new(c.sqrt(), 0.0))
                    .collect();
                for s in [Strategy::SdrRefine, Strategy::RmsRefine] {
                    let base = optimize(&hs, a, s, &opts).unwrap();
                    let other = optimize(&scaled, a, s, &opts).unwrap();
                    assert_eq!(base.reflection, other.reflection);
                    assert!((other.objective / (c * base.objective) - 1.0).abs() < 1e-12);
                }
            }
            // any c > 0 for the single-user geometry method
            let h = &hs[..1];
            let geo = optimize(h, a, Strategy::Geometry, &opts).unwrap();
            let scaled = vec![&h[0] * Complex64::new(3.7f64.sqrt(), 0.0)];
            let geo2 = optimize(&scaled, a, Strategy::Geometry, &opts).unwrap();
            assert_eq!(geo.reflection, geo2.reflection);
            assert!((geo2.objective / (3.7 * geo.objective) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn common_phase_rotation_keeps_reflections() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = PhaseAlphabet::new(2).unwrap();
        for _ in 0..10 {
            let hs: Vec<_> = (0..2).map(|_| random_channel(&mut rng, 4)).collect();
            let opts = OptimizeOptions {
                initial: Some(random_set(&mut rng, a, 4)),
                seed: 9,
                ..OptimizeOptions::default()
            };
            let rotated: Vec<_> = hs
                .iter()
                .map(|h| h * Complex64::from_polar(1.0, rng.random::<f64>() * 6.0))
                .collect();
            let x = optimize(&hs, a, Strategy::RmsRefine, &opts).unwrap();
            let y = optimize(&rotated, a, Strategy::RmsRefine, &opts).unwrap();
            assert_eq!(x.reflection, y.reflection);
            let g1 = optimize(&hs[..1], a, Strategy::Geometry, &opts).unwrap();
            let g2 = optimize(&rotated[..1], a, Strategy::Geometry, &opts).unwrap();
            assert_eq!(g1.reflection, g2.reflection);
        }
    }

    #[test]
    fn zero_user_channel_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = PhaseAlphabet::new(1).unwrap();
        let v0 = random_set(&mut rng, a, 3);
        let hs = vec![random_channel(&mut rng, 3), CVec::zeros(4)];
        let opts = OptimizeOptions {
            initial: Some(v0.clone()),
            ..OptimizeOptions::default()
        };
        for s in [Strategy::SdrRefine, Strategy::RmsRefine] {
            let sol = optimize(&hs, a, s, &opts).unwrap();
            assert!(sol.degenerate);
            assert_eq!(sol.reflection, v0);
            assert_eq!(sol.objective, 0.0);
        }
    }

    #[test]
    fn sdr_refine_bracketed_by_exhaustive_and_relaxation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = PhaseAlphabet::new(1).unwrap();
        let (mut sdr_sum, mut random_sum) = (0.0, 0.0);
        for _ in 0..20 {
            let hs: Vec<_> = (0..3).map(|_| random_channel(&mut rng, 6)).collect();
            let covs: Vec<CMat> = hs.iter().map(outer).collect();
            let (_, best) = exhaustive_search(&covs, a);
            let sol = optimize(&hs, a, Strategy::SdrRefine, &OptimizeOptions::default()).unwrap();
            assert!(sol.objective <= best * (1.0 + 1e-12));
            assert!(sol.relaxed_upper_bound.unwrap() >= best * (1.0 - 1e-6));
            sdr_sum += sol.objective / best;
            // average over the whole lattice = expected value of a random reflection
            let (mut total, mut count) = (0.0, 0.0);
            crate::oracle::for_each_reflection(a, 6, |v| {
                total += evaluate(&covs, v).0;
                count += 1.0;
            });
            random_sum += total / count / best;
        }
        assert!(sdr_sum > random_sum, "sdr {sdr_sum} vs random {random_sum}");
    }
}
