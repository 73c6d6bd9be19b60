//! Semidefinite relaxation of the max-min problem:
//!
//! ```text
//! maximize  ξ
//! s.t.      Tr(G_k V) >= ξ  for every user k
//!           V_ii = 1,  V ⪰ 0
//! ```
//!
//! solved with ADMM on the splitting `x = (V, ξ, s) ∈ affine set`,
//! `z = (Z, t) ∈ PSD × R₊^K`, `V = Z`, `s = t`. The x-step is a projection
//! onto the affine constraints (a small KKT system factored once per
//! penalty value); the z-step is eigenvalue clipping plus a nonnegative
//! clamp. The final iterate is made exactly feasible by clipping and
//! diagonal rescaling before its value is reported.

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_covariances, is_zero};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, hermitian_part, project_psd, trace_product, CMat};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxationParams {
    pub max_iterations: usize,
    /// Relative primal/dual residual tolerance.
    pub tolerance: f64,
    /// Initial ADMM penalty; adapted by residual balancing.
    pub penalty: f64,
}

impl Default for RelaxationParams {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-7,
            penalty: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelaxationStatus {
    Converged,
    IterationLimit,
    /// All covariances were zero.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct RelaxedSolution {
    /// Feasible `V`: Hermitian PSD with unit diagonal.
    pub matrix: CMat,
    /// `min_k Tr(G_k V)` at `matrix`.
    pub value: f64,
    pub status: RelaxationStatus,
    pub iterations: usize,
}

impl RelaxedSolution {
    pub fn converged(&self) -> bool {
        self.status == RelaxationStatus::Converged
    }
}

struct AffineStep {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl AffineStep {
    /// KKT matrix for multipliers `(μ ∈ R^K, ν ∈ R^n, ξ)`.
    fn new(gram: &DMatrix<f64>, diag: &DMatrix<f64>, penalty: f64) -> Self {
        let (k, n) = (gram.nrows(), diag.ncols());
        let size = k + n + 1;
        let mut m = DMatrix::<f64>::zeros(size, size);
        for a in 0..k {
            for b in 0..k {
                m[(a, b)] = -gram[(a, b)];
            }
            m[(a, a)] -= 1.0;
            for i in 0..n {
                m[(a, k + i)] = -diag[(a, i)];
                m[(k + i, a)] = -diag[(a, i)];
            }
            m[(a, k + n)] = -penalty;
            m[(k + n, a)] = 1.0;
        }
        for i in 0..n {
            m[(k + i, k + i)] = -1.0;
        }
        Self { lu: m.lu() }
    }
}

fn min_trace(covs: &[CMat], v: &CMat) -> f64 {
    covs.iter()
        .map(|g| trace_product(g, v))
        .fold(f64::INFINITY, f64::min)
}

/// Rescales a PSD matrix to unit diagonal, `D^{-1/2} Z D^{-1/2}`.
fn unit_diagonal(z: &CMat) -> CMat {
    let n = z.nrows();
    let d: Vec<f64> = (0..n)
        .map(|i| z[(i, i)].re.max(1e-300).sqrt().recip())
        .collect();
    let mut out = CMat::from_fn(n, n, |i, j| z[(i, j)] * (d[i] * d[j]));
    for i in 0..n {
        out[(i, i)] = Complex64::new(1.0, 0.0);
    }
    hermitian_part(&out)
}

pub fn relaxed_solve(covs: &[CMat], params: &RelaxationParams) -> Result<RelaxedSolution> {
    let n = covs.first().map_or(0, |g| g.nrows());
    if n == 0 {
        return Err(Error::Dimension("empty covariance list".into()));
    }
    check_covariances(covs, n - 1)?;
    if !(params.tolerance > 0.0) || !(params.penalty > 0.0) || params.max_iterations == 0 {
        return Err(Error::InvalidConfig(
            "relaxation parameters must be positive".into(),
        ));
    }
    if covs.iter().all(is_zero) {
        return Ok(RelaxedSolution {
            matrix: CMat::identity(n, n),
            value: 0.0,
            status: RelaxationStatus::Degenerate,
            iterations: 0,
        });
    }

    let k = covs.len();
    let scale = covs.iter().map(|g| g.trace().re).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let g: Vec<CMat> = covs.iter().map(|c| c.unscale(scale)).collect();
    let gram = DMatrix::from_fn(k, k, |a, b| trace_product(&g[a], &g[b]));
    let diag = DMatrix::from_fn(k, n, |a, i| g[a][(i, i)].re);

    let mut penalty = params.penalty;
    let mut step = AffineStep::new(&gram, &diag, penalty);
    let mut z = CMat::identity(n, n);
    let mut u = CMat::zeros(n, n);
    let mut t = DVector::<f64>::zeros(k);
    let mut w = DVector::<f64>::zeros(k);
    let mut status = RelaxationStatus::IterationLimit;
    let mut iterations = params.max_iterations;

    for it in 1..=params.max_iterations {
        // x-step: project (Z - U, t - w) onto the affine set, with -ξ in the
        // objective.
        let a = &z - &u;
        let b = &t - &w;
        let mut rhs = DVector::<f64>::zeros(k + n + 1);
        for kk in 0..k {
            rhs[kk] = penalty * (b[kk] - trace_product(&g[kk], &a));
        }
        for i in 0..n {
            rhs[k + i] = penalty * (1.0 - a[(i, i)].re);
        }
        rhs[k + n] = -1.0;
        let sol = step
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Dimension("singular relaxation KKT system".into()))?;
        let mut correction = CMat::zeros(n, n);
        for kk in 0..k {
            correction += g[kk].scale(sol[kk]);
        }
        for i in 0..n {
            correction[(i, i)] += Complex64::new(sol[k + i], 0.0);
        }
        let v = &a - correction.unscale(penalty);
        let s = &b + sol.rows(0, k).unscale(penalty);

        // z-step
        let z_prev = std::mem::replace(&mut z, project_psd(&(&v + &u)));
        let t_prev = std::mem::replace(&mut t, (&s + &w).map(|x| x.max(0.0)));

        // dual step
        u += &v - &z;
        w += &s - &t;

        let primal = (frobenius(&(&v - &z)).powi(2) + (&s - &t).norm_squared()).sqrt();
        let dual =
            penalty * (frobenius(&(&z - &z_prev)).powi(2) + (&t - &t_prev).norm_squared()).sqrt();
        let primal_scale = frobenius(&v).max(frobenius(&z)).max(1.0);
        let dual_scale = (penalty * frobenius(&u)).max(1.0);
        if primal <= params.tolerance * primal_scale && dual <= params.tolerance * dual_scale {
            status = RelaxationStatus::Converged;
            iterations = it;
            break;
        }

        if it % 20 == 0 {
            let factor = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                penalty *= factor;
                u.unscale_mut(factor);
                w.unscale_mut(factor);
                step = AffineStep::new(&gram, &diag, penalty);
            }
        }
    }

    let matrix = unit_diagonal(&project_psd(&z));
    let value = min_trace(covs, &matrix);
    Ok(RelaxedSolution {
        matrix,
        value,
        status,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, outer, CVec};
    use crate::optimizer::geometry_single_user;
    use crate::oracle::exhaustive_search;
    use crate::phase::PhaseAlphabet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_channel(rng: &mut impl Rng, n: usize) -> CVec {
        CVec::from_fn(n + 1, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn assert_feasible(v: &CMat) {
        let n = v.nrows();
        assert!(frobenius(&(v - v.adjoint())) < 1e-12);
        for i in 0..n {
            assert!((v[(i, i)].re - 1.0).abs() < 1e-6);
        }
        let (vals, _) = eigh(v);
        assert!(vals.iter().all(|&l| l >= -1e-8), "eigenvalues {vals}");
    }

    #[test]
    fn identity_covariances_give_dimension() {
        let covs = vec![CMat::identity(5, 5); 3];
        let sol = relaxed_solve(&covs, &RelaxationParams::default()).unwrap();
        assert_feasible(&sol.matrix);
        assert!((sol.value - 5.0).abs() < 1e-9);
    }

    #[test]
    fn single_user_reaches_continuous_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..10 {
            let h = random_channel(&mut rng, 6);
            let covs = vec![outer(&h)];
            let sol = relaxed_solve(&covs, &RelaxationParams::default()).unwrap();
            assert!(sol.converged());
            assert_feasible(&sol.matrix);
            let ideal = h.iter().map(|z| z.norm()).sum::<f64>().powi(2);
            assert!(
                (sol.value / ideal - 1.0).abs() < 1e-5,
                "{} vs {ideal}",
                sol.value
            );
            let a = PhaseAlphabet::new(2).unwrap();
            assert!(sol.value >= geometry_single_user(&h, a).objective);
            // rank one: the principal eigenvalue carries the whole trace
            let (vals, _) = eigh(&sol.matrix);
            let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(top / 7.0 > 1.0 - 1e-4);
        }
    }

    #[test]
    fn upper_bounds_discrete_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = PhaseAlphabet::new(1).unwrap();
        for _ in 0..20 {
            let covs: Vec<CMat> = (0..2)
                .map(|_| outer(&random_channel(&mut rng, 4)))
                .collect();
            let sol = relaxed_solve(&covs, &RelaxationParams::default()).unwrap();
            assert!(sol.converged());
            assert_feasible(&sol.matrix);
            let (_, best) = exhaustive_search(&covs, a);
            assert!(sol.value >= best * (1.0 - 1e-6));
        }
    }

    #[test]
    fn iteration_limit_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let covs: Vec<CMat> = (0..3)
            .map(|_| outer(&random_channel(&mut rng, 6)))
            .collect();
        let params = RelaxationParams {
            max_iterations: 3,
            ..RelaxationParams::default()
        };
        let sol = relaxed_solve(&covs, &params).unwrap();
        assert_eq!(sol.status, RelaxationStatus::IterationLimit);
        assert_feasible(&sol.matrix);
    }

    #[test]
    fn all_zero_is_degenerate() {
        let sol = relaxed_solve(&[CMat::zeros(3, 3)], &RelaxationParams::default()).unwrap();
        assert_eq!(sol.status, RelaxationStatus::Degenerate);
        assert_eq!(sol.value, 0.0);
    }
}
