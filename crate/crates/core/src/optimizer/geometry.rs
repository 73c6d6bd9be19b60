use std::f64::consts::TAU;

use super::{Method, ReflectionSolution};
use crate::linalg::CVec;
use crate::phase::{PhaseAlphabet, ReflectionSet};

/// Exact maximizer of `|h_0 + Σ e^{jθ_i} h_i|²` over the discrete alphabet.
///
/// For a reference direction `φ`, each element's best phase is the alphabet
/// point nearest to `φ - arg h_i`. That choice only changes when `φ` crosses
/// one of the `N · 2^b` half-step boundaries, and the optimum is attained by
/// the assignment of some arc between consecutive boundaries, so evaluating
/// one point per arc is exhaustive.
pub fn geometry_single_user(h: &CVec, alphabet: PhaseAlphabet) -> ReflectionSolution {
    let n = h.len().saturating_sub(1);
    let step = alphabet.step();
    let active: Vec<(usize, f64)> = (0..n)
        .filter(|&i| h[i + 1].norm_sqr() > 0.0)
        .map(|i| (i, h[i + 1].arg()))
        .collect();

    let mut breakpoints: Vec<f64> = active
        .iter()
        .flat_map(|&(_, arg)| {
            (0..alphabet.levels()).map(move |q| (arg + (q as f64 + 0.5) * step).rem_euclid(TAU))
        })
        .collect();
    breakpoints.sort_by(f64::total_cmp);

    let probes: Vec<f64> = if breakpoints.is_empty() {
        vec![0.0]
    } else {
        let last = breakpoints.len() - 1;
        (0..=last)
            .map(|i| {
                let next = if i == last {
                    breakpoints[0] + TAU
                } else {
                    breakpoints[i + 1]
                };
                0.5 * (breakpoints[i] + next)
            })
            .collect()
    };

    let mut candidate = ReflectionSet::uniform(alphabet, n);
    let mut best = candidate.clone();
    let mut best_value = f64::NEG_INFINITY;
    for &phi in &probes {
        for &(i, arg) in &active {
            candidate.set(i, alphabet.nearest(phi - arg));
        }
        let value = candidate.power(h);
        if value > best_value {
            best_value = value;
            best.clone_from(&candidate);
        }
    }

    ReflectionSolution {
        reflection: best,
        objective: best_value,
        per_user: vec![best_value],
        method: Method::Geometry,
        iterations: probes.len(),
        relaxed_upper_bound: None,
        relaxation_status: None,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exhaustive_single_user;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_term_example() {
        let a = PhaseAlphabet::new(1).unwrap();
        let h = CVec::from_vec(vec![Complex64::new(1.0, 0.0); 2]);
        let sol = geometry_single_user(&h, a);
        assert_eq!(sol.reflection.indices(), &[2]);
        assert!((sol.objective - 4.0).abs() < 1e-12);
    }

    #[test]
    fn matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for bits in [1, 2] {
            let a = PhaseAlphabet::new(bits).unwrap();
            for n in 1..=6 {
                for _ in 0..10 {
                    let h = CVec::from_fn(n + 1, |_, _| {
                        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                    });
                    let (_, best) = exhaustive_single_user(&h, a);
                    assert_eq!(geometry_single_user(&h, a).objective, best);
                }
            }
        }
    }

    #[test]
    fn no_direct_path_meets_alignment_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for bits in [1, 2, 3, 5] {
            let a = PhaseAlphabet::new(bits).unwrap();
            let mut h = CVec::from_fn(9, |_, _| {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            h[0] = Complex64::new(0.0, 0.0);
            let sum: f64 = h.iter().map(|z| z.norm()).sum();
            let obj = geometry_single_user(&h, a).objective;
            let lower = (a.step() / 2.0).cos().powi(2) * sum * sum;
            assert!(obj >= lower * (1.0 - 1e-12) && obj <= sum * sum * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zero_cascaded_channel_returns_valid_set() {
        let a = PhaseAlphabet::new(2).unwrap();
        let mut h = CVec::zeros(4);
        h[0] = Complex64::new(2.0, 0.0);
        let sol = geometry_single_user(&h, a);
        assert_eq!(sol.reflection.len(), 3);
        assert!((sol.objective - 4.0).abs() < 1e-12);
    }
}
