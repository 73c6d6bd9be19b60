use num_complex::Complex64;

use super::{check_covariances, evaluate, is_zero, Method, ReflectionSolution};
use crate::error::Result;
use crate::linalg::{CMat, CVec};
use crate::phase::ReflectionSet;

/// An update must beat the incumbent by this relative margin to be taken.
const IMPROVEMENT_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 10_000;

/// One accepted coordinate update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementStep {
    pub sweep: usize,
    /// 0-based element.
    pub element: usize,
    pub index: u32,
    pub objective: f64,
}

/// Cyclic coordinate ascent on `min_k v^H G_k v`.
pub fn successive_refinement(v0: &ReflectionSet, covs: &[CMat]) -> Result<ReflectionSolution> {
    successive_refinement_traced(v0, covs).map(|(sol, _)| sol)
}

/// As [`successive_refinement`], also returning every accepted update.
///
/// Elements are visited in ascending order; each is set to the alphabet
/// phase maximizing the worst-user power with the others fixed. The
/// incumbent is kept on ties. Sweeps repeat until one changes nothing.
pub fn successive_refinement_traced(
    v0: &ReflectionSet,
    covs: &[CMat],
) -> Result<(ReflectionSolution, Vec<RefinementStep>)> {
    check_covariances(covs, v0.len())?;
    let alphabet = v0.alphabet();
    let mut set = v0.clone();
    let degenerate = covs.iter().any(is_zero);
    let mut trace = Vec::new();
    let mut sweeps = 0;

    if !degenerate {
        let phasors: Vec<Complex64> = alphabet
            .indices()
            .map(|q| alphabet.phasor(q).conj())
            .collect();
        let mut v = set.extended();
        // y_k = G_k v and f_k = v^H G_k v, kept up to date incrementally
        let resync = |v: &CVec| -> (Vec<CVec>, Vec<f64>) {
            let y: Vec<CVec> = covs.iter().map(|g| g * v).collect();
            let f = y.iter().map(|yk| v.dotc(yk).re).collect();
            (y, f)
        };

        loop {
            sweeps += 1;
            let (mut y, mut f) = resync(&v);
            let mut changed = false;
            for i in 0..set.len() {
                let pos = i + 1;
                let current = v[pos];
                let incumbent = f.iter().copied().fold(f64::INFINITY, f64::min);
                let threshold = incumbent + IMPROVEMENT_TOL * incumbent.abs();
                let mut best: Option<(f64, u32)> = None;
                for (q, &cand) in alphabet.indices().zip(&phasors) {
                    if q == set.index(i) {
                        continue;
                    }
                    let delta = cand - current;
                    let value = covs
                        .iter()
                        .zip(&y)
                        .zip(&f)
                        .map(|((g, yk), fk)| {
                            fk + 2.0 * (delta.conj() * yk[pos]).re
                                + delta.norm_sqr() * g[(pos, pos)].re
                        })
                        .fold(f64::INFINITY, f64::min);
                    if value > threshold && best.is_none_or(|(b, _)| value > b) {
                        best = Some((value, q));
                    }
                }
                if let Some((value, q)) = best {
                    let delta = phasors[(q - 1) as usize] - current;
                    for ((g, yk), fk) in covs.iter().zip(y.iter_mut()).zip(f.iter_mut()) {
                        *fk +=
                            2.0 * (delta.conj() * yk[pos]).re + delta.norm_sqr() * g[(pos, pos)].re;
                        yk.axpy(delta, &g.column(pos), Complex64::new(1.0, 0.0));
                    }
                    v[pos] = phasors[(q - 1) as usize];
                    set.set(i, q);
                    changed = true;
                    trace.push(RefinementStep {
                        sweep: sweeps,
                        element: i,
                        index: q,
                        objective: value,
                    });
                }
            }
            if !changed || sweeps >= MAX_SWEEPS {
                break;
            }
        }
    }

    let (objective, per_user) = evaluate(covs, &set);
    Ok((
        ReflectionSolution {
            reflection: set,
            objective,
            per_user,
            method: Method::Refinement,
            iterations: sweeps,
            relaxed_upper_bound: None,
            relaxation_status: None,
            degenerate,
        },
        trace,
    ))
}
