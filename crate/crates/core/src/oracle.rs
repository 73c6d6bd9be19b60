//! Brute-force reference computations, used by the test suites and by the
//! `oracle` CLI subcommand. Nothing here shares code with the optimizers it
//! is meant to check.

use crate::linalg::{quad_form, CMat, CVec};
use crate::phase::{PhaseAlphabet, ReflectionSet};

/// Calls `visit` for every one of the `2^(bits·n)` reflections.
pub fn for_each_reflection(
    alphabet: PhaseAlphabet,
    n: usize,
    mut visit: impl FnMut(&ReflectionSet),
) {
    let levels = alphabet.levels();
    let mut digits = vec![1u32; n];
    loop {
        visit(&ReflectionSet::new(alphabet, digits.clone()).expect("indices in range"));
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            if digits[i] < levels {
                digits[i] += 1;
                break;
            }
            digits[i] = 1;
            i += 1;
        }
    }
}

/// Best reflection for `max_v min_k v^H G_k v` by full enumeration.
pub fn exhaustive_search(covs: &[CMat], alphabet: PhaseAlphabet) -> (ReflectionSet, f64) {
    let n = covs[0].nrows() - 1;
    let mut best = (ReflectionSet::uniform(alphabet, n), f64::NEG_INFINITY);
    for_each_reflection(alphabet, n, |v| {
        let ext = v.extended();
        let value = covs
            .iter()
            .map(|g| quad_form(g, &ext))
            .fold(f64::INFINITY, f64::min);
        if value > best.1 {
            best = (v.clone(), value);
        }
    });
    best
}

/// Best reflection for a single channel vector, scored with
/// [`ReflectionSet::power`].
pub fn exhaustive_single_user(h: &CVec, alphabet: PhaseAlphabet) -> (ReflectionSet, f64) {
    let n = h.len() - 1;
    let mut best = (ReflectionSet::uniform(alphabet, n), f64::NEG_INFINITY);
    for_each_reflection(alphabet, n, |v| {
        let value = v.power(h);
        if value > best.1 {
            best = (v.clone(), value);
        }
    });
    best
}

/// Central finite-difference gradient of `f` at `x`.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = f(&probe);
            probe[i] = x[i] - step;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}
