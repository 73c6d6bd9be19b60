use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::evaluate;
use crate::linalg::{eigh, CMat, CVec};
use crate::phase::{PhaseAlphabet, ReflectionSet};

pub const DEFAULT_DRAWS: usize = 200;

/// Quantizes a candidate extended vector: de-rotate so the leading entry is
/// real positive, then snap each remaining entry's phase.
pub(crate) fn quantize_extended(z: &CVec, alphabet: PhaseAlphabet) -> ReflectionSet {
    let reference = if z[0].norm() > 0.0 {
        z[0].conj() / z[0].norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    // v_i = e^{-jθ_i}, so θ_i = -arg(v_i).
    let phases = z
        .iter()
        .skip(1)
        .map(|&zi| alphabet.nearest(-(zi * reference).arg()))
        .collect();
    ReflectionSet::new(alphabet, phases).expect("nearest returns alphabet indices")
}

/// Gaussian randomization of a relaxed solution: draws `z ~ CN(0, V)` and
/// keeps the quantized draw with the best `min_k v^H G_k v`.
pub fn randomize_and_quantize<R: Rng + ?Sized>(
    v: &CMat,
    covs: &[CMat],
    alphabet: PhaseAlphabet,
    draws: usize,
    rng: &mut R,
) -> ReflectionSet {
    let n = v.nrows();
    let (vals, vecs) = eigh(v);
    let mut factor = vecs;
    for (j, &lam) in vals.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    let normal = |rng: &mut R| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    };

    let mut best: Option<(f64, ReflectionSet)> = None;
    for _ in 0..draws.max(1) {
        let z = loop {
            let g = CVec::from_fn(n, |_, _| normal(rng));
            let z = &factor * g;
            if z.iter().any(|x| x.norm_sqr() > 0.0) {
                break z;
            }
        };
        let candidate = quantize_extended(&z, alphabet);
        let (value, _) = evaluate(covs, &candidate);
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, candidate));
        }
    }
    best.expect("at least one draw").1
}
