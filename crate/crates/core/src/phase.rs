//! Discrete phase alphabet and IRS reflection sets.
//!
//! A `b`-bit element can apply one of `2^b` phases
//! `{w, 2w, ..., 2^b w}` with `w = 2π / 2^b`. Phase indices are 1-based so
//! that index `q` means phase `q·w`; index `2^b` is the zero (2π) shift.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CVec;

/// Upper bound on the phase resolution accepted anywhere in the crate.
pub const MAX_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseAlphabet {
    bits: u32,
}

impl PhaseAlphabet {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::InvalidConfig(format!(
                "phase resolution must be 1..={MAX_BITS} bits, got {bits}"
            )));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of phase levels, `2^bits`.
    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    /// Phase step `w = 2π / 2^bits`.
    pub fn step(&self) -> f64 {
        2.0 * PI / self.levels() as f64
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<u32> {
        1..=self.levels()
    }

    pub fn contains(&self, index: u32) -> bool {
        (1..=self.levels()).contains(&index)
    }

    pub fn phase(&self, index: u32) -> f64 {
        index as f64 * self.step()
    }

    /// `e^{j q w}`, exact on the quarter-turn grid so that one- and two-bit
    /// reflections have exactly real / imaginary entries.
    pub fn phasor(&self, index: u32) -> Complex64 {
        let levels = self.levels() as u64;
        let q = index as u64 % levels;
        if (4 * q).is_multiple_of(levels) {
            match (4 * q) / levels {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            }
        } else {
            Complex64::from_polar(1.0, self.phase(index))
        }
    }

    /// Index of the alphabet phase nearest to `theta` in angular distance.
    /// An exact halfway point goes to the smaller of the two indices.
    pub fn nearest(&self, theta: f64) -> u32 {
        let levels = self.levels();
        let t = (theta / self.step()).rem_euclid(levels as f64);
        let lower = t.floor();
        let frac = t - lower;
        let to_index = |q: f64| {
            let q = (q as u32) % levels;
            if q == 0 {
                levels
            } else {
                q
            }
        };
        let lo = to_index(lower);
        let hi = to_index(lower + 1.0);
        if frac < 0.5 {
            lo
        } else if frac > 0.5 {
            hi
        } else {
            lo.min(hi)
        }
    }
}

/// One IRS configuration: `N` phase indices into the alphabet. The extended
/// reflection vector used everywhere is `v = [1, e^{-jθ_1}, ..., e^{-jθ_N}]`
/// so that the received amplitude is `v^H h = h_0 + Σ e^{jθ_i} h_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReflectionSet {
    alphabet: PhaseAlphabet,
    phases: Vec<u32>,
}

impl ReflectionSet {
    pub fn new(alphabet: PhaseAlphabet, phases: Vec<u32>) -> Result<Self> {
        if let Some(bad) = phases.iter().find(|&&q| !alphabet.contains(q)) {
            return Err(Error::InvalidConfig(format!(
                "phase index {bad} outside 1..={}",
                alphabet.levels()
            )));
        }
        Ok(Self { alphabet, phases })
    }

    /// All elements at the zero (2π) shift.
    pub fn uniform(alphabet: PhaseAlphabet, n: usize) -> Self {
        Self {
            alphabet,
            phases: vec![alphabet.levels(); n],
        }
    }

    pub fn alphabet(&self) -> PhaseAlphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.phases
    }

    pub fn index(&self, element: usize) -> u32 {
        self.phases[element]
    }

    /// Sets element `element` (0-based) to phase index `index`.
    ///
    /// # Panics
    /// If `index` is not in the alphabet.
    pub fn set(&mut self, element: usize, index: u32) {
        assert!(
            self.alphabet.contains(index),
            "phase index {index} out of range"
        );
        self.phases[element] = index;
    }

    pub fn angles(&self) -> Vec<f64> {
        self.phases
            .iter()
            .map(|&q| self.alphabet.phase(q))
            .collect()
    }

    /// Extended reflection vector `v` of length `N + 1`.
    pub fn extended(&self) -> CVec {
        CVec::from_iterator(
            self.len() + 1,
            std::iter::once(Complex64::new(1.0, 0.0))
                .chain(self.phases.iter().map(|&q| self.alphabet.phasor(q).conj())),
        )
    }

    /// Real features `x = [Re(v); Im(v)]`, length `2N + 2`.
    pub fn features(&self) -> Vec<f64> {
        let v = self.extended();
        v.iter()
            .map(|z| z.re)
            .chain(v.iter().map(|z| z.im))
            .collect()
    }

    /// Received amplitude `v^H h`.
    pub fn gain(&self, h: &CVec) -> Complex64 {
        debug_assert_eq!(h.len(), self.len() + 1);
        let mut acc = h[0];
        for (i, &q) in self.phases.iter().enumerate() {
            acc += self.alphabet.phasor(q) * h[i + 1];
        }
        acc
    }

    /// Received power `|v^H h|²`.
    pub fn power(&self, h: &CVec) -> f64 {
        self.gain(h).norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_bit_alphabet_is_pi_and_two_pi() {
        let a = PhaseAlphabet::new(1).unwrap();
        assert_eq!(a.levels(), 2);
        assert_eq!(a.phasor(1), Complex64::new(-1.0, 0.0));
        assert_eq!(a.phasor(2), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn rejects_zero_bits_and_out_of_range_indices() {
        assert!(PhaseAlphabet::new(0).is_err());
        let a = PhaseAlphabet::new(2).unwrap();
        assert!(ReflectionSet::new(a, vec![1, 5]).is_err());
        assert!(ReflectionSet::new(a, vec![0]).is_err());
    }

    #[test]
    fn nearest_breaks_ties_toward_smaller_index() {
        let a = PhaseAlphabet::new(2).unwrap();
        // Halfway between index 1 (π/2) and 2 (π).
        assert_eq!(a.nearest(0.75 * PI), 1);
        // Halfway between index 4 (2π ≡ 0) and 1 (π/2).
        assert_eq!(a.nearest(0.25 * PI), 1);
        assert_eq!(a.nearest(0.0), 4);
        assert_eq!(a.nearest(-0.1), 4);
        assert_eq!(a.nearest(PI + 0.1), 2);
    }

    #[test]
    fn extended_vector_has_leading_one() {
        let a = PhaseAlphabet::new(2).unwrap();
        let v = ReflectionSet::new(a, vec![1, 3]).unwrap().extended();
        assert_eq!(v[0], Complex64::new(1.0, 0.0));
        // e^{-jπ/2} = -j, e^{-j3π/2} = j
        assert_eq!(v[1], Complex64::new(0.0, -1.0));
        assert_eq!(v[2], Complex64::new(0.0, 1.0));
    }

    proptest! {
        #[test]
        fn features_have_norm_n_plus_one(bits in 1u32..4, raw in prop::collection::vec(0u32..1000, 1..20)) {
            let a = PhaseAlphabet::new(bits).unwrap();
            let phases: Vec<u32> = raw.iter().map(|r| r % a.levels() + 1).collect();
            let n = phases.len();
            let set = ReflectionSet::new(a, phases).unwrap();
            let x = set.features();
            let norm2: f64 = x.iter().map(|t| t * t).sum();
            prop_assert!((norm2 - (n + 1) as f64).abs() < 1e-12);
            for z in set.extended().iter() {
                prop_assert!((z.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn nearest_is_within_half_step(bits in 1u32..6, theta in -20.0f64..20.0) {
            let a = PhaseAlphabet::new(bits).unwrap();
            let q = a.nearest(theta);
            let d = (a.phase(q) - theta).rem_euclid(2.0 * PI);
            let dist = d.min(2.0 * PI - d);
            prop_assert!(dist <= a.step() / 2.0 + 1e-12);
        }

        #[test]
        fn gain_matches_extended_inner_product(bits in 1u32..4, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = PhaseAlphabet::new(bits).unwrap();
            let n = 6;
            let set = ReflectionSet::new(a, (0..n).map(|_| rng.random_range(1..=a.levels())).collect()).unwrap();
            let h = CVec::from_fn(n + 1, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let v = set.extended();
            let direct = (v.adjoint() * &h)[(0, 0)];
            prop_assert!((direct - set.gain(&h)).norm() < 1e-12);
        }
    }
}
