//! Measurement-only reflection selection, with no channel estimate.

use crate::error::{Error, Result};
use crate::measurement::MeasurementTable;
use crate::phase::ReflectionSet;

/// Random-max sampling: the measured reflection with the largest worst-user
/// power. Returns the reflection and its 0-based position; ties go to the
/// earliest.
pub fn rms_select(table: &MeasurementTable) -> (ReflectionSet, usize) {
    let mut best = (0, f64::NEG_INFINITY);
    for m in 0..table.len() {
        let value = table.min_power(m);
        if value > best.1 {
            best = (m, value);
        }
    }
    (table.reflections()[best.0].clone(), best.0)
}

/// Conditional sample means `E[min_k p̄_k | θ_i = ψ]`, indexed
/// `[element][phase index - 1]`. Phases never observed for an element get
/// `-inf`.
pub fn conditional_means(table: &MeasurementTable) -> Vec<Vec<f64>> {
    let levels = table.alphabet().levels() as usize;
    let n = table.num_elements();
    let mut sums = vec![vec![0.0; levels]; n];
    let mut counts = vec![vec![0usize; levels]; n];
    for (m, v) in table.reflections().iter().enumerate() {
        let utility = table.min_power(m);
        for (i, &q) in v.indices().iter().enumerate() {
            sums[i][(q - 1) as usize] += utility;
            counts[i][(q - 1) as usize] += 1;
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, c)| {
            s.iter()
                .zip(c)
                .map(|(&sum, &count)| {
                    if count == 0 {
                        f64::NEG_INFINITY
                    } else {
                        sum / count as f64
                    }
                })
                .collect()
        })
        .collect()
}

/// Conditional sample mean selection: each element independently takes the
/// phase with the highest conditional mean utility; ties go to the smallest
/// index.
pub fn csm_select(table: &MeasurementTable) -> Result<ReflectionSet> {
    let means = conditional_means(table);
    let mut phases = Vec::with_capacity(means.len());
    for (i, row) in means.iter().enumerate() {
        let mut best: Option<(f64, u32)> = None;
        for (j, &mean) in row.iter().enumerate() {
            if mean == f64::NEG_INFINITY {
                continue;
            }
            if best.is_none_or(|(b, _)| mean > b) {
                best = Some((mean, j as u32 + 1));
            }
        }
        let (_, q) = best.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "element {} has no measurements for any phase",
                i + 1
            ))
        })?;
        phases.push(q);
    }
    ReflectionSet::new(table.alphabet(), phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelRealization;
    use crate::linalg::CVec;
    use crate::measurement::{collect, random_reflections};
    use crate::oracle::for_each_reflection;
    use crate::phase::PhaseAlphabet;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sets(a: PhaseAlphabet, rows: &[&[u32]]) -> Vec<ReflectionSet> {
        rows.iter()
            .map(|r| ReflectionSet::new(a, r.to_vec()).unwrap())
            .collect()
    }

    #[test]
    fn rms_single_user_argmax() {
        let a = PhaseAlphabet::new(1).unwrap();
        let refl = sets(a, &[&[1], &[2], &[1]]);
        let table = MeasurementTable::new(refl.clone(), vec![vec![1.0, 5.0, 2.0]], 1).unwrap();
        assert_eq!(rms_select(&table), (refl[1].clone(), 1));
    }

    #[test]
    fn rms_min_then_max() {
        let a = PhaseAlphabet::new(1).unwrap();
        let refl = sets(a, &[&[1], &[2]]);
        // user rows; per-column minima are [3, 1]
        let table =
            MeasurementTable::new(refl.clone(), vec![vec![3.0, 9.0], vec![8.0, 1.0]], 1).unwrap();
        assert_eq!(rms_select(&table).1, 0);
    }

    #[test]
    fn rms_matches_rescan_and_is_an_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let a = PhaseAlphabet::new(2).unwrap();
        for _ in 0..20 {
            let refl = random_reflections(30, 4, a, &mut rng);
            let powers: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..30).map(|_| rng.random()).collect())
                .collect();
            let table = MeasurementTable::new(refl.clone(), powers.clone(), 1).unwrap();
            let (v, m) = rms_select(&table);
            let mins: Vec<f64> = (0..30)
                .map(|j| powers.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
                .collect();
            let best = mins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(mins[m], best);
            assert!(refl.contains(&v));
        }
    }

    #[test]
    fn csm_ties_pick_smallest_index() {
        let a = PhaseAlphabet::new(2).unwrap();
        let refl = sets(a, &[&[1, 2], &[3, 4], &[2, 1], &[4, 3]]);
        let table = MeasurementTable::new(refl, vec![vec![1.0; 4]], 1).unwrap();
        assert_eq!(csm_select(&table).unwrap().indices(), &[1, 1]);
    }

    #[test]
    fn csm_skips_unobserved_phases() {
        let a = PhaseAlphabet::new(2).unwrap();
        let refl = sets(a, &[&[3], &[3]]);
        let table = MeasurementTable::new(refl, vec![vec![0.0, 0.0]], 1).unwrap();
        assert_eq!(csm_select(&table).unwrap().indices(), &[3]);
        let means = conditional_means(&table);
        assert_eq!(means[0][0], f64::NEG_INFINITY);
    }

    #[test]
    fn conditional_subsets_partition_the_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let a = PhaseAlphabet::new(2).unwrap();
        let refl = random_reflections(57, 5, a, &mut rng);
        for i in 0..5 {
            let total: usize = a
                .indices()
                .map(|q| refl.iter().filter(|v| v.index(i) == q).count())
                .sum();
            assert_eq!(total, 57);
        }
    }

    #[test]
    fn csm_recovers_separable_optimum_from_full_table() {
        // One user and the full lattice measured once: cross terms between
        // IRS elements average out, so E[p | θ_i = ψ] is a constant plus
        // 2 Re(conj(h_0) e^{jψ} h_i) and CSM aligns each element with the
        // direct path.
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        for bits in [1, 2] {
            let a = PhaseAlphabet::new(bits).unwrap();
            for _ in 0..10 {
                let h = CVec::from_fn(5, |_, _| {
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                });
                let mut refl = Vec::new();
                for_each_reflection(a, 4, |v| refl.push(v.clone()));
                let real = ChannelRealization::from_effective(vec![h.clone()], 0.0);
                let table = collect(&real, &refl, 1, &mut rng).unwrap();
                let v = csm_select(&table).unwrap();
                for i in 0..4 {
                    let score = |q: u32| (h[0].conj() * a.phasor(q) * h[i + 1]).re;
                    let expected = a
                        .indices()
                        .max_by(|&x, &y| score(x).total_cmp(&score(y)))
                        .unwrap();
                    assert_eq!(v.index(i), expected);
                }
            }
        }
    }

    #[test]
    fn csm_beats_average_random_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let a = PhaseAlphabet::new(1).unwrap();
        let h = CVec::from_fn(17, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let real = ChannelRealization::from_effective(vec![h.clone()], 0.0);
        let refl = random_reflections(1000, 16, a, &mut rng);
        let table = collect(&real, &refl, 10, &mut rng).unwrap();
        let v = csm_select(&table).unwrap();
        let mean_random: f64 = table.user_powers(0).iter().sum::<f64>() / 1000.0;
        assert!(v.power(&h) > mean_random);
    }
}
