//! Random training reflections and per-user RSRP measurements.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::phase::{PhaseAlphabet, ReflectionSet};

/// Power measurements of every user under a shared schedule of reflections.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementTable {
    reflections: Vec<ReflectionSet>,
    /// `powers[k][m]`: RSRP of user `k` under reflection `m`, in watts.
    powers: Vec<Vec<f64>>,
    samples: usize,
}

impl MeasurementTable {
    pub fn new(
        reflections: Vec<ReflectionSet>,
        powers: Vec<Vec<f64>>,
        samples: usize,
    ) -> Result<Self> {
        let m = reflections.len();
        if m == 0 {
            return Err(Error::InvalidConfig(
                "measurement table needs at least one reflection".into(),
            ));
        }
        if powers.is_empty() {
            return Err(Error::InvalidConfig(
                "measurement table needs at least one user".into(),
            ));
        }
        if let Some(row) = powers.iter().find(|r| r.len() != m) {
            return Err(Error::Dimension(format!(
                "{} powers for {m} reflections",
                row.len()
            )));
        }
        if powers.iter().flatten().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidConfig(
                "measured powers must be non-negative".into(),
            ));
        }
        let (n, alphabet) = (reflections[0].len(), reflections[0].alphabet());
        if reflections
            .iter()
            .any(|r| r.len() != n || r.alphabet() != alphabet)
        {
            return Err(Error::Dimension(
                "reflections differ in size or alphabet".into(),
            ));
        }
        Ok(Self {
            reflections,
            powers,
            samples,
        })
    }

    pub fn reflections(&self) -> &[ReflectionSet] {
        &self.reflections
    }

    pub fn user_powers(&self, k: usize) -> &[f64] {
        &self.powers[k]
    }

    pub fn num_users(&self) -> usize {
        self.powers.len()
    }

    pub fn len(&self) -> usize {
        self.reflections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reflections.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.reflections[0].len()
    }

    pub fn alphabet(&self) -> PhaseAlphabet {
        self.reflections[0].alphabet()
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// `min_k p̄_k(v_m)`.
    pub fn min_power(&self, m: usize) -> f64 {
        self.powers
            .iter()
            .map(|row| row[m])
            .fold(f64::INFINITY, f64::min)
    }

    /// The first `m` measurements.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len() {
            return Err(Error::InvalidConfig(format!(
                "prefix of {m} from a table of {}",
                self.len()
            )));
        }
        Ok(Self {
            reflections: self.reflections[..m].to_vec(),
            powers: self.powers.iter().map(|r| r[..m].to_vec()).collect(),
            samples: self.samples,
        })
    }

    /// CSV with columns `m, theta_1..theta_N, p_1..p_K`; `m` is 1-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.num_elements();
        let header: Vec<String> = std::iter::once("m".to_string())
            .chain((1..=n).map(|i| format!("theta_{i}")))
            .chain((1..=self.num_users()).map(|k| format!("p_{k}")))
            .collect();
        w.write_record(&header)?;
        for (m, refl) in self.reflections.iter().enumerate() {
            let record: Vec<String> = std::iter::once((m + 1).to_string())
                .chain(refl.indices().iter().map(u32::to_string))
                .chain(self.powers.iter().map(|row| format!("{:e}", row[m])))
                .collect();
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, alphabet: PhaseAlphabet, samples: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let n = header.iter().filter(|h| h.starts_with("theta_")).count();
        let k = header.iter().filter(|h| h.starts_with("p_")).count();
        if header.get(0) != Some("m") || header.len() != 1 + n + k {
            return Err(Error::MalformedCsv {
                line: 1,
                message: "expected columns m, theta_*, p_*".into(),
            });
        }
        let mut reflections = Vec::new();
        let mut powers = vec![Vec::new(); k];
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let malformed = |message: String| Error::MalformedCsv { line, message };
            let phases = (1..=n)
                .map(|i| rec[i].parse::<u32>().map_err(|e| malformed(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            reflections
                .push(ReflectionSet::new(alphabet, phases).map_err(|e| malformed(e.to_string()))?);
            for (j, row) in powers.iter_mut().enumerate() {
                row.push(
                    rec[1 + n + j]
                        .parse::<f64>()
                        .map_err(|e| malformed(e.to_string()))?,
                );
            }
        }
        Self::new(reflections, powers, samples)
    }
}

/// `count` reflection sets with i.i.d. uniform phase indices.
pub fn random_reflections<R: Rng + ?Sized>(
    count: usize,
    elements: usize,
    alphabet: PhaseAlphabet,
    rng: &mut R,
) -> Vec<ReflectionSet> {
    (0..count)
        .map(|_| {
            let phases = (0..elements)
                .map(|_| rng.random_range(1..=alphabet.levels()))
                .collect();
            ReflectionSet::new(alphabet, phases).expect("indices drawn from the alphabet")
        })
        .collect()
}

/// Q-sample RSRP of user `k`: `(1/Q) Σ |v^H h_k + n(q)|²`, `n ~ CN(0, σ²)`.
pub fn rsrp<R: Rng + ?Sized>(
    v: &ReflectionSet,
    real: &ChannelRealization,
    k: usize,
    samples: usize,
    rng: &mut R,
) -> f64 {
    assert!(samples >= 1, "at least one sample per measurement");
    let g = v.gain(&real.effective[k]);
    let s = (real.noise_power / 2.0).sqrt();
    if s == 0.0 {
        return g.norm_sqr();
    }
    let total: f64 = (0..samples)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            (g + Complex64::new(re * s, im * s)).norm_sqr()
        })
        .sum();
    total / samples as f64
}

/// Measures every user under every reflection, noise independent per
/// (user, reflection).
pub fn collect<R: Rng + ?Sized>(
    real: &ChannelRealization,
    reflections: &[ReflectionSet],
    samples: usize,
    rng: &mut R,
) -> Result<MeasurementTable> {
    if samples == 0 {
        return Err(Error::InvalidConfig(
            "samples per measurement must be >= 1".into(),
        ));
    }
    let k = real.num_users();
    let mut powers = vec![Vec::with_capacity(reflections.len()); k];
    for v in reflections {
        if v.len() != real.num_elements() {
            return Err(Error::Dimension(format!(
                "{}-element reflection for a {}-element IRS",
                v.len(),
                real.num_elements()
            )));
        }
        for (user, row) in powers.iter_mut().enumerate() {
            row.push(rsrp(v, real, user, samples, rng));
        }
    }
    MeasurementTable::new(reflections.to_vec(), powers, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn realization(noise: f64) -> ChannelRealization {
        let h = CVec::from_vec(vec![
            Complex64::new(0.3, -0.2),
            Complex64::new(-0.1, 0.4),
            Complex64::new(0.25, 0.05),
        ]);
        ChannelRealization::from_effective(vec![h], noise)
    }

    #[test]
    fn one_bit_indices_are_balanced() {
        let a = PhaseAlphabet::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (m, n) = (500, 8);
        let sets = random_reflections(m, n, a, &mut rng);
        let ones = sets
            .iter()
            .flat_map(|s| s.indices())
            .filter(|&&q| q == 1)
            .count() as f64;
        let total = (m * n) as f64;
        let sigma = (total * 0.25).sqrt();
        assert!((ones - total / 2.0).abs() < 3.0 * sigma);
        assert!(sets
            .iter()
            .flat_map(|s| s.indices())
            .all(|&q| q == 1 || q == 2));
    }

    #[test]
    fn single_set_shape() {
        let a = PhaseAlphabet::new(3).unwrap();
        let sets = random_reflections(1, 3, a, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].len(), 3);
    }

    #[test]
    fn noiseless_rsrp_is_exact() {
        let real = realization(0.0);
        let a = PhaseAlphabet::new(2).unwrap();
        let v = ReflectionSet::new(a, vec![1, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for q in [1, 10, 1000] {
            assert_eq!(rsrp(&v, &real, 0, q, &mut rng), v.power(&real.effective[0]));
        }
    }

    #[test]
    fn pure_noise_mean_is_sigma_squared() {
        let real = ChannelRealization::from_effective(vec![CVec::zeros(3)], 2.5e-12);
        let a = PhaseAlphabet::new(1).unwrap();
        let v = ReflectionSet::uniform(a, 2);
        let p = rsrp(&v, &real, 0, 1_000_000, &mut ChaCha8Rng::seed_from_u64(12));
        assert!((p / 2.5e-12 - 1.0).abs() < 0.01);
    }

    #[test]
    fn collect_shape_and_single_call_reduction() {
        let real = realization(0.01);
        let a = PhaseAlphabet::new(1).unwrap();
        let sets = random_reflections(7, 2, a, &mut ChaCha8Rng::seed_from_u64(2));
        let table = collect(&real, &sets, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(table.num_users(), 1);
        assert_eq!(table.len(), 7);

        let one = collect(&real, &sets[..1], 10, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let direct = rsrp(&sets[0], &real, 0, 10, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(one.user_powers(0)[0], direct);
    }

    #[test]
    fn identical_seed_identical_table() {
        let real = realization(0.05);
        let a = PhaseAlphabet::new(2).unwrap();
        let make = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let sets = random_reflections(20, 2, a, &mut rng);
            collect(&real, &sets, 10, &mut rng).unwrap()
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn csv_round_trip() {
        let real = realization(0.05);
        let a = PhaseAlphabet::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sets = random_reflections(5, 2, a, &mut rng);
        let table = collect(&real, &sets, 10, &mut rng).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("m,theta_1,theta_2,p_1\n"));
        let back = MeasurementTable::read_csv(buf.as_slice(), a, 10).unwrap();
        assert_eq!(back.reflections(), table.reflections());
        for (x, y) in back.user_powers(0).iter().zip(table.user_powers(0)) {
            assert!((x / y - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn read_csv_reports_line_of_bad_record() {
        let a = PhaseAlphabet::new(1).unwrap();
        let text = "m,theta_1,p_1\n1,1,0.5\n2,7,0.1\n";
        match MeasurementTable::read_csv(text.as_bytes(), a, 1) {
            Err(Error::MalformedCsv { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
