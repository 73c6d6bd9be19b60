use irs_core::channel::gen_channels;
use irs_core::measurement::random_reflections;
use irs_core::{PhaseAlphabet, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn random_reflections_are_uniform_over_the_alphabet() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for bits in [1, 2, 3] {
        let a = PhaseAlphabet::new(bits).unwrap();
        let sets = random_reflections(4000, 16, a, &mut rng);
        let mut counts = vec![0f64; a.levels() as usize];
        for v in &sets {
            for &q in v.indices() {
                counts[(q - 1) as usize] += 1.0;
            }
        }
        let expected = (sets.len() * 16) as f64 / counts.len() as f64;
        let stat: f64 = counts
            .iter()
            .map(|c| (c - expected).powi(2) / expected)
            .sum();
        let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
        let p = 1.0 - dist.cdf(stat);
        assert!(p > 1e-3, "alpha {bits}: chi-square {stat}, p {p}");
    }
}

#[test]
fn nlos_only_irs_user_link_has_rayleigh_power() {
    // With a zero Rician factor every IRS-user entry is a sum of CN terms
    // with total variance 10^{-β2/10}: the normalized power is Exp(1).
    let cfg = ScenarioConfig {
        rician_irs_user: 0.0,
        ..ScenarioConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let pos = [[5.0, 5.0, 0.0]];
    let d2 = ((5.0f64 + 2.0).powi(2) + (5.0f64 + 1.0).powi(2)).sqrt();
    let var = 10f64.powf(-irs_core::channel::irs_path_loss_db(d2) / 10.0);
    let mut samples = Vec::new();
    for _ in 0..2000 {
        let real = gen_channels(&cfg, &pos, &mut rng).unwrap();
        samples.extend(real.irs_user[0].iter().map(|z| z.norm_sqr() / var));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    // P(X > 1) = e^{-1} for Exp(1)
    let tail = samples.iter().filter(|&&x| x > 1.0).count() as f64 / n;
    assert!((tail - (-1f64).exp()).abs() < 0.01, "tail {tail}");
}
