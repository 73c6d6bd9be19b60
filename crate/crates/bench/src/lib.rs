//! Deterministic fixtures shared by the benchmarks.

use irs_core::channel::gen_channels;
use irs_core::measurement::{collect, random_reflections};
use irs_core::{ChannelRealization, MeasurementTable, PhaseAlphabet, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub real: ChannelRealization,
    pub table: MeasurementTable,
    pub alphabet: PhaseAlphabet,
}

/// One drop with an `ny x nz` panel, `users` users and `m` measurements.
pub fn fixture(ny: usize, nz: usize, users: usize, bits: u32, m: usize, seed: u64) -> Fixture {
    let cfg = ScenarioConfig {
        irs_elements_y: ny,
        irs_elements_z: nz,
        num_users: users,
        phase_bits: bits,
        ..ScenarioConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = cfg.draw_user_positions(&mut rng);
    let real = gen_channels(&cfg, &pos, &mut rng).expect("default geometry is valid");
    let alphabet = PhaseAlphabet::new(bits).expect("valid bits");
    let refl = random_reflections(m, cfg.num_elements(), alphabet, &mut rng);
    let table = collect(&real, &refl, cfg.samples_per_measurement, &mut rng).expect("valid table");
    Fixture {
        real,
        table,
        alphabet,
    }
}
