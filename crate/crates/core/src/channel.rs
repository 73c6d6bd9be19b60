//! Scenario geometry, channel generation and exact SNR evaluation.
//!
//! The BS-user link is Rayleigh faded; the BS-IRS and IRS-user links are
//! Rician with one deterministic LoS path toward the IRS panel plus `L`
//! random NLoS paths. Each user's effective channel is the stacked vector
//! `h_k = √P [h_BU,k ; conj(h_IU,k) ⊙ h_BI]` of length `N + 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{outer, CMat, CVec};
use crate::phase::{PhaseAlphabet, ReflectionSet};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// BS-user path loss in dB.
pub fn direct_path_loss_db(distance_m: f64) -> f64 {
    33.0 + 37.0 * distance_m.log10()
}

/// Path loss in dB for the BS-IRS and IRS-user hops.
pub fn irs_path_loss_db(distance_m: f64) -> f64 {
    30.0 + 20.0 * distance_m.log10()
}

/// Scenario parameters. Key names carry their units; unknown keys are
/// rejected when parsed from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub num_users: usize,
    /// Elements along the y axis.
    pub irs_elements_y: usize,
    /// Elements along the z axis.
    pub irs_elements_z: usize,
    pub phase_bits: u32,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub nlos_paths: usize,
    /// Rician factor (linear) of the BS-IRS link.
    pub rician_bs_irs: f64,
    /// Rician factor (linear) of every IRS-user link.
    pub rician_irs_user: f64,
    pub bs_position_m: [f64; 3],
    pub irs_position_m: [f64; 3],
    /// Corners of the horizontal rectangle users are dropped in.
    pub user_area_corners_m: [[f64; 3]; 4],
    pub wavelength_m: f64,
    pub element_spacing_wavelengths: f64,
    /// RSRP samples `Q` per reflection set.
    pub samples_per_measurement: usize,
}

impl Default for ScenarioConfig {
    /// Desk-scale setup: a 4x4 panel, otherwise the published geometry.
    fn default() -> Self {
        Self {
            num_users: 1,
            irs_elements_y: 4,
            irs_elements_z: 4,
            phase_bits: 1,
            power_dbm: 30.0,
            noise_dbm: -90.0,
            nlos_paths: 5,
            rician_bs_irs: 10.0,
            rician_irs_user: 1.0,
            bs_position_m: [50.0, -200.0, 20.0],
            irs_position_m: [-2.0, -1.0, 0.0],
            user_area_corners_m: [
                [0.0, 0.0, 0.0],
                [10.0, 0.0, 0.0],
                [10.0, 10.0, 0.0],
                [0.0, 10.0, 0.0],
            ],
            wavelength_m: 0.1,
            element_spacing_wavelengths: 0.5,
            samples_per_measurement: 10,
        }
    }
}

impl ScenarioConfig {
    /// Full-size 8x8 panel.
    pub fn full_scale() -> Self {
        Self {
            irs_elements_y: 8,
            irs_elements_z: 8,
            ..Self::default()
        }
    }

    pub fn num_elements(&self) -> usize {
        self.irs_elements_y * self.irs_elements_z
    }

    pub fn power_watts(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    pub fn alphabet(&self) -> Result<PhaseAlphabet> {
        PhaseAlphabet::new(self.phase_bits)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_users == 0 {
            return bad("num_users must be >= 1".into());
        }
        if self.irs_elements_y == 0 || self.irs_elements_z == 0 {
            return bad("IRS panel needs at least one element per axis".into());
        }
        self.alphabet()?;
        if !(self.rician_bs_irs >= 0.0) || !(self.rician_irs_user >= 0.0) {
            return bad("Rician factors must be >= 0".into());
        }
        if !(self.wavelength_m > 0.0) || !self.wavelength_m.is_finite() {
            return bad("wavelength_m must be positive".into());
        }
        if !(self.element_spacing_wavelengths > 0.0) {
            return bad("element_spacing_wavelengths must be positive".into());
        }
        if self.samples_per_measurement == 0 {
            return bad("samples_per_measurement must be >= 1".into());
        }
        if !self.power_dbm.is_finite() || self.noise_dbm.is_nan() {
            return bad("power_dbm must be finite and noise_dbm a number".into());
        }
        let points = self
            .user_area_corners_m
            .iter()
            .chain([&self.bs_position_m, &self.irs_position_m]);
        for p in points {
            if p.iter().any(|c| !c.is_finite()) {
                return bad(format!("non-finite coordinate {p:?}"));
            }
        }
        let z0 = self.user_area_corners_m[0][2];
        if self.user_area_corners_m.iter().any(|c| c[2] != z0) {
            return bad("user area corners must share one height".into());
        }
        Ok(())
    }

    /// Uniform user drop in the bounding box of the area corners.
    pub fn draw_user_positions<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<[f64; 3]> {
        let c = &self.user_area_corners_m;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in c {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (0..self.num_users)
            .map(|_| {
                let x = lo[0] + (hi[0] - lo[0]) * rng.random::<f64>();
                let y = lo[1] + (hi[1] - lo[1]) * rng.random::<f64>();
                [x, y, c[0][2]]
            })
            .collect()
    }
}

/// All channels of one fading block.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// BS-user direct channels, one per user.
    pub direct: Vec<Complex64>,
    /// BS-IRS channel (N).
    pub bs_irs: CVec,
    /// IRS-user channels (N each).
    pub irs_user: Vec<CVec>,
    /// Cascaded channels `conj(h_IU,k) ⊙ h_BI` (N each).
    pub cascaded: Vec<CVec>,
    /// Effective stacked channels `√P [h_BU,k; cascaded_k]` (N + 1 each).
    pub effective: Vec<CVec>,
    /// Receiver noise power `σ²` in watts.
    pub noise_power: f64,
}

impl ChannelRealization {
    /// Assembles the cascaded and effective channels from the raw links.
    pub fn assemble(
        direct: Vec<Complex64>,
        bs_irs: CVec,
        irs_user: Vec<CVec>,
        power_watts: f64,
        noise_power: f64,
    ) -> Result<Self> {
        if direct.len() != irs_user.len() {
            return Err(Error::Dimension(format!(
                "{} direct links vs {} IRS-user links",
                direct.len(),
                irs_user.len()
            )));
        }
        let n = bs_irs.len();
        if let Some(bad) = irs_user.iter().find(|h| h.len() != n) {
            return Err(Error::Dimension(format!(
                "IRS-user channel of length {} for an {n}-element IRS",
                bad.len()
            )));
        }
        let amp = power_watts.sqrt();
        let cascaded: Vec<CVec> = irs_user
            .iter()
            .map(|hiu| hiu.zip_map(&bs_irs, |u, b| u.conj() * b))
            .collect();
        let effective = direct
            .iter()
            .zip(&cascaded)
            .map(|(&d, c)| {
                CVec::from_iterator(n + 1, std::iter::once(d).chain(c.iter().copied())).scale(amp)
            })
            .collect();
        Ok(Self {
            direct,
            bs_irs,
            irs_user,
            cascaded,
            effective,
            noise_power,
        })
    }

    /// Builds a realization straight from effective channels, for tests and
    /// synthetic studies.
    pub fn from_effective(effective: Vec<CVec>, noise_power: f64) -> Self {
        let n = effective.first().map_or(0, |h| h.len().saturating_sub(1));
        Self {
            direct: effective.iter().map(|h| h[0]).collect(),
            bs_irs: CVec::zeros(n),
            irs_user: vec![CVec::zeros(n); effective.len()],
            cascaded: effective
                .iter()
                .map(|h| h.rows(1, n).into_owned())
                .collect(),
            effective,
            noise_power,
        }
    }

    pub fn num_users(&self) -> usize {
        self.effective.len()
    }

    pub fn num_elements(&self) -> usize {
        self.effective.first().map_or(0, |h| h.len() - 1)
    }

    /// `G_k = h_k h_k^H`.
    pub fn covariance(&self, k: usize) -> CMat {
        outer(&self.effective[k])
    }

    pub fn covariances(&self) -> Vec<CMat> {
        (0..self.num_users()).map(|k| self.covariance(k)).collect()
    }

    /// Noise-free received power `|v^H h_k|²`.
    pub fn received_power(&self, v: &ReflectionSet, k: usize) -> f64 {
        v.power(&self.effective[k])
    }

    pub fn min_snr(&self, v: &ReflectionSet) -> f64 {
        (0..self.num_users())
            .map(|k| snr(v, self, k))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Linear SNR of user `k` under reflection `v`.
pub fn snr(v: &ReflectionSet, real: &ChannelRealization, k: usize) -> f64 {
    real.received_power(v, k) / real.noise_power
}

/// Steering vector of a half-wavelength UPA in the y-z plane:
/// `e(sinθ sinφ, N_y) ⊗ e(cosθ, N_z)`.
pub fn steering_vector(theta: f64, phi: f64, ny: usize, nz: usize) -> CVec {
    steering_from_cosines(theta.sin() * phi.sin(), theta.cos(), ny, nz, 0.5)
}

/// Steering vector from the directional cosines along y and z, with element
/// spacing given in wavelengths.
pub fn steering_from_cosines(
    cos_y: f64,
    cos_z: f64,
    ny: usize,
    nz: usize,
    spacing_wavelengths: f64,
) -> CVec {
    let k = -2.0 * PI * spacing_wavelengths;
    CVec::from_fn(ny * nz, |idx, _| {
        let (m, n) = (idx / nz, idx % nz);
        Complex64::from_polar(1.0, k * (cos_y * m as f64 + cos_z * n as f64))
    })
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Directional cosines (y, z) of the unit vector from `from` to `to`.
fn direction_cosines(from: &[f64; 3], to: &[f64; 3], d: f64) -> (f64, f64) {
    ((to[1] - from[1]) / d, (to[2] - from[2]) / d)
}

fn check_distance(link: &'static str, d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveDistance { link, distance: d })
    }
}

/// One Rician link toward the IRS panel.
fn rician_link<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    los_cosines: (f64, f64),
    distance_m: f64,
    rician: f64,
    rng: &mut R,
) -> CVec {
    let (ny, nz) = (cfg.irs_elements_y, cfg.irs_elements_z);
    let amp = 10f64.powf(-irs_path_loss_db(distance_m) / 20.0);
    let los_phase = Complex64::from_polar(amp, -2.0 * PI * distance_m / cfg.wavelength_m);
    let los = steering_from_cosines(
        los_cosines.0,
        los_cosines.1,
        ny,
        nz,
        cfg.element_spacing_wavelengths,
    ) * los_phase;

    let mut nlos = CVec::zeros(ny * nz);
    if cfg.nlos_paths > 0 {
        let weight = (1.0 / cfg.nlos_paths as f64).sqrt();
        for _ in 0..cfg.nlos_paths {
            let gain = complex_gaussian(rng, amp * amp) * weight;
            let theta = PI * rng.random::<f64>();
            let phi = PI * rng.random::<f64>();
            let u = steering_from_cosines(
                theta.sin() * phi.sin(),
                theta.cos(),
                ny,
                nz,
                cfg.element_spacing_wavelengths,
            );
            nlos += u * gain;
        }
    }

    if rician.is_infinite() {
        return los;
    }
    let los_w = (rician / (1.0 + rician)).sqrt();
    let nlos_w = (1.0 / (1.0 + rician)).sqrt();
    los * Complex64::new(los_w, 0.0) + nlos * Complex64::new(nlos_w, 0.0)
}

/// Draws one fading block for users at `user_positions`.
pub fn gen_channels<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    user_positions: &[[f64; 3]],
    rng: &mut R,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    let (bs, irs) = (&cfg.bs_position_m, &cfg.irs_position_m);
    let d1 = distance(bs, irs);
    check_distance("BS-IRS", d1)?;
    let bs_irs = rician_link(
        cfg,
        direction_cosines(irs, bs, d1),
        d1,
        cfg.rician_bs_irs,
        rng,
    );

    let mut direct = Vec::with_capacity(user_positions.len());
    let mut irs_user = Vec::with_capacity(user_positions.len());
    for pos in user_positions {
        let d0 = distance(bs, pos);
        check_distance("BS-user", d0)?;
        let d2 = distance(irs, pos);
        check_distance("IRS-user", d2)?;
        let amp = 10f64.powf(-direct_path_loss_db(d0) / 20.0);
        direct.push(complex_gaussian(rng, 1.0) * amp);
        irs_user.push(rician_link(
            cfg,
            direction_cosines(irs, pos, d2),
            d2,
            cfg.rician_irs_user,
            rng,
        ));
    }
    ChannelRealization::assemble(
        direct,
        bs_irs,
        irs_user,
        cfg.power_watts(),
        cfg.noise_watts(),
    )
}
