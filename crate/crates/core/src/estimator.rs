//! Channel estimation from power measurements with a two-neuron real network.
//!
//! For an extended reflection `v` with real features `x = [Re v; Im v]`,
//! the network computes the hidden pair `[a, b] = x^T W` with the structured
//! weight matrix
//!
//! ```text
//!     W = | w1   w2 |
//!         | w2  -w1 |
//! ```
//!
//! and outputs `a² + b²`, which equals `|v^H (w1 + j w2)|²`. Fitting the
//! output to measured powers therefore recovers the stacked channel up to a
//! common phase (and, for one-bit reflections, up to conjugation). The
//! weights are stored as the flat vector `gamma = [w1; w2]`.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{outer, CMat, CVec};
use crate::measurement::MeasurementTable;
use crate::phase::ReflectionSet;

/// Training aborts once the loss exceeds this multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct GammaWeights {
    gamma: Vec<f64>,
}

impl GammaWeights {
    pub fn zeros(dim: usize) -> Self {
        Self {
            gamma: vec![0.0; 2 * dim],
        }
    }

    pub fn from_vec(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() || !gamma.len().is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "gamma must have even positive length, got {}",
                gamma.len()
            )));
        }
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidConfig("gamma entries must be finite".into()));
        }
        Ok(Self { gamma })
    }

    pub fn from_complex(w: &CVec) -> Self {
        Self {
            gamma: w
                .iter()
                .map(|z| z.re)
                .chain(w.iter().map(|z| z.im))
                .collect(),
        }
    }

    /// Length of the complex vector the weights encode (`N + 1`).
    pub fn dim(&self) -> usize {
        self.gamma.len() / 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gamma
    }

    pub fn w1(&self) -> &[f64] {
        &self.gamma[..self.dim()]
    }

    pub fn w2(&self) -> &[f64] {
        &self.gamma[self.dim()..]
    }

    pub fn to_complex(&self) -> CVec {
        assemble(self.w1(), self.w2())
    }

    /// The `(2N+2) x 2` matrix `[[w1, w2], [w2, -w1]]`.
    pub fn weight_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(2 * n, 2, |i, j| match (i < n, j) {
            (true, 0) => self.gamma[i],
            (true, _) => self.gamma[n + i],
            (false, 0) => self.gamma[i],
            (false, _) => -self.gamma[i - n],
        })
    }
}

/// `w1 + j w2`.
pub fn assemble(w1: &[f64], w2: &[f64]) -> CVec {
    assert_eq!(w1.len(), w2.len(), "w1 and w2 differ in length");
    CVec::from_iterator(
        w1.len(),
        w1.iter().zip(w2).map(|(&a, &b)| Complex64::new(a, b)),
    )
}

/// Hidden-layer outputs `(a, b) = x^T W`.
pub fn hidden(gamma: &GammaWeights, x: &[f64]) -> (f64, f64) {
    let n = gamma.dim();
    debug_assert_eq!(x.len(), 2 * n);
    let (re, im) = x.split_at(n);
    let (w1, w2) = (gamma.w1(), gamma.w2());
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..n {
        a += re[i] * w1[i] + im[i] * w2[i];
        b += re[i] * w2[i] - im[i] * w1[i];
    }
    (a, b)
}

pub fn forward_features(gamma: &GammaWeights, x: &[f64]) -> f64 {
    let (a, b) = hidden(gamma, x);
    a * a + b * b
}

/// Predicted received power under reflection `v`.
pub fn forward(gamma: &GammaWeights, v: &ReflectionSet) -> f64 {
    forward_features(gamma, &v.features())
}

/// Adds `scale · ∂(p̂ - target)²/∂γ` into `out`; returns the residual.
fn accumulate_grad(
    gamma: &GammaWeights,
    x: &[f64],
    target: f64,
    scale: f64,
    out: &mut [f64],
) -> f64 {
    let n = gamma.dim();
    let (a, b) = hidden(gamma, x);
    let residual = a * a + b * b - target;
    // d(r²)/dp̂ = 2r, dp̂/da = 2a, dp̂/db = 2b
    let ca = 4.0 * residual * a * scale;
    let cb = 4.0 * residual * b * scale;
    let (re, im) = x.split_at(n);
    for i in 0..n {
        // da/dw1 = re, da/dw2 = im, db/dw1 = -im, db/dw2 = re
        out[i] += ca * re[i] - cb * im[i];
        out[n + i] += ca * im[i] + cb * re[i];
    }
    residual
}

/// Gradient of the single-sample squared residual `(p̂(v) - target)²`.
pub fn grad(gamma: &GammaWeights, v: &ReflectionSet, target: f64) -> Vec<f64> {
    let mut out = vec![0.0; gamma.as_slice().len()];
    accumulate_grad(gamma, &v.features(), target, 1.0, &mut out);
    out
}

/// Mean squared error over a batch.
pub fn batch_loss(gamma: &GammaWeights, sets: &[ReflectionSet], targets: &[f64]) -> f64 {
    let sse: f64 = sets
        .iter()
        .zip(targets)
        .map(|(v, t)| (forward(gamma, v) - t).powi(2))
        .sum();
    sse / sets.len() as f64
}

/// Gradient of [`batch_loss`].
pub fn batch_grad(gamma: &GammaWeights, sets: &[ReflectionSet], targets: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; gamma.as_slice().len()];
    let scale = 1.0 / sets.len() as f64;
    for (v, &t) in sets.iter().zip(targets) {
        accumulate_grad(gamma, &v.features(), t, scale, &mut out);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// One update per training sample, reshuffled every epoch.
    #[default]
    PerSample,
    /// One averaged update per epoch.
    FullBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Fraction of measurements used for training when `train_size` is unset.
    pub train_fraction: f64,
    /// Explicit training-set size `M0`.
    pub train_size: Option<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Std of the Gaussian weight initialization, in normalized units.
    pub init_scale: f64,
    /// Rescale powers to unit mean before training.
    pub normalize: bool,
    /// Subtracted from every measurement (clamped at zero) before training.
    pub noise_floor_watts: f64,
    pub update: UpdateMode,
    pub seed: u64,
    pub record_curve: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            train_size: None,
            learning_rate: 1e-3,
            epochs: 500,
            init_scale: 0.1,
            normalize: true,
            noise_floor_watts: 0.0,
            update: UpdateMode::PerSample,
            seed: 0,
            record_curve: false,
        }
    }
}

impl TrainConfig {
    /// Training-set size for `m` measurements.
    pub fn split(&self, m: usize) -> Result<usize> {
        let m0 = match self.train_size {
            Some(m0) => m0,
            None => ((self.train_fraction * m as f64).ceil() as usize).min(m.saturating_sub(1)),
        };
        if m0 == 0 || m0 >= m {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= M0 < M for a validation split, got M0={m0}, M={m}"
            )));
        }
        Ok(m0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.init_scale > 0.0) {
            return bad("init_scale must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)");
        }
        if !(self.noise_floor_watts >= 0.0) {
            return bad("noise_floor_watts must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_sse: f64,
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// Selected weights in physical units.
    pub weights: GammaWeights,
    /// Estimated stacked channel `ŵ = w1 + j w2`.
    pub w_hat: CVec,
    /// Validation MSE of the selected weights, in watts².
    pub validation_mse: f64,
    pub best_epoch: usize,
    /// Per-epoch statistics in normalized units, when requested.
    pub curve: Vec<EpochRecord>,
}

impl ChannelEstimate {
    pub fn covariance(&self) -> CMat {
        outer(&self.w_hat)
    }

    pub fn predicted_power(&self, v: &ReflectionSet) -> f64 {
        v.power(&self.w_hat)
    }

    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for rec in &self.curve {
            w.serialize(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sse(gamma: &GammaWeights, xs: &[Vec<f64>], targets: &[f64]) -> f64 {
    xs.iter()
        .zip(targets)
        .map(|(x, t)| (forward_features(gamma, x) - t).powi(2))
        .sum()
}

/// Fits the network for user `k` and returns the weights with the lowest
/// validation error seen across all epochs.
pub fn train(table: &MeasurementTable, k: usize, cfg: &TrainConfig) -> Result<ChannelEstimate> {
    cfg.validate()?;
    if k >= table.num_users() {
        return Err(Error::Dimension(format!(
            "user {k} of {}",
            table.num_users()
        )));
    }
    let m = table.len();
    let m0 = cfg.split(m)?;
    let dim = table.num_elements() + 1;

    let raw: Vec<f64> = table
        .user_powers(k)
        .iter()
        .map(|p| (p - cfg.noise_floor_watts).max(0.0))
        .collect();
    let mean = raw.iter().sum::<f64>() / m as f64;
    let scale = if cfg.normalize && mean > 0.0 {
        1.0 / mean
    } else {
        1.0
    };
    let targets: Vec<f64> = raw.iter().map(|p| p * scale).collect();
    let xs: Vec<Vec<f64>> = table
        .reflections()
        .iter()
        .map(ReflectionSet::features)
        .collect();
    let (train_x, val_x) = xs.split_at(m0);
    let (train_t, val_t) = targets.split_at(m0);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, cfg.init_scale)
        .map_err(|e| Error::InvalidConfig(format!("init_scale: {e}")))?;
    let mut gamma = GammaWeights {
        gamma: (0..2 * dim).map(|_| init.sample(&mut rng)).collect(),
    };

    let initial_loss = sse(&gamma, train_x, train_t) / m0 as f64;
    let limit = DIVERGENCE_FACTOR * initial_loss.max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..m0).collect();
    let mut step = vec![0.0; 2 * dim];
    let mut best: Option<(f64, usize, GammaWeights)> = None;
    let mut curve = Vec::new();

    for epoch in 1..=cfg.epochs {
        match cfg.update {
            UpdateMode::PerSample => {
                order.shuffle(&mut rng);
                for &i in &order {
                    step.iter_mut().for_each(|s| *s = 0.0);
                    accumulate_grad(&gamma, &train_x[i], train_t[i], 1.0, &mut step);
                    for (g, s) in gamma.gamma.iter_mut().zip(&step) {
                        *g -= cfg.learning_rate * s;
                    }
                }
            }
            UpdateMode::FullBatch => {
                step.iter_mut().for_each(|s| *s = 0.0);
                let w = 1.0 / m0 as f64;
                for (x, &t) in train_x.iter().zip(train_t) {
                    accumulate_grad(&gamma, x, t, w, &mut step);
                }
                for (g, s) in gamma.gamma.iter_mut().zip(&step) {
                    *g -= cfg.learning_rate * s;
                }
            }
        }

        let train_mse = sse(&gamma, train_x, train_t) / m0 as f64;
        if !train_mse.is_finite() || train_mse > limit {
            return Err(Error::Diverged {
                epoch,
                loss: train_mse,
            });
        }
        let val_sse = sse(&gamma, val_x, val_t);
        if cfg.record_curve {
            curve.push(EpochRecord {
                epoch,
                train_mse,
                validation_sse: val_sse,
            });
        }
        if best.as_ref().is_none_or(|(b, _, _)| val_sse < *b) {
            best = Some((val_sse, epoch, gamma.clone()));
        }
    }

    let (val_sse, best_epoch, best_gamma) = best.expect("at least one epoch");
    let descale = scale.sqrt().recip();
    let weights = GammaWeights {
        gamma: best_gamma.gamma.iter().map(|g| g * descale).collect(),
    };
    Ok(ChannelEstimate {
        w_hat: weights.to_complex(),
        weights,
        validation_mse: val_sse / (m - m0) as f64 / (scale * scale),
        best_epoch,
        curve,
    })
}
