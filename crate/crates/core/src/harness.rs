//! Monte-Carlo experiments: channel drops, measurements, estimation,
//! reflection design and baselines, scored on the true channels.
//!
//! Every trial owns an independent ChaCha stream (`seed`, stream = trial
//! index), so results do not depend on thread count or completion order.
//! Reflection sets are drawn once per trial and phase resolution at the
//! largest `M`, and each smaller `M` uses a prefix of the same measurements.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{csm_select, rms_select};
use crate::channel::{gen_channels, linear_to_db, ChannelRealization, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimator::{train, EpochRecord, TrainConfig};
use crate::measurement::{collect, random_reflections};
use crate::optimizer::{
    optimize, OptimizeOptions, ReflectionSolution, RelaxationParams, RelaxationStatus, Strategy,
    DEFAULT_DRAWS,
};
use crate::phase::{PhaseAlphabet, ReflectionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentStrategy {
    /// Estimated channels + geometry method (single user only).
    NnGe,
    /// Estimated channels + relaxation, randomization and refinement.
    NnSdr,
    /// Estimated channels + refinement from the RMS reflection.
    NnSr,
    Csm,
    Rms,
    /// True channels through the same optimizer (upper bound).
    Perfect,
}

impl ExperimentStrategy {
    pub const ALL: [ExperimentStrategy; 6] = [
        Self::NnGe,
        Self::NnSdr,
        Self::NnSr,
        Self::Csm,
        Self::Rms,
        Self::Perfect,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NnGe => "nn-ge",
            Self::NnSdr => "nn-sdr",
            Self::NnSr => "nn-sr",
            Self::Csm => "csm",
            Self::Rms => "rms",
            Self::Perfect => "perfect",
        }
    }

    fn needs_estimates(&self) -> bool {
        matches!(self, Self::NnGe | Self::NnSdr | Self::NnSr)
    }
}

impl fmt::Display for ExperimentStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub training: TrainConfig,
    /// Measurement counts `M` to sweep.
    pub m_values: Vec<usize>,
    /// Phase resolutions (bits) to sweep; empty means `scenario.phase_bits`.
    pub alpha_values: Vec<u32>,
    pub trials: usize,
    pub strategies: Vec<ExperimentStrategy>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub randomization_draws: usize,
    pub relaxation: RelaxationParams,
    /// Subtract the known noise power from measurements before training.
    pub subtract_noise_floor: bool,
    /// Keep per-epoch training curves.
    pub loss_curves: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            training: TrainConfig::default(),
            m_values: vec![50, 100, 200, 300],
            alpha_values: vec![1],
            trials: 50,
            strategies: vec![
                ExperimentStrategy::NnGe,
                ExperimentStrategy::NnSr,
                ExperimentStrategy::Csm,
                ExperimentStrategy::Rms,
                ExperimentStrategy::Perfect,
            ],
            seed: 1,
            output_dir: PathBuf::from("results"),
            randomization_draws: DEFAULT_DRAWS,
            relaxation: RelaxationParams::default(),
            subtract_noise_floor: false,
            loss_curves: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn alphas(&self) -> Vec<u32> {
        if self.alpha_values.is_empty() {
            vec![self.scenario.phase_bits]
        } else {
            self.alpha_values.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.training.validate()?;
        for &bits in &self.alphas() {
            PhaseAlphabet::new(bits)?;
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.m_values.is_empty() {
            return Err(Error::InvalidConfig("m_values must not be empty".into()));
        }
        for &m in &self.m_values {
            if self
                .strategies
                .iter()
                .any(ExperimentStrategy::needs_estimates)
            {
                self.training.split(m)?;
            } else if m == 0 {
                return Err(Error::InvalidConfig("m_values must be >= 1".into()));
            }
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidConfig("no strategies selected".into()));
        }
        if self.strategies.contains(&ExperimentStrategy::NnGe) && self.scenario.num_users != 1 {
            return Err(Error::GeometryNeedsSingleUser(self.scenario.num_users));
        }
        if self.randomization_draws == 0 {
            return Err(Error::InvalidConfig(
                "randomization_draws must be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn optimize_options(&self, seed: u64, initial: Option<ReflectionSet>) -> OptimizeOptions {
        OptimizeOptions {
            initial,
            draws: self.randomization_draws,
            relaxation: self.relaxation,
            seed,
        }
    }
}

/// One (trial, strategy, resolution, M) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub strategy: ExperimentStrategy,
    pub users: usize,
    pub alpha: u32,
    pub m: usize,
    pub trial: usize,
    /// Achieved minimum SNR on the true channels; `None` when the trial
    /// failed or the SNR is not finite (see `flags`).
    pub min_snr_db: Option<f64>,
    pub runtime_ms: f64,
    pub flags: String,
}

/// The deterministic columns of a result row, as written to `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub strategy: String,
    pub users: usize,
    pub alpha: u32,
    pub m: usize,
    pub trial: usize,
    pub min_snr_db: Option<f64>,
    pub flags: String,
}

pub const RESULT_HEADER: [&str; 7] = [
    "strategy",
    "users",
    "alpha",
    "m",
    "trial",
    "min_snr_db",
    "flags",
];

#[derive(Debug, Clone, Serialize)]
struct TimingRecord<'a> {
    strategy: &'a str,
    users: usize,
    alpha: u32,
    m: usize,
    trial: usize,
    runtime_ms: f64,
}

/// Training curve of one user's estimator in one trial.
#[derive(Debug, Clone)]
pub struct LossCurve {
    pub trial: usize,
    pub alpha: u32,
    pub m: usize,
    pub user: usize,
    pub records: Vec<EpochRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub curves: Vec<LossCurve>,
}

impl ExperimentOutput {
    pub fn write_results_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(ResultRecord {
                strategy: r.strategy.to_string(),
                users: r.users,
                alpha: r.alpha,
                m: r.m,
                trial: r.trial,
                min_snr_db: r.min_snr_db,
                flags: r.flags.clone(),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_timings_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(TimingRecord {
                strategy: r.strategy.as_str(),
                users: r.users,
                alpha: r.alpha,
                m: r.m,
                trial: r.trial,
                runtime_ms: r.runtime_ms,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_curve_csv<W: Write>(curve: &LossCurve, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for rec in &curve.records {
            w.serialize(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// splitmix64 over the parts, for per-(trial, user, M, ...) seeds.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        state ^= p;
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        state = z ^ (z >> 31);
    }
    state
}

/// The optimizer fed the true covariances.
pub fn perfect_csi_bound(
    real: &ChannelRealization,
    alphabet: PhaseAlphabet,
    strategy: Strategy,
    opts: &OptimizeOptions,
) -> Result<ReflectionSolution> {
    optimize(&real.effective, alphabet, strategy, opts)
}

fn solver_flags(sol: &ReflectionSolution) -> Vec<String> {
    let mut flags = Vec::new();
    if sol.degenerate {
        flags.push("degenerate".to_string());
    }
    if sol.relaxation_status == Some(RelaxationStatus::IterationLimit) {
        flags.push("relaxation-iteration-limit".to_string());
    }
    flags
}

fn score(real: &ChannelRealization, v: &ReflectionSet, flags: &mut Vec<String>) -> Option<f64> {
    let db = linear_to_db(real.min_snr(v));
    if db.is_finite() {
        Some(db)
    } else {
        flags.push("non-finite-snr".to_string());
        None
    }
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> (Vec<ResultRow>, Vec<LossCurve>) {
    let users = cfg.scenario.num_users;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let failed_rows = |rows: &mut Vec<ResultRow>, alpha: u32, m: usize, strategy, err: &Error| {
        rows.push(ResultRow {
            strategy,
            users,
            alpha,
            m,
            trial,
            min_snr_db: None,
            runtime_ms: 0.0,
            flags: format!("error: {err}"),
        });
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    let positions = cfg.scenario.draw_user_positions(&mut rng);
    let real = match gen_channels(&cfg.scenario, &positions, &mut rng) {
        Ok(real) => real,
        Err(e) => {
            for bits in cfg.alphas() {
                for &m in &cfg.m_values {
                    for &s in &cfg.strategies {
                        failed_rows(&mut rows, bits, m, s, &e);
                    }
                }
            }
            return (rows, curves);
        }
    };
    let m_max = cfg.m_values.iter().copied().max().unwrap_or(0);
    let n = cfg.scenario.num_elements();
    let noise_floor = if cfg.subtract_noise_floor {
        cfg.scenario.noise_watts()
    } else {
        0.0
    };

    for bits in cfg.alphas() {
        let alphabet = PhaseAlphabet::new(bits).expect("validated");
        let reflections = random_reflections(m_max, n, alphabet, &mut rng);
        let full = match collect(
            &real,
            &reflections,
            cfg.scenario.samples_per_measurement,
            &mut rng,
        ) {
            Ok(t) => t,
            Err(e) => {
                for &m in &cfg.m_values {
                    for &s in &cfg.strategies {
                        failed_rows(&mut rows, bits, m, s, &e);
                    }
                }
                continue;
            }
        };

        let perfect = cfg
            .strategies
            .contains(&ExperimentStrategy::Perfect)
            .then(|| {
                let start = Instant::now();
                let strategy = if users == 1 {
                    Strategy::Geometry
                } else {
                    Strategy::SdrRefine
                };
                let opts = cfg.optimize_options(
                    derive_seed(&[cfg.seed, trial as u64, bits as u64, 0xB0]),
                    None,
                );
                let sol = perfect_csi_bound(&real, alphabet, strategy, &opts);
                (sol, start.elapsed().as_secs_f64() * 1e3)
            });

        for &m in &cfg.m_values {
            let table = full.prefix(m).expect("m <= m_max");
            let (rms_v, _) = rms_select(&table);

            let estimates = if cfg
                .strategies
                .iter()
                .any(ExperimentStrategy::needs_estimates)
            {
                let start = Instant::now();
                let result: Result<Vec<_>> = (0..users)
                    .map(|k| {
                        let tc = TrainConfig {
                            seed: derive_seed(&[
                                cfg.seed,
                                trial as u64,
                                bits as u64,
                                m as u64,
                                k as u64,
                            ]),
                            noise_floor_watts: noise_floor,
                            record_curve: cfg.loss_curves,
                            ..cfg.training.clone()
                        };
                        train(&table, k, &tc)
                    })
                    .collect();
                Some((result, start.elapsed().as_secs_f64() * 1e3))
            } else {
                None
            };
            if let Some((Ok(est), _)) = &estimates {
                for (k, e) in est.iter().enumerate().filter(|_| cfg.loss_curves) {
                    curves.push(LossCurve {
                        trial,
                        alpha: bits,
                        m,
                        user: k,
                        records: e.curve.clone(),
                    });
                }
            }

            for &strategy in &cfg.strategies {
                let start = Instant::now();
                let mut extra_ms = 0.0;
                let outcome: Result<(ReflectionSet, Vec<String>)> = match strategy {
                    ExperimentStrategy::Rms => Ok((rms_v.clone(), Vec::new())),
                    ExperimentStrategy::Csm => csm_select(&table).map(|v| (v, Vec::new())),
                    ExperimentStrategy::Perfect => {
                        match perfect.as_ref().expect("computed above") {
                            (Ok(sol), ms) => {
                                extra_ms = *ms;
                                Ok((sol.reflection.clone(), solver_flags(sol)))
                            }
                            (Err(e), _) => Err(Error::InvalidConfig(e.to_string())),
                        }
                    }
                    nn => match estimates.as_ref().expect("trained above") {
                        (Err(e), _) => Err(Error::InvalidConfig(e.to_string())),
                        (Ok(est), ms) => {
                            extra_ms = *ms;
                            let channels: Vec<_> = est.iter().map(|e| e.w_hat.clone()).collect();
                            let (s, init) = match nn {
                                ExperimentStrategy::NnGe => (Strategy::Geometry, None),
                                ExperimentStrategy::NnSdr => (Strategy::SdrRefine, None),
                                _ => (Strategy::RmsRefine, Some(rms_v.clone())),
                            };
                            let opts = cfg.optimize_options(
                                derive_seed(&[cfg.seed, trial as u64, bits as u64, m as u64, 0xA0]),
                                init,
                            );
                            optimize(&channels, alphabet, s, &opts).map(|sol| {
                                let flags = solver_flags(&sol);
                                (sol.reflection, flags)
                            })
                        }
                    },
                };
                let runtime_ms = start.elapsed().as_secs_f64() * 1e3 + extra_ms;
                match outcome {
                    Ok((v, mut flags)) => {
                        let min_snr_db = score(&real, &v, &mut flags);
                        rows.push(ResultRow {
                            strategy,
                            users,
                            alpha: bits,
                            m,
                            trial,
                            min_snr_db,
                            runtime_ms,
                            flags: flags.join(";"),
                        });
                    }
                    Err(e) => failed_rows(&mut rows, bits, m, strategy, &e),
                }
            }
        }
    }
    (rows, curves)
}

/// Runs every trial (in parallel on the current rayon pool) and returns the
/// rows in trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let per_trial: Vec<_> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect();
    let mut out = ExperimentOutput::default();
    for (rows, curves) in per_trial {
        out.rows.extend(rows);
        out.curves.extend(curves);
    }
    Ok(out)
}

/// Aggregate of one (strategy, users, alpha, M) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub strategy: String,
    pub users: usize,
    pub alpha: u32,
    pub m: usize,
    /// Rows with a finite SNR.
    pub count: usize,
    pub failed: usize,
    /// `10 log10` of the mean linear SNR.
    pub mean_snr_db: Option<f64>,
    /// Mean and sample standard deviation of the per-trial dB values.
    pub mean_db: Option<f64>,
    pub std_db: Option<f64>,
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| Error::MalformedCsv {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(RESULT_HEADER) {
        return Err(Error::MalformedCsv {
            line: 1,
            message: format!("expected header {}", RESULT_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<ResultRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::MalformedCsv {
            line: e.position().map_or(i as u64 + 2, |p| p.line()),
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    // key (strategy, users, alpha, M) -> (finite dB values, failed rows)
    type Groups = BTreeMap<(String, usize, u32, usize), (Vec<f64>, usize)>;
    let mut groups = Groups::new();
    for r in records {
        let entry = groups
            .entry((r.strategy.clone(), r.users, r.alpha, r.m))
            .or_default();
        match r.min_snr_db {
            Some(db) if db.is_finite() => entry.0.push(db),
            _ => entry.1 += 1,
        }
    }
    groups
        .into_iter()
        .map(|((strategy, users, alpha, m), (dbs, failed))| {
            let n = dbs.len();
            let (mean_snr_db, mean_db, std_db) = if n == 0 {
                (None, None, None)
            } else {
                let mean_lin = dbs.iter().map(|d| 10f64.powf(d / 10.0)).sum::<f64>() / n as f64;
                let mean = dbs.iter().sum::<f64>() / n as f64;
                let var = if n > 1 {
                    dbs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                (Some(linear_to_db(mean_lin)), Some(mean), Some(var.sqrt()))
            };
            SummaryRow {
                strategy,
                users,
                alpha,
                m,
                count: n,
                failed,
                mean_snr_db,
                mean_db,
                std_db,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Wide plot table: one row per (users, alpha, M), one column per strategy
/// holding `mean_snr_db`.
pub fn write_plot_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let strategies: Vec<&str> = {
        let mut s: Vec<&str> = rows.iter().map(|r| r.strategy.as_str()).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let mut table: BTreeMap<(usize, u32, usize), BTreeMap<&str, Option<f64>>> = BTreeMap::new();
    for r in rows {
        table
            .entry((r.users, r.alpha, r.m))
            .or_default()
            .insert(r.strategy.as_str(), r.mean_snr_db);
    }
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = ["users", "alpha", "m"]
        .into_iter()
        .chain(strategies.iter().copied())
        .collect();
    w.write_record(&header)?;
    for ((users, alpha, m), values) in table {
        let mut rec = vec![users.to_string(), alpha.to_string(), m.to_string()];
        for s in &strategies {
            rec.push(
                values
                    .get(s)
                    .copied()
                    .flatten()
                    .map_or(String::new(), |v| v.to_string()),
            );
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of one brute-force comparison in [`oracle_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Small brute-force comparisons: geometry vs enumeration, relaxation
/// bound, refinement local optimality and gradient vs finite differences.
pub fn oracle_suite(seed: u64) -> Vec<OracleCheck> {
    use crate::estimator::{forward, grad, GammaWeights};
    use crate::linalg::{outer, CMat, CVec};
    use crate::optimizer::{evaluate, geometry_single_user, relaxed_solve, successive_refinement};
    use crate::oracle::{
        exhaustive_search, exhaustive_single_user, finite_difference, for_each_reflection,
    };
    use num_complex::Complex64;
    use rand::Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channel = |rng: &mut ChaCha8Rng, n: usize| {
        CVec::from_fn(n + 1, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    };
    let mut checks = Vec::new();

    let mut mismatches = 0;
    let mut total = 0;
    for bits in [1, 2] {
        let a = PhaseAlphabet::new(bits).expect("valid");
        for n in 1..=6 {
            for _ in 0..5 {
                let h = channel(&mut rng, n);
                total += 1;
                if geometry_single_user(&h, a).objective != exhaustive_single_user(&h, a).1 {
                    mismatches += 1;
                }
            }
        }
    }
    checks.push(OracleCheck {
        name: "geometry == exhaustive",
        passed: mismatches == 0,
        detail: format!("{mismatches}/{total} mismatches"),
    });

    let a1 = PhaseAlphabet::new(1).expect("valid");
    let mut violations = 0;
    for _ in 0..20 {
        let covs: Vec<CMat> = (0..2).map(|_| outer(&channel(&mut rng, 4))).collect();
        let ok = relaxed_solve(&covs, &RelaxationParams::default())
            .map(|r| r.value >= exhaustive_search(&covs, a1).1 * (1.0 - 1e-6))
            .unwrap_or(false);
        if !ok {
            violations += 1;
        }
    }
    checks.push(OracleCheck {
        name: "relaxation >= discrete optimum",
        passed: violations == 0,
        detail: format!("{violations}/20 violations"),
    });

    let mut not_local = 0;
    for _ in 0..20 {
        let covs: Vec<CMat> = (0..2).map(|_| outer(&channel(&mut rng, 4))).collect();
        let v0 = ReflectionSet::uniform(a1, 4);
        let Ok(sol) = successive_refinement(&v0, &covs) else {
            not_local += 1;
            continue;
        };
        let mut improvable = false;
        for_each_reflection(a1, 4, |v| {
            let diff = v
                .indices()
                .iter()
                .zip(sol.reflection.indices())
                .filter(|(x, y)| x != y)
                .count();
            if diff == 1 && evaluate(&covs, v).0 > sol.objective * (1.0 + 1e-10) {
                improvable = true;
            }
        });
        not_local += improvable as usize;
    }
    checks.push(OracleCheck {
        name: "refinement is 1-opt",
        passed: not_local == 0,
        detail: format!("{not_local}/20 improvable"),
    });

    let a2 = PhaseAlphabet::new(2).expect("valid");
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let dim = 9;
        let gamma: Vec<f64> = (0..2 * dim).map(|_| rng.random::<f64>() - 0.5).collect();
        let v = ReflectionSet::new(a2, (0..dim - 1).map(|_| rng.random_range(1..=4)).collect())
            .expect("valid");
        let target = rng.random::<f64>();
        let g = GammaWeights::from_vec(gamma.clone()).expect("finite");
        let analytic = grad(&g, &v, target);
        let loss = |x: &[f64]| {
            let w = GammaWeights::from_vec(x.to_vec()).expect("finite");
            (forward(&w, &v) - target).powi(2)
        };
        let numeric = finite_difference(loss, &gamma, 1e-6);
        let num: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = numeric.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(num / den);
    }
    checks.push(OracleCheck {
        name: "gradient vs finite differences",
        passed: worst < 1e-6,
        detail: format!("max relative error {worst:.2e}"),
    });
    checks
}
