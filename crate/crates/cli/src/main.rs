use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use irs_core::harness::{
    oracle_suite, read_results_csv, run_experiment, summarize, write_plot_csv, write_summary_csv,
    ExperimentConfig, ExperimentOutput, ExperimentStrategy,
};

/// Simulate measurement-driven IRS channel estimation and reflection design.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "IRS_SIM_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write results.csv, timings.csv and summary.csv.
    Run {
        /// JSON experiment config; unknown keys are rejected.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated subset of nn-ge,nn-sdr,nn-sr,csm,rms,perfect.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<String>>,
        /// Also write per-epoch training curves under <out>/curves.
        #[arg(long)]
        loss_curves: bool,
    },
    /// Aggregate a results.csv into per-(strategy, K, alpha, M) statistics.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional wide table (one column per strategy) for plotting.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Brute-force checks of the optimizers and gradient on small instances.
    Oracle {
        #[arg(long, value_enum, default_value_t = Suite::Small)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Small,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("invalid config {}", path.display()))?;
    Ok(cfg)
}

fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput) -> anyhow::Result<()> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    out.write_results_csv(create(&dir.join("results.csv"))?)?;
    out.write_timings_csv(create(&dir.join("timings.csv"))?)?;
    serde_json::to_writer_pretty(create(&dir.join("config.json"))?, cfg)?;

    let mut buf = Vec::new();
    out.write_results_csv(&mut buf)?;
    let summary = summarize(&read_results_csv(buf.as_slice())?);
    write_summary_csv(&summary, create(&dir.join("summary.csv"))?)?;
    write_plot_csv(&summary, create(&dir.join("plot.csv"))?)?;

    if !out.curves.is_empty() {
        let curves = dir.join("curves");
        fs::create_dir_all(&curves)?;
        for c in &out.curves {
            let name = format!(
                "loss_trial{}_alpha{}_m{}_user{}.csv",
                c.trial, c.alpha, c.m, c.user
            );
            ExperimentOutput::write_curve_csv(c, create(&curves.join(name))?)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("IRS_SIM_THREADS must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot configure the thread pool")?;
    }

    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            trials,
            strategies,
            loss_curves,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(trials) = trials {
                cfg.trials = trials;
            }
            if let Some(list) = strategies {
                cfg.strategies = list
                    .iter()
                    .map(|s| s.parse::<ExperimentStrategy>())
                    .collect::<Result<_, _>>()?;
            }
            cfg.loss_curves |= loss_curves;
            cfg.validate()?;
            let output = run_experiment(&cfg)?;
            write_outputs(&cfg, &output)?;
            let failed = output
                .rows
                .iter()
                .filter(|r| r.min_snr_db.is_none())
                .count();
            eprintln!(
                "wrote {} rows ({failed} flagged) to {}",
                output.rows.len(),
                cfg.output_dir.display()
            );
            Ok(true)
        }
        Command::Summarize { input, out, plot } => {
            let file =
                File::open(&input).with_context(|| format!("cannot open {}", input.display()))?;
            let records =
                read_results_csv(file).with_context(|| format!("in {}", input.display()))?;
            let summary = summarize(&records);
            write_summary_csv(&summary, create(&out)?)?;
            if let Some(plot) = plot {
                write_plot_csv(&summary, create(&plot)?)?;
            }
            Ok(true)
        }
        Command::Oracle {
            suite: Suite::Small,
            seed,
        } => {
            let checks = oracle_suite(seed);
            let mut all = true;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "ok  " } else { "FAIL" },
                    c.name,
                    c.detail
                );
                all &= c.passed;
            }
            Ok(all)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
