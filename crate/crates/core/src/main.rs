use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use sparse_chanest::analysis::error_variance;
use sparse_chanest::channel_model::{sample_channel, DistributionKind, MpcSet};
use sparse_chanest::estimators::{EstimateResult, GenieEstimator, MlFullEstimator, OmpDictionary};
use sparse_chanest::experiments::{
    parse_snr_grid, run_rho_comparison, run_snr_sweep, snr_db_to_sigma2, write_rho_csv, write_sweep_csv,
    EstimatorSpec, Preset, RunConfig,
};
use sparse_chanest::ofdm::{observe, to_frequency};
use sparse_chanest::rng::{derive_rng, purpose};
use sparse_chanest::{Error, Result};

#[derive(Parser)]
#[command(name = "sparse-chanest", version, about = "Sparse OFDM channel estimation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error variance and estimated sparsity versus SNR for every estimator.
    Sweep(Common),
    /// Ensemble compressibility curves and their bounds per generator.
    Rho {
        #[command(flatten)]
        common: Common,
        /// Largest number of removed taps to report.
        #[arg(long, default_value_t = 32)]
        d_max: usize,
        /// Generators to compare (default: all).
        #[arg(long, value_delimiter = ',')]
        generators: Vec<String>,
    },
    /// Dump one channel realization.
    Generate(Common),
    /// Run every estimator once on one realization at one SNR.
    Estimate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; overrides the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Full)]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// "start:step:stop" in dB, or a single value.
    #[arg(long)]
    snr: Option<String>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)?
            }
            None => RunConfig::preset(self.preset),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(snr) = &self.snr {
            cfg.snr_grid_db = parse_snr_grid(snr)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn writer(&self, cfg: &RunConfig) -> Result<Box<dyn Write>> {
        let path = self.out.clone().or_else(|| cfg.output_path.as_ref().map(PathBuf::from));
        Ok(match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn write_json<T: Serialize>(value: &T, mut out: Box<dyn Write>) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RealizationDump {
    taps: Vec<Complex64>,
    mpcs: Option<MpcSet>,
}

#[derive(Serialize)]
struct EstimateReport {
    estimator: String,
    mse: Option<f64>,
    error: Option<String>,
    result: Option<EstimateResult>,
}

fn generate(common: &Common) -> Result<()> {
    let cfg = common.run_config()?;
    let mut rng = derive_rng(cfg.master_seed, &[purpose::CHANNEL, 0]);
    let h = sample_channel(&cfg.channel, &cfg.pulse, &mut rng)?;
    let out = common.writer(&cfg)?;
    match common.format {
        Format::Json => write_json(
            &RealizationDump { taps: h.taps.iter().copied().collect(), mpcs: h.source.clone() },
            out,
        ),
        Format::Csv => match &h.source {
            Some(mpcs) => mpcs.write_csv(out),
            None => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(["n", "re", "im"])?;
                for (n, z) in h.taps.iter().enumerate() {
                    w.write_record([n.to_string(), z.re.to_string(), z.im.to_string()])?;
                }
                w.flush()?;
                Ok(())
            }
        },
    }
}

fn estimate(common: &Common) -> Result<()> {
    let cfg = common.run_config()?;
    let snr_db = cfg.snr_grid_db[cfg.snr_grid_db.len() - 1];
    let mut rng = derive_rng(cfg.master_seed, &[purpose::CHANNEL, 0]);
    let h = sample_channel(&cfg.channel, &cfg.pulse, &mut rng)?;
    let h_k: Vec<Complex64> = to_frequency(&h, cfg.ofdm.k)?.iter().copied().collect();
    let mut rng = derive_rng(cfg.master_seed, &[purpose::NOISE, 0, 0]);
    let obs = observe(&h, &cfg.ofdm, snr_db_to_sigma2(snr_db), &mut rng)?;

    let reports: Vec<EstimateReport> = cfg
        .estimators
        .iter()
        .map(|spec| {
            let result = match spec {
                EstimatorSpec::MlFull => MlFullEstimator::new(&cfg.ofdm).and_then(|e| e.estimate(&obs)),
                EstimatorSpec::MlGenie => {
                    let delays = h.source.as_ref().map(|s| s.delays.clone()).unwrap_or_else(|| {
                        (0..h.num_taps())
                            .filter(|&n| h.taps[n].norm() > 0.0)
                            .map(|n| n as f64 * cfg.pulse.sample_period_s)
                            .collect()
                    });
                    GenieEstimator::new(&cfg.ofdm, &delays, &cfg.pulse).and_then(|g| g.estimate(&obs))
                }
                EstimatorSpec::Omp { dictionary, .. } => {
                    OmpDictionary::new(&cfg.ofdm, &cfg.pulse, dictionary).and_then(|d| d.estimate(&obs))
                }
            };
            match result {
                Ok(r) => EstimateReport {
                    estimator: spec.id().to_string(),
                    mse: error_variance(&h_k, &r.h_k_hat).ok(),
                    error: None,
                    result: Some(r),
                },
                Err(e) => EstimateReport {
                    estimator: spec.id().to_string(),
                    mse: None,
                    error: Some(e.to_string()),
                    result: None,
                },
            }
        })
        .collect();

    let out = common.writer(&cfg)?;
    match common.format {
        Format::Json => write_json(&reports, out),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["snr_db", "estimator", "mse", "L_hat", "truncated", "error"])?;
            for r in &reports {
                let fmt = |v: Option<String>| v.unwrap_or_default();
                w.write_record([
                    snr_db.to_string(),
                    r.estimator.clone(),
                    fmt(r.mse.map(|v| v.to_string())),
                    fmt(r.result.as_ref().map(|x| x.iterations.to_string())),
                    fmt(r.result.as_ref().map(|x| x.truncated.to_string())),
                    fmt(r.error.clone()),
                ])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(common) => {
            let cfg = common.run_config()?;
            let records = run_snr_sweep(&cfg)?;
            let out = common.writer(&cfg)?;
            match common.format {
                Format::Csv => write_sweep_csv(&records, out),
                Format::Json => write_json(&records, out),
            }
        }
        Command::Rho { common, d_max, generators } => {
            let cfg = common.run_config()?;
            let kinds = if generators.is_empty() {
                DistributionKind::ALL.to_vec()
            } else {
                generators.iter().map(|g| g.parse()).collect::<Result<Vec<DistributionKind>>>()?
            };
            let comparison = run_rho_comparison(&cfg, &kinds, d_max)?;
            for s in &comparison.summaries {
                log::info!(
                    "{}: mean FI {:.4}, sandwich violations {}, FI step assumption holds {:.1}% (d <= {})",
                    s.generator,
                    s.mean_fi,
                    s.sandwich_violations,
                    100.0 * s.fi_step_fraction,
                    s.assumption_depth
                );
            }
            let out = common.writer(&cfg)?;
            match common.format {
                Format::Csv => write_rho_csv(&comparison.rows, out),
                Format::Json => write_json(&comparison, out),
            }
        }
        Command::Generate(common) => generate(&common),
        Command::Estimate(common) => estimate(&common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
