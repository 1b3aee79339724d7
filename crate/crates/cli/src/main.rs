//! `kaonbell`: command-line front end of the kaon Bell-test workbench.
//!
//! Exit codes: 0 completed (a violated or infeasible result is still a
//! completed run), 2 usage or configuration error, 3 I/O or malformed input.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};

use commands::{DetectionTargetSpec, RunContext, Which};
use config::{Format, Preset, RunConfig};
use kaonbell::lhv::TimeBuckets;

#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Input(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Input(e) => e,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "kaonbell",
    version,
    about = "Bell tests with entangled neutral kaons"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON run configuration (schema 1).
    #[arg(long, global = true, env = "KAONBELL_CONFIG")]
    config: Option<PathBuf>,
    /// Replace ε with a measured value.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Monte Carlo seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Omit the timestamp so identical inputs give identical bytes.
    #[arg(long, global = true)]
    reproducible: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Joint probabilities of channel pairs (sl+:2pi0) or state pairs (kplus:k0bar) over a time grid.
    Probabilities {
        /// Pair spec; repeat or separate with spaces.
        #[arg(long = "pair", required = true, num_args = 1..)]
        pairs: Vec<String>,
        /// Comma-separated decay times in units of the short lifetime.
        #[arg(long, default_value = "0")]
        times: String,
    },
    /// Evaluate one of the inequalities.
    Inequality {
        #[arg(value_enum)]
        which: Which,
        /// p12,p14,p32,p34,p3_,p_2 for `ch`.
        #[arg(long)]
        ch_probs: Option<String>,
    },
    /// Minimal detection efficiency for a CH violation per state angle.
    EfficiencyScan {
        /// Comma-separated state angles in (0, π/4], radians.
        #[arg(long)]
        angles: Option<String>,
    },
    /// Local hidden-variable model construction and simulation.
    Lhv {
        #[command(subcommand)]
        command: LhvCommand,
    },
    /// ε, ε′ and |p| ≤ |q| evaluations plus the maximal-entanglement threshold.
    Report,
}

#[derive(Debug, Subcommand)]
enum LhvCommand {
    /// Model reproducing a coincidence distribution on the detected subsample.
    BuildDetection {
        /// Target: `max-entangled` or `product`.
        #[arg(long, default_value = "max-entangled")]
        target: String,
        /// Per-setting P(+) on side 1 for a product target.
        #[arg(long, default_value = "0.5,0.5")]
        plus1: String,
        /// Per-setting P(+) on side 2 for a product target.
        #[arg(long, default_value = "0.5,0.5")]
        plus2: String,
        /// JSON target file; overrides --target.
        #[arg(long)]
        target_file: Option<PathBuf>,
        #[arg(long, default_value_t = 0.8)]
        eta: f64,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Model in which λ fixes decay channel and time bucket.
    BuildChannel {
        /// Branching fractions, e.g. `sl+=0.4,2pi0=0.6`.
        #[arg(long)]
        branching: String,
        /// Semileptonic minus full-ensemble flavor asymmetry.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        bias: f64,
        #[arg(long, default_value_t = 8)]
        buckets: u16,
        /// Upper edge of the last bucket, units of the short lifetime.
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Exact statistics, seeded samples and paired CH checks of a model file.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// Single settings pair `s1,s2`; all pairs when absent.
        #[arg(long)]
        settings: Option<String>,
        /// CH roles `f1,f2,f3,f4`; first two settings per side when absent.
        #[arg(long)]
        ch: Option<String>,
    },
}

fn resolve_config(global: &GlobalArgs) -> Result<RunConfig, Failure> {
    let mut config = match &global.config {
        Some(path) => {
            if !path.exists() {
                return Err(Failure::Input(anyhow!(
                    "config {} not found",
                    path.display()
                )));
            }
            RunConfig::load(path).map_err(Failure::Usage)?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = global.preset {
        config.epsilon = p.epsilon();
    }
    if let Some(seed) = global.seed {
        config.mc.seed = seed;
    }
    if let Some(format) = global.format {
        config.output.format = format;
    }
    if let Some(out) = &global.out {
        config.output.path = Some(out.clone());
    }
    config.validate().map_err(Failure::Usage)?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = resolve_config(&cli.global)?;
    let ctx = RunContext {
        config: config.clone(),
        reproducible: cli.global.reproducible,
    };
    let reals = |s: &str| commands::parse_reals(s).map_err(Failure::Usage);
    let doc = match cli.command {
        Command::Probabilities { pairs, times } => {
            let pairs: Vec<String> = pairs
                .iter()
                .flat_map(|p| p.split_whitespace().map(str::to_owned))
                .collect();
            commands::probabilities(&ctx, &pairs, &reals(&times)?)?
        }
        Command::Inequality { which, ch_probs } => {
            commands::inequality(&ctx, which, ch_probs.as_deref())?
        }
        Command::EfficiencyScan { angles } => {
            let angles = match angles {
                Some(a) => reals(&a)?,
                None => commands::DEFAULT_ANGLES.to_vec(),
            };
            commands::efficiency(&ctx, &angles)?
        }
        Command::Report => commands::report(&ctx)?,
        Command::Lhv { command } => match command {
            LhvCommand::BuildDetection {
                target,
                plus1,
                plus2,
                target_file,
                eta,
                model_out,
            } => {
                let spec = match (target_file, target.as_str()) {
                    (Some(path), _) => DetectionTargetSpec::File(path),
                    (None, "max-entangled") => DetectionTargetSpec::MaximallyEntangled,
                    (None, "product") => {
                        DetectionTargetSpec::Product(reals(&plus1)?, reals(&plus2)?)
                    }
                    (None, other) => {
                        return Err(Failure::Usage(anyhow!(
                            "unknown target '{other}' (max-entangled or product)"
                        )))
                    }
                };
                commands::build_detection(&ctx, spec, eta, &model_out)?
            }
            LhvCommand::BuildChannel {
                branching,
                bias,
                buckets,
                t_max,
                model_out,
            } => {
                let targets = commands::parse_branching(&branching).map_err(Failure::Usage)?;
                let buckets = TimeBuckets::log_spaced(buckets, t_max, config.evolution.gamma_s)
                    .map_err(|e| Failure::Usage(e.into()))?;
                commands::build_channel(&ctx, &targets, bias, &buckets, &model_out)?
            }
            LhvCommand::Simulate {
                model,
                settings,
                ch,
            } => commands::simulate(&ctx, &model, settings.as_deref(), ch.as_deref())?,
        },
    };
    let text = doc.render(config.output.format).map_err(Failure::Input)?;
    report::write_output(&text, config.output.path.as_deref()).map_err(Failure::Input)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are successful exits
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
