#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{PipelineConfig, RephraserKind, Settings};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "deixis", version, about = "Gesture-grounded egocentric VQA: forge clips, build QA, train and score")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML pipeline config; defaults apply when omitted.
    #[arg(long, global = true, env = "DEIXIS_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "DEIXIS_OUT", default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, env = "DEIXIS_SEED")]
    seed: Option<u64>,
    /// Hand-token confidence gate.
    #[arg(long, global = true, env = "DEIXIS_TAU")]
    tau: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "DEIXIS_JOBS")]
    jobs: Option<usize>,
    /// Accept inputs produced under a different config.
    #[arg(long, global = true)]
    force: bool,
}

/// Per-command flags are recorded in manifests but not in the config hash,
/// so e.g. a 40-clip smoke run stays compatible with the full config.
#[derive(Subcommand)]
enum Command {
    /// Forge synthetic desk clips with pointing gestures.
    Forge {
        #[arg(long)]
        n_clips: Option<usize>,
        /// Disable keypoint jitter and confidence noise.
        #[arg(long)]
        noiseless: bool,
    },
    /// Resolve referents and generate validated QA items.
    Qa {
        #[arg(long)]
        clips: Option<PathBuf>,
        /// Comma-separated categories to generate.
        #[arg(long, value_delimiter = ',')]
        categories: Vec<String>,
        #[arg(long, value_enum)]
        rephraser: Option<RephraserArg>,
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Keypoint adapter checks, scorer training and the hand-token ablation.
    Adapter {
        #[command(subcommand)]
        command: AdapterCommand,
    },
    /// Score predictions or a built-in answerer.
    Eval {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        clips: Option<PathBuf>,
        #[arg(long, conflicts_with = "answerer")]
        predictions: Option<PathBuf>,
        #[arg(long, value_enum)]
        answerer: Option<AnswererArg>,
        /// Bias probes to run alongside, e.g. `--probe blind,choices-only`.
        #[arg(long, value_enum, value_delimiter = ',')]
        probe: Vec<ProbeArg>,
        /// Fail unless the geometric oracle scores 100 on every category.
        #[arg(long)]
        self_check: bool,
        /// Report name; defaults to the answerer or predictions file stem.
        #[arg(long)]
        name: Option<String>,
    },
    /// Compare score reports side by side.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AdapterCommand {
    /// Compare the adapter against a scalar reference and finite differences.
    Check {
        #[arg(long, default_value_t = 100)]
        configs: usize,
    },
    /// Train the option scorer with hand tokens on Reference items.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        clips: Option<PathBuf>,
    },
    /// Train with and without hand tokens and compare held-out accuracy.
    Ablate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        clips: Option<PathBuf>,
        /// Forge a fresh Reference split instead of reading files.
        #[arg(long, conflicts_with_all = ["dataset", "clips"])]
        synthetic: bool,
        /// Report open-gate frame counts over a grid of thresholds.
        #[arg(long)]
        tau_sweep: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RephraserArg {
    Rule,
    External,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbeArg {
    Blind,
    ChoicesOnly,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnswererArg {
    Oracle,
    Random,
    Blind,
    ChoicesOnly,
}

fn settings(global: &Global) -> Result<Settings, CliError> {
    let mut config = PipelineConfig::load(global.config.as_deref())?;
    if let Some(s) = global.seed {
        config.seed = s;
    }
    if let Some(t) = global.tau {
        config.tau = t;
    }
    config.validate()?;
    if let Some(j) = global.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    std::fs::create_dir_all(&global.out).map_err(CliError::io(&global.out))?;
    Ok(Settings { config, out: global.out.clone(), force: global.force })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let s = settings(&cli.global)?;
    match cli.command {
        Command::Forge { n_clips, noiseless } => {
            if n_clips == Some(0) {
                return Err(CliError::Usage("--n-clips must be at least 1".into()));
            }
            commands::forge(&s, n_clips.unwrap_or(s.config.n_clips), noiseless)
        }
        Command::Qa { clips, categories, rephraser, endpoint } => {
            let mut reph = s.config.rephraser.clone();
            if let Some(r) = rephraser {
                reph.mode = match r {
                    RephraserArg::Rule => RephraserKind::Rule,
                    RephraserArg::External => RephraserKind::External,
                };
            }
            if let Some(e) = endpoint {
                reph.endpoint = e;
            }
            commands::qa(&s, clips, &categories, &reph)
        }
        Command::Adapter { command } => match command {
            AdapterCommand::Check { configs } => commands::adapter_check(&s, configs),
            AdapterCommand::Train { dataset, clips } => commands::adapter_train(&s, dataset, clips),
            AdapterCommand::Ablate { dataset, clips, synthetic, tau_sweep } => {
                commands::adapter_ablate(&s, dataset, clips, synthetic, tau_sweep)
            }
        },
        Command::Eval { dataset, clips, predictions, answerer, probe, self_check, name } => {
            let source = match (predictions, answerer) {
                (Some(p), _) => commands::Source::Predictions(p),
                (None, Some(a)) => commands::Source::Answerer(a),
                (None, None) if !probe.is_empty() || self_check => commands::Source::Nothing,
                (None, None) => {
                    return Err(CliError::Usage("eval needs --predictions, --answerer, --probe or --self-check".into()))
                }
            };
            commands::eval(&s, commands::EvalArgs { dataset, clips, source, probe, self_check, name })
        }
        Command::Report { reports } => commands::report(&s, &reports),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
