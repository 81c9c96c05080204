//! `dplsvm`: network estimation, screening, Bayesian SVM fits, prediction,
//! feature selection, evaluation, synthetic data and sampler diagnostics.
//!
//! Errors go to stderr as one JSON record; the exit code names the class
//! (1 check failed, 2 usage, 3 I/O, 4 malformed input, 5 invalid data,
//! 6 numerical failure).

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use commands::{Ctx, DiagnoseArgs, EvaluateArgs, SelectWhat, SynthKind};
use config::RunConfig;
use error::{CliError, Result};

#[derive(Parser)]
#[command(name = "dplsvm", version, about = "Bayesian SVM classification from brain-network features")]
struct Cli {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate per-subject networks and write the edge table.
    Networks {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sliding-window series and dynamic features instead of glasso networks.
        #[arg(long)]
        dynamic: bool,
    },
    /// Drop edges whose spread across training subjects is at most `sd_threshold`.
    Screen {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the static model.
    FitStatic {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the dynamic model.
    FitDynamic {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Screen two sessions separately, join their edge sets, fit the static model.
    FitMultisession {
        #[arg(long)]
        table_a: PathBuf,
        #[arg(long)]
        table_b: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "a,b")]
        tags: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a table with a fitted model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Credible-interval feature selection.
    SelectFeatures {
        #[arg(long)]
        model: PathBuf,
        /// Also intersect selections over random splits of this table.
        #[arg(long, value_name = "TABLE")]
        reproducible: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classification metrics, or a validation curve over densities or windows.
    Evaluate {
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_enum)]
        select: Option<SelectWhat>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic data with known ground truth.
    Synth {
        #[arg(long, value_enum, default_value = "static")]
        kind: SynthKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sampler correctness and convergence checks.
    Diagnose {
        /// Joint-distribution test of both samplers.
        #[arg(long)]
        geweke: bool,
        /// Prior-only cluster count against its closed form.
        #[arg(long)]
        prior_delta: bool,
        /// Split R-hat of a fit directory.
        #[arg(long, value_name = "FIT_DIR")]
        rhat: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Networks { .. } => "networks",
            Command::Screen { .. } => "screen",
            Command::FitStatic { .. } => "fit-static",
            Command::FitDynamic { .. } => "fit-dynamic",
            Command::FitMultisession { .. } => "fit-multisession",
            Command::Predict { .. } => "predict",
            Command::SelectFeatures { .. } => "select-features",
            Command::Evaluate { .. } => "evaluate",
            Command::Synth { .. } => "synth",
            Command::Diagnose { .. } => "diagnose",
        }
    }
}

fn parse() -> std::result::Result<Cli, clap::Error> {
    let help = format!("Configuration keys (defaults shown):\n{}", RunConfig::describe());
    let matches = Cli::command().after_long_help(help).try_get_matches()?;
    Cli::from_arg_matches(&matches)
}

fn run(cli: Cli) -> Result<()> {
    let env: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with("DPLSVM_")).collect();
    let cfg = RunConfig::resolve(cli.config.as_deref(), &env, &cli.set)?;
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ctx = Ctx::new(cfg, cli.command.name(), args)?;
    match &cli.command {
        Command::Networks { manifest, out, dynamic } => commands::networks(&ctx, manifest, out, *dynamic),
        Command::Screen { table, out } => commands::screen(&ctx, table, out),
        Command::FitStatic { table, out } => commands::fit_static(&ctx, table, out),
        Command::FitDynamic { table, out } => commands::fit_dynamic(&ctx, table, out),
        Command::FitMultisession { table_a, table_b, tags, out } => commands::fit_multisession(&ctx, table_a, table_b, tags, out),
        Command::Predict { model, table, out } => commands::predict_cmd(&ctx, model, table, out),
        Command::SelectFeatures { model, reproducible, out } => {
            commands::select_features(&ctx, model, reproducible.as_deref(), out)
        }
        Command::Evaluate { predictions, model, table, select, manifest, out } => commands::evaluate(
            &ctx,
            EvaluateArgs {
                predictions: predictions.as_deref(),
                model: model.as_deref(),
                table: table.as_deref(),
                select: *select,
                manifest: manifest.as_deref(),
                out,
            },
        ),
        Command::Synth { kind, out } => commands::synth(&ctx, *kind, out),
        Command::Diagnose { geweke, prior_delta, rhat, out } => {
            commands::diagnose(&ctx, DiagnoseArgs { geweke: *geweke, prior_delta: *prior_delta, rhat: rhat.as_deref(), out })
        }
    }
}

fn main() {
    let cli = match parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return;
        }
        Err(e) => {
            let err = CliError::usage(e.render().to_string().trim());
            eprintln!("{}", err.record());
            std::process::exit(err.kind.code());
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("{}", err.record());
        std::process::exit(err.kind.code());
    }
}
