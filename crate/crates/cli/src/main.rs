use anyhow::Result;
use clap::{Parser, Subcommand};
use emsource_cli::{emit_report, init_workers, run_experiment, Command, ExperimentConfig, ReportFormat};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "emsource", version, about = "Multi-frequency inverse source experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Sub {
    /// Synthesize a boundary dataset.
    Synth(RunArgs),
    /// Continuation diagnostics on the complex sector.
    Diag(RunArgs),
    /// Cross-solver verification suite.
    Verify(RunArgs),
    /// Tikhonov reconstruction.
    Invert(RunArgs),
    /// Increasing-stability sweep over band limits.
    Sweep(RunArgs),
    /// Ball cavity eigenvalues and monotonicity.
    Cavity(RunArgs),
}

fn run(cli: Cli) -> Result<bool> {
    init_workers()?;
    let (command, args) = match cli.command {
        Sub::Synth(a) => (Command::Synth, a),
        Sub::Diag(a) => (Command::Diag, a),
        Sub::Verify(a) => (Command::Verify, a),
        Sub::Invert(a) => (Command::Invert, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::Cavity(a) => (Command::Cavity, a),
    };
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("emsource-{}", command.name())));
    let report = run_experiment(command, &cfg, &out)?;
    emit_report(&report, ReportFormat::Csv, &out)?;
    let text = emit_report(&report, ReportFormat::Text, &out)?;
    print!("{}", std::fs::read_to_string(text)?);
    Ok(report.all_pass())
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
