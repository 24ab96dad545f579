use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rootcma_cli::{
    emit_figure_data, load_config, run_pipeline, write_report, write_sidecar, CliError,
    ExperimentConfig, FigureKind, OutputFormat, Verb,
};

/// Blind multi-user separation experiments on a uniform linear array.
#[derive(Parser)]
#[command(name = "rootcma", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the scenario and emit the reference beam pattern.
    Simulate(RunArgs),
    /// Run the LMS preprocessor chain: roots, model order, DOA, weights.
    Precondition(RunArgs),
    /// Run the normalized-ascent chain and its root analysis.
    Roots(RunArgs),
    /// Run the plain constant-modulus equalizer.
    Cma(RunArgs),
    /// Monte Carlo sweep of the flag-selected pipeline stages.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (see FORMATS.md).
    #[arg(long)]
    config: PathBuf,
    /// Override scenario.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override run.trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Override run.out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override run.format (csv|json).
    #[arg(long)]
    format: Option<String>,
    /// Override run.workers.
    #[arg(long)]
    workers: Option<usize>,
}

impl Command {
    fn verb(&self) -> Verb {
        match self {
            Command::Simulate(_) => Verb::Simulate,
            Command::Precondition(_) => Verb::Precondition,
            Command::Roots(_) => Verb::Roots,
            Command::Cma(_) => Verb::Cma,
            Command::Sweep(_) => Verb::Sweep,
        }
    }

    fn verb_name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Precondition(_) => "precondition",
            Command::Roots(_) => "roots",
            Command::Cma(_) => "cma",
            Command::Sweep(_) => "sweep",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a)
            | Command::Precondition(a)
            | Command::Roots(a)
            | Command::Cma(a)
            | Command::Sweep(a) => a,
        }
    }

    /// Figure data each verb emits by default; sweeps write the report only.
    fn default_figures(&self) -> &'static [FigureKind] {
        match self {
            Command::Simulate(_) => &[FigureKind::Beam],
            Command::Precondition(_) => &[
                FigureKind::Learning,
                FigureKind::Roots,
                FigureKind::Deviation,
                FigureKind::Beam,
            ],
            Command::Roots(_) => &[FigureKind::Roots, FigureKind::Deviation, FigureKind::Beam],
            Command::Cma(_) => &[FigureKind::Learning, FigureKind::Beam],
            Command::Sweep(_) => &[],
        }
    }
}

fn apply_overrides(config: &mut ExperimentConfig, args: &RunArgs) -> Result<(), CliError> {
    if let Some(seed) = args.seed {
        config.scenario.seed = seed;
    }
    if let Some(trials) = args.trials {
        if trials == 0 {
            return Err(CliError::Validation {
                field: "run.trials".into(),
                message: "must be at least 1".into(),
            });
        }
        config.trials = trials;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(format) = &args.format {
        config.format = format
            .parse::<OutputFormat>()
            .map_err(|e| CliError::Validation {
                field: "run.format".into(),
                message: e,
            })?;
    }
    if let Some(workers) = args.workers {
        if workers == 0 {
            return Err(CliError::Validation {
                field: "run.workers".into(),
                message: "must be at least 1".into(),
            });
        }
        config.workers = workers;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let command = &cli.command;
    let args = command.args();
    let mut config = load_config(&args.config)?;
    apply_overrides(&mut config, args)?;

    let report = run_pipeline(&config, command.verb())?;
    let dir = config.out_dir.clone();
    write_report(&report, &dir, config.format)?;
    for &kind in command.default_figures() {
        // A stage skipped by flags is fine for default emission.
        match emit_figure_data(&report, kind, &config.scenario.geometry, &dir) {
            Ok(_) | Err(CliError::StageNotRun(_)) => {}
            Err(e) => return Err(e),
        }
    }
    write_sidecar(&config, command.verb_name(), &dir)?;

    let aggregate = &report.aggregate;
    eprintln!(
        "{}: {} trial(s), {} failed; report written to {}",
        command.verb_name(),
        aggregate.trials,
        aggregate.failed_trials,
        dir.display()
    );
    if aggregate.failed_trials == aggregate.trials {
        Ok(3)
    } else if aggregate.failed_trials > 0 {
        Ok(4)
    } else {
        Ok(0)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
