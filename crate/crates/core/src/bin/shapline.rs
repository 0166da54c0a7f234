//! Command-line front end: full experiment runs, one-off explanations,
//! run reports, and standalone preprocessing.
//!
//! Exit codes: 0 on success, 1 when the invocation or configuration is
//! invalid (including bad flags), 2 when a pipeline stage fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use shapline::explain::{ShapConfig, ShapMode};
use shapline::runner::{
    cmd_explain, cmd_preprocess, cmd_report, cmd_run, resolve_output_dir, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "shapline",
    version,
    about = "Explanation-guided feature engineering for tabular binary classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a full experiment run from a TOML configuration.
    Run(RunArgs),
    /// Explain a preprocessed dataset with a saved model.
    Explain(ExplainArgs),
    /// Verify a finished run's artifacts and print its metric summary.
    Report(ReportArgs),
    /// Preprocess a raw CSV into a model-ready dataset.
    Preprocess(PreprocessArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file (TOML).
    config: PathBuf,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the irrelevance threshold.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Override the coalition budget used by sampled explanations.
    #[arg(long)]
    budget: Option<usize>,
    /// Override the explanation mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Output directory (defaults to the config's `output`, then to
    /// `<dataset>-run`; SHAPLINE_OUTPUT_ROOT prefixes relative paths).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExplainArgs {
    /// Saved model file.
    #[arg(long)]
    model: PathBuf,
    /// Preprocessed dataset CSV (with its `.meta.json` sidecar).
    #[arg(long)]
    data: PathBuf,
    /// Background-row CSV (for example a run's `backgrounds.csv`).
    #[arg(long)]
    background: PathBuf,
    /// Where to write the attribution matrix CSV.
    #[arg(long)]
    out: PathBuf,
    /// Base seed for coalition sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coalition budget for sampled mode (default: 2m + 2048).
    #[arg(long)]
    budget: Option<usize>,
    /// Explanation mode.
    #[arg(long, value_enum, default_value_t = ModeArg::Sampled)]
    mode: ModeArg,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory containing `manifest.json`.
    run_dir: PathBuf,
    /// Also write the rendered report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Run configuration file whose `[dataset]` section describes the CSV.
    config: PathBuf,
    /// Where to write the preprocessed dataset (default:
    /// `<dataset>-preprocessed.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Kernel-weighted least squares over sampled coalitions.
    Sampled,
    /// Brute-force enumeration of all coalitions (m <= 20).
    Exact,
}

impl From<ModeArg> for ShapMode {
    fn from(mode: ModeArg) -> ShapMode {
        match mode {
            ModeArg::Sampled => ShapMode::Sampled,
            ModeArg::Exact => ShapMode::Exact,
        }
    }
}

fn main() -> ExitCode {
    // Map argument errors to exit code 1 (clap's default would be 2,
    // which this tool reserves for pipeline-stage failures).
    let matches = match Cli::command().try_get_matches() {
        Ok(matches) => matches,
        Err(e) if e.use_stderr() => {
            e.print().expect("writing to stderr");
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version output goes to stdout and succeeds.
            e.print().expect("writing to stdout");
            return ExitCode::SUCCESS;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => {
            e.print().expect("writing to stderr");
            return ExitCode::from(1);
        }
    };

    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn dispatch(cli: Cli) -> shapline::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = RunConfig::load(&args.config)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(epsilon) = args.epsilon {
                cfg.epsilon = epsilon;
            }
            if let Some(budget) = args.budget {
                cfg.shap.coalition_budget = Some(budget);
            }
            if let Some(mode) = args.mode {
                cfg.shap.mode = mode.into();
            }
            let out = resolve_output_dir(&cfg, args.output.as_deref());
            eprintln!("writing run to `{}`", out.display());
            let manifest = cmd_run(&cfg, &out)?;
            print!("{}", cmd_report(&out, None)?);
            eprintln!(
                "run complete: {} artifacts in `{}`",
                manifest.artifacts.len(),
                out.display()
            );
            Ok(())
        }
        Command::Explain(args) => {
            let shap = ShapConfig {
                coalition_budget: args.budget,
                seed: args.seed,
                mode: args.mode.into(),
            };
            cmd_explain(&args.model, &args.data, &args.background, &shap, &args.out)?;
            eprintln!("wrote explanations to `{}`", args.out.display());
            Ok(())
        }
        Command::Report(args) => {
            let text = cmd_report(&args.run_dir, args.out.as_deref())?;
            print!("{text}");
            Ok(())
        }
        Command::Preprocess(args) => {
            let cfg = RunConfig::load(&args.config)?;
            let out = args.out.unwrap_or_else(|| {
                PathBuf::from(format!("{}-preprocessed.csv", cfg.dataset.resolved_name()))
            });
            let ds = cmd_preprocess(&cfg.dataset, &out)?;
            eprintln!(
                "wrote {} rows x {} features to `{}`",
                ds.n(),
                ds.m(),
                out.display()
            );
            Ok(())
        }
    }
}
