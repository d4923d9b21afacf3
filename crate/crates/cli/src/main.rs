mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Solver(String),
}

impl From<concentra::Error> for CliError {
    fn from(e: concentra::Error) -> Self {
        match e {
            concentra::Error::Solver(msg) => Self::Solver(msg),
            other => Self::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Input(e.to_string())
    }
}

/// Whether a command reached a positive or a negative verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Positive,
    Negative,
}

#[derive(Parser, Debug)]
#[command(name = "concentra", version, about = "Expected Shortfall, tail concentration and copula diagnostics")]
struct Cli {
    /// Confidence level in (0, 1).
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Tolerance of the collapse iteration.
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// VaR, ES, lower ES and mean of every position and of their sum.
    Risk {
        #[arg(long)]
        scenarios: PathBuf,
        /// One of var, es, lower_es, mean or mix:<alpha>, applied to the sum.
        #[arg(long)]
        measure: Option<String>,
        #[arg(long, value_enum, default_value_t = commands::Format::Json)]
        format: commands::Format,
    },
    /// Common tail event search and ES additivity gap.
    Concentration {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Minimum-ES frontier as CSV (target,es,mean,w_1..w_k).
    Frontier {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        n_points: Option<usize>,
        /// Also write a JSON summary here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Checkerboard copula tools.
    Copula {
        #[command(subcommand)]
        action: CopulaCommand,
    },
    /// Collapse a distribution toward its two-point ES limit.
    Collapse {
        /// Two-column CSV `value,prob`.
        #[arg(long)]
        dist: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum CopulaCommand {
    /// Membership in D_p at one level, or at every grid level.
    CheckDp {
        #[arg(long)]
        copula: PathBuf,
    },
    /// Concordance-larger copula with mass over the tail-curve region.
    Densify {
        #[arg(long)]
        copula: PathBuf,
        /// Write the densified copula (full precision JSON) here.
        #[arg(long)]
        copula_out: Option<PathBuf>,
    },
    /// Markov chain law-of-large-numbers diagnostic.
    Simulate {
        #[arg(long)]
        copula: PathBuf,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long, value_enum)]
        band: Option<commands::BandArg>,
        /// Write running means as CSV (chain,step,partial_mean) here.
        #[arg(long)]
        partial_means: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CONCENTRA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("CONCENTRA_THREADS = {raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    configure_threads()?;
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = base.merge(cli.p, cli.eps, cli.seed);
    let out = cli.out.as_deref();
    match cli.command {
        Command::Risk {
            scenarios,
            measure,
            format,
        } => commands::risk(&cfg, &scenarios, measure, format, out),
        Command::Concentration { scenarios, tol } => commands::concentration(&cfg, &scenarios, tol, out),
        Command::Frontier {
            scenarios,
            n_points,
            summary,
        } => commands::frontier(&cfg, &scenarios, n_points, summary.as_deref(), out),
        Command::Copula { action } => match action {
            CopulaCommand::CheckDp { copula } => commands::check_dp(&cfg, &copula, out),
            CopulaCommand::Densify { copula, copula_out } => {
                commands::densify(&copula, copula_out.as_deref(), out)
            }
            CopulaCommand::Simulate {
                copula,
                length,
                replications,
                band,
                partial_means,
            } => commands::simulate(
                &cfg,
                &copula,
                commands::SimulateArgs {
                    length,
                    replications,
                    band,
                },
                partial_means.as_deref(),
                out,
            ),
        },
        Command::Collapse { dist } => commands::collapse(&cfg, &dist, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Positive) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("concentra: {e}");
            match e {
                CliError::Input(_) => ExitCode::from(2),
                CliError::Solver(_) => ExitCode::from(3),
            }
        }
    }
}
