use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use vlmc_walks::commands::{self, CliError, RunReport};
use vlmc_walks::config::{parse_model_config, ModelConfig};

#[derive(Parser)]
#[command(name = "vlmc-walks", version, about = "Variable length Markov chains and persistent random walks")]
struct Cli {
    /// Worker threads for parallel Monte Carlo (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a model and summarise its tree.
    Check {
        #[arg(long)]
        model: PathBuf,
        /// Print the canonical form of the config instead of the summary.
        #[arg(long)]
        canonical: bool,
    },
    /// Cascade series κ and the matrix Q on the alpha-lis set.
    Cascades {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Stationarity verdict and the stationary measure when it exists.
    Stationary {
        #[arg(long)]
        model: PathBuf,
        /// Evaluate π on the cylinder of this word (newest letter first).
        #[arg(long = "cylinder")]
        cylinders: Vec<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Recurrence classification of a one-dimensional persistent walk.
    Classify1d {
        #[arg(long)]
        model: PathBuf,
    },
    /// Simulate a one-dimensional persistent walk.
    Simulate1d {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Simulate the chain itself from the configured init word.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Transition matrix of the bend chain of a two-dimensional walk.
    Kernel2d {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Simulate a two-dimensional persistent walk.
    Simulate2d {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Monte Carlo estimate of return probabilities of the skeleton.
    Dichotomy {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Semi-Markov kernel from one alpha-lis state, truncated at k_max.
    Kernel {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long = "k-max")]
        k_max: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check that the chain and walk views give the same Markov renewal process.
    DiagramCheck {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

impl Command {
    fn model(&self) -> &Path {
        match self {
            Command::Check { model, .. }
            | Command::Cascades { model, .. }
            | Command::Stationary { model, .. }
            | Command::Classify1d { model }
            | Command::Simulate1d { model, .. }
            | Command::Simulate { model, .. }
            | Command::Kernel2d { model, .. }
            | Command::Simulate2d { model, .. }
            | Command::Dichotomy { model, .. }
            | Command::Kernel { model, .. }
            | Command::DiagramCheck { model, .. } => model,
        }
    }
}

fn load(path: &Path) -> Result<ModelConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Model(format!("{}: {e}", path.display())))?;
    Ok(parse_model_config(&text)?)
}

fn dispatch(cmd: &Command, cfg: &ModelConfig) -> Result<RunReport, CliError> {
    match cmd {
        Command::Check { .. } => commands::check(cfg),
        Command::Cascades { csv, .. } => commands::cascades(cfg, csv.as_deref()),
        Command::Stationary { cylinders, csv, .. } => commands::stationary(cfg, cylinders, csv.as_deref()),
        Command::Classify1d { .. } => commands::classify1d(cfg),
        Command::Simulate1d { steps, seed, csv, .. } => commands::simulate1d(cfg, *steps, *seed, csv.as_deref()),
        Command::Simulate { steps, seed, csv, .. } => commands::simulate(cfg, *steps, *seed, csv.as_deref()),
        Command::Kernel2d { csv, .. } => commands::kernel2d(cfg, csv.as_deref()),
        Command::Simulate2d { steps, seed, csv, .. } => commands::simulate2d(cfg, *steps, *seed, csv.as_deref()),
        Command::Dichotomy { horizon, trials, seed, csv, .. } => {
            commands::dichotomy(cfg, *horizon, *trials, *seed, csv.as_deref())
        }
        Command::Kernel { source, k_max, csv, .. } => commands::kernel(cfg, source, *k_max, csv.as_deref()),
        Command::DiagramCheck { steps, seed, .. } => commands::diagram_check(cfg, *steps, *seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads {n}: {e}");
            return ExitCode::from(1);
        }
    }
    let start = Instant::now();
    let cfg = match load(cli.command.model()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let canonical = cfg.emit();
    if let Command::Check { canonical: true, .. } = cli.command {
        print!("{canonical}");
        return ExitCode::SUCCESS;
    }
    let fingerprint: String = Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let echo: Vec<String> = std::env::args().skip(1).collect();
    let code = match dispatch(&cli.command, &cfg) {
        Ok(r) => {
            print!("{}", r.render(&echo.join(" "), &fingerprint));
            r.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    ExitCode::from(code)
}
