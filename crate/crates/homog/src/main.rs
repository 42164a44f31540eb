use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use homog::{commands, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "homog", version, about = "Periodic homogenization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` of the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structure conditions (and time modulus for mu < 2).
    CheckStructure,
    /// Solve the cell problem at each configured xi.
    CellSolve,
    /// Tabulate the effective flux over the configured lattice.
    Tabulate,
    /// Fine and homogenized parabolic solves.
    Solve,
    /// Full convergence study over the epsilon sweep.
    Study,
    /// Re-render plots from an existing report CSV.
    Report {
        #[arg(long)]
        csv: PathBuf,
    },
}

fn load(cli: &Cli) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Validation("--config is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| config.output_dir.clone());
    Ok((config, out))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Validation(e.to_string()))?;
    }
    if let Command::Report { csv } = &cli.command {
        let out = cli.out.clone().unwrap_or_else(|| csv.parent().map(PathBuf::from).unwrap_or_default());
        return commands::report(csv, &out);
    }
    let (config, out) = load(cli)?;
    match cli.command {
        Command::CheckStructure => commands::check_structure_cmd(&config, &out).map(drop),
        Command::CellSolve => commands::cell_solve(&config, &out).map(drop),
        Command::Tabulate => commands::tabulate(&config, &out),
        Command::Solve => commands::solve(&config, &out),
        Command::Study => commands::study(&config, &out).map(drop),
        Command::Report { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
