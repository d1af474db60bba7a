use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sosage::harness::{self, HarnessError};

const EXIT_UNSOLVED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "sosage", version, about = "Symbiotic agent simulator with population-order breaking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        no_breaks: bool,
        #[arg(long)]
        no_reverse: bool,
        /// Exit 1 when the run ends unsolved.
        #[arg(long)]
        require_solve: bool,
    },
    /// Continue a run from a checkpoint.
    Resume {
        checkpoint: PathBuf,
        #[arg(long)]
        require_solve: bool,
    },
    /// Summarize a checkpoint.
    Inspect {
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check every invariant against a checkpoint.
    Verify { checkpoint: PathBuf },
    /// Run consecutive seeds and write a summary CSV.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        no_breaks: bool,
        #[arg(long)]
        no_reverse: bool,
        /// Exit 1 when any seed ends unsolved.
        #[arg(long)]
        require_solve: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, HarnessError> {
    match command {
        Command::Run { config, seed, no_breaks, no_reverse, require_solve } => {
            let config = configure(&config, seed, no_breaks, no_reverse)?;
            let report = harness::run_symbiosis_with(&config, &mut progress)?;
            eprintln!("{}", summary_line(&report));
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            Ok(solve_code(report.solved, require_solve))
        }
        Command::Resume { checkpoint, require_solve } => {
            let ckpt = harness::load_checkpoint(&checkpoint, None)?;
            let report = harness::resume(&ckpt, &mut progress)?;
            eprintln!("{}", summary_line(&report));
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            Ok(solve_code(report.solved, require_solve))
        }
        Command::Inspect { checkpoint, format } => {
            let summary = harness::inspect(&harness::load_checkpoint(&checkpoint, None)?);
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes")),
                Format::Text => print!("{summary}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { checkpoint } => {
            let report = harness::verify(&harness::read_checkpoint(&checkpoint)?);
            print!("{report}");
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VERIFY) })
        }
        Command::Sweep { config, seeds, no_breaks, no_reverse, require_solve } => {
            let config = configure(&config, None, no_breaks, no_reverse)?;
            let report = harness::sweep(&config, seeds)?;
            eprintln!(
                "{} of {} seeds solved; summary at {}",
                report.solved_count(),
                report.rows.len(),
                report.summary_path.display()
            );
            print!("{}", std::fs::read_to_string(&report.summary_path).unwrap_or_default());
            Ok(solve_code(report.solved_count() == report.rows.len(), require_solve))
        }
    }
}

fn configure(
    path: &Path,
    seed: Option<u64>,
    no_breaks: bool,
    no_reverse: bool,
) -> Result<sosage::config::RunConfig, HarnessError> {
    let mut config = harness::load_config(path)?;
    if let Some(seed) = seed {
        config.evolution.seed = seed;
    }
    config.breaks_enabled &= !no_breaks;
    config.reverse_enabled &= !no_reverse;
    Ok(config)
}

fn progress(out: &sosage::symbio::GenerationOutcome) {
    eprintln!(
        "gen {:>4}  best {:>9.4}  mean {:>9.4}  order {}  roster {}  breaks {}",
        out.generation, out.best_fitness, out.mean_fitness, out.pop_order, out.roster_size, out.breaks_so_far
    );
}

fn summary_line(report: &harness::RunReport) -> String {
    match report.generations_to_solve {
        Some(g) => format!("solved in {g} generations; metrics at {}", report.metrics_path.display()),
        None => format!("unsolved after {} generations; metrics at {}", report.generations_run, report.metrics_path.display()),
    }
}

fn solve_code(solved: bool, require_solve: bool) -> ExitCode {
    if require_solve && !solved {
        ExitCode::from(EXIT_UNSOLVED)
    } else {
        ExitCode::SUCCESS
    }
}
