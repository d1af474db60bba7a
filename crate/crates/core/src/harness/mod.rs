//! Experiment orchestration: config loading, the generation loop, metrics,
//! checkpoints, seed sweeps and the snapshot verifier.

mod checkpoint;
mod inspect;
mod metrics;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT};
pub use inspect::{inspect, BreakRow, InspectSummary};
pub use metrics::{format_row, MetricsSink, METRICS_HEADER};
pub use verify::{verify, InvariantCheck, VerifyReport};

use crate::config::{RunConfig, ValidationError};
use crate::envs::EnvSpec;
use crate::symbio::{GenerationOutcome, SymbioError, Symbiosis};

pub const OUTPUT_DIR_ENV: &str = "SOSAGE_OUTPUT_DIR";
pub const SWEEP_HEADER: &str = "seed,solved,generations_to_solve,final_pop_order,breaks";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("config digest mismatch: checkpoint has {expected}, config hashes to {found}")]
    DigestMismatch { expected: String, found: String },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Symbio(#[from] SymbioError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn parse(path: &Path, e: &serde_json::Error) -> Self {
        HarnessError::Parse { path: path.to_path_buf(), line: e.line(), column: e.column(), message: e.to_string() }
    }

    /// Config and usage problems, as opposed to I/O or run failures.
    pub fn is_config_error(&self) -> bool {
        matches!(self, HarnessError::Parse { .. } | HarnessError::Validation(_) | HarnessError::DigestMismatch { .. })
    }
}

/// Parses and validates a config file. Missing fields take their defaults.
pub fn load_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let config: RunConfig = serde_json::from_str(&text).map_err(|e| HarnessError::parse(path, &e))?;
    config.validate()?;
    Ok(config)
}

/// `SOSAGE_OUTPUT_DIR` when set and non-empty, else the configured directory.
pub fn resolve_output_dir(config: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => config.output_dir.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub solved: bool,
    pub generations_to_solve: Option<u64>,
    pub generations_run: u64,
    pub final_pop_order: u32,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub break_events: usize,
    /// Outcomes of the generations run by this call.
    #[serde(skip)]
    pub trace: Vec<GenerationOutcome>,
}

pub fn metrics_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("metrics_seed{seed}.csv"))
}

pub fn checkpoint_path(dir: &Path, seed: u64, generation: Option<u64>) -> PathBuf {
    match generation {
        Some(g) => dir.join(format!("checkpoint_seed{seed}_gen{g:05}.json")),
        None => dir.join(format!("checkpoint_seed{seed}_final.json")),
    }
}

/// Runs a fresh experiment into `output_dir`, returning its report.
pub fn run_symbiosis(config: &RunConfig) -> Result<RunReport, HarnessError> {
    run_symbiosis_with(config, &mut |_| {})
}

/// Same as [`run_symbiosis`] with a per-generation callback.
pub fn run_symbiosis_with(
    config: &RunConfig,
    progress: &mut dyn FnMut(&GenerationOutcome),
) -> Result<RunReport, HarnessError> {
    let env = config.validate()?;
    let dir = prepare_dir(config)?;
    let state = Symbiosis::initialize(config, &env)?;
    let sink = MetricsSink::create(&metrics_path(&dir, config.evolution.seed))?;
    drive(config, &env, state, None, sink, &dir, progress)
}

/// Continues a run from a checkpoint. Metrics rows from the checkpoint's
/// generation onward are replaced.
pub fn resume(checkpoint: &Checkpoint, progress: &mut dyn FnMut(&GenerationOutcome)) -> Result<RunReport, HarnessError> {
    let config = &checkpoint.config;
    let env = config.validate()?;
    let dir = prepare_dir(config)?;
    let state = checkpoint.restore()?;
    let sink = MetricsSink::resume(&metrics_path(&dir, config.evolution.seed), checkpoint.generation)?;
    drive(config, &env, state, checkpoint.generations_to_solve, sink, &dir, progress)
}

fn prepare_dir(config: &RunConfig) -> Result<PathBuf, HarnessError> {
    let dir = resolve_output_dir(config);
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    Ok(dir)
}

fn drive(
    config: &RunConfig,
    env: &EnvSpec,
    mut state: Symbiosis,
    mut generations_to_solve: Option<u64>,
    mut sink: MetricsSink,
    dir: &Path,
    progress: &mut dyn FnMut(&GenerationOutcome),
) -> Result<RunReport, HarnessError> {
    let seed = config.evolution.seed;
    let mut trace = Vec::new();
    while generations_to_solve.is_none() && state.generation < config.evolution.max_generations {
        let out = state.step(config, env)?;
        sink.write_row(out.generation, out.best_fitness, out.mean_fitness, out.pop_order, out.roster_size, out.breaks_so_far)?;
        progress(&out);
        if out.solved {
            generations_to_solve = Some(out.generation + 1);
        }
        trace.push(out);
        if config.checkpoint_every > 0 && state.generation.is_multiple_of(config.checkpoint_every) && generations_to_solve.is_none() {
            let path = checkpoint_path(dir, seed, Some(state.generation));
            save_checkpoint(&path, &Checkpoint::capture(config, &state, None))?;
        }
    }
    let final_path = checkpoint_path(dir, seed, None);
    save_checkpoint(&final_path, &Checkpoint::capture(config, &state, generations_to_solve))?;
    Ok(RunReport {
        seed,
        solved: generations_to_solve.is_some(),
        generations_to_solve,
        generations_run: state.generation,
        final_pop_order: state.population.pop_order_n,
        metrics_path: sink.path().to_path_buf(),
        checkpoint_path: final_path,
        break_events: state.population.break_log.len(),
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub solved: bool,
    pub generations_to_solve: Option<u64>,
    pub final_pop_order: u32,
    pub breaks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub summary_path: PathBuf,
}

impl SweepReport {
    pub fn solved_count(&self) -> usize {
        self.rows.iter().filter(|r| r.solved).count()
    }

    /// Median generations to solve, with unsolved seeds counted as
    /// `unsolved_as` (normally one past the budget).
    pub fn median_generations(&self, unsolved_as: u64) -> f64 {
        let mut gens: Vec<u64> = self.rows.iter().map(|r| r.generations_to_solve.unwrap_or(unsolved_as)).collect();
        gens.sort_unstable();
        match gens.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => gens[n / 2] as f64,
            n => (gens[n / 2 - 1] + gens[n / 2]) as f64 / 2.0,
        }
    }
}

/// Runs seeds `seed .. seed + seeds` in parallel and writes
/// `sweep_summary.csv` next to the per-seed outputs.
pub fn sweep(config: &RunConfig, seeds: u64) -> Result<SweepReport, HarnessError> {
    config.validate()?;
    let dir = prepare_dir(config)?;
    let base = config.evolution.seed;
    let reports: Vec<Result<RunReport, HarnessError>> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let mut cfg = config.clone();
            cfg.evolution.seed = base.wrapping_add(i);
            cfg.output_dir = dir.clone();
            run_symbiosis(&cfg)
        })
        .collect();
    let mut rows = Vec::with_capacity(reports.len());
    for report in reports {
        let r = report?;
        rows.push(SweepRow {
            seed: r.seed,
            solved: r.solved,
            generations_to_solve: r.generations_to_solve,
            final_pop_order: r.final_pop_order,
            breaks: r.break_events,
        });
    }
    let mut text = format!("{SWEEP_HEADER}\n");
    for r in &rows {
        let gens = r.generations_to_solve.map(|g| g.to_string()).unwrap_or_default();
        text.push_str(&format!("{},{},{},{},{}\n", r.seed, r.solved, gens, r.final_pop_order, r.breaks));
    }
    let summary_path = dir.join("sweep_summary.csv");
    fs::write(&summary_path, text).map_err(|e| HarnessError::io(&summary_path, e))?;
    Ok(SweepReport { rows, summary_path })
}
