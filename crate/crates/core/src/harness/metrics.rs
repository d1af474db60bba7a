use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::HarnessError;

pub const METRICS_HEADER: &str = "generation,best_fitness,mean_fitness,pop_order,roster_size,breaks_so_far";

/// Per-generation CSV sink. Rows are flushed as they are written.
pub struct MetricsSink {
    path: PathBuf,
    file: File,
}

impl MetricsSink {
    /// Creates (or truncates) the file and writes the header.
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        let mut file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        writeln!(file, "{METRICS_HEADER}").map_err(|e| HarnessError::io(path, e))?;
        file.flush().map_err(|e| HarnessError::io(path, e))?;
        Ok(Self { path: path.to_path_buf(), file })
    }

    /// Keeps the header and the rows before `generation`, then appends from
    /// there. A missing file starts fresh.
    pub fn resume(path: &Path, generation: u64) -> Result<Self, HarnessError> {
        if !path.exists() {
            return Self::create(path);
        }
        let reader = BufReader::new(File::open(path).map_err(|e| HarnessError::io(path, e))?);
        let mut kept = vec![METRICS_HEADER.to_string()];
        for line in reader.lines().skip(1) {
            let line = line.map_err(|e| HarnessError::io(path, e))?;
            let row_gen = line.split(',').next().and_then(|g| g.parse::<u64>().ok());
            if row_gen.is_some_and(|g| g < generation) {
                kept.push(line);
            }
        }
        let mut text = kept.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| HarnessError::io(path, e))?;
        let file = OpenOptions::new().append(true).open(path).map_err(|e| HarnessError::io(path, e))?;
        Ok(Self { path: path.to_path_buf(), file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write_row(
        &mut self,
        generation: u64,
        best_fitness: f64,
        mean_fitness: f64,
        pop_order: u32,
        roster_size: usize,
        breaks_so_far: usize,
    ) -> Result<(), HarnessError> {
        writeln!(self.file, "{}", format_row(generation, best_fitness, mean_fitness, pop_order, roster_size, breaks_so_far))
            .and_then(|_| self.file.flush())
            .map_err(|e| HarnessError::io(&self.path, e))
    }
}

pub fn format_row(
    generation: u64,
    best_fitness: f64,
    mean_fitness: f64,
    pop_order: u32,
    roster_size: usize,
    breaks_so_far: usize,
) -> String {
    format!("{generation},{best_fitness:.6},{mean_fitness:.6},{pop_order},{roster_size},{breaks_so_far}")
}
