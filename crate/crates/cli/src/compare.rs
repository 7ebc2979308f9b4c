//! Cross-run comparison tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::report::{read_results_json, ResultsJson};
use crate::HarnessError;

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub scenario: String,
    pub iterations: usize,
    pub wall_time_secs: f64,
    pub iter_overhead_vs_no_fault: Option<f64>,
    pub time_overhead: Option<f64>,
    pub max_eigenvalue_error_vs_oracle: Option<f64>,
}

#[derive(Debug)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Index of the run used as the fault-free reference.
    pub baseline_index: usize,
}

/// Compare runs that share a matrix and wanted-pair count. The reference for
/// overhead columns is the first run without fault events (or the first run
/// if all of them fault).
pub fn compare_runs(inputs: &[PathBuf]) -> Result<Comparison, HarnessError> {
    if inputs.is_empty() {
        return Err(HarnessError::Config("nothing to compare".into()));
    }
    let mut loaded: Vec<(String, ResultsJson)> = Vec::new();
    for dir in inputs {
        let name = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        loaded.push((name, read_results_json(dir)?));
    }
    let (_, first) = &loaded[0];
    for (name, r) in &loaded[1..] {
        if r.config.matrix != first.config.matrix || r.config.wanted != first.config.wanted {
            return Err(HarnessError::Incompatible(format!(
                "run {name} uses a different matrix or wanted-pair count"
            )));
        }
    }
    let baseline_index = loaded
        .iter()
        .position(|(_, r)| r.schedule.events.is_empty())
        .unwrap_or(0);
    let base_iters = loaded[baseline_index].1.iterations as f64;
    let base_time = loaded[baseline_index].1.wall_time_secs;

    let rows = loaded
        .iter()
        .map(|(name, r)| ComparisonRow {
            scenario: name.clone(),
            iterations: r.iterations,
            wall_time_secs: r.wall_time_secs,
            iter_overhead_vs_no_fault: (base_iters > 0.0)
                .then(|| (r.iterations as f64 - base_iters) / base_iters),
            time_overhead: (base_time > 0.0).then(|| (r.wall_time_secs - base_time) / base_time),
            max_eigenvalue_error_vs_oracle: r.oracle.as_ref().map(|o| o.max_abs_error),
        })
        .collect();
    Ok(Comparison { rows, baseline_index })
}

pub fn write_comparison_csv(path: &Path, cmp: &Comparison) -> Result<(), HarnessError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "scenario,iterations,wall_time_secs,iter_overhead_vs_no_fault,time_overhead,max_eigenvalue_error_vs_oracle"
    )?;
    for row in &cmp.rows {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{:.6e},{},{},{}",
            row.scenario,
            row.iterations,
            row.wall_time_secs,
            fmt_opt(row.iter_overhead_vs_no_fault),
            fmt_opt(row.time_overhead),
            fmt_opt(row.max_eigenvalue_error_vs_oracle)
        )?;
    }
    Ok(())
}
