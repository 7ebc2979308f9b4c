//! Persisted run artifacts: `results.json`, `recovered.json`, `history.csv`
//! and `timing.csv`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use ec_eigen_core::faults::FaultSchedule;
use ec_eigen_core::result::{EigenResult, SolveStatus};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::HarnessError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub struct PhaseTimesJson {
    pub matvec: f64,
    pub bsolve: f64,
    pub qr: f64,
    pub projection: f64,
}

impl From<ec_eigen_core::result::PhaseTimes> for PhaseTimesJson {
    fn from(p: ec_eigen_core::result::PhaseTimes) -> Self {
        Self { matvec: p.matvec, bsolve: p.bsolve, qr: p.qr, projection: p.projection }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TimingJson {
    pub total_secs: f64,
    pub phase_totals: PhaseTimesJson,
    pub phase_medians: PhaseTimesJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct FaultLogJson {
    pub iteration: usize,
    pub rows: Vec<usize>,
    pub assigned_columns: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct CodingReport {
    pub k: usize,
    pub p: usize,
    pub seed: u64,
    pub nnz: usize,
    /// Cost of building E and the blocks, kept apart from solve time.
    pub encode_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct OracleReport {
    /// Reference eigenvalues for the wanted pairs, solver ordering.
    pub eigenvalues: Vec<f64>,
    pub max_abs_error: f64,
    /// Error scale: the Frobenius norm of the input.
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BaselineReport {
    pub cumulative_iterations: usize,
    pub wall_time_secs: f64,
    pub converged: bool,
    /// Iterations spent in each restart segment (last one runs to
    /// convergence).
    pub segments: Vec<usize>,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ResultsJson {
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub matrix_n: usize,
    pub matrix_nnz: usize,
    pub matrix_frobenius_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coding: Option<CodingReport>,
    pub shift: f64,
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovered_residuals: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_residual: Option<f64>,
    pub wall_time_secs: f64,
    pub timing: TimingJson,
    pub fault_log: Vec<FaultLogJson>,
    pub schedule: FaultSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_warning: Option<String>,
}

pub fn status_string(status: &SolveStatus) -> (&'static str, Option<String>) {
    match status {
        SolveStatus::Converged => ("converged", None),
        SolveStatus::MaxIterations => ("max-iterations", None),
        SolveStatus::CapacityExceeded => {
            ("capacity-exceeded", Some("fault capacity was exceeded".into()))
        }
        SolveStatus::Failed(msg) => ("failed", Some(msg.clone())),
    }
}

/// Per spec of the recovery interface: eigenvalues, per-pair residuals
/// against the original matrix, and the fault-to-coding-column map.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RecoveredJson {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fault_map: std::collections::BTreeMap<String, usize>,
}

pub fn write_results_json(dir: &Path, results: &ResultsJson) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(results)
        .map_err(|e| HarnessError::Config(format!("serializing results: {e}")))?;
    fs::write(dir.join("results.json"), text)?;
    Ok(())
}

pub fn read_results_json(dir: &Path) -> Result<ResultsJson, HarnessError> {
    let path = dir.join("results.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| HarnessError::Config(format!("bad results.json in {}: {e}", dir.display())))
}

pub fn write_recovered_json(dir: &Path, rec: &RecoveredJson) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(rec)
        .map_err(|e| HarnessError::Config(format!("serializing recovery: {e}")))?;
    fs::write(dir.join("recovered.json"), text)?;
    Ok(())
}

pub fn write_history_csv(dir: &Path, result: &EigenResult) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let file = File::create(dir.join("history.csv"))?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "iteration,r_rel,wall_secs,matvec_secs,bsolve_secs,qr_secs,projection_secs,cg_iterations,fault_rows"
    )?;
    for rec in &result.history {
        let cg = rec.cg_iterations.map(|c| c.to_string()).unwrap_or_default();
        let faults = rec
            .fault_rows
            .as_ref()
            .map(|rows| {
                rows.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(";")
            })
            .unwrap_or_default();
        writeln!(
            w,
            "{},{:.17e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{},{}",
            rec.iteration,
            rec.r_rel,
            rec.wall_secs,
            rec.phases.matvec,
            rec.phases.bsolve,
            rec.phases.qr,
            rec.phases.projection,
            cg,
            faults
        )?;
    }
    Ok(())
}

pub fn write_timing_csv(dir: &Path, result: &EigenResult) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let file = File::create(dir.join("timing.csv"))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "phase,total_secs,median_secs")?;
    let t = &result.timing;
    for (name, total, median) in [
        ("matvec", t.phase_totals.matvec, t.phase_medians.matvec),
        ("bsolve", t.phase_totals.bsolve, t.phase_medians.bsolve),
        ("qr", t.phase_totals.qr, t.phase_medians.qr),
        ("projection", t.phase_totals.projection, t.phase_medians.projection),
    ] {
        writeln!(w, "{name},{total:.6e},{median:.6e}")?;
    }
    writeln!(w, "total,{:.6e},", t.total)?;
    Ok(())
}
