//! Solver output: eigenpairs, per-iteration history, timing and fault log.

use nalgebra::DMatrix;

use crate::recovery::RecoveredEigenpairs;

/// How a solve ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// Iteration budget exhausted; partial results are still returned.
    MaxIterations,
    /// A fault arrived past the coding capacity; the solver stopped.
    CapacityExceeded,
    /// Numerical failure mid-run (singular encoding submatrix, CG breakdown).
    Failed(String),
}

impl SolveStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, SolveStatus::Converged)
    }
}

/// Wall-clock seconds spent in each phase of one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimes {
    pub matvec: f64,
    pub bsolve: f64,
    pub qr: f64,
    pub projection: f64,
}

impl PhaseTimes {
    pub fn total(&self) -> f64 {
        self.matvec + self.bsolve + self.qr + self.projection
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    pub r_rel: f64,
    /// Wall time of this iteration.
    pub wall_secs: f64,
    pub phases: PhaseTimes,
    /// Rows erased at this iteration, if a fault was injected.
    pub fault_rows: Option<Vec<usize>>,
    /// Inner CG iterations (trace-minimization solver only).
    pub cg_iterations: Option<usize>,
    /// Block trace `tr(X^T A X)` (trace-minimization solver only).
    pub subspace_trace: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FaultLogEntry {
    pub iteration: usize,
    pub rows: Vec<usize>,
    /// Coding columns serving those rows after the event.
    pub assigned_columns: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct TimingBreakdown {
    pub total: f64,
    pub phase_totals: PhaseTimes,
    /// Per-iteration medians, for breakdown plots robust to outliers.
    pub phase_medians: PhaseTimes,
}

impl TimingBreakdown {
    pub fn from_history(history: &[IterationRecord], total: f64) -> Self {
        let mut totals = PhaseTimes::default();
        for rec in history {
            totals.matvec += rec.phases.matvec;
            totals.bsolve += rec.phases.bsolve;
            totals.qr += rec.phases.qr;
            totals.projection += rec.phases.projection;
        }
        let median = |extract: fn(&PhaseTimes) -> f64| -> f64 {
            let mut v: Vec<f64> = history.iter().map(|r| extract(&r.phases)).collect();
            if v.is_empty() {
                return 0.0;
            }
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        let medians = PhaseTimes {
            matvec: median(|p| p.matvec),
            bsolve: median(|p| p.bsolve),
            qr: median(|p| p.qr),
            projection: median(|p| p.projection),
        };
        TimingBreakdown { total, phase_totals: totals, phase_medians: medians }
    }
}

/// Result of one eigensolve.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub status: SolveStatus,
    /// Eigenvalues in solver order (descending for the power method,
    /// ascending for trace minimization).
    pub eigenvalues: Vec<f64>,
    /// Matching vectors in reconstituted coordinates.
    pub eigenvectors: DMatrix<f64>,
    /// Vectors mapped back to original coordinates; filled by `finalize`.
    pub recovered: Option<RecoveredEigenpairs>,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub timing: TimingBreakdown,
    pub fault_log: Vec<FaultLogEntry>,
}

impl EigenResult {
    pub fn converged(&self) -> bool {
        self.status.is_converged()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.history.last().map(|r| r.r_rel)
    }
}
