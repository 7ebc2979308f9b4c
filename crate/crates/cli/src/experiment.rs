//! The experiment engine: load matrices, run a configured solve under a
//! fault schedule, recover eigenvectors, and persist plot-ready artifacts.

use std::path::Path;
use std::time::Instant;

use ec_eigen_core::coding::{self, CodingMatrix};
use ec_eigen_core::faults::FaultSchedule;
use ec_eigen_core::matrix::SymMatrix;
use ec_eigen_core::operators::FaultAwareSystem;
use ec_eigen_core::power::{power_solve, PowerConfig, PowerVariant};
use ec_eigen_core::recovery::recover_eigenpairs;
use ec_eigen_core::redundancy::{compute_redundancy, RedundancyBlocks};
use ec_eigen_core::result::{EigenResult, SolveStatus};
use ec_eigen_core::tracemin::{tracemin_solve, CgConfig, TraceMinConfig};
use ec_eigen_core::{io, linalg};
use nalgebra::DMatrix;

use crate::config::{Baseline, ExperimentConfig, MatrixSpec, SolverKind};
use crate::report::{
    self, BaselineReport, CodingReport, FaultLogJson, OracleReport, RecoveredJson, ResultsJson,
    TimingJson,
};
use crate::HarnessError;

/// Dense-oracle eigensolves are refused beyond this size.
pub const ORACLE_MAX_N: usize = 2000;

pub struct LoadedMatrix {
    pub matrix: SymMatrix,
    /// Exact spectrum when the generator knows it (ascending).
    pub known_spectrum: Option<Vec<f64>>,
    pub warning: Option<String>,
}

pub fn load_matrix(spec: &MatrixSpec) -> Result<LoadedMatrix, HarnessError> {
    match spec {
        MatrixSpec::Tridiagonal { n } => Ok(LoadedMatrix {
            matrix: ec_eigen_core::matrix::tridiagonal(*n),
            known_spectrum: None,
            warning: None,
        }),
        MatrixSpec::Identity { n } => Ok(LoadedMatrix {
            matrix: ec_eigen_core::matrix::identity(*n),
            known_spectrum: Some(vec![1.0; *n]),
            warning: None,
        }),
        MatrixSpec::RandomSpd { n, density, seed } => {
            let (matrix, spectrum) = ec_eigen_core::matrix::random_spd(*n, *density, *seed);
            Ok(LoadedMatrix { matrix, known_spectrum: Some(spectrum), warning: None })
        }
        MatrixSpec::File { path } => {
            let (matrix, warning) = io::read_symmetric_matrix_market(path)?;
            Ok(LoadedMatrix { matrix, known_spectrum: None, warning })
        }
        MatrixSpec::CovarianceCsv { path } => {
            let data = read_csv_matrix(path)?;
            let matrix = ec_eigen_core::matrix::covariance_from_samples(&data)?;
            Ok(LoadedMatrix { matrix, known_spectrum: None, warning: None })
        }
    }
}

/// Numeric CSV with one sample per row; a single leading header row is
/// skipped if it does not parse as numbers.
fn read_csv_matrix(path: &Path) -> Result<DMatrix<f64>, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> =
            t.split(',').map(|tok| tok.trim().parse::<f64>()).collect();
        match parsed {
            Ok(vals) => rows.push(vals),
            Err(_) if idx == 0 => continue, // header
            Err(e) => {
                return Err(HarnessError::Config(format!(
                    "{}:{}: bad number: {e}",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(HarnessError::Config(format!("{}: no data rows", path.display())));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(HarnessError::Config(format!("{}: ragged rows", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Reference eigenvalues for the wanted pairs, in solver order.
fn oracle_eigenvalues(
    matrix: &SymMatrix,
    known: Option<&Vec<f64>>,
    solver: SolverKind,
    wanted: usize,
) -> Option<Vec<f64>> {
    let ascending: Vec<f64> = match known {
        Some(s) => s.clone(),
        None => {
            if matrix.n() > ORACLE_MAX_N {
                return None;
            }
            let (vals, _) = linalg::sym_eig(&matrix.to_dense());
            vals.iter().cloned().collect()
        }
    };
    let n = ascending.len();
    let wanted = wanted.min(n);
    Some(match solver {
        SolverKind::Tracemin => ascending[..wanted].to_vec(),
        SolverKind::PowerExplicit | SolverKind::PowerImplicit => {
            // descending magnitude to match the solver's ordering
            let mut by_mag: Vec<f64> = ascending;
            by_mag.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
            by_mag[..wanted].to_vec()
        }
    })
}

struct PreparedCoding {
    e: CodingMatrix,
    blocks: RedundancyBlocks,
    encode_secs: f64,
}

fn prepare_coding(
    cfg: &ExperimentConfig,
    matrix: &SymMatrix,
) -> Result<Option<PreparedCoding>, HarnessError> {
    let Some(spec) = &cfg.coding else { return Ok(None) };
    let n = matrix.n();
    if spec.k > n {
        return Err(HarnessError::Config(format!("coding.k = {} exceeds n = {n}", spec.k)));
    }
    if let Some(dir) = &spec.blocks_dir {
        let e = io::read_coding_matrix(dir)?;
        if e.n() != n || e.k() != spec.k {
            return Err(HarnessError::Config(format!(
                "persisted coding matrix is {}x{}, config wants {}x{}",
                e.n(),
                e.k(),
                n,
                spec.k
            )));
        }
        let blocks = io::read_blocks(dir)?;
        return Ok(Some(PreparedCoding { e, blocks, encode_secs: 0.0 }));
    }
    let p = spec.p.unwrap_or_else(|| coding::default_p(spec.k));
    let start = Instant::now();
    let e = coding::build_staggered_coding_matrix(n, spec.k, p, cfg.coding_seed())?;
    let blocks = compute_redundancy(matrix, &e)?;
    Ok(Some(PreparedCoding { e, blocks, encode_secs: start.elapsed().as_secs_f64() }))
}

fn run_solver(
    sys: &mut FaultAwareSystem,
    schedule: &FaultSchedule,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<EigenResult, HarnessError> {
    let res = match cfg.solver {
        SolverKind::PowerImplicit | SolverKind::PowerExplicit => {
            let variant = if cfg.solver == SolverKind::PowerImplicit {
                PowerVariant::Implicit
            } else {
                PowerVariant::Explicit
            };
            let pc = PowerConfig {
                block_width: cfg.wanted,
                tolerance: cfg.epsilon,
                max_iterations: cfg.max_iterations,
                seed,
            };
            power_solve(sys, schedule, &pc, variant)?
        }
        SolverKind::Tracemin => {
            let tc = TraceMinConfig {
                wanted: cfg.wanted,
                tolerance: cfg.epsilon,
                max_outer: cfg.max_iterations,
                cg: CgConfig {
                    max_iterations: cfg.cg.max_iterations,
                    tolerance: cfg.cg.tolerance,
                },
                seed,
            };
            tracemin_solve(sys, schedule, &tc)?
        }
    };
    Ok(res)
}

/// Restart-from-scratch comparison: the uncoded solver is killed at every
/// fault iteration and restarted fresh; iterations accumulate across
/// segments.
fn run_restart_baseline(
    matrix: &SymMatrix,
    schedule: &FaultSchedule,
    cfg: &ExperimentConfig,
) -> Result<BaselineReport, HarnessError> {
    let n = matrix.n();
    // minimal throwaway coding context; the baseline never faults it
    let e = coding::build_staggered_coding_matrix(n, 1, 1, 0)?;
    let blocks = compute_redundancy(matrix, &e)?;
    let none = FaultSchedule::none();

    let start = Instant::now();
    let mut segments = Vec::new();
    let mut total = 0usize;
    let mut last_result: Option<EigenResult> = None;
    let fault_iters: Vec<usize> = schedule.events.iter().map(|e| e.iteration).collect();
    let mut prev = 0usize;
    let mut converged_early = false;
    for (attempt, &fi) in fault_iters.iter().enumerate() {
        let budget = fi.saturating_sub(prev).max(1);
        let mut capped = cfg.clone();
        capped.max_iterations = budget;
        let mut sys = FaultAwareSystem::new(matrix, &e, &blocks)?;
        let res = run_solver(&mut sys, &none, &capped, cfg.seed.wrapping_add(attempt as u64))?;
        segments.push(res.iterations);
        total += res.iterations;
        let done = res.converged();
        last_result = Some(res);
        if done {
            converged_early = true;
            break;
        }
        prev = fi;
    }
    if !converged_early {
        let mut sys = FaultAwareSystem::new(matrix, &e, &blocks)?;
        let res = run_solver(
            &mut sys,
            &none,
            cfg,
            cfg.seed.wrapping_add(fault_iters.len() as u64),
        )?;
        segments.push(res.iterations);
        total += res.iterations;
        last_result = Some(res);
    }
    let last = last_result.expect("at least one baseline segment runs");
    Ok(BaselineReport {
        cumulative_iterations: total,
        wall_time_secs: start.elapsed().as_secs_f64(),
        converged: last.converged(),
        segments,
        eigenvalues: last.eigenvalues.clone(),
    })
}

pub struct RunArtifacts {
    pub results: ResultsJson,
    pub result: EigenResult,
}

/// Run one configured experiment and persist `results.json`, `history.csv`,
/// `timing.csv` and `recovered.json` into the output directory.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    output_override: Option<&Path>,
) -> Result<RunArtifacts, HarnessError> {
    cfg.validate()?;
    let output = output_override
        .map(|p| p.to_path_buf())
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| HarnessError::Config("no output directory given".into()))?;
    std::fs::create_dir_all(&output)?;

    let loaded = load_matrix(&cfg.matrix)?;
    let matrix = loaded.matrix;
    let n = matrix.n();
    if let Some(w) = &loaded.warning {
        eprintln!("warning: {w}");
    }

    // Optional diagonal shift for indefinite inputs: solve A + sigma I,
    // report eigenvalues shifted back.
    let sigma = if cfg.shift {
        let lower = matrix.gershgorin_lower_bound();
        if lower < 0.0 {
            -lower + 0.01 * matrix.frobenius_norm()
        } else {
            0.0
        }
    } else {
        0.0
    };
    let work_matrix = if sigma > 0.0 { matrix.shifted(sigma) } else { matrix.clone() };

    let coding = prepare_coding(cfg, &work_matrix)?;
    let capacity = coding.as_ref().map(|c| c.e.k()).unwrap_or(0);
    let schedule = cfg.build_schedule(n, capacity.max(1))?;
    if cfg.scheduled_erasures() > capacity && !schedule.events.is_empty() {
        eprintln!(
            "warning: schedule erases {} rows but the coding capacity is {capacity}; \
             the run will stop when capacity is exceeded",
            cfg.scheduled_erasures()
        );
    }

    // fallback coding context for uncoded fault-free runs
    let (e, blocks, coding_report) = match coding {
        Some(c) => {
            let report = CodingReport {
                k: c.e.k(),
                p: c.e.p(),
                seed: c.e.seed(),
                nnz: c.e.nnz(),
                encode_secs: c.encode_secs,
            };
            (c.e, c.blocks, Some(report))
        }
        None => {
            let e = coding::build_staggered_coding_matrix(n, 1, 1, 0)?;
            let blocks = compute_redundancy(&work_matrix, &e)?;
            (e, blocks, None)
        }
    };

    let run_start = Instant::now();
    let mut sys = FaultAwareSystem::new(&work_matrix, &e, &blocks)?;
    let mut result = run_solver(&mut sys, &schedule, cfg, cfg.seed)?;
    let wall = run_start.elapsed().as_secs_f64();

    // shift back before any reporting or recovery
    if sigma > 0.0 {
        for v in result.eigenvalues.iter_mut() {
            *v -= sigma;
        }
    }

    // map solutions back to original coordinates and measure residuals
    // against the original (unshifted) matrix
    let mut recovered_residuals = None;
    if !result.eigenvalues.is_empty() {
        let rec = recover_eigenpairs(
            &result.eigenvalues,
            &result.eigenvectors,
            &e,
            sys.fault(),
        )?;
        let ad = matrix.to_dense();
        let residuals: Vec<f64> = rec
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(j, &lam)| {
                let v = rec.eigenvectors.column(j);
                (&ad * v - v * lam).norm()
            })
            .collect();
        let fault_map = rec
            .recovery_map
            .iter()
            .map(|&(row, col)| (row.to_string(), col))
            .collect();
        report::write_recovered_json(
            &output,
            &RecoveredJson {
                eigenvalues: rec.eigenvalues.clone(),
                residuals: residuals.clone(),
                fault_map,
            },
        )?;
        if cfg.dump_eigenvectors {
            io::write_matrix_market_array(output.join("eigenvectors.mtx"), &rec.eigenvectors)?;
        }
        recovered_residuals = Some(residuals);
        result.recovered = Some(rec);
    }

    let oracle = oracle_eigenvalues(&matrix, loaded.known_spectrum.as_ref(), cfg.solver, cfg.wanted)
        .map(|reference| {
            let max_abs_error = reference
                .iter()
                .zip(&result.eigenvalues)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            OracleReport { eigenvalues: reference, max_abs_error, scale: matrix.frobenius_norm() }
        });

    let baseline = match cfg.baseline {
        Baseline::None => None,
        Baseline::RestartOnFault => Some(run_restart_baseline(&matrix, &schedule, cfg)?),
    };

    let (status, error) = report::status_string(&result.status);
    let results = ResultsJson {
        status: status.to_string(),
        error,
        config: cfg.clone(),
        matrix_n: n,
        matrix_nnz: matrix.nnz(),
        matrix_frobenius_norm: matrix.frobenius_norm(),
        coding: coding_report,
        shift: sigma,
        eigenvalues: result.eigenvalues.clone(),
        recovered_residuals,
        oracle,
        iterations: result.iterations,
        converged: result.converged(),
        final_residual: result.final_residual(),
        wall_time_secs: wall,
        timing: TimingJson {
            total_secs: result.timing.total,
            phase_totals: result.timing.phase_totals.into(),
            phase_medians: result.timing.phase_medians.into(),
        },
        fault_log: result
            .fault_log
            .iter()
            .map(|f| FaultLogJson {
                iteration: f.iteration,
                rows: f.rows.clone(),
                assigned_columns: f.assigned_columns.clone(),
            })
            .collect(),
        schedule,
        baseline,
        load_warning: loaded.warning,
    };

    report::write_results_json(&output, &results)?;
    report::write_history_csv(&output, &result)?;
    report::write_timing_csv(&output, &result)?;
    Ok(RunArtifacts { results, result })
}

/// Exit code the CLI should report for a finished run.
pub fn exit_code_for(status: &SolveStatus) -> i32 {
    match status {
        SolveStatus::Converged | SolveStatus::MaxIterations => 0,
        SolveStatus::CapacityExceeded => 4,
        SolveStatus::Failed(_) => 3,
    }
}
