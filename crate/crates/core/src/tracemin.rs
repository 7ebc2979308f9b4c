//! Trace-minimization eigensolver for the smallest eigenpairs, tolerant of
//! erasures through the reconstituted operators.
//!
//! Each outer iteration projects onto the current block, extracts Ritz pairs
//! in ascending order, and refines the subspace by solving `A Z = B X`
//! approximately with per-column conjugate gradients before
//! B-orthonormalizing `Z` into the next basis. Lowering the trace of the
//! projected block is what drives the smallest eigenpairs out; the inner
//! solves only need to be accurate enough to keep that descent going.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::faults::{FaultEvent, FaultSchedule};
use crate::linalg;
use crate::operators::FaultAwareSystem;
use crate::power::{randn_block, reinit_rows};
use crate::result::{
    EigenResult, FaultLogEntry, IterationRecord, PhaseTimes, SolveStatus, TimingBreakdown,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig {
    pub max_iterations: usize,
    /// Per-column relative residual target against the right-hand side.
    pub tolerance: f64,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceMinConfig {
    /// Number of wanted (smallest) eigenpairs; the working block is twice as
    /// wide.
    pub wanted: usize,
    /// Per-column relative residual threshold on the wanted pairs.
    pub tolerance: f64,
    pub max_outer: usize,
    pub cg: CgConfig,
    pub seed: u64,
}

impl TraceMinConfig {
    pub fn block_size(&self) -> usize {
        2 * self.wanted
    }
}

/// Approximate block solve of `op(Z) = RHS` by conjugate gradients, one
/// column at a time. Convergence is judged against the *initial* defect
/// `RHS - op(X0)` (which is the right-hand side itself for a zero start), so
/// warm-started solves keep reducing the defect instead of exiting early.
/// Returns the solution block and the largest per-column iteration count.
/// Breaks down (with an error) on directions of nonpositive curvature, i.e.
/// when the operator is not positive definite.
pub fn cg_solve<F>(
    op: &F,
    rhs: &DMatrix<f64>,
    x0: Option<&DMatrix<f64>>,
    cfg: &CgConfig,
) -> Result<(DMatrix<f64>, usize)>
where
    F: Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let (n, m) = rhs.shape();
    let mut solution = DMatrix::zeros(n, m);
    let mut worst_iters = 0usize;
    for j in 0..m {
        let b = rhs.column(j).into_owned();
        let mut x = match x0 {
            Some(g) => g.column(j).into_owned(),
            None => DVector::zeros(n),
        };
        let col_mat = |v: &DVector<f64>| -> Result<DVector<f64>> {
            let block = DMatrix::from_column_slice(n, 1, v.as_slice());
            Ok(op(&block)?.column(0).into_owned())
        };
        let mut r = &b - col_mat(&x)?;
        let r0_norm = r.norm();
        if r0_norm == 0.0 {
            solution.set_column(j, &x);
            continue;
        }
        let mut p = r.clone();
        let mut rs = r.norm_squared();
        let mut iters = 0usize;
        while rs.sqrt() > cfg.tolerance * r0_norm && iters < cfg.max_iterations {
            let ap = col_mat(&p)?;
            let pap = p.dot(&ap);
            if pap <= 0.0 {
                return Err(Error::CgBreakdown);
            }
            let alpha = rs / pap;
            x += alpha * &p;
            r -= alpha * ap;
            let rs_new = r.norm_squared();
            p = &r + (rs_new / rs) * p;
            rs = rs_new;
            iters += 1;
        }
        worst_iters = worst_iters.max(iters);
        solution.set_column(j, &x);
    }
    Ok((solution, worst_iters))
}

/// B-orthonormalize `Z`: returns `V` with `V^T B' V = I` spanning the same
/// space. The Gram-matrix Cholesky route is tried first; on rank deficiency
/// a modified Gram-Schmidt pass replaces collapsed columns with seeded random
/// vectors and retries once before giving up.
pub fn b_orthonormalize(
    z: &DMatrix<f64>,
    sys: &FaultAwareSystem,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    if let Some(v) = try_gram_cholesky(z, sys)? {
        return Ok(v);
    }
    let repaired = mgs_repair(z, sys, rng)?;
    match try_gram_cholesky(&repaired, sys)? {
        Some(v) => Ok(v),
        None => Err(Error::RankDeficientBlock),
    }
}

fn try_gram_cholesky(z: &DMatrix<f64>, sys: &FaultAwareSystem) -> Result<Option<DMatrix<f64>>> {
    let bz = sys.apply_b(z)?;
    let gram = linalg::symmetrize(&(z.transpose() * bz));
    let Some(chol) = gram.cholesky() else { return Ok(None) };
    let l = chol.l();
    // A pivot collapsing by seven orders of magnitude means the factorization
    // "succeeded" on a numerically rank-deficient Gram matrix; route such
    // blocks through the Gram-Schmidt repair instead.
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for i in 0..l.nrows() {
        dmin = dmin.min(l[(i, i)]);
        dmax = dmax.max(l[(i, i)]);
    }
    if dmin <= 1e-7 * dmax {
        return Ok(None);
    }
    Ok(l.solve_lower_triangular(&z.transpose()).map(|s| s.transpose()))
}

fn mgs_repair(
    z: &DMatrix<f64>,
    sys: &FaultAwareSystem,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    let (n, m) = z.shape();
    let mut v = z.clone();
    for j in 0..m {
        let mut replaced = false;
        loop {
            let mut col = v.column(j).into_owned();
            let original_scale = col.norm_squared().max(1e-300);
            for _ in 0..2 {
                for i in 0..j {
                    let vi = v.column(i).into_owned();
                    let bvi = sys
                        .apply_b(&DMatrix::from_column_slice(n, 1, vi.as_slice()))?
                        .column(0)
                        .into_owned();
                    let proj = bvi.dot(&col);
                    col -= proj * vi;
                }
            }
            let bcol = sys
                .apply_b(&DMatrix::from_column_slice(n, 1, col.as_slice()))?
                .column(0)
                .into_owned();
            let b_norm_sq = bcol.dot(&col);
            // deficiency is judged against the column's size before projection
            if b_norm_sq > 1e-20 * original_scale {
                v.set_column(j, &(col / b_norm_sq.sqrt()));
                break;
            }
            if replaced {
                return Err(Error::RankDeficientBlock);
            }
            // collapsed: drop the column and substitute seeded random data
            let fresh = randn_block(n, 1, rng);
            v.set_column(j, &fresh.column(0));
            replaced = true;
        }
    }
    Ok(v)
}

pub fn tracemin_solve(
    sys: &mut FaultAwareSystem,
    schedule: &FaultSchedule,
    cfg: &TraceMinConfig,
) -> Result<EigenResult> {
    let n = sys.n();
    let s = cfg.wanted;
    let s2 = cfg.block_size();
    if s == 0 || s2 > n {
        return Err(Error::InvalidDimensions(format!(
            "wanted {s} pairs needs block 2s = {s2} <= n = {n}"
        )));
    }
    if !(cfg.tolerance > 0.0) {
        return Err(Error::InvalidDimensions("tolerance must be positive".into()));
    }
    schedule.validate(n)?;

    let a_norm = sys.a_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut v = b_orthonormalize(&randn_block(n, s2, &mut rng), sys, &mut rng)?;

    let run_start = Instant::now();
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut fault_log: Vec<FaultLogEntry> = Vec::new();
    let mut eigenvalues: Vec<f64> = Vec::new();
    let mut eigenvectors = DMatrix::zeros(n, s);
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;

    'outer: for it in 1..=cfg.max_outer {
        let iter_start = Instant::now();
        let mut phases = PhaseTimes::default();
        let mut fault_rows: Option<Vec<usize>> = None;

        let due: Vec<FaultEvent> = schedule.events_at(it).cloned().collect();
        for ev in &due {
            match sys.inject(ev) {
                Ok(()) => {}
                Err(Error::CapacityExceeded { .. }) => {
                    status = SolveStatus::CapacityExceeded;
                    iterations = it - 1;
                    break 'outer;
                }
                Err(Error::SingularEncodingSubmatrix) => {
                    status = SolveStatus::Failed(
                        Error::SingularEncodingSubmatrix.to_string(),
                    );
                    iterations = it - 1;
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
            fault_log.push(FaultLogEntry {
                iteration: it,
                rows: ev.rows.clone(),
                assigned_columns: ev
                    .rows
                    .iter()
                    .map(|&r| sys.fault().assigned_column(r).unwrap())
                    .collect(),
            });
            reinit_rows(&mut v, &ev.rows, &mut rng);
            fault_rows.get_or_insert_with(Vec::new).extend(ev.rows.iter().copied());
        }
        if fault_rows.is_some() {
            let t = Instant::now();
            v = match b_orthonormalize(&v, sys, &mut rng) {
                Ok(v) => v,
                Err(Error::RankDeficientBlock) => {
                    status = SolveStatus::Failed(Error::RankDeficientBlock.to_string());
                    iterations = it - 1;
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            phases.qr += t.elapsed().as_secs_f64();
        }

        let t = Instant::now();
        let w = sys.apply_a(&v)?;
        phases.matvec += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let h = linalg::symmetrize(&(v.transpose() * &w));
        let (theta, y) = linalg::sym_eig(&h); // ascending
        let x = &v * &y;
        let ax = &w * &y;
        phases.projection += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let bx = sys.apply_b(&x)?;
        phases.matvec += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let theta_diag = DMatrix::from_diagonal(&theta);
        let residual = &ax - &bx * theta_diag;
        let mut worst = 0.0f64;
        for j in 0..s {
            worst = worst.max(residual.column(j).norm() / a_norm);
        }
        let subspace_trace = theta.iter().sum::<f64>();
        phases.projection += t.elapsed().as_secs_f64();

        eigenvalues = theta.iter().take(s).cloned().collect();
        eigenvectors = x.columns(0, s).into_owned();
        iterations = it;

        let converged = worst < cfg.tolerance;
        let mut cg_iterations = None;
        if !converged {
            let t = Instant::now();
            let apply = |blk: &DMatrix<f64>| sys.apply_a(blk);
            // Tighten the inner solves as the outer residual shrinks; a fixed
            // relative accuracy would leave a subspace-noise floor at its own
            // level and stall convergence below it.
            let inner = CgConfig {
                max_iterations: cfg.cg.max_iterations,
                tolerance: cfg.cg.tolerance.min(0.1 * worst).max(1e-14),
            };
            let (z, cg_iters) = match cg_solve(&apply, &bx, Some(&x), &inner) {
                Ok(out) => out,
                Err(Error::CgBreakdown) => {
                    status = SolveStatus::Failed(Error::CgBreakdown.to_string());
                    history.push(IterationRecord {
                        iteration: it,
                        r_rel: worst,
                        wall_secs: iter_start.elapsed().as_secs_f64(),
                        phases,
                        fault_rows,
                        cg_iterations: None,
                        subspace_trace: Some(subspace_trace),
                    });
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            cg_iterations = Some(cg_iters);
            phases.bsolve += t.elapsed().as_secs_f64();

            let t = Instant::now();
            v = match b_orthonormalize(&z, sys, &mut rng) {
                Ok(v) => v,
                Err(Error::RankDeficientBlock) => {
                    status = SolveStatus::Failed(Error::RankDeficientBlock.to_string());
                    history.push(IterationRecord {
                        iteration: it,
                        r_rel: worst,
                        wall_secs: iter_start.elapsed().as_secs_f64(),
                        phases,
                        fault_rows,
                        cg_iterations,
                        subspace_trace: Some(subspace_trace),
                    });
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            phases.qr += t.elapsed().as_secs_f64();
        }

        history.push(IterationRecord {
            iteration: it,
            r_rel: worst,
            wall_secs: iter_start.elapsed().as_secs_f64(),
            phases,
            fault_rows,
            cg_iterations,
            subspace_trace: Some(subspace_trace),
        });
        if converged {
            status = SolveStatus::Converged;
            break;
        }
    }

    let total = run_start.elapsed().as_secs_f64();
    Ok(EigenResult {
        status,
        eigenvalues,
        eigenvectors,
        recovered: None,
        iterations,
        timing: TimingBreakdown::from_history(&history, total),
        history,
        fault_log,
    })
}
