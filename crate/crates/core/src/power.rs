//! Generalized block power method with QR subspace iteration, tolerant of
//! erasures through the reconstituted operators.
//!
//! Two variants share one driver. The implicit variant applies `A'`/`B'`
//! through [`FaultAwareSystem`] without forming matrices; the explicit
//! variant materializes the reconstituted pair after each fault and works
//! with dense factorizations. Given the same seed and schedule the two
//! produce the same iterates up to round-off.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::faults::{FaultEvent, FaultSchedule};
use crate::linalg;
use crate::operators::FaultAwareSystem;
use crate::result::{
    EigenResult, FaultLogEntry, IterationRecord, PhaseTimes, SolveStatus, TimingBreakdown,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConfig {
    /// Width of the iterated block (number of wanted eigenpairs).
    pub block_width: usize,
    /// Relative residual threshold on `|A X - B X L|_F / |A|_F`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Seeds the initial block and the post-fault row reinitialization.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerVariant {
    /// Operator form; never builds `A'` or `B'`.
    Implicit,
    /// Dense reconstituted matrices, for cross-checking the operator path.
    Explicit,
}

struct ExplicitState {
    a_p: DMatrix<f64>,
    b_p: DMatrix<f64>,
    b_chol: Cholesky<f64, Dyn>,
}

impl ExplicitState {
    fn fresh(sys: &FaultAwareSystem) -> Result<Self> {
        let (a_p, b_p) = if sys.fault().is_empty() {
            let n = sys.n();
            (sys.matrix().to_dense(), DMatrix::identity(n, n))
        } else {
            sys.reconstitute_explicit()?
        };
        let b_chol =
            Cholesky::new(b_p.clone()).ok_or(Error::SingularEncodingSubmatrix)?;
        Ok(Self { a_p, b_p, b_chol })
    }
}

pub fn power_solve(
    sys: &mut FaultAwareSystem,
    schedule: &FaultSchedule,
    cfg: &PowerConfig,
    variant: PowerVariant,
) -> Result<EigenResult> {
    let n = sys.n();
    if cfg.block_width == 0 || cfg.block_width > n {
        return Err(Error::InvalidDimensions(format!(
            "block width {} outside 1..={n}",
            cfg.block_width
        )));
    }
    if !(cfg.tolerance > 0.0) {
        return Err(Error::InvalidDimensions("tolerance must be positive".into()));
    }
    schedule.validate(n)?;

    let m = cfg.block_width;
    let a_norm = sys.a_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = linalg::thin_q(&randn_block(n, m, &mut rng));

    let mut explicit = match variant {
        PowerVariant::Explicit => Some(ExplicitState::fresh(sys)?),
        PowerVariant::Implicit => None,
    };

    let run_start = Instant::now();
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut fault_log: Vec<FaultLogEntry> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;

    'outer: for it in 1..=cfg.max_iterations {
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
            reinit_rows(&mut x, &ev.rows, &mut rng);
            fault_rows.get_or_insert_with(Vec::new).extend(ev.rows.iter().copied());
        }
        if fault_rows.is_some() {
            if let Some(ex) = explicit.as_mut() {
                *ex = ExplicitState::fresh(sys)?;
            }
            let t = Instant::now();
            x = linalg::thin_q(&x);
            phases.qr += t.elapsed().as_secs_f64();
        }

        let t = Instant::now();
        let y = op_a(sys, explicit.as_ref(), &x)?;
        phases.matvec += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let z = match op_solve_b(sys, explicit.as_ref(), &y) {
            Ok(z) => z,
            Err(Error::SingularEncodingSubmatrix) => {
                status =
                    SolveStatus::Failed(Error::SingularEncodingSubmatrix.to_string());
                iterations = it - 1;
                break 'outer;
            }
            Err(e) => return Err(e),
        };
        phases.bsolve += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let q = linalg::thin_q(&z);
        phases.qr += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let aq = linalg::symmetrize(&(q.transpose() * op_a(sys, explicit.as_ref(), &q)?));
        let bq = linalg::symmetrize(&(q.transpose() * op_b(sys, explicit.as_ref(), &q)?));
        let (vals, u) = linalg::generalized_sym_eig(&aq, &bq)?;
        // descending magnitude, ties by index
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            vals[b].abs().partial_cmp(&vals[a].abs()).unwrap().then(a.cmp(&b))
        });
        lambda = order.iter().map(|&i| vals[i]).collect();
        let mut u_sorted = DMatrix::zeros(m, m);
        for (dst, &src) in order.iter().enumerate() {
            u_sorted.set_column(dst, &u.column(src));
        }
        let x_new = &q * u_sorted;
        let ax = op_a(sys, explicit.as_ref(), &x_new)?;
        let bx = op_b(sys, explicit.as_ref(), &x_new)?;
        let lam_diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda.clone()));
        let r_rel = (ax - bx * lam_diag).norm() / a_norm;
        phases.projection += t.elapsed().as_secs_f64();

        history.push(IterationRecord {
            iteration: it,
            r_rel,
            wall_secs: iter_start.elapsed().as_secs_f64(),
            phases,
            fault_rows,
            cg_iterations: None,
            subspace_trace: None,
        });
        iterations = it;
        x = x_new;
        if r_rel < cfg.tolerance {
            status = SolveStatus::Converged;
            break;
        }
    }

    let total = run_start.elapsed().as_secs_f64();
    Ok(EigenResult {
        status,
        eigenvalues: lambda,
        eigenvectors: x,
        recovered: None,
        iterations,
        timing: TimingBreakdown::from_history(&history, total),
        history,
        fault_log,
    })
}

fn op_a(
    sys: &FaultAwareSystem,
    explicit: Option<&ExplicitState>,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    match explicit {
        Some(ex) => Ok(&ex.a_p * x),
        None => sys.apply_a(x),
    }
}

fn op_b(
    sys: &FaultAwareSystem,
    explicit: Option<&ExplicitState>,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    match explicit {
        Some(ex) => Ok(&ex.b_p * x),
        None => sys.apply_b(x),
    }
}

fn op_solve_b(
    sys: &FaultAwareSystem,
    explicit: Option<&ExplicitState>,
    y: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    match explicit {
        Some(ex) => Ok(ex.b_chol.solve(y)),
        None => sys.solve_b(y),
    }
}

pub(crate) fn randn_block(n: usize, m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            b[(i, j)] = StandardNormal.sample(rng);
        }
    }
    b
}

pub(crate) fn reinit_rows(x: &mut DMatrix<f64>, rows: &[usize], rng: &mut ChaCha8Rng) {
    for &r in rows {
        for j in 0..x.ncols() {
            x[(r, j)] = StandardNormal.sample(rng);
        }
    }
}
