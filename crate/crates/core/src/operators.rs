//! Reconstituted operators.
//!
//! After erasures the solver works with the generalized pair `(A', B')`:
//! the surviving rows and columns of `A` (respectively the identity) with
//! every erased row/column replaced by the matching column of `R`
//! (respectively `E`) and the faulty-faulty intersections by entries of `S`
//! (respectively `T`). Neither matrix is ever formed in production: `apply_a`
//! and `apply_b` push blocks of vectors through the masked original operator
//! plus low-rank corrections, and `solve_b` uses the closed-form inverse of
//! `B'`, whose only nontrivial factor is the cached Cholesky factorization of
//! the small `E_F^T E_F`.

use nalgebra::DMatrix;

use crate::coding::CodingMatrix;
use crate::error::{Error, Result};
use crate::faults::{self, FaultEvent, FaultState};
use crate::matrix::SymMatrix;
use crate::redundancy::RedundancyBlocks;

/// The original problem plus redundancy and the current fault state, exposing
/// the implicit reconstituted operators.
#[derive(Debug, Clone)]
pub struct FaultAwareSystem<'a> {
    a: &'a SymMatrix,
    e: &'a CodingMatrix,
    blocks: &'a RedundancyBlocks,
    fault: FaultState,
    a_fro: f64,
    mask: Vec<bool>,
    active: Option<ActiveBlocks>,
}

/// Dense working copies of the leading `l` coding columns, rebuilt whenever
/// the fault set changes. `l <= k` is small, so these are cheap.
#[derive(Debug, Clone)]
struct ActiveBlocks {
    /// `E` restricted to the active coding columns, all rows.
    e_a: DMatrix<f64>,
    /// `e_a` with the faulty rows zeroed (the `E_C` part in place).
    e_c: DMatrix<f64>,
    /// `R` restricted to the active coding columns, all rows.
    r_a: DMatrix<f64>,
    /// `S_l - R_a[F,:] - R_a[F,:]^T`: correction for double-counted terms.
    corr_a: DMatrix<f64>,
    /// `T_l - E_a[F,:] - E_a[F,:]^T`.
    corr_b: DMatrix<f64>,
}

impl<'a> FaultAwareSystem<'a> {
    pub fn new(
        a: &'a SymMatrix,
        e: &'a CodingMatrix,
        blocks: &'a RedundancyBlocks,
    ) -> Result<Self> {
        let n = a.n();
        if e.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "coding matrix has {} rows for a {}-row problem",
                e.n(),
                n
            )));
        }
        if blocks.r.shape() != (n, e.k()) || blocks.s.shape() != (e.k(), e.k()) {
            return Err(Error::DimensionMismatch("redundancy blocks inconsistent with E".into()));
        }
        Ok(Self {
            a,
            e,
            blocks,
            fault: FaultState::new(e.k()),
            a_fro: a.frobenius_norm(),
            mask: vec![false; n],
            active: None,
        })
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn matrix(&self) -> &SymMatrix {
        self.a
    }

    pub fn coding(&self) -> &CodingMatrix {
        self.e
    }

    pub fn blocks(&self) -> &RedundancyBlocks {
        self.blocks
    }

    pub fn fault(&self) -> &FaultState {
        &self.fault
    }

    /// Frobenius norm of the original (pre-fault) matrix; the residual scale
    /// stays fixed across fault events so histories remain comparable.
    pub fn a_norm(&self) -> f64 {
        self.a_fro
    }

    /// Absorb a fault event: extend the fault set and refresh the active
    /// working blocks.
    pub fn inject(&mut self, event: &FaultEvent) -> Result<()> {
        let next = faults::apply_fault(&self.fault, event, self.e)?;
        self.fault = next;
        for &r in &event.rows {
            self.mask[r] = true;
        }
        self.rebuild_active()?;
        Ok(())
    }

    fn rebuild_active(&mut self) -> Result<()> {
        let l = self.fault.len();
        if l == 0 {
            self.active = None;
            return Ok(());
        }
        let cols: Vec<usize> = (0..l).collect();
        let e_a = self.e.dense_columns(&cols)?;
        let mut e_c = e_a.clone();
        let r_a = self.blocks.r.columns(0, l).into_owned();
        let mut rf = DMatrix::zeros(l, l);
        let mut ef = DMatrix::zeros(l, l);
        for (t, &row) in self.fault.faulty_rows().iter().enumerate() {
            rf.row_mut(t).copy_from(&r_a.row(row));
            ef.row_mut(t).copy_from(&e_a.row(row));
            e_c.row_mut(row).fill(0.0);
        }
        let s_l = self.blocks.s.view((0, 0), (l, l)).into_owned();
        let t_l = self.blocks.t.view((0, 0), (l, l)).into_owned();
        let corr_a = s_l - &rf - rf.transpose();
        let corr_b = t_l - &ef - ef.transpose();
        self.active = Some(ActiveBlocks { e_a, e_c, r_a, corr_a, corr_b });
        Ok(())
    }

    fn check_block(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.nrows() != self.n() || x.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "operand is {}x{}, operator expects {} rows",
                x.nrows(),
                x.ncols(),
                self.n()
            )));
        }
        Ok(())
    }

    fn gather_faulty(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let rows = self.fault.faulty_rows();
        let mut g = DMatrix::zeros(rows.len(), x.ncols());
        for (t, &r) in rows.iter().enumerate() {
            g.row_mut(t).copy_from(&x.row(r));
        }
        g
    }

    fn scatter_add_faulty(&self, y: &mut DMatrix<f64>, add: &DMatrix<f64>) {
        for (t, &r) in self.fault.faulty_rows().iter().enumerate() {
            let mut row = y.row_mut(r);
            row += add.row(t);
        }
    }

    /// `Y = A' X` without forming `A'`.
    pub fn apply_a(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_block(x)?;
        let Some(act) = &self.active else {
            return Ok(self.a.mul_block(x));
        };
        let xf = self.gather_faulty(x);
        let mut y = self.a.mul_block_masked(x, &self.mask);
        y += &act.r_a * &xf;
        let yf = act.r_a.transpose() * x + &act.corr_a * &xf;
        self.scatter_add_faulty(&mut y, &yf);
        Ok(y)
    }

    /// `Y = B' X`; `B'` is the identity until the first fault.
    pub fn apply_b(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_block(x)?;
        let Some(act) = &self.active else {
            return Ok(x.clone());
        };
        let xf = self.gather_faulty(x);
        let mut y = x.clone();
        for &r in self.fault.faulty_rows() {
            y.row_mut(r).fill(0.0);
        }
        y += &act.e_a * &xf;
        let yf = act.e_a.transpose() * x + &act.corr_b * &xf;
        self.scatter_add_faulty(&mut y, &yf);
        Ok(y)
    }

    /// Solve `B' Z = Y` through the closed-form inverse: with `y_f` the
    /// faulty rows of `Y` and `K = E_F^T E_F`,
    /// `w = K^-1 (y_f - E_C^T y)`, `z = y - E_C w` elsewhere and `z_f = w`.
    /// Costs one small triangular solve pair plus two thin products.
    pub fn solve_b(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_block(y)?;
        let Some(act) = &self.active else {
            return Ok(y.clone());
        };
        let chol = self.fault.chol_ef().ok_or(Error::SingularEncodingSubmatrix)?;
        let yf = self.gather_faulty(y);
        let rhs = yf - act.e_c.transpose() * y;
        let w = chol.solve(&rhs);
        let mut z = y - &act.e_c * &w;
        for (t, &r) in self.fault.faulty_rows().iter().enumerate() {
            z.row_mut(r).copy_from(&w.row(t));
        }
        Ok(z)
    }

    /// Materialize `(A', B')` as dense matrices. Diagnostic and cross-check
    /// path only; errors when no fault is active (the reconstitution would
    /// just be `(A, I)`).
    pub fn reconstitute_explicit(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let act = self.active.as_ref().ok_or(Error::NoFaults)?;
        let n = self.n();
        let rows = self.fault.faulty_rows();
        let mut a_p = self.a.to_dense();
        let mut b_p = DMatrix::identity(n, n);
        for &r in rows {
            a_p.row_mut(r).fill(0.0);
            a_p.column_mut(r).fill(0.0);
            b_p.row_mut(r).fill(0.0);
            b_p.column_mut(r).fill(0.0);
        }
        for (t, &r) in rows.iter().enumerate() {
            for i in 0..n {
                if !self.fault.is_faulty(i) {
                    a_p[(i, r)] = act.r_a[(i, t)];
                    a_p[(r, i)] = act.r_a[(i, t)];
                    b_p[(i, r)] = act.e_a[(i, t)];
                    b_p[(r, i)] = act.e_a[(i, t)];
                }
            }
            for (u, &r2) in rows.iter().enumerate() {
                a_p[(r, r2)] = self.blocks.s[(t, u)];
                b_p[(r, r2)] = self.blocks.t[(t, u)];
            }
        }
        Ok((a_p, b_p))
    }
}
