//! Map solutions of the reconstituted problem back to eigenvectors of the
//! original problem, and detect spurious eigenvectors of the explicit
//! augmented pencil.
//!
//! A reconstituted solution carries the surviving coefficients `c` at the
//! non-faulty positions and the redundancy coefficients `r` at the faulty
//! ones. The original eigenvector is `v = c + E r` on the surviving rows and
//! `v_F = E_F r` on the faulty ones, i.e. the invertible linear map
//! `[[I, E_C], [0, E_F]]` applied to `[c; r]`; eigenvalues pass through
//! unchanged.

use nalgebra::{DMatrix, DVector};

use crate::coding::CodingMatrix;
use crate::error::{Error, Result};
use crate::faults::FaultState;

/// Default relative threshold for the spurious-vector test.
pub const DEFAULT_TAU_SPURIOUS: f64 = 1e-8;

/// Eigenpairs mapped back to original coordinates.
#[derive(Debug, Clone)]
pub struct RecoveredEigenpairs {
    /// Eigenvalues in the order the solver produced them.
    pub eigenvalues: Vec<f64>,
    /// Unit 2-norm eigenvectors, sign fixed so the first nonzero entry of
    /// each column is positive.
    pub eigenvectors: DMatrix<f64>,
    /// Which coding column filled which faulty index: `(faulty row, column)`.
    pub recovery_map: Vec<(usize, usize)>,
}

/// Recover original-coordinate eigenvectors from reconstituted solutions.
///
/// `y` holds one solution per column; the entries at faulty positions are the
/// redundancy coefficients, one per assigned coding column.
pub fn recover_eigenpairs(
    eigenvalues: &[f64],
    y: &DMatrix<f64>,
    e: &CodingMatrix,
    fault: &FaultState,
) -> Result<RecoveredEigenpairs> {
    if y.nrows() != e.n() {
        return Err(Error::DimensionMismatch(format!(
            "solutions have {} rows, problem has {}",
            y.nrows(),
            e.n()
        )));
    }
    if eigenvalues.len() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} eigenvalues for {} vectors",
            eigenvalues.len(),
            y.ncols()
        )));
    }
    if fault.len() > e.k() {
        return Err(Error::InconsistentFaultState(format!(
            "{} faults exceed the {} coding columns",
            fault.len(),
            e.k()
        )));
    }
    let l = fault.len();
    let mut vecs = y.clone();
    if l > 0 {
        let cols: Vec<usize> = (0..l).collect();
        let e_a = e.dense_columns(&cols)?;
        let mut r_block = DMatrix::zeros(l, y.ncols());
        for (t, &row) in fault.faulty_rows().iter().enumerate() {
            r_block.row_mut(t).copy_from(&y.row(row));
            vecs.row_mut(row).fill(0.0);
        }
        vecs += e_a * r_block;
    }
    for mut col in vecs.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
    }
    let recovery_map =
        fault.faulty_rows().iter().enumerate().map(|(t, &r)| (r, t)).collect();
    Ok(RecoveredEigenpairs {
        eigenvalues: eigenvalues.to_vec(),
        eigenvectors: vecs,
        recovery_map,
    })
}

/// Spurious test for an augmented-pencil eigenvector split as `[x; r]`:
/// vectors in the joint null space satisfy `x + E r = 0`, so the relative
/// size of `x + E r` against `|x| + |E| |r|` decides.
pub fn detect_spurious(x: &DVector<f64>, r: &DVector<f64>, e: &CodingMatrix, tau: f64) -> bool {
    assert_eq!(x.len(), e.n(), "x must have n entries");
    assert_eq!(r.len(), e.k(), "r must have k entries");
    let combined = x + e.to_dense() * r;
    let scale = x.norm() + e.frobenius_norm() * r.norm();
    combined.norm() <= tau * scale
}
