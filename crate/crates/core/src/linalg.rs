//! Small dense helpers shared by the solvers and diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending,
/// eigenvector signs fixed so the entry of largest magnitude is positive.
pub fn sym_eig(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let se = m.clone().symmetric_eigen();
    sort_eig(se.eigenvalues, se.eigenvectors)
}

fn sort_eig(values: DVector<f64>, vectors: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let sorted_vals = DVector::from_iterator(values.len(), order.iter().map(|&i| values[i]));
    let mut sorted_vecs = DMatrix::zeros(vectors.nrows(), vectors.ncols());
    for (dst, &src) in order.iter().enumerate() {
        sorted_vecs.set_column(dst, &vectors.column(src));
    }
    fix_signs(&mut sorted_vecs);
    (sorted_vals, sorted_vecs)
}

/// Flip each column so its entry of largest magnitude is positive.
pub fn fix_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Solve the generalized symmetric-definite problem `A u = lambda B u`.
///
/// Reduces through the Cholesky factor of `B`; when `B` is numerically
/// indefinite the reduction falls back to an eigendecomposition of `B` with
/// clipped inverse square roots. Eigenvalues ascending, deterministic signs.
pub fn generalized_sym_eig(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if a.nrows() != a.ncols() || a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "generalized eigenproblem needs square matrices of equal size, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if let Some(chol) = b.clone().cholesky() {
        // C = L^-1 A L^-T, then map eigenvectors back through L^-T.
        let l = chol.l();
        let mut c = a.clone();
        l.solve_lower_triangular_mut(&mut c);
        c.transpose_mut();
        l.solve_lower_triangular_mut(&mut c);
        c = symmetrize(&c);
        let (vals, w) = sym_eig(&c);
        let mut u = w;
        l.transpose().solve_upper_triangular_mut(&mut u);
        fix_signs(&mut u);
        Ok((vals, u))
    } else {
        let (bw, bv) = sym_eig(b);
        let bmax = bw.iter().cloned().fold(0.0f64, f64::max);
        if bmax <= 0.0 {
            return Err(Error::RankDeficientBlock);
        }
        let scale =
            DVector::from_iterator(bw.len(), bw.iter().map(|&w| 1.0 / w.max(1e-12 * bmax).sqrt()));
        let mut bt = bv;
        for (j, mut col) in bt.column_iter_mut().enumerate() {
            col *= scale[j];
        }
        let c = symmetrize(&(bt.transpose() * a * &bt));
        let (vals, w) = sym_eig(&c);
        let mut u = bt * w;
        fix_signs(&mut u);
        Ok((vals, u))
    }
}

/// Orthonormal basis of the column space via thin QR.
pub fn thin_q(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Numerical rank by singular values above `tol * sigma_max`.
pub fn rank_with_tol(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}
