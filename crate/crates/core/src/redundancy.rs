//! Redundancy blocks and the explicit augmented pencil.
//!
//! The blocks `R = A E`, `S = E^T A E`, `T = E^T E` are precomputed once,
//! before any fault, and substituted for erased rows and columns later. The
//! explicit `(n+k) x (n+k)` pencil built from them is singular by
//! construction (its two members share the null space `[E; -I_k]`) and is
//! kept only for diagnostics and small-scale verification; production solves
//! use the reconstituted operators instead.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coding::CodingMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::SymMatrix;

/// Precomputed coding blocks. `S` and `T` are explicitly symmetrized so the
/// downstream factorizations see exact symmetry.
#[derive(Debug, Clone)]
pub struct RedundancyBlocks {
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub t: DMatrix<f64>,
}

pub fn compute_redundancy(a: &SymMatrix, e: &CodingMatrix) -> Result<RedundancyBlocks> {
    if a.n() != e.n() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, coding matrix has {}",
            a.n(),
            e.n()
        )));
    }
    let e_dense = e.to_dense();
    let r = a.mul_block(&e_dense);
    let s = linalg::symmetrize(&(e_dense.transpose() * &r));
    let t = linalg::symmetrize(&(e_dense.transpose() * &e_dense));
    Ok(RedundancyBlocks { r, s, t })
}

/// The explicit augmented pencil; diagnostics only.
#[derive(Debug, Clone)]
pub struct AugmentedPencil {
    pub a_tilde: DMatrix<f64>,
    pub b_tilde: DMatrix<f64>,
}

pub fn assemble_augmented_pencil(
    a: &SymMatrix,
    e: &CodingMatrix,
    blocks: &RedundancyBlocks,
) -> Result<AugmentedPencil> {
    let (n, k) = (e.n(), e.k());
    if a.n() != n || blocks.r.shape() != (n, k) || blocks.s.shape() != (k, k) {
        return Err(Error::DimensionMismatch("blocks inconsistent with (A, E)".into()));
    }
    let e_dense = e.to_dense();
    let mut a_tilde = DMatrix::zeros(n + k, n + k);
    a_tilde.view_mut((0, 0), (n, n)).copy_from(&a.to_dense());
    a_tilde.view_mut((0, n), (n, k)).copy_from(&blocks.r);
    a_tilde.view_mut((n, 0), (k, n)).copy_from(&blocks.r.transpose());
    a_tilde.view_mut((n, n), (k, k)).copy_from(&blocks.s);
    let mut b_tilde = DMatrix::zeros(n + k, n + k);
    b_tilde.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    b_tilde.view_mut((0, n), (n, k)).copy_from(&e_dense);
    b_tilde.view_mut((n, 0), (k, n)).copy_from(&e_dense.transpose());
    b_tilde.view_mut((n, n), (k, k)).copy_from(&blocks.t);
    Ok(AugmentedPencil { a_tilde, b_tilde })
}

/// Residual of the joint null space relation: both pencil members must
/// annihilate `[E; -I_k]`. Exact arithmetic gives zero.
pub fn verify_joint_nullspace(pencil: &AugmentedPencil, e: &CodingMatrix) -> f64 {
    let (n, k) = (e.n(), e.k());
    let mut z = DMatrix::zeros(n + k, k);
    z.view_mut((0, 0), (n, k)).copy_from(&e.to_dense());
    z.view_mut((n, 0), (k, k)).copy_from(&(-DMatrix::<f64>::identity(k, k)));
    let ra = (&pencil.a_tilde * &z).norm();
    let rb = (&pencil.b_tilde * &z).norm();
    ra.max(rb) / pencil.a_tilde.norm().max(1.0)
}

/// Strict-equivalence check: transform the pencil with `M = [[E, I], [-I, E^T]]`
/// (null-space basis first, its orthogonal complement last) and measure how
/// far the result is from vanishing off the trailing block, with the trailing
/// blocks equal to `A (I + E E^T)` and `(I + E E^T)`. Evaluated at the pencil
/// points 0 and 1; returns a Frobenius-norm residual relative to the pencil
/// scale.
pub fn verify_pencil_equivalence(pencil: &AugmentedPencil, a: &SymMatrix, e: &CodingMatrix) -> f64 {
    let (n, k) = (e.n(), e.k());
    let ed = e.to_dense();
    let mut m = DMatrix::zeros(n + k, n + k);
    m.view_mut((0, 0), (n, k)).copy_from(&ed);
    m.view_mut((0, k), (n, n)).copy_from(&DMatrix::identity(n, n));
    m.view_mut((n, 0), (k, k)).copy_from(&(-DMatrix::<f64>::identity(k, k)));
    m.view_mut((n, k), (k, n)).copy_from(&ed.transpose());

    // Closed-form inverse through the small SPD matrix N = I + E^T E:
    // M^-1 = [[N^-1 E^T, -N^-1], [I - E N^-1 E^T, E N^-1]].
    let nk = DMatrix::identity(k, k) + ed.transpose() * &ed;
    let chol = nk.cholesky().expect("I + E^T E is positive definite");
    let ninv_et = chol.solve(&ed.transpose());
    let ninv = chol.inverse();
    let mut minv = DMatrix::zeros(n + k, n + k);
    minv.view_mut((0, 0), (k, n)).copy_from(&ninv_et);
    minv.view_mut((0, n), (k, k)).copy_from(&(-&ninv));
    minv.view_mut((k, 0), (n, n))
        .copy_from(&(DMatrix::identity(n, n) - &ed * &ninv_et));
    minv.view_mut((k, n), (n, k)).copy_from(&(&ed * &ninv));

    let plus = DMatrix::identity(n, n) + &ed * ed.transpose();
    let target_a = a.to_dense() * &plus;
    let scale = pencil.a_tilde.norm().max(1.0);

    let mut sq = 0.0f64;
    for (tilde, target) in [(&pencil.a_tilde, &target_a), (&pencil.b_tilde, &plus)] {
        let p = &minv * tilde * &m;
        sq += p.view((0, 0), (k, k)).norm_squared();
        sq += p.view((0, k), (k, n)).norm_squared();
        sq += p.view((k, 0), (n, k)).norm_squared();
        sq += (p.view((k, k), (n, n)) - target).norm_squared();
    }
    sq.sqrt() / scale
}

/// Full eigensystem of the explicit augmented pencil.
#[derive(Debug, Clone)]
pub struct PencilEigen {
    /// All `n + k` eigenvalues, ascending. The `null_dimension` of them that
    /// belong to the joint null space are arbitrary (any value solves the
    /// singular pencil there); they are sampled inside the span of the
    /// regular spectrum so one run resembles what a dense QZ sweep reports.
    pub eigenvalues: Vec<f64>,
    /// Matching eigenvectors as columns, length `n + k`.
    pub eigenvectors: DMatrix<f64>,
    pub null_dimension: usize,
}

/// Solve the singular pencil by deflation: split off the null space of the
/// (positive semidefinite) right-hand member, solve the regular part exactly,
/// and attach seeded arbitrary eigenvalues to the null directions.
pub fn eig_augmented_pencil(pencil: &AugmentedPencil, seed: u64) -> Result<PencilEigen> {
    let nk = pencil.b_tilde.nrows();
    let (bw, bv) = linalg::sym_eig(&pencil.b_tilde);
    let bmax = bw.iter().cloned().fold(0.0f64, f64::max);
    if bmax <= 0.0 {
        return Err(Error::RankDeficientBlock);
    }
    let tol = 1e-12 * bmax;
    let null_idx: Vec<usize> = (0..nk).filter(|&i| bw[i] <= tol).collect();
    let pos_idx: Vec<usize> = (0..nk).filter(|&i| bw[i] > tol).collect();

    // Regular part: project onto the positive eigenspace of B and reduce by
    // the diagonal scaling, leaving a standard symmetric problem.
    let mut vp = DMatrix::zeros(nk, pos_idx.len());
    for (t, &i) in pos_idx.iter().enumerate() {
        vp.set_column(t, &bv.column(i));
    }
    let g = vp.transpose() * &pencil.a_tilde * &vp;
    let mut c = g.clone();
    for (ti, &i) in pos_idx.iter().enumerate() {
        for (tj, &j) in pos_idx.iter().enumerate() {
            c[(ti, tj)] /= (bw[i] * bw[j]).sqrt();
        }
    }
    let (vals, w) = linalg::sym_eig(&linalg::symmetrize(&c));
    let mut scaled = w;
    for (ti, &i) in pos_idx.iter().enumerate() {
        for col in 0..scaled.ncols() {
            scaled[(ti, col)] /= bw[i].sqrt();
        }
    }
    let regular_vecs = vp * scaled;

    let mut eigenvalues: Vec<f64> = vals.iter().cloned().collect();
    let mut vectors: Vec<DVector<f64>> =
        (0..regular_vecs.ncols()).map(|j| regular_vecs.column(j).into_owned()).collect();

    // Null directions: any eigenvalue is consistent; sample within the
    // regular range so the combined list looks like one QZ computation.
    let lo = eigenvalues.first().copied().unwrap_or(0.0);
    let hi = eigenvalues.last().copied().unwrap_or(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &i in &null_idx {
        let lambda = if hi > lo { rng.gen_range(lo..hi) } else { lo };
        eigenvalues.push(lambda);
        vectors.push(bv.column(i).into_owned());
    }

    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigenvalues[a].partial_cmp(&eigenvalues[b]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| eigenvalues[i]).collect();
    let mut sorted_vecs = DMatrix::zeros(nk, eigenvalues.len());
    for (dst, &src) in order.iter().enumerate() {
        sorted_vecs.set_column(dst, &vectors[src]);
    }
    Ok(PencilEigen {
        eigenvalues: sorted_vals,
        eigenvectors: sorted_vecs,
        null_dimension: null_idx.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::CodingMatrix;
    use crate::matrix::{self, SymMatrix};
    use approx::assert_relative_eq;
    use rand::prelude::*;

    fn paper_pair() -> (SymMatrix, CodingMatrix) {
        let a = matrix::tridiagonal(4);
        let e = CodingMatrix::from_dense(&DMatrix::from_row_slice(4, 2, &[
            0.98, 0.42, 0.13, 0.39, 0.53, 0.85, 0.87, 0.93,
        ]))
        .unwrap();
        (a, e)
    }

    fn random_sym(n: usize, seed: u64) -> SymMatrix {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        SymMatrix::new_dense(linalg::symmetrize(&m)).unwrap()
    }

    #[test]
    fn worked_example_blocks() {
        let (a, e) = paper_pair();
        let blocks = compute_redundancy(&a, &e).unwrap();
        let rt_expect = DMatrix::from_row_slice(2, 4, &[
            1.83, -1.25, 0.06, 1.21, 0.45, -0.49, 0.38, 1.01,
        ]);
        assert_relative_eq!(blocks.r.transpose(), rt_expect, epsilon = 1e-12);
        let s_expect = DMatrix::from_row_slice(2, 2, &[2.7154, 1.4574, 1.4574, 1.2602]);
        let t_expect = DMatrix::from_row_slice(2, 2, &[2.0151, 1.7219, 1.7219, 1.9159]);
        assert_relative_eq!(blocks.s, s_expect, epsilon = 1e-10);
        assert_relative_eq!(blocks.t, t_expect, epsilon = 1e-10);
        assert_eq!(blocks.s, blocks.s.transpose());
        assert_eq!(blocks.t, blocks.t.transpose());
    }

    #[test]
    fn identity_matrix_blocks() {
        let n = 6;
        let e = crate::coding::build_staggered_coding_matrix(n, 3, 2, 4).unwrap();
        let blocks = compute_redundancy(&matrix::identity(n), &e).unwrap();
        assert_relative_eq!(blocks.r, e.to_dense(), epsilon = 1e-14);
        assert_relative_eq!(blocks.s, blocks.t, epsilon = 1e-14);
    }

    #[test]
    fn s_equals_et_r() {
        let a = random_sym(50, 7);
        let e = crate::coding::build_staggered_coding_matrix(50, 5, 3, 8).unwrap();
        let blocks = compute_redundancy(&a, &e).unwrap();
        let recomputed = e.to_dense().transpose() * &blocks.r;
        let denom = blocks.s.norm().max(1.0);
        assert!((&blocks.s - recomputed).norm() / denom < 1e-12);
    }

    #[test]
    fn joint_nullspace_residual_is_tiny() {
        let (a, e) = paper_pair();
        let blocks = compute_redundancy(&a, &e).unwrap();
        let pencil = assemble_augmented_pencil(&a, &e, &blocks).unwrap();
        assert!(verify_joint_nullspace(&pencil, &e) <= 1e-12);

        let a30 = random_sym(30, 3);
        let e30 = crate::coding::build_staggered_coding_matrix(30, 4, 3, 5).unwrap();
        let b30 = compute_redundancy(&a30, &e30).unwrap();
        let p30 = assemble_augmented_pencil(&a30, &e30, &b30).unwrap();
        assert!(verify_joint_nullspace(&p30, &e30) <= 1e-12);
    }

    #[test]
    fn perturbed_pencil_breaks_nullspace() {
        let (a, e) = paper_pair();
        let blocks = compute_redundancy(&a, &e).unwrap();
        let mut pencil = assemble_augmented_pencil(&a, &e, &blocks).unwrap();
        pencil.a_tilde[(4, 4)] += 1e-3;
        assert!(verify_joint_nullspace(&pencil, &e) >= 1e-4);
    }

    #[test]
    fn pencil_equivalence_residual() {
        let (a, e) = paper_pair();
        let blocks = compute_redundancy(&a, &e).unwrap();
        let pencil = assemble_augmented_pencil(&a, &e, &blocks).unwrap();
        assert!(verify_pencil_equivalence(&pencil, &a, &e) <= 1e-10);
    }

    #[test]
    fn pencil_equivalence_zero_coding() {
        // E = 0: the transformed trailing blocks are exactly A and I.
        let a = random_sym(5, 2);
        let e = CodingMatrix::from_dense(&DMatrix::zeros(5, 1)).unwrap();
        let blocks = compute_redundancy(&a, &e).unwrap();
        let pencil = assemble_augmented_pencil(&a, &e, &blocks).unwrap();
        assert!(verify_pencil_equivalence(&pencil, &a, &e) <= 1e-12);
    }

    #[test]
    fn zero_coding_column_gives_diagonal_pencil() {
        let a = matrix::identity(2);
        let e = CodingMatrix::from_dense(&DMatrix::zeros(2, 1)).unwrap();
        let blocks = compute_redundancy(&a, &e).unwrap();
        let pencil = assemble_augmented_pencil(&a, &e, &blocks).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
        assert_eq!(pencil.a_tilde, expect);
        assert_eq!(pencil.b_tilde, expect);
    }

    #[test]
    fn trailing_block_similarity_preserves_spectrum() {
        let a = random_sym(25, 9);
        let e = crate::coding::build_staggered_coding_matrix(25, 4, 3, 10).unwrap();
        let ed = e.to_dense();
        let plus = DMatrix::identity(25, 25) + &ed * ed.transpose();
        // (I + EE^T)^-1 A (I + EE^T) is similar to A.
        let transformed = plus.clone().try_inverse().unwrap() * a.to_dense() * &plus;
        let (va, _) = linalg::sym_eig(&a.to_dense());
        let mut vt: Vec<f64> = transformed.complex_eigenvalues().iter().map(|c| c.re).collect();
        vt.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in va.iter().zip(vt.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-8 * a.frobenius_norm());
        }
    }

    #[test]
    fn augmented_pencil_eigenvalues_contain_true_spectrum() {
        let a = random_sym(20, 4);
        let e = crate::coding::build_staggered_coding_matrix(20, 3, 2, 6).unwrap();
        let blocks = compute_redundancy(&a, &e).unwrap();
        let pencil = assemble_augmented_pencil(&a, &e, &blocks).unwrap();
        let eig = eig_augmented_pencil(&pencil, 17).unwrap();
        assert_eq!(eig.null_dimension, 3);
        assert_eq!(eig.eigenvalues.len(), 23);
        let (true_vals, _) = linalg::sym_eig(&a.to_dense());
        // every true eigenvalue appears among the pencil's values
        for tv in true_vals.iter() {
            let found = eig
                .eigenvalues
                .iter()
                .any(|&v| (v - tv).abs() <= 1e-8 * a.frobenius_norm().max(1.0));
            assert!(found, "missing eigenvalue {tv}");
        }
    }

    #[test]
    fn b_tilde_rank_is_n() {
        let a = random_sym(40, 12);
        let e = crate::coding::build_staggered_coding_matrix(40, 6, 3, 13).unwrap();
        let blocks = compute_redundancy(&a, &e).unwrap();
        let pencil = assemble_augmented_pencil(&a, &e, &blocks).unwrap();
        assert_eq!(linalg::rank_with_tol(&pencil.b_tilde, crate::coding::TAU_RANK), 40);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = matrix::tridiagonal(5);
        let e = crate::coding::build_staggered_coding_matrix(4, 2, 1, 0).unwrap();
        assert!(matches!(compute_redundancy(&a, &e), Err(Error::DimensionMismatch(_))));
    }
}
