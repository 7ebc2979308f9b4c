//! Symmetric matrix storage (dense or CSR) with the masked products the
//! fault-aware operators need, plus the built-in problem generators.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Relative tolerance under which an almost-symmetric input is accepted
/// (and symmetrized) rather than rejected.
pub const TAU_SYM: f64 = 1e-12;

/// Compressed sparse row storage. Symmetric matrices store both triangles
/// so row-wise products need no transpose pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicate positions are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for (i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::IndexOutOfRange {
                    index: i.max(j),
                    n: nrows.max(ncols),
                });
            }
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let triplets = (0..m.nrows()).flat_map(|i| {
            (0..m.ncols()).filter_map(move |j| {
                let v = m[(i, j)];
                (v != 0.0).then_some((i, j, v))
            })
        });
        Self::from_triplets(m.nrows(), m.ncols(), triplets).unwrap()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `Y = A X` for a dense block `X`.
    pub fn mul_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.nrows, x.ncols());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for c in 0..x.ncols() {
                let mut acc = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    acc += v * x[(j, c)];
                }
                y[(i, c)] = acc;
            }
        }
        y
    }

    /// Product with rows and columns in `masked` treated as zero.
    pub fn mul_block_masked(&self, x: &DMatrix<f64>, masked: &[bool]) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.nrows, x.ncols());
        for i in 0..self.nrows {
            if masked[i] {
                continue;
            }
            let (cols, vals) = self.row(i);
            for c in 0..x.ncols() {
                let mut acc = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    if !masked[j] {
                        acc += v * x[(j, c)];
                    }
                }
                y[(i, c)] = acc;
            }
        }
        y
    }
}

/// A symmetric matrix in either dense or sparse storage.
#[derive(Debug, Clone)]
pub enum SymMatrix {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

impl SymMatrix {
    /// Wrap a square matrix, enforcing symmetry within `TAU_SYM` (relative,
    /// max-norm). Slight asymmetry is averaged away.
    pub fn new_dense(m: DMatrix<f64>) -> Result<Self> {
        check_symmetry_dense(&m)?;
        Ok(SymMatrix::Dense(crate::linalg::symmetrize(&m)))
    }

    pub fn new_sparse(m: CsrMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidDimensions(format!(
                "square matrix required, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let d = m.to_dense();
        check_symmetry_dense(&d)?;
        Ok(SymMatrix::Sparse(CsrMatrix::from_dense(&crate::linalg::symmetrize(&d))))
    }

    pub fn n(&self) -> usize {
        match self {
            SymMatrix::Dense(m) => m.nrows(),
            SymMatrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            SymMatrix::Dense(m) => m.iter().filter(|v| **v != 0.0).count(),
            SymMatrix::Sparse(m) => m.nnz(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            SymMatrix::Dense(m) => m.norm(),
            SymMatrix::Sparse(m) => m.frobenius_norm(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SymMatrix::Dense(m) => m.clone(),
            SymMatrix::Sparse(m) => m.to_dense(),
        }
    }

    pub fn mul_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            SymMatrix::Dense(m) => m * x,
            SymMatrix::Sparse(m) => m.mul_block(x),
        }
    }

    /// `P A P X` where `P` zeroes the rows flagged in `masked`.
    pub fn mul_block_masked(&self, x: &DMatrix<f64>, masked: &[bool]) -> DMatrix<f64> {
        match self {
            SymMatrix::Dense(m) => {
                // Zeroing masked rows of the input kills the masked columns of
                // A; zeroing masked rows of the output kills the masked rows.
                let mut xm = x.clone();
                for (i, &f) in masked.iter().enumerate() {
                    if f {
                        xm.row_mut(i).fill(0.0);
                    }
                }
                let mut y = m * xm;
                for (i, &f) in masked.iter().enumerate() {
                    if f {
                        y.row_mut(i).fill(0.0);
                    }
                }
                y
            }
            SymMatrix::Sparse(m) => m.mul_block_masked(x, masked),
        }
    }

    /// Lower bound on the smallest eigenvalue from Gershgorin discs.
    pub fn gershgorin_lower_bound(&self) -> f64 {
        let mut bound = f64::INFINITY;
        match self {
            SymMatrix::Dense(m) => {
                for i in 0..m.nrows() {
                    let off: f64 =
                        (0..m.ncols()).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
                    bound = bound.min(m[(i, i)] - off);
                }
            }
            SymMatrix::Sparse(m) => {
                for i in 0..m.nrows() {
                    let (cols, vals) = m.row(i);
                    let mut diag = 0.0;
                    let mut off = 0.0;
                    for (&j, &v) in cols.iter().zip(vals) {
                        if j == i {
                            diag = v;
                        } else {
                            off += v.abs();
                        }
                    }
                    bound = bound.min(diag - off);
                }
            }
        }
        bound
    }

    /// `A + sigma I`, used by the harness to make an indefinite problem
    /// positive definite before the inner CG solves.
    pub fn shifted(&self, sigma: f64) -> SymMatrix {
        match self {
            SymMatrix::Dense(m) => {
                let mut s = m.clone();
                for i in 0..s.nrows() {
                    s[(i, i)] += sigma;
                }
                SymMatrix::Dense(s)
            }
            SymMatrix::Sparse(m) => {
                let mut d = m.to_dense();
                for i in 0..d.nrows() {
                    d[(i, i)] += sigma;
                }
                SymMatrix::Sparse(CsrMatrix::from_dense(&d))
            }
        }
    }
}

fn check_symmetry_dense(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidDimensions(format!(
            "square matrix required, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Ok(());
    }
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    let rel = worst / scale;
    if rel > TAU_SYM {
        return Err(Error::AsymmetricInput { rel, tol: TAU_SYM });
    }
    Ok(())
}

/// The n x n tridiagonal matrix with 2 on the diagonal and -1 off it.
pub fn tridiagonal(n: usize) -> SymMatrix {
    let triplets = (0..n).flat_map(|i| {
        let mut t = vec![(i, i, 2.0)];
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, -1.0));
        }
        t
    });
    SymMatrix::Sparse(CsrMatrix::from_triplets(n, n, triplets).unwrap())
}

pub fn identity(n: usize) -> SymMatrix {
    SymMatrix::Sparse(CsrMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0))).unwrap())
}

/// Random sparse SPD test matrix with a known spectrum.
///
/// A jittered spectrum with well separated extremes is placed on the diagonal
/// and scrambled by seeded Givens rotations (which preserve eigenvalues
/// exactly) and a symmetric permutation. The number of rotations is chosen to
/// approach the requested density. Returns the matrix together with its
/// eigenvalues in ascending order, which double as an exact oracle.
pub fn random_spd(n: usize, density: f64, seed: u64) -> (SymMatrix, Vec<f64>) {
    assert!(n >= 2, "random_spd needs n >= 2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectrum = desk_spectrum(n, &mut rng);
    spectrum.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut a = DMatrix::zeros(n, n);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    for (i, &p) in perm.iter().enumerate() {
        a[(i, i)] = spectrum[p];
    }

    // Each rotation fills in two rows/columns; 4 new entries on average.
    let target_nnz = (density * (n * n) as f64).max(n as f64);
    let rotations = (((target_nnz - n as f64) / 4.0).ceil() as usize).min(8 * n);
    for _ in 0..rotations {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n);
        while j == i {
            j = rng.gen_range(0..n);
        }
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let (c, s) = (theta.cos(), theta.sin());
        // A <- G^T A G with G the rotation in the (i, j) plane.
        for col in 0..n {
            let (ai, aj) = (a[(i, col)], a[(j, col)]);
            a[(i, col)] = c * ai - s * aj;
            a[(j, col)] = s * ai + c * aj;
        }
        for row in 0..n {
            let (ai, aj) = (a[(row, i)], a[(row, j)]);
            a[(row, i)] = c * ai - s * aj;
            a[(row, j)] = s * ai + c * aj;
        }
    }
    let a = crate::linalg::symmetrize(&a);
    let matrix = if density > 0.25 {
        SymMatrix::Dense(a)
    } else {
        SymMatrix::Sparse(CsrMatrix::from_dense(&a))
    };
    (matrix, spectrum)
}

/// Eigenvalue layout for generated SPD problems: geometric separation at both
/// ends of the spectrum, a flat middle band, and 2% multiplicative jitter.
fn desk_spectrum(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut lam = Vec::with_capacity(n);
    if n <= 24 {
        for i in 0..n {
            lam.push(100f64.powf(i as f64 / (n - 1) as f64));
        }
    } else {
        for j in 0..12 {
            lam.push(1.35f64.powi(j));
        }
        let mid = n - 20;
        for j in 0..mid {
            lam.push(30.0 + 8.0 * j as f64 / (mid - 1).max(1) as f64);
        }
        for j in (0..8).rev() {
            lam.push(300.0 * 0.75f64.powi(j));
        }
    }
    for l in lam.iter_mut() {
        *l *= 1.0 + 0.02 * rng.gen_range(-1.0..1.0);
    }
    lam
}

/// Covariance (Gram) matrix of the columns of a samples-by-features block.
pub fn covariance_from_samples(data: &DMatrix<f64>) -> Result<SymMatrix> {
    let m = data.nrows();
    if m < 2 {
        return Err(Error::InvalidDimensions(
            "covariance needs at least two sample rows".into(),
        ));
    }
    let mean = data.row_mean();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered / (m - 1) as f64;
    SymMatrix::new_dense(cov)
}
