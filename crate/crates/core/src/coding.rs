//! Sparse erasure-coding matrices.
//!
//! An `n x k` coding matrix `E` turns up to `k` erased rows of a symmetric
//! eigenproblem into a recoverable generalized problem. Full recovery from
//! *every* fault pattern would require Kruskal row rank `k` (any `k` rows
//! independent), which forces dense rows; instead `E` is kept sparse with a
//! staggered banded pattern and recovery holds with high probability for
//! random fault patterns. Rank of a given row subset can always be checked
//! explicitly with [`check_submatrix_rank`].

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Rank threshold: singular values above `TAU_RANK * sigma_max` count.
pub const TAU_RANK: f64 = 1e-10;

/// Sparse `n x k` erasure-coding matrix with generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingMatrix {
    n: usize,
    k: usize,
    p: usize,
    seed: u64,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// Generation parameters persisted next to the matrix entries.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CodingMeta {
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub seed: u64,
}

/// Default nonzeros per row for a capacity of `k` erasures, clamped to `k`.
pub fn default_p(k: usize) -> usize {
    if k < 3 {
        return k.min(2);
    }
    let lk = (k as f64).ln();
    let formula = (lk / lk.ln()).ceil() as usize + 1;
    formula.min(k)
}

/// Build a staggered sparse coding matrix.
///
/// Rows are split into `k` contiguous bands of height `ceil(n/k)`. Band `j`
/// owns a contiguous window of `min(k, 2p)` columns starting at column
/// `j mod k` (wrapping), and every row places `p` nonzeros at positions drawn
/// uniformly without replacement inside its band's window. Values are drawn
/// from `U[0.1, 1.0)`: continuous, so sampled row subsets are independent
/// with probability one unless the pattern itself is deficient, and bounded
/// away from zero for the conditioning of the recovery solves.
pub fn build_staggered_coding_matrix(n: usize, k: usize, p: usize, seed: u64) -> Result<CodingMatrix> {
    if n == 0 || k == 0 || p == 0 {
        return Err(Error::InvalidDimensions("n, k and p must be positive".into()));
    }
    if k > n {
        return Err(Error::InvalidDimensions(format!("capacity k={k} exceeds row count n={n}")));
    }
    if p > k {
        return Err(Error::InvalidDimensions(format!("row weight p={p} exceeds column count k={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band_height = n.div_ceil(k);
    let window = k.min(2 * p);

    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(n * p);
    let mut values = Vec::with_capacity(n * p);
    indptr.push(0);
    let mut offsets: Vec<usize> = (0..window).collect();
    for i in 0..n {
        let band = i / band_height;
        let start = band % k;
        offsets.shuffle(&mut rng);
        let mut cols: Vec<usize> = offsets[..p].iter().map(|&t| (start + t) % k).collect();
        cols.sort_unstable();
        for c in cols {
            indices.push(c);
            values.push(rng.gen_range(0.1..1.0));
        }
        indptr.push(indices.len());
    }
    Ok(CodingMatrix { n, k, p, seed, indptr, indices, values })
}

impl CodingMatrix {
    /// Dense coding matrix, used for tests and tiny worked examples.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = m.shape();
        if n == 0 || k == 0 || k > n {
            return Err(Error::InvalidDimensions(format!(
                "coding matrix needs n >= k >= 1, got {n}x{k}"
            )));
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..n {
            for j in 0..k {
                if m[(i, j)] != 0.0 {
                    indices.push(j);
                    values.push(m[(i, j)]);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CodingMatrix { n, k, p: k, seed: 0, indptr, indices, values })
    }

    /// Reassemble from persisted parts (entries plus generation parameters).
    pub fn from_parts(meta: CodingMeta, triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); meta.n];
        for (i, j, v) in triplets {
            if i >= meta.n || j >= meta.k {
                return Err(Error::IndexOutOfRange { index: i.max(j), n: meta.n.max(meta.k) });
            }
            rows[i].push((j, v));
        }
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            for &(j, v) in row.iter() {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(CodingMatrix {
            n: meta.n,
            k: meta.k,
            p: meta.p,
            seed: meta.seed,
            indptr,
            indices,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn meta(&self) -> CodingMeta {
        CodingMeta { n: self.n, k: self.k, p: self.p, seed: self.seed }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.k);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Dense submatrix at the given rows restricted to `cols` (in order).
    pub fn dense_submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(rows.len(), cols.len());
        let mut col_pos = vec![None; self.k];
        for (t, &c) in cols.iter().enumerate() {
            if c >= self.k {
                return Err(Error::IndexOutOfRange { index: c, n: self.k });
            }
            col_pos[c] = Some(t);
        }
        for (ri, &r) in rows.iter().enumerate() {
            if r >= self.n {
                return Err(Error::IndexOutOfRange { index: r, n: self.n });
            }
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if let Some(t) = col_pos[c] {
                    m[(ri, t)] = v;
                }
            }
        }
        Ok(m)
    }

    /// Dense copy of the columns listed in `cols`, in that order.
    pub fn dense_columns(&self, cols: &[usize]) -> Result<DMatrix<f64>> {
        let all_rows: Vec<usize> = (0..self.n).collect();
        self.dense_submatrix(&all_rows, cols)
    }
}

/// True iff the row subset `rows` of `E` has full row rank, judged by
/// singular values above `TAU_RANK * sigma_max`.
pub fn check_submatrix_rank(e: &CodingMatrix, rows: &[usize]) -> Result<bool> {
    if rows.is_empty() {
        return Ok(true);
    }
    let mut seen = vec![false; e.n()];
    for &r in rows {
        if r >= e.n() {
            return Err(Error::IndexOutOfRange { index: r, n: e.n() });
        }
        if seen[r] {
            return Err(Error::InvalidDimensions(format!("duplicate row index {r}")));
        }
        seen[r] = true;
    }
    let all_cols: Vec<usize> = (0..e.k()).collect();
    let sub = e.dense_submatrix(rows, &all_cols)?;
    Ok(linalg::rank_with_tol(&sub, TAU_RANK) == rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    #[test]
    fn smallest_legal_instance() {
        let e = build_staggered_coding_matrix(1, 1, 1, 0).unwrap();
        assert_eq!((e.n(), e.k(), e.nnz()), (1, 1, 1));
        assert!(e.row(0).1[0] != 0.0);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            build_staggered_coding_matrix(3, 4, 1, 0),
            Err(Error::InvalidDimensions(_))
        ));
        assert!(matches!(
            build_staggered_coding_matrix(8, 4, 5, 0),
            Err(Error::InvalidDimensions(_))
        ));
    }

    #[test]
    fn default_p_known_values() {
        assert_eq!(default_p(1), 1);
        assert_eq!(default_p(2), 2);
        // ceil(ln 20 / ln ln 20) + 1 = ceil(2.996/1.097) + 1 = 4
        assert_eq!(default_p(20), 4);
        // ceil(ln 1000 / ln ln 1000) + 1 = ceil(6.908/1.933) + 1 = 5
        assert_eq!(default_p(1000), 5);
        // The formula exceeds k for small k and is clamped.
        assert!(default_p(3) <= 3);
        assert!(default_p(4) <= 4);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = build_staggered_coding_matrix(64, 8, 3, 42).unwrap();
        let b = build_staggered_coding_matrix(64, 8, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = build_staggered_coding_matrix(64, 8, 3, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn row_weights_and_window_membership() {
        let (n, k, p) = (100, 10, 4);
        let e = build_staggered_coding_matrix(n, k, p, 7).unwrap();
        assert!(e.nnz() <= n * p);
        let band_height = n.div_ceil(k);
        let window = k.min(2 * p);
        for i in 0..n {
            let (cols, vals) = e.row(i);
            assert_eq!(cols.len(), p, "row {i} weight");
            assert!(vals.iter().all(|v| (0.1..1.0).contains(v)));
            let start = (i / band_height) % k;
            for &c in cols {
                let offset = (c + k - start) % k;
                assert!(offset < window, "row {i} column {c} outside its window");
            }
        }
    }

    #[test]
    fn small_example_pattern_shape() {
        // n=8, k=4, p=2: every row has exactly 2 nonzeros and column loads
        // stay within one band's worth (band height 2, weight 2 -> 4).
        let e = build_staggered_coding_matrix(8, 4, 2, 1).unwrap();
        let mut col_counts = vec![0usize; 4];
        for i in 0..8 {
            let (cols, _) = e.row(i);
            assert_eq!(cols.len(), 2);
            for &c in cols {
                col_counts[c] += 1;
            }
        }
        let max = *col_counts.iter().max().unwrap();
        let min = *col_counts.iter().min().unwrap();
        assert!(max - min <= 4, "column counts {col_counts:?} spread too far");
    }

    #[test]
    fn paper_style_dense_submatrix_is_nonsingular() {
        let e = CodingMatrix::from_dense(&DMatrix::from_row_slice(4, 2, &[
            0.98, 0.42, 0.13, 0.39, 0.53, 0.85, 0.87, 0.93,
        ]))
        .unwrap();
        assert!(check_submatrix_rank(&e, &[2, 3]).unwrap());
        assert!(check_submatrix_rank(&e, &[]).unwrap());
    }

    #[test]
    fn identical_window_rows_still_independent() {
        // Two rows sharing the same nonzero window are independent with
        // probability one over the continuous value distribution.
        let e = build_staggered_coding_matrix(40, 4, 2, 3).unwrap();
        // band height 10: rows 0 and 1 share band 0's window
        assert!(check_submatrix_rank(&e, &[0, 1]).unwrap());
    }

    #[test]
    fn duplicate_rows_rejected() {
        let e = build_staggered_coding_matrix(10, 3, 2, 0).unwrap();
        assert!(check_submatrix_rank(&e, &[1, 1]).is_err());
        assert!(matches!(
            check_submatrix_rank(&e, &[11]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn frozen_sample_census_at_100x10() {
        // Brute-force rank census over 1000 seeded uniform 10-row samples of
        // the (n=100, k=10, p=4, seed=7) instance. With p nonzeros per row a
        // uniform k-row sample misses some column entirely with probability
        // about k*(1-p/k)^k (~6% here), so a deficient-sample tail is
        // inherent to any weight-p pattern; the census pins the exact count
        // for this seed.
        let e = build_staggered_coding_matrix(100, 10, 4, 7).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000);
        let mut pool: Vec<usize> = (0..100).collect();
        let mut failures = 0;
        for _ in 0..1000 {
            pool.shuffle(&mut rng);
            let mut rows = pool[..10].to_vec();
            rows.sort_unstable();
            if !check_submatrix_rank(&e, &rows).unwrap() {
                failures += 1;
            }
        }
        assert_eq!(failures, 54);
    }

    #[test]
    fn sampled_failure_rate_below_balls_in_bins_bound() {
        // Empirical recovery-at-random check: with p = default_p(k), the rate
        // of rank-deficient k-row samples stays below (e/(p+1))^(p+1).
        let (n, k) = (240, 6);
        let p = default_p(k);
        let e = build_staggered_coding_matrix(n, k, p, 123).unwrap();
        let bound = (std::f64::consts::E / (p as f64 + 1.0)).powi(p as i32 + 1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let trials = 1000;
        let mut failures = 0;
        let mut pool: Vec<usize> = (0..n).collect();
        for _ in 0..trials {
            pool.shuffle(&mut rng);
            let mut rows: Vec<usize> = pool[..k].to_vec();
            rows.sort_unstable();
            if !check_submatrix_rank(&e, &rows).unwrap() {
                failures += 1;
            }
        }
        let rate = failures as f64 / trials as f64;
        assert!(rate < bound, "failure rate {rate} not below bound {bound}");
    }
}
