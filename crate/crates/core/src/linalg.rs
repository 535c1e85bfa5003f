//! Minimal sparse linear-algebra kernels: column-major sparse matrices,
//! matrix-vector products, column sub-selection and power-iteration
//! estimation of the top Gram eigenvalue.

/// Dense 64-bit vector; used for all solver state (dual vectors, primal
/// iterate, product caches).
pub type DenseVector = Vec<f64>;

/// Sparse matrix stored column-major; each column holds `(row, value)`
/// pairs with strictly increasing row indices and nonzero finite values.
///
/// Samples are stored as columns of the design matrix, so selecting a
/// sub-batch is column slicing.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseColumnMatrix {
    rows: usize,
    columns: Vec<Vec<(usize, f64)>>,
}

/// Result of the power iteration in [`SparseColumnMatrix::spectral_norm_gram`].
#[derive(Clone, Copy, Debug)]
pub struct SpectralEstimate {
    /// Best available estimate of the top eigenvalue of MᵀM.
    pub value: f64,
    /// False if the iteration budget ran out before the tolerance was met;
    /// `value` is then the last Rayleigh quotient.
    pub converged: bool,
}

impl SparseColumnMatrix {
    /// Builds a matrix from per-column entry lists.
    ///
    /// Panics if any column is out of contract: unsorted or duplicate row
    /// indices, indices `>= rows`, zero or non-finite values.
    pub fn from_columns(rows: usize, columns: Vec<Vec<(usize, f64)>>) -> Self {
        for (j, col) in columns.iter().enumerate() {
            let mut prev: Option<usize> = None;
            for &(r, v) in col {
                assert!(r < rows, "column {}: row index {} >= {}", j, r, rows);
                assert!(
                    prev.is_none_or(|p| p < r),
                    "column {}: row indices must be strictly increasing",
                    j
                );
                assert!(
                    v.is_finite() && v != 0.0,
                    "column {}: entries must be finite and nonzero",
                    j
                );
                prev = Some(r);
            }
        }
        SparseColumnMatrix { rows, columns }
    }

    /// Builds a matrix from dense column-major storage, dropping exact zeros.
    pub fn from_dense(rows: usize, cols: usize, column_major: &[f64]) -> Self {
        assert_eq!(column_major.len(), rows * cols, "dense storage size");
        let columns = (0..cols)
            .map(|j| {
                (0..rows)
                    .filter_map(|r| {
                        let v = column_major[j * rows + r];
                        (v != 0.0).then_some((r, v))
                    })
                    .collect()
            })
            .collect();
        Self::from_columns(rows, columns)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_columns(n, (0..n).map(|j| vec![(j, 1.0)]).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// Computes `M v`.
    pub fn matvec(&self, v: &[f64]) -> DenseVector {
        assert_eq!(v.len(), self.cols(), "matvec: dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for (j, col) in self.columns.iter().enumerate() {
            let vj = v[j];
            if vj != 0.0 {
                for &(r, m) in col {
                    out[r] += m * vj;
                }
            }
        }
        out
    }

    /// Computes `Mᵀ v`.
    pub fn matvec_transpose(&self, v: &[f64]) -> DenseVector {
        assert_eq!(v.len(), self.rows, "matvec_transpose: dimension mismatch");
        self.columns
            .iter()
            .map(|col| col.iter().map(|&(r, m)| m * v[r]).sum())
            .collect()
    }

    /// Returns the sub-matrix formed by the listed columns, in order.
    ///
    /// Indices must be in range and distinct.
    pub fn select_columns(&self, idx: &[usize]) -> SparseColumnMatrix {
        let mut seen = vec![false; self.cols()];
        let columns = idx
            .iter()
            .map(|&j| {
                assert!(j < self.cols(), "select_columns: index {} out of range", j);
                assert!(!seen[j], "select_columns: duplicate index {}", j);
                seen[j] = true;
                self.columns[j].clone()
            })
            .collect();
        SparseColumnMatrix {
            rows: self.rows,
            columns,
        }
    }

    /// Estimates the largest eigenvalue of MᵀM (equal to that of MMᵀ and to
    /// the squared spectral norm of M) by power iteration on v ↦ Mᵀ(Mv).
    ///
    /// The start vector comes from a fixed-seed generator so repeated calls
    /// are deterministic. Convergence is declared when successive Rayleigh
    /// quotients agree to relative `tol`.
    pub fn spectral_norm_gram(&self, tol: f64, max_iter: usize) -> SpectralEstimate {
        assert!(tol > 0.0, "spectral_norm_gram: tol must be positive");
        assert!(
            self.rows > 0 && self.cols() > 0,
            "spectral_norm_gram: empty matrix"
        );
        let mut seed = 0x9e37_79b9_7f4a_7c15u64;
        let mut v: Vec<f64> = (0..self.cols())
            .map(|_| splitmix64(&mut seed) - 0.5)
            .collect();
        let vn = norm2(&v);
        if vn == 0.0 {
            v[0] = 1.0;
        } else {
            v.iter_mut().for_each(|x| *x /= vn);
        }

        let mut lambda_prev = f64::NAN;
        for _ in 0..max_iter {
            let s = self.matvec_transpose(&self.matvec(&v));
            // ‖v‖ = 1, so this is the Rayleigh quotient of MᵀM.
            let lambda = dot(&v, &s);
            let sn = norm2(&s);
            if sn == 0.0 {
                // v is in the kernel; with a dense random start this means
                // the matrix itself is (numerically) zero.
                return SpectralEstimate {
                    value: 0.0,
                    converged: true,
                };
            }
            for (vi, si) in v.iter_mut().zip(&s) {
                *vi = si / sn;
            }
            if lambda_prev.is_finite()
                && (lambda - lambda_prev).abs() <= tol * lambda.abs().max(f64::MIN_POSITIVE)
            {
                return SpectralEstimate {
                    value: lambda,
                    converged: true,
                };
            }
            lambda_prev = lambda;
        }
        SpectralEstimate {
            value: lambda_prev,
            converged: false,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn splitmix64(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn to_dense(m: &SparseColumnMatrix) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; m.cols()]; m.rows()];
        for j in 0..m.cols() {
            for &(r, v) in m.column(j) {
                d[r][j] = v;
            }
        }
        d
    }

    fn dense_matvec(d: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        d.iter().map(|row| dot(row, v)).collect()
    }

    /// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
    fn jacobi_max_eigenvalue(mut a: Vec<Vec<f64>>) -> f64 {
        let n = a.len();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off < 1e-28 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).fold(f64::NEG_INFINITY, f64::max)
    }

    fn gram(m: &SparseColumnMatrix) -> Vec<Vec<f64>> {
        let d = to_dense(m);
        let n = m.cols();
        let mut g = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                g[i][j] = (0..m.rows()).map(|r| d[r][i] * d[r][j]).sum();
            }
        }
        g
    }

    fn random_sparse(rows: usize, cols: usize, seed: u64) -> SparseColumnMatrix {
        let mut s = seed;
        let columns = (0..cols)
            .map(|_| {
                (0..rows)
                    .filter_map(|r| {
                        let u = splitmix64(&mut s);
                        (u < 0.7).then(|| (r, 2.0 * splitmix64(&mut s) - 1.0 + 0.1))
                    })
                    .collect()
            })
            .collect();
        SparseColumnMatrix::from_columns(rows, columns)
    }

    #[test]
    fn matvec_identity_and_zero() {
        let id = SparseColumnMatrix::identity(3);
        assert_eq!(id.matvec(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        let zero = SparseColumnMatrix::from_columns(3, vec![vec![], vec![]]);
        assert_eq!(zero.matvec(&[4.0, 5.0]), vec![0.0; 3]);
    }

    #[test]
    fn matvec_hand_computed() {
        // columns (1,3) and (2,4): [[1,2],[3,4]]
        let m = SparseColumnMatrix::from_columns(
            2,
            vec![vec![(0, 1.0), (1, 3.0)], vec![(0, 2.0), (1, 4.0)]],
        );
        assert_eq!(m.matvec(&[1.0, 1.0]), vec![3.0, 7.0]);
    }

    #[test]
    fn matvec_transpose_identity_and_scaled_basis() {
        let id = SparseColumnMatrix::identity(4);
        let v = [0.5, -1.0, 2.0, 0.0];
        assert_eq!(id.matvec_transpose(&v), v.to_vec());
        // single-entry column c·e_k: output_j = c·v_k
        let m = SparseColumnMatrix::from_columns(4, vec![vec![(2, 3.0)]]);
        assert_eq!(m.matvec_transpose(&v), vec![6.0]);
    }

    #[test]
    fn matvec_transpose_matches_dense() {
        let m = random_sparse(5, 4, 7);
        let d = to_dense(&m);
        let v = [0.3, -1.2, 0.7, 2.0, -0.4];
        let got = m.matvec_transpose(&v);
        for j in 0..4 {
            let want: f64 = (0..5).map(|r| d[r][j] * v[r]).sum();
            assert!((got[j] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn select_columns_cases() {
        let m = random_sparse(4, 3, 11);
        let all = m.select_columns(&[0, 1, 2]);
        assert_eq!(all, m);
        let none = m.select_columns(&[]);
        assert_eq!(none.cols(), 0);
        assert_eq!(none.rows(), 4);
        let picked = m.select_columns(&[2, 0]);
        assert_eq!(picked.column(0), m.column(2));
        assert_eq!(picked.column(1), m.column(0));
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn select_columns_out_of_range_panics() {
        let m = SparseColumnMatrix::identity(2);
        m.select_columns(&[2]);
    }

    #[test]
    fn spectral_norm_identity_and_diagonal() {
        let id = SparseColumnMatrix::identity(5);
        let est = id.spectral_norm_gram(1e-12, 1000);
        assert!(est.converged);
        assert!((est.value - 1.0).abs() < 1e-10);

        let d = SparseColumnMatrix::from_columns(2, vec![vec![(0, 3.0)], vec![(1, 2.0)]]);
        let est = d.spectral_norm_gram(1e-12, 10000);
        assert!(est.converged);
        assert!((est.value - 9.0).abs() < 1e-8);
    }

    #[test]
    fn spectral_norm_matches_jacobi_oracle() {
        let m = random_sparse(6, 4, 23);
        let want = jacobi_max_eigenvalue(gram(&m));
        let est = m.spectral_norm_gram(1e-13, 50000);
        assert!(est.converged);
        assert!(
            (est.value - want).abs() <= 1e-8 * want.max(1.0),
            "power {} vs jacobi {}",
            est.value,
            want
        );
    }

    #[test]
    fn spectral_norm_zero_matrix() {
        let z = SparseColumnMatrix::from_columns(3, vec![vec![], vec![]]);
        let est = z.spectral_norm_gram(1e-10, 100);
        assert!(est.converged);
        assert_eq!(est.value, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn gram_product_matches_dense(seed in 0u64..1000, rows in 1usize..7, cols in 1usize..7) {
            let m = random_sparse(rows, cols, seed);
            let d = to_dense(&m);
            let mut s = seed.wrapping_add(99);
            let v: Vec<f64> = (0..cols).map(|_| 2.0 * splitmix64(&mut s) - 1.0).collect();
            let got = m.matvec_transpose(&m.matvec(&v));
            let mv = dense_matvec(&d, &v);
            for j in 0..cols {
                let want: f64 = (0..rows).map(|r| d[r][j] * mv[r]).sum();
                let scale = 1.0 + want.abs();
                prop_assert!((got[j] - want).abs() <= 1e-10 * scale);
            }
        }

        #[test]
        fn spectral_norm_column_permutation_invariant(seed in 0u64..200) {
            let m = random_sparse(5, 4, seed);
            let p = m.select_columns(&[3, 1, 0, 2]);
            let a = m.spectral_norm_gram(1e-12, 20000);
            let b = p.spectral_norm_gram(1e-12, 20000);
            prop_assert!(a.converged && b.converged);
            prop_assert!((a.value - b.value).abs() <= 1e-7 * (1.0 + a.value.abs()));
        }

        #[test]
        fn spectral_norm_quadratic_scaling(seed in 0u64..200, c in 0.1f64..4.0) {
            let m = random_sparse(4, 5, seed);
            let scaled = SparseColumnMatrix::from_columns(
                m.rows(),
                (0..m.cols())
                    .map(|j| m.column(j).iter().map(|&(r, v)| (r, c * v)).collect())
                    .collect(),
            );
            let a = m.spectral_norm_gram(1e-12, 20000);
            let b = scaled.spectral_norm_gram(1e-12, 20000);
            prop_assert!((b.value - c * c * a.value).abs() <= 1e-6 * (1.0 + b.value.abs()));
        }
    }
}
