//! Householder QR with column-norm pivoting for dense real matrices.
//!
//! Used as the rank-revealing kernel and least-squares solver of the steady-state
//! problem. Storage is column-major so every Householder update runs over
//! contiguous memory.

use nalgebra::{DMatrix, DVector};

pub struct PivotedQr {
    rows: usize,
    cols: usize,
    /// Column-major. `R` on and above the diagonal, Householder vectors below
    /// (with an implicit unit leading entry).
    data: Vec<f64>,
    tau: Vec<f64>,
    /// `perm[k]` is the original column sitting at position `k`.
    perm: Vec<usize>,
}

impl PivotedQr {
    pub fn new(matrix: &DMatrix<f64>) -> Self {
        let (rows, cols) = matrix.shape();
        let mut data = matrix.as_slice().to_vec();
        let steps = rows.min(cols);
        let mut tau = vec![0.0; steps];
        let mut perm: Vec<usize> = (0..cols).collect();

        let col_norm2 = |data: &[f64], j: usize, from: usize| -> f64 {
            data[j * rows + from..(j + 1) * rows]
                .iter()
                .map(|v| v * v)
                .sum()
        };
        let mut norms: Vec<f64> = (0..cols).map(|j| col_norm2(&data, j, 0)).collect();
        let mut reference = norms.clone();

        for k in 0..steps {
            let pivot = (k..cols)
                .max_by(|&a, &b| norms[a].total_cmp(&norms[b]))
                .unwrap_or(k);
            if pivot != k {
                for i in 0..rows {
                    data.swap(k * rows + i, pivot * rows + i);
                }
                norms.swap(k, pivot);
                reference.swap(k, pivot);
                perm.swap(k, pivot);
            }

            // Householder reflector for column k below the diagonal.
            let col = &mut data[k * rows..(k + 1) * rows];
            let alpha = col[k];
            let tail: f64 = col[k + 1..].iter().map(|v| v * v).sum();
            if tail == 0.0 {
                tau[k] = 0.0;
            } else {
                let norm = (alpha * alpha + tail).sqrt();
                let beta = if alpha >= 0.0 { -norm } else { norm };
                let scale = 1.0 / (alpha - beta);
                for v in col[k + 1..].iter_mut() {
                    *v *= scale;
                }
                tau[k] = (beta - alpha) / beta;
                col[k] = beta;
            }

            if tau[k] != 0.0 {
                let (left, right) = data.split_at_mut((k + 1) * rows);
                let v = &left[k * rows + k + 1..(k + 1) * rows];
                for j in 0..(cols - k - 1) {
                    let target = &mut right[j * rows + k..(j + 1) * rows];
                    let mut w = target[0];
                    for (t, vi) in target[1..].iter().zip(v) {
                        w += t * vi;
                    }
                    w *= tau[k];
                    target[0] -= w;
                    for (t, vi) in target[1..].iter_mut().zip(v) {
                        *t -= w * vi;
                    }
                }
            }

            // Downdate the remaining column norms, recomputing on cancellation.
            for j in (k + 1)..cols {
                let r = data[j * rows + k];
                norms[j] -= r * r;
                if norms[j] <= 1e-8 * reference[j] || norms[j] < 0.0 {
                    norms[j] = col_norm2(&data, j, k + 1);
                    reference[j] = norms[j];
                }
            }
        }

        PivotedQr {
            rows,
            cols,
            data,
            tau,
            perm,
        }
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    /// Absolute values of the diagonal of `R`, non-increasing up to rounding.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.tau.len()).map(|k| self.r(k, k).abs()).collect()
    }

    /// Numerical rank: diagonal entries above `rel_tol * |R_00|`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let diag = self.diagonal();
        let Some(&lead) = diag.first() else { return 0 };
        if lead == 0.0 {
            return 0;
        }
        diag.iter().take_while(|&&d| d > rel_tol * lead).count()
    }

    /// Applies `Q^T` to `b` in place.
    fn apply_qt(&self, b: &mut [f64]) {
        for k in 0..self.tau.len() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let v = &self.data[k * self.rows + k + 1..(k + 1) * self.rows];
            let mut w = b[k];
            for (bi, vi) in b[k + 1..].iter().zip(v) {
                w += bi * vi;
            }
            w *= self.tau[k];
            b[k] -= w;
            for (bi, vi) in b[k + 1..].iter_mut().zip(v) {
                *bi -= w * vi;
            }
        }
    }

    /// Back-substitutes the leading `rank x rank` block of `R` against `rhs`,
    /// where `rhs[..rank]` holds the right-hand side and is overwritten.
    fn back_substitute(&self, rhs: &mut [f64], rank: usize) {
        for i in (0..rank).rev() {
            let mut s = rhs[i];
            for (j, x) in rhs.iter().enumerate().take(rank).skip(i + 1) {
                s -= self.r(i, j) * x;
            }
            rhs[i] = s / self.r(i, i);
        }
    }

    fn unpermute(&self, z: &[f64]) -> DVector<f64> {
        let mut x = DVector::zeros(self.cols);
        for (k, &orig) in self.perm.iter().enumerate() {
            x[orig] = z[k];
        }
        x
    }

    /// Basic least-squares solution of `A x = b` using the leading `rank` pivots;
    /// the remaining (pivoted) components are set to zero.
    pub fn least_squares(&self, b: &DVector<f64>, rank: usize) -> DVector<f64> {
        assert_eq!(b.len(), self.rows);
        let rank = rank.min(self.tau.len());
        let mut work = b.as_slice().to_vec();
        self.apply_qt(&mut work);
        let mut z = vec![0.0; self.cols];
        z[..rank].copy_from_slice(&work[..rank]);
        self.back_substitute(&mut z, rank);
        self.unpermute(&z)
    }

    /// Vector spanning the kernel of a matrix of rank `cols - 1`, with the last
    /// pivoted component fixed to one.
    pub fn null_vector(&self) -> DVector<f64> {
        let n = self.cols;
        let rank = n - 1;
        let mut z = vec![0.0; n];
        for (i, zi) in z.iter_mut().enumerate().take(rank) {
            *zi = -self.r(i, rank);
        }
        self.back_substitute(&mut z, rank);
        z[rank] = 1.0;
        self.unpermute(&z)
    }
}
