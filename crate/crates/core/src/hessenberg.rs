//! Dense upper-Hessenberg storage and LU solves.
//!
//! The shifted growth-fragmentation operator `sigma I - L` has nonzeros
//! only on the first subdiagonal (upwind transport) and in the upper
//! triangle (fragmentation gain), so Gaussian elimination needs a single
//! row operation per column and the factorization costs `O(n^2)` instead
//! of `O(n^3)`. The matrices we factor are M-matrices (positive diagonal,
//! nonpositive off-diagonal), for which elimination without pivoting is
//! stable and solves with nonnegative right-hand sides proceed without
//! cancellation, preserving componentwise relative accuracy across the
//! huge dynamic ranges of the eigenvectors.

use crate::error::Error;
use crate::Result;

/// Row-major ragged storage: row `i` holds columns `max(i, 1) - 1 ..= n - 1`.
#[derive(Debug, Clone)]
pub struct Hessenberg {
    n: usize,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl Hessenberg {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1);
        let mut offsets = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            offsets.push(total);
            let start = i.saturating_sub(1);
            total += n - start;
        }
        offsets.push(total);
        Self {
            n,
            offsets,
            data: vec![0.0; total],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn row_start_col(&self, i: usize) -> usize {
        i.saturating_sub(1)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j >= self.row_start_col(i), "({i}, {j}) below the band");
        self.offsets[i] + (j - self.row_start_col(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + 1 < i {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Mutable view of row `i` restricted to columns `>= j0`.
    pub fn row_mut(&mut self, i: usize) -> (&mut [f64], usize) {
        let start_col = self.row_start_col(i);
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&mut self.data[a..b], start_col)
    }

    pub fn row(&self, i: usize) -> (&[f64], usize) {
        let start_col = self.row_start_col(i);
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.data[a..b], start_col)
    }

    /// `out = A x`.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let (row, start) = self.row(i);
            let mut acc = 0.0;
            for (k, &a) in row.iter().enumerate() {
                acc += a * x[start + k];
            }
            out[i] = acc;
        }
    }

    /// `out = A^T x`.
    pub fn matvec_transpose(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        out.fill(0.0);
        for i in 0..self.n {
            let (row, start) = self.row(i);
            let xi = x[i];
            for (k, &a) in row.iter().enumerate() {
                out[start + k] += a * xi;
            }
        }
    }

    /// In-place LU factorization eliminating the single subdiagonal entry
    /// of each column; multipliers are stored in the vacated slots.
    pub fn factor(mut self) -> Result<HessenbergLu> {
        let n = self.n;
        for k in 0..n - 1 {
            let pivot = self.get(k, k);
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Internal(format!(
                    "Hessenberg factorization hit pivot {pivot} at column {k}"
                )));
            }
            let m = self.get(k + 1, k) / pivot;
            self.set(k + 1, k, m);
            if m != 0.0 {
                // row_{k+1}[j] -= m * row_k[j] for j > k.
                let (row_k_range, start_k) = (self.offsets[k]..self.offsets[k + 1], self.row_start_col(k));
                let (row_k1_range, start_k1) =
                    (self.offsets[k + 1]..self.offsets[k + 2], self.row_start_col(k + 1));
                debug_assert_eq!(start_k1, k);
                let (head, tail) = self.data.split_at_mut(row_k1_range.start);
                let row_k = &head[row_k_range];
                let row_k1 = &mut tail[..row_k1_range.end - row_k1_range.start];
                // Align on column k + 1.
                let off_k = (k + 1) - start_k;
                let off_k1 = (k + 1) - start_k1;
                for j in 0..(self.n - (k + 1)) {
                    row_k1[off_k1 + j] -= m * row_k[off_k + j];
                }
            }
        }
        let last = self.get(n - 1, n - 1);
        if last == 0.0 || !last.is_finite() {
            return Err(Error::Internal(format!(
                "Hessenberg factorization hit pivot {last} at column {}",
                n - 1
            )));
        }
        Ok(HessenbergLu { inner: self })
    }
}

/// Factored form: unit lower-bidiagonal multipliers in the subdiagonal
/// slots, upper triangle overwritten by `U`.
#[derive(Debug, Clone)]
pub struct HessenbergLu {
    inner: Hessenberg,
}

impl HessenbergLu {
    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.inner.n;
        assert_eq!(b.len(), n);
        // Forward sweep with the bidiagonal multipliers.
        for k in 0..n - 1 {
            let m = self.inner.get(k + 1, k);
            b[k + 1] -= m * b[k];
        }
        // Back substitution with U.
        for i in (0..n).rev() {
            let (row, start) = self.inner.row(i);
            let diag_off = i - start;
            let mut acc = b[i];
            for (k, &a) in row[diag_off + 1..].iter().enumerate() {
                acc -= a * b[i + 1 + k];
            }
            b[i] = acc / row[diag_off];
        }
    }

    /// Solve `A^T x = b` in place, reusing the same factorization
    /// (`A^T = U^T L^T`).
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let n = self.inner.n;
        assert_eq!(b.len(), n);
        // U^T z = b: forward substitution, walking columns of U.
        for i in 0..n {
            let (row, start) = self.inner.row(i);
            let diag_off = i - start;
            b[i] /= row[diag_off];
            let bi = b[i];
            for (k, &a) in row[diag_off + 1..].iter().enumerate() {
                b[i + 1 + k] -= a * bi;
            }
        }
        // L^T w = z: back sweep with the multipliers.
        for k in (0..n - 1).rev() {
            let m = self.inner.get(k + 1, k);
            b[k] -= m * b[k + 1];
        }
    }
}
