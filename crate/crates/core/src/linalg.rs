//! Small dense square matrices.
//!
//! Cocycle products run through millions of `m x m` multiplications with `m`
//! rarely above four, so the hot path uses a flat row-major buffer with no
//! allocation per step. Decompositions that are not on the hot path (QR,
//! singular values, eigenvectors) go through `nalgebra`.

use nalgebra::DMatrix;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m.set(i, i, e);
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(LabError::Invalid(format!(
                "expected {} row-major entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LabError::Invalid("matrix entries must be finite".into()));
        }
        Ok(Matrix { n, data })
    }

    /// Builds a square matrix from a flat row-major slice whose length is a
    /// perfect square.
    pub fn from_flat(data: &[f64]) -> Result<Self> {
        let n = (data.len() as f64).sqrt().round() as usize;
        Self::from_row_major(n, data.to_vec())
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(LabError::Invalid("matrix rows must form a square".into()));
        }
        Self::from_row_major(n, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.n);
        self.mul_into(rhs, &mut out);
        out
    }

    /// `out = self * rhs`; `out` must not alias either operand.
    pub fn mul_into(&self, rhs: &Matrix, out: &mut Matrix) {
        let n = self.n;
        debug_assert_eq!(rhs.n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.data[i * n + k] * rhs.data[k * n + j];
                }
                out.data[i * n + j] = acc;
            }
        }
    }

    /// `out = self * v`.
    #[inline]
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.data[i * n..(i + 1) * n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    pub fn add_scaled(&mut self, other: &Matrix, factor: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs())).unwrap();
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let f = a[r * n + col] / p;
                if f != 0.0 {
                    for j in col..n {
                        a[r * n + j] -= f * a[col * n + j];
                    }
                }
            }
        }
        det
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Matrix> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = Matrix::identity(n).data;
        for col in 0..n {
            let pivot = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs())).unwrap();
            let p = a[pivot * n + col];
            if p == 0.0 || !p.is_finite() {
                return Err(LabError::Domain("matrix is singular".into()));
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(pivot * n + j, col * n + j);
                    inv.swap(pivot * n + j, col * n + j);
                }
            }
            for j in 0..n {
                a[col * n + j] /= p;
                inv[col * n + j] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                if f != 0.0 {
                    for j in 0..n {
                        a[r * n + j] -= f * a[col * n + j];
                        inv[r * n + j] -= f * inv[col * n + j];
                    }
                }
            }
        }
        Ok(Matrix { n, data: inv })
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
        let n = m.nrows();
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }

    /// Singular values in nonincreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.data[0].abs()];
        }
        if self.n == 2 {
            let (hi, lo) = singular_values_2x2(&self.data);
            return vec![hi, lo];
        }
        let mut sv: Vec<f64> = self.to_nalgebra().singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    /// Operator norm induced by the Euclidean norm.
    pub fn op_norm(&self) -> f64 {
        match self.n {
            1 => self.data[0].abs(),
            2 => singular_values_2x2(&self.data).0,
            _ => self.singular_values()[0],
        }
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.singular_values();
        let lo = *sv.last().unwrap();
        if lo == 0.0 {
            f64::INFINITY
        } else {
            sv[0] / lo
        }
    }

    /// Householder QR with the sign convention `R_ii >= 0`.
    ///
    /// Returns `Q` and the diagonal of `R`.
    pub fn qr_positive(&self) -> (Matrix, Vec<f64>) {
        let qr = self.to_nalgebra().qr();
        let mut q = Matrix::from_nalgebra(&qr.q());
        let r = qr.r();
        let n = self.n;
        let mut diag = Vec::with_capacity(n);
        for j in 0..n {
            let rjj = r[(j, j)];
            if rjj < 0.0 {
                for i in 0..n {
                    let v = q.get(i, j);
                    q.set(i, j, -v);
                }
            }
            diag.push(rjj.abs());
        }
        (q, diag)
    }

    /// Unit vector spanning the (numerical) kernel of `self`, taken as the
    /// right singular vector of the smallest singular value.
    pub fn null_vector(&self) -> Vec<f64> {
        let svd = self.to_nalgebra().svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let (idx, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        v_t.row(idx).iter().copied().collect()
    }

    /// Matrix of all `k x k` minors in lexicographic subset order: the matrix
    /// of the `k`-th exterior power in the wedge basis.
    pub fn compound(&self, k: usize) -> Matrix {
        let subsets = k_subsets(self.n, k);
        let size = subsets.len();
        let mut out = Matrix::zeros(size);
        let mut sub = Matrix::zeros(k);
        for (r, rows) in subsets.iter().enumerate() {
            for (c, cols) in subsets.iter().enumerate() {
                for (i, &ri) in rows.iter().enumerate() {
                    for (j, &cj) in cols.iter().enumerate() {
                        sub.set(i, j, self.get(ri, cj));
                    }
                }
                out.set(r, c, sub.det());
            }
        }
        out
    }
}

/// Singular values of a 2x2 row-major matrix, largest first.
#[inline]
pub fn singular_values_2x2(a: &[f64]) -> (f64, f64) {
    let s = a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3];
    let det = (a[0] * a[3] - a[1] * a[2]).abs();
    // s^2 - 4 det^2 = ((a-d)^2 + (b+c)^2)((a+d)^2 + (b-c)^2), which avoids the
    // cancellation of the naive discriminant.
    let p = ((a[0] - a[3]).powi(2) + (a[1] + a[2]).powi(2)).sqrt();
    let q = ((a[0] + a[3]).powi(2) + (a[1] - a[2]).powi(2)).sqrt();
    let hi = 0.5 * (p + q);
    let lo = if hi > 0.0 { det / hi } else { 0.0 };
    debug_assert!((hi * hi + lo * lo - s).abs() <= 1e-9 * s.max(1e-300) + 1e-300);
    (hi, lo)
}

/// Lexicographically ordered `k`-subsets of `{0, .., n-1}`.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scales `v` to unit length and returns its previous norm.
#[inline]
pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Square integer matrix, used for toral automorphisms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    n: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn from_row_major(n: usize, data: Vec<i64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(LabError::Invalid(format!(
                "expected {} integer entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(IntMatrix { n, data })
    }

    pub fn from_rows(rows: &[&[i64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(LabError::Invalid("matrix rows must form a square".into()));
        }
        Self::from_row_major(n, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.n + j]
    }

    pub fn entries(&self) -> &[i64] {
        &self.data
    }

    pub fn to_f64(&self) -> Matrix {
        Matrix { n: self.n, data: self.data.iter().map(|&x| x as f64).collect() }
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> i128 {
        bareiss_det(self.n, self.data.iter().map(|&x| x as i128).collect())
    }

    /// Exact inverse of a unimodular matrix via the adjugate.
    pub fn unimodular_inverse(&self) -> Result<IntMatrix> {
        let det = self.det();
        if det.abs() != 1 {
            return Err(LabError::Invalid(format!("torus automorphism needs determinant +-1, got {det}")));
        }
        let n = self.n;
        if n == 1 {
            return Ok(IntMatrix { n, data: vec![self.data[0] * det as i64] });
        }
        let mut data = vec![0i64; n * n];
        for i in 0..n {
            for j in 0..n {
                // adj[j][i] = (-1)^(i+j) * minor(i, j)
                let minor: Vec<i128> = (0..n)
                    .filter(|&r| r != i)
                    .flat_map(|r| (0..n).filter(move |&c| c != j).map(move |c| (r, c)))
                    .map(|(r, c)| self.data[r * n + c] as i128)
                    .collect();
                let cof = bareiss_det(n - 1, minor) * if (i + j) % 2 == 0 { 1 } else { -1 };
                let v = cof * det;
                data[j * n + i] =
                    i64::try_from(v).map_err(|_| LabError::Overflow("inverse entry exceeds i64".into()))?;
            }
        }
        Ok(IntMatrix { n, data })
    }

    /// Reduction mod 2^64, the form acting on fixed-point torus coordinates.
    pub fn to_wrapping(&self) -> WrappingMatrix {
        WrappingMatrix { n: self.n, data: self.data.iter().map(|&x| x as u64).collect() }
    }
}

fn bareiss_det(n: usize, mut a: Vec<i128>) -> i128 {
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k * n + k] == 0 {
            match (k + 1..n).find(|&r| a[r * n + k] != 0) {
                Some(r) => {
                    for j in 0..n {
                        a.swap(k * n + j, r * n + j);
                    }
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i * n + j] = (a[i * n + j] * a[k * n + k] - a[i * n + k] * a[k * n + j]) / prev;
            }
        }
        prev = a[k * n + k];
    }
    sign * a[n * n - 1]
}

/// Integer matrix reduced mod 2^64. Acting on coordinates stored as fractions
/// of 2^64 this is exactly the induced map on the torus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrappingMatrix {
    n: usize,
    data: Vec<u64>,
}

impl WrappingMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0u64; n * n];
        for i in 0..n {
            data[i * n + i] = 1;
        }
        WrappingMatrix { n, data }
    }

    #[inline]
    pub fn apply(&self, x: &[u64], out: &mut [u64]) {
        let n = self.n;
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.data[i * n..(i + 1) * n];
            *o = row.iter().zip(x).fold(0u64, |acc, (&a, &b)| acc.wrapping_add(a.wrapping_mul(b)));
        }
    }

    pub fn mul(&self, rhs: &WrappingMatrix) -> WrappingMatrix {
        let n = self.n;
        let mut data = vec![0u64; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0u64;
                for k in 0..n {
                    acc = acc.wrapping_add(self.data[i * n + k].wrapping_mul(rhs.data[k * n + j]));
                }
                data[i * n + j] = acc;
            }
        }
        WrappingMatrix { n, data }
    }

    /// `self^e` by repeated squaring.
    pub fn pow(&self, mut e: u64) -> WrappingMatrix {
        let mut base = self.clone();
        let mut acc = WrappingMatrix::identity(self.n);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }
}
