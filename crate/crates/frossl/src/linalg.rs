//! Dense linear-algebra kernels shared by every other module.
//!
//! Row-major `f64` matrices with the operations the loss zoo needs:
//! centering, covariance/Gram products, Frobenius and Ky Fan norms,
//! symmetric eigendecomposition, whitening, and PSD log-determinant.
//! No external linear-algebra backend; everything here is deterministic
//! for identical inputs.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Jacobi is used up to this dimension; larger symmetric problems go through
/// Householder tridiagonalization + implicit QL, which has a much smaller
/// constant at benchmark scales (D up to 2048).
const JACOBI_MAX_DIM: usize = 128;

/// Relative off-diagonal convergence threshold for the Jacobi sweep.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Relative asymmetry tolerated by [`Matrix::sym_eig`] and
/// [`Matrix::logdet_psd`].
const SYM_TOL: f64 = 1e-8;

/// Dense real matrix in row-major order. Entries are validated to be finite
/// on construction and the value is immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Column normalization modes for [`Matrix::normalize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizeMode {
    /// Scale each column so its standard deviation (about the column mean) is 1.
    DimVariance,
    /// Scale each row to unit Euclidean norm.
    RowUnit,
    /// Scale the whole matrix so its Frobenius norm equals sqrt(D).
    FrobeniusSqrtD,
    /// Scale a square (covariance) matrix so its trace is 1.
    TraceCov,
}

/// Result of a symmetric eigendecomposition: `A = Q diag(values) Q^T` with
/// eigenvalues sorted non-increasingly and `Q` orthonormal. The sign of each
/// eigenvector is fixed so its largest-magnitude component is positive.
#[derive(Debug, Clone)]
pub struct SymEigDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, aligned with `eigenvalues`.
    pub eigenvectors: Matrix,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dim(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dim(format!(
                "entry count {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "entry ({}, {}) is {}",
                idx / cols,
                idx % cols,
                data[idx]
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dim("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    /// Matrix with i.i.d. standard normal entries drawn from `rng`.
    pub fn random_standard<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Build from a closure; the result must be finite everywhere.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (m, k_dim, n) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            let arow = &self.data[i * k_dim..(i + 1) * k_dim];
            let crow = &mut out.data[i * n..(i + 1) * n];
            for (k, &aik) in arow.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (c, &b) in crow.iter_mut().zip(brow) {
                    *c += aik * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::Dim(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Frobenius inner product `<A, B> = sum_ij A_ij B_ij`.
    pub fn dot(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// `Z^T Z`, exploiting symmetry of the product.
    pub fn xtx(&self) -> Matrix {
        let (n, d) = (self.rows, self.cols);
        let mut out = Matrix::zeros(d, d);
        // Row-blocked so each output row is touched once per block of input
        // rows rather than once per row; keeps the accumulator traffic off
        // the memory bus for large d.
        const BLOCK: usize = 64;
        let mut r0 = 0;
        while r0 < n {
            let r1 = (r0 + BLOCK).min(n);
            for i in 0..d {
                let crow = &mut out.data[i * d + i..(i + 1) * d];
                for r in r0..r1 {
                    let z = &self.data[r * d..(r + 1) * d];
                    let zi = z[i];
                    if zi == 0.0 {
                        continue;
                    }
                    for (c, &zj) in crow.iter_mut().zip(&z[i..]) {
                        *c += zi * zj;
                    }
                }
            }
            r0 = r1;
        }
        for i in 0..d {
            for j in 0..i {
                out.data[i * d + j] = out.data[j * d + i];
            }
        }
        out
    }

    /// `Z Z^T`.
    pub fn xxt(&self) -> Matrix {
        let (n, d) = (self.rows, self.cols);
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            let ri = &self.data[i * d..(i + 1) * d];
            for j in i..n {
                let rj = &self.data[j * d..(j + 1) * d];
                let s: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                out.data[i * n + j] = s;
                out.data[j * n + i] = s;
            }
        }
        out
    }

    /// Per-column means.
    pub fn col_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (m, &v) in means.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        let inv = 1.0 / self.rows as f64;
        means.iter_mut().for_each(|m| *m *= inv);
        means
    }

    /// Subtract the column mean from every column.
    pub fn center_columns(&self) -> Matrix {
        let means = self.col_means();
        let mut out = self.clone();
        for i in 0..self.rows {
            let row = &mut out.data[i * self.cols..(i + 1) * self.cols];
            for (v, m) in row.iter_mut().zip(&means) {
                *v -= m;
            }
        }
        out
    }

    /// Covariance `(1/N) Z^T Z` of an already column-centered matrix.
    pub fn covariance(&self) -> Matrix {
        self.xtx().scale(1.0 / self.rows as f64)
    }

    /// Gram matrix `Z Z^T`.
    pub fn gram(&self) -> Matrix {
        self.xxt()
    }

    pub fn trace(&self) -> f64 {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self.data[i * self.cols + i]).sum()
    }

    /// Frobenius norm by direct element sum, never via a decomposition.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Singular values, non-increasing, via the smaller of the two Gram products.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let g = if self.rows <= self.cols { self.xxt() } else { self.xtx() };
        let eig = g.sym_eig()?;
        Ok(eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect())
    }

    /// Ky Fan p-norm `(sum_k sigma_k^p)^(1/p)` for `p >= 1`.
    pub fn ky_fan_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::Param(format!("ky fan norm requires p >= 1, got {p}")));
        }
        let sv = self.singular_values()?;
        Ok(sv.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p))
    }

    fn check_symmetric(&self, op: &str) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::Dim(format!("{op} requires a square matrix, got {}x{}", self.rows, self.cols)));
        }
        let scale = self.frobenius_norm();
        let tol = SYM_TOL * scale.max(f64::MIN_POSITIVE);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let diff = (self.get(i, j) - self.get(j, i)).abs();
                if diff > tol {
                    return Err(Error::Dim(format!(
                        "{op} requires symmetry: |A[{i},{j}] - A[{j},{i}]| = {diff:e} exceeds tolerance {tol:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Eigendecomposition of a symmetric matrix.
    ///
    /// Cyclic Jacobi for dimensions up to 128; Householder tridiagonalization
    /// with implicit QL above that. Deterministic for identical input.
    pub fn sym_eig(&self) -> Result<SymEigDecomposition> {
        self.check_symmetric("sym_eig")?;
        let n = self.rows;
        let (mut values, mut vecs) = if n <= JACOBI_MAX_DIM {
            jacobi_eig(self)
        } else {
            tridiag_eig(self)
        };

        // Sort non-increasingly (stable) and fix eigenvector signs.
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("eigenvalue {bad} from overflowing input")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let mut sorted_vals = Vec::with_capacity(n);
        let mut sorted_vecs = Matrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            sorted_vals.push(values[src]);
            // find largest-magnitude component, flip if negative
            let mut best = 0;
            let mut best_abs = 0.0;
            for i in 0..n {
                let a = vecs.data[i * n + src].abs();
                if a > best_abs {
                    best_abs = a;
                    best = i;
                }
            }
            let sign = if vecs.data[best * n + src] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..n {
                sorted_vecs.data[i * n + dst] = sign * vecs.data[i * n + src];
            }
        }
        values = sorted_vals;
        vecs = sorted_vecs;
        Ok(SymEigDecomposition { eigenvalues: values, eigenvectors: vecs })
    }

    /// Eigenvalues only, sorted non-increasingly. Skips eigenvector
    /// accumulation, which dominates the cost of `sym_eig` for large
    /// matrices; use when only the spectrum is needed.
    pub fn sym_eigvals(&self) -> Result<Vec<f64>> {
        self.check_symmetric("sym_eigvals")?;
        let n = self.rows;
        let mut values = if n <= JACOBI_MAX_DIM {
            jacobi_eig(self).0
        } else {
            tridiag_eigvals(self)
        };
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("eigenvalue {bad} from overflowing input")));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(values)
    }

    /// `log det(A + eps I)` via Cholesky factorization.
    pub fn logdet_psd(&self, eps: f64) -> Result<f64> {
        if eps < 0.0 {
            return Err(Error::Param(format!("logdet_psd requires eps >= 0, got {eps}")));
        }
        self.check_symmetric("logdet_psd")?;
        let n = self.rows;
        let mut a = self.clone();
        for i in 0..n {
            a.data[i * n + i] += eps;
        }
        // in-place lower Cholesky
        let mut logdet = 0.0;
        for k in 0..n {
            let mut pivot = a.data[k * n + k];
            for j in 0..k {
                let l = a.data[k * n + j];
                pivot -= l * l;
            }
            if pivot <= 0.0 || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: k });
            }
            let lkk = pivot.sqrt();
            a.data[k * n + k] = lkk;
            logdet += 2.0 * lkk.ln();
            for i in (k + 1)..n {
                let mut v = a.data[i * n + k];
                for j in 0..k {
                    v -= a.data[i * n + j] * a.data[k * n + j];
                }
                a.data[i * n + k] = v / lkk;
            }
        }
        Ok(logdet)
    }

    /// Normalize per the requested mode. Errors with the offending row/column
    /// when the normalizing statistic is zero.
    pub fn normalize(&self, mode: NormalizeMode) -> Result<Matrix> {
        match mode {
            NormalizeMode::DimVariance => {
                let means = self.col_means();
                let mut stds = vec![0.0; self.cols];
                for i in 0..self.rows {
                    for (s, (&v, m)) in stds.iter_mut().zip(self.row(i).iter().zip(&means)) {
                        let d = v - m;
                        *s += d * d;
                    }
                }
                let inv_n = 1.0 / self.rows as f64;
                for (k, s) in stds.iter_mut().enumerate() {
                    *s = (*s * inv_n).sqrt();
                    if *s == 0.0 {
                        return Err(Error::Degenerate(format!("column {k} has zero variance")));
                    }
                }
                let mut out = self.clone();
                for i in 0..self.rows {
                    let row = &mut out.data[i * self.cols..(i + 1) * self.cols];
                    for (v, s) in row.iter_mut().zip(&stds) {
                        *v /= s;
                    }
                }
                Ok(out)
            }
            NormalizeMode::RowUnit => {
                let mut out = self.clone();
                for i in 0..self.rows {
                    let row = &mut out.data[i * self.cols..(i + 1) * self.cols];
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        return Err(Error::Degenerate(format!("row {i} has zero norm")));
                    }
                    row.iter_mut().for_each(|v| *v /= norm);
                }
                Ok(out)
            }
            NormalizeMode::FrobeniusSqrtD => {
                let norm = self.frobenius_norm();
                if norm == 0.0 {
                    return Err(Error::Degenerate("matrix has zero Frobenius norm".into()));
                }
                Ok(self.scale((self.cols as f64).sqrt() / norm))
            }
            NormalizeMode::TraceCov => {
                if self.rows != self.cols {
                    return Err(Error::Dim(format!(
                        "trace normalization requires a square matrix, got {}x{}",
                        self.rows, self.cols
                    )));
                }
                let t = self.trace();
                if t == 0.0 {
                    return Err(Error::Degenerate("matrix has zero trace".into()));
                }
                Ok(self.scale(1.0 / t))
            }
        }
    }

    /// Center and whiten so the output covariance is the identity, using
    /// `Sigma^(-1/2)` from the eigendecomposition with eigenvalue floor `eps`.
    pub fn whiten(&self, eps: f64) -> Result<Matrix> {
        if self.rows < 2 {
            return Err(Error::Dim("whitening requires at least 2 rows".into()));
        }
        let centered = self.center_columns();
        let cov = centered.covariance();
        let eig = cov.sym_eig()?;
        let w = matrix_function(&eig, |l| 1.0 / l.max(eps).sqrt());
        centered.matmul(&w)
    }

    /// Headerless CSV, one row per line, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Matrix> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match row {
                Ok(r) => rows.push(r),
                Err(e) => return Err(Error::Format(format!("line {}: {e}", lineno + 1))),
            }
        }
        if rows.is_empty() {
            return Err(Error::Format("empty CSV".into()));
        }
        Matrix::from_rows(&rows)
    }
}

/// Apply a scalar function to the spectrum: `Q f(Lambda) Q^T`.
pub fn matrix_function(eig: &SymEigDecomposition, f: impl Fn(f64) -> f64) -> Matrix {
    let n = eig.eigenvalues.len();
    let q = &eig.eigenvectors;
    let mut out = Matrix::zeros(n, n);
    for k in 0..n {
        let fk = f(eig.eigenvalues[k]);
        if fk == 0.0 {
            continue;
        }
        for i in 0..n {
            let qik = q.data[i * n + k] * fk;
            if qik == 0.0 {
                continue;
            }
            for j in 0..n {
                out.data[i * n + j] += qik * q.data[j * n + k];
            }
        }
    }
    out
}

/// Cyclic Jacobi eigendecomposition. Returns unsorted (values, vectors).
fn jacobi_eig(m: &Matrix) -> (Vec<f64>, Matrix) {
    let n = m.rows;
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let thresh = JACOBI_TOL * m.frobenius_norm();

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.data[i * n + j] * a.data[i * n + j];
            }
        }
        if (2.0 * off).sqrt() <= thresh {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.data[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a.data[p * n + p];
                let aqq = a.data[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // rotate rows/cols p and q of A
                for k in 0..n {
                    let akp = a.data[k * n + p];
                    let akq = a.data[k * n + q];
                    a.data[k * n + p] = c * akp - s * akq;
                    a.data[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a.data[p * n + k];
                    let aqk = a.data[q * n + k];
                    a.data[p * n + k] = c * apk - s * aqk;
                    a.data[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v.data[k * n + p];
                    let vkq = v.data[k * n + q];
                    v.data[k * n + p] = c * vkp - s * vkq;
                    v.data[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a.data[i * n + i]).collect();
    (values, v)
}

/// Householder tridiagonalization followed by implicit-shift QL.
/// Ported from the classic EISPACK tred2/tql2 pair.
fn tridiag_eig(m: &Matrix) -> (Vec<f64>, Matrix) {
    let n = m.rows;
    let mut v = m.data.clone(); // v[i*n + j], eigenvectors end up in columns
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    // tred2
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..(n - 1) {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for (k, item) in d.iter_mut().enumerate().take(i + 1) {
                *item = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + n - 1] = 1.0;
    e[0] = 0.0;

    // tql2
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = 2.0_f64.powi(-52);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m_idx = l;
        while m_idx < n {
            if e[m_idx].abs() <= eps * tst1 {
                break;
            }
            m_idx += 1;
        }
        if m_idx > l {
            loop {
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;
                p = d[m_idx];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m_idx).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[k * n + i + 1];
                        v[k * n + i + 1] = s * v[k * n + i] + c * h;
                        v[k * n + i] = c * v[k * n + i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    (d, Matrix { rows: n, cols: n, data: v })
}

/// Householder tridiagonalization and implicit-shift QL without eigenvector
/// accumulation (EISPACK tred1/tql1). Returns unsorted eigenvalues.
fn tridiag_eigvals(m: &Matrix) -> Vec<f64> {
    let n = m.rows;
    let mut a = m.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    // tred1
    for i in (1..n).rev() {
        let l = i; // columns 0..l of row i participate
        let mut h = 0.0;
        let mut scale = 0.0;
        for k in 0..l {
            scale += a[i * n + k].abs();
        }
        if scale == 0.0 || l == 0 {
            e[i] = if l == 0 { 0.0 } else { a[i * n + l - 1] };
        } else {
            for k in 0..l {
                a[i * n + k] /= scale;
                h += a[i * n + k] * a[i * n + k];
            }
            let mut f = a[i * n + l - 1];
            let mut g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
            e[i] = scale * g;
            h -= f * g;
            a[i * n + l - 1] = f - g;
            f = 0.0;
            for j in 0..l {
                g = 0.0;
                for k in 0..=j {
                    g += a[j * n + k] * a[i * n + k];
                }
                for k in (j + 1)..l {
                    g += a[k * n + j] * a[i * n + k];
                }
                e[j] = g / h;
                f += e[j] * a[i * n + j];
            }
            let hh = f / (h + h);
            for j in 0..l {
                f = a[i * n + j];
                e[j] -= hh * f;
                g = e[j];
                for k in 0..=j {
                    a[j * n + k] -= f * e[k] + g * a[i * n + k];
                }
            }
        }
        d[i] = h;
    }
    for i in 0..n {
        d[i] = a[i * n + i];
    }

    // tql1
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = 2.0_f64.powi(-52);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m_idx = l;
        while m_idx < n {
            if e[m_idx].abs() <= eps * tst1 {
                break;
            }
            m_idx += 1;
        }
        if m_idx > l {
            loop {
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;
                p = d[m_idx];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m_idx).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    d
}
