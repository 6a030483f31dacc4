//! Dense complex linear algebra: matrices, a cyclic Jacobi eigensolver for
//! Hermitian matrices, and operator norms.
//!
//! Everything here works in `f64` and is intended for the small block sizes
//! that show up in finite truncations of AF towers (dimensions up to a few
//! dozen).

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{shape, validation, Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Relative off-diagonal threshold used by the Jacobi sweeps.
pub const JACOBI_TOL: f64 = 1e-13;
/// Sweep cap for the Jacobi eigensolver.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Hermiticity tolerance, relative to `1 + ||A||_F`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A dense complex matrix stored in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn scalar(n: usize, value: C64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = value;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting bad lengths and
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            ));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(validation!("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(shape!("ragged rows"));
        }
        Self::from_vec(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(shape!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            ));
        }
        Ok(self.matmul_unchecked(other))
    }

    pub(crate) fn matmul_unchecked(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(shape!(
                "shape {}x{} does not match {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    pub(crate) fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    /// Unnormalized trace.
    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||A - A*||_F`; infinite for non-square input.
    pub fn hermitian_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Hermitian within `tol * (1 + ||A||_F)`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol * (1.0 + self.frobenius_norm())
    }

    /// `(A + A*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
        }
        out
    }

    /// Copies `block` into this matrix with its top-left corner at `(offset, offset)`.
    pub(crate) fn set_diagonal_block(&mut self, offset: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(offset + i, offset + j)] = block[(i, j)];
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigendecomposition `A = V diag(eigenvalues) V*` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are the unit eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.eigenvectors.rows())
            .map(|i| self.eigenvectors[(i, k)])
            .collect()
    }

    /// Rebuilds `V diag(lambda) V*`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += v[(i, k)] * self.eigenvalues[k] * v[(j, k)].conj();
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

fn check_hermitian_input(a: &ComplexMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(validation!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        ));
    }
    if !a.is_finite() {
        return Err(validation!("matrix has non-finite entries"));
    }
    if !a.is_hermitian(HERMITIAN_TOL) {
        return Err(validation!(
            "matrix is not Hermitian (residual {:.3e})",
            a.hermitian_residual()
        ));
    }
    Ok(())
}

/// Hermitian eigendecomposition by cyclic Jacobi rotations.
///
/// `tol` is the relative off-diagonal threshold: sweeps stop once the
/// off-diagonal Frobenius mass drops below `tol * ||A||_F`.
pub fn herm_eigen(a: &ComplexMatrix, tol: f64) -> Result<HermitianEigen> {
    check_hermitian_input(a)?;
    let n = a.rows();
    let mut work = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    jacobi_sweeps(&mut work, Some(&mut v), tol)?;

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| work[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));

    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, dst)] = v[(i, src)];
        }
    }
    Ok(HermitianEigen {
        eigenvalues: order.iter().map(|&i| diag[i]).collect(),
        eigenvectors: vectors,
    })
}

/// Eigenvalues only (ascending); skips accumulating eigenvectors.
pub fn herm_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian_input(a)?;
    let mut work = a.hermitian_part();
    jacobi_sweeps(&mut work, None, JACOBI_TOL)?;
    let mut diag: Vec<f64> = (0..a.rows()).map(|i| work[(i, i)].re).collect();
    diag.sort_by(f64::total_cmp);
    Ok(diag)
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn jacobi_sweeps(a: &mut ComplexMatrix, mut v: Option<&mut ComplexMatrix>, tol: f64) -> Result<()> {
    let n = a.rows();
    let scale = a.frobenius_norm();
    if n < 2 || scale == 0.0 {
        return Ok(());
    }
    let threshold = tol * scale;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(a) <= threshold {
            return Ok(());
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let b = a[(p, q)];
                let mag = b.norm();
                if mag <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = b / mag;
                let alpha = a[(p, p)].re;
                let delta = a[(q, q)].re;
                let theta = (delta - alpha) / (2.0 * mag);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) * [[c, s], [-s, c]] on the (p, q) plane.
                let g_pp = C64::new(c, 0.0);
                let g_pq = C64::new(s, 0.0);
                let g_qp = phase.conj() * (-s);
                let g_qq = phase.conj() * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

                if let Some(v) = v.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * g_pp + vkq * g_qp;
                        v[(k, q)] = vkp * g_pq + vkq * g_qq;
                    }
                }
            }
        }
    }
    if off_diagonal_norm(a) <= threshold {
        Ok(())
    } else {
        Err(Error::Unconverged(format!(
            "Jacobi eigensolver exceeded {JACOBI_MAX_SWEEPS} sweeps"
        )))
    }
}

/// Largest `|eigenvalue|` of a Hermitian matrix. Closed forms for sizes 1
/// and 2, Jacobi otherwise. The caller guarantees Hermiticity.
pub fn hermitian_norm(a: &ComplexMatrix) -> f64 {
    match a.rows() {
        0 => 0.0,
        1 => a[(0, 0)].re.abs(),
        2 => {
            let x = a[(0, 0)].re;
            let y = a[(1, 1)].re;
            let mid = 0.5 * (x + y);
            let half = 0.5 * (x - y);
            mid.abs() + (half * half + a[(0, 1)].norm_sqr()).sqrt()
        }
        _ => {
            let mut work = a.hermitian_part();
            // Jacobi on a Hermitian matrix with finite entries cannot fail to
            // converge within the sweep cap at these sizes; fall back to the
            // Frobenius bound if it ever does.
            match jacobi_sweeps(&mut work, None, JACOBI_TOL) {
                Ok(()) => (0..a.rows())
                    .map(|i| work[(i, i)].re.abs())
                    .fold(0.0, f64::max),
                Err(_) => a.frobenius_norm(),
            }
        }
    }
}

/// Largest singular value. Hermitian input uses the spectrum directly,
/// anything else goes through the top eigenvalue of `A*A`.
pub fn operator_norm(a: &ComplexMatrix) -> f64 {
    if a.rows() == 0 || a.cols() == 0 {
        return 0.0;
    }
    if a.is_square() && a.hermitian_residual() == 0.0 {
        return hermitian_norm(a);
    }
    let gram = a.adjoint().matmul_unchecked(a).hermitian_part();
    hermitian_norm(&gram).max(0.0).sqrt()
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm_hermitian(a: &ComplexMatrix) -> Result<f64> {
    Ok(herm_eigenvalues(a)?.iter().map(|x| x.abs()).sum())
}
