//! Small dense complex matrices.
//!
//! Storage is column-major, which keeps the column sweeps of Gram-Schmidt contiguous.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::math;

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Builds from a column-major buffer.
    pub fn from_columns(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match shape");
        CMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, c: usize) -> &[C64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn column_mut(&mut self, c: usize) -> &mut [C64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for c in 0..self.cols {
            for r in 0..self.rows {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &CMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in matmul");
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = other[(k, j)];
                if b.re == 0.0 && b.im == 0.0 {
                    continue;
                }
                for (d, a) in dst.iter_mut().zip(self.column(k)) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self · diag(d) · self†`.
    pub fn congruence_diag(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.cols);
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for (k, &w) in d.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let col = self.column(k);
            for j in 0..n {
                let b = col[j].conj() * w;
                let dst = &mut out.data[j * n..(j + 1) * n];
                for (x, a) in dst.iter_mut().zip(col) {
                    *x += a * b;
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Largest deviation of `self† self` from the identity.
    pub fn isometry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.cols {
            for j in i..self.cols {
                let dot = inner(self.column(i), self.column(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for c in 0..self.cols {
            for r in 0..=c.min(self.rows - 1) {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[c * self.rows + r]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[c * self.rows + r]
    }
}

/// `⟨a|b⟩ = Σ conj(a_i) b_i`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// Orthonormalizes the columns in place by classical Gram-Schmidt applied twice.
///
/// Each column is divided by its (real, positive) norm after projection, so the implied
/// triangular factor has a positive diagonal. Returns `false` on a rank-deficient input.
pub fn orthonormalize_columns(m: &mut CMatrix) -> bool {
    let rows = m.rows;
    let mut coeffs = vec![C64::new(0.0, 0.0); m.cols];
    for j in 0..m.cols {
        for _pass in 0..2 {
            let (done, rest) = m.data.split_at_mut(j * rows);
            let col = &mut rest[..rows];
            for (k, c) in coeffs.iter_mut().enumerate().take(j) {
                *c = inner(&done[k * rows..(k + 1) * rows], col);
            }
            for (k, c) in coeffs.iter().enumerate().take(j) {
                let q = &done[k * rows..(k + 1) * rows];
                for (x, y) in col.iter_mut().zip(q) {
                    *x -= y * c;
                }
            }
        }
        let col = m.column_mut(j);
        let norm = math::sqrt(col.iter().map(|z| z.norm_sqr()).sum::<f64>());
        if !(norm > 1e-300) {
            return false;
        }
        let inv = 1.0 / norm;
        col.iter_mut().for_each(|z| *z *= inv);
    }
    true
}

/// Eigenvalues (ascending) of a Hermitian matrix.
///
/// Uses the real symmetric embedding `[[Re, −Im], [Im, Re]]`, whose spectrum is that of
/// the input with every eigenvalue doubled, diagonalized by cyclic Jacobi rotations.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    assert_eq!(h.rows, h.cols, "eigenvalues of a non-square matrix");
    let n = h.rows;
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![h[(0, 0)].re];
    }
    let m = 2 * n;
    let mut a = vec![0.0f64; m * m];
    for c in 0..n {
        for r in 0..n {
            // Symmetrize to absorb rounding-level non-Hermiticity.
            let z = (h[(r, c)] + h[(c, r)].conj()) * 0.5;
            a[r * m + c] = z.re;
            a[(r + n) * m + (c + n)] = z.re;
            a[(r + n) * m + c] = z.im;
            a[r * m + (c + n)] = -z.im;
        }
    }
    jacobi_symmetric(&mut a, m);
    let mut eig: Vec<f64> = (0..m).map(|i| a[i * m + i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    eig.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

/// Cyclic Jacobi on a dense row-major symmetric matrix; leaves eigenvalues on the diagonal.
fn jacobi_symmetric(a: &mut [f64], n: usize) {
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>();
    if scale == 0.0 {
        return;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if math::fabs(apq) < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + math::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + math::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigenvalues_of_a_hermitian_2x2() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 0)] = c(2.0, 0.0);
        h[(1, 1)] = c(2.0, 0.0);
        h[(0, 1)] = c(0.0, 1.0);
        h[(1, 0)] = c(0.0, -1.0);
        let e = hermitian_eigenvalues(&h);
        assert!((e[0] - 1.0).abs() < 1e-13 && (e[1] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn eigenvalues_preserve_trace_and_frobenius_norm() {
        let n = 5;
        let mut h = CMatrix::zeros(n, n);
        for r in 0..n {
            for col in r..n {
                let z = if r == col { c(r as f64 * 0.3 - 0.4, 0.0) } else { c(0.1 * (r + col) as f64, 0.05 * (col - r) as f64) };
                h[(r, col)] = z;
                h[(col, r)] = z.conj();
            }
        }
        let e = hermitian_eigenvalues(&h);
        let tr: f64 = e.iter().sum();
        assert!((tr - h.trace().re).abs() < 1e-12);
        let fro: f64 = (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|ix| h[ix].norm_sqr()).sum();
        let fro_e: f64 = e.iter().map(|x| x * x).sum();
        assert!((fro - fro_e).abs() < 1e-12);
    }

    #[test]
    fn gram_schmidt_yields_isometry() {
        let mut m = CMatrix::zeros(4, 3);
        for r in 0..4 {
            for col in 0..3 {
                m[(r, col)] = c((r * 3 + col) as f64 % 5.0 + 0.5, (r as f64 - col as f64) * 0.25);
            }
        }
        assert!(orthonormalize_columns(&mut m));
        assert!(m.isometry_defect() < 1e-14);
        let mut rank_def = CMatrix::zeros(3, 2);
        rank_def[(0, 0)] = c(1.0, 0.0);
        rank_def[(0, 1)] = c(2.0, 0.0);
        assert!(!orthonormalize_columns(&mut rank_def));
    }

    #[test]
    fn congruence_matches_explicit_product() {
        let mut v = CMatrix::zeros(3, 2);
        v[(0, 0)] = c(0.5, 0.1);
        v[(1, 0)] = c(-0.2, 0.3);
        v[(2, 1)] = c(0.7, -0.4);
        v[(1, 1)] = c(0.1, 0.0);
        let d = [0.3, 0.7];
        let explicit = v.matmul(&CMatrix::from_diagonal(&d)).matmul(&v.adjoint());
        assert!(v.congruence_diag(&d).max_abs_diff(&explicit) < 1e-15);
    }
}
