//! Dense symmetric matrices and the fourth-order tensors that hold second
//! derivatives of matrix functions.
//!
//! Storage is a full row-major `d×d` buffer. Dimensions in this crate are
//! small (spot covariance of a handful of assets), so the hot loops run over
//! time, not over matrix entries.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// A `d×d` real symmetric matrix with `m[j][k] == m[k][j]` exactly.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.dim).collect();
        f.debug_tuple("SymMatrix").field(&rows).finish()
    }
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for j in 0..dim {
            m.data[j * dim + j] = 1.0;
        }
        m
    }

    /// `d = 1` matrix holding a single variance.
    pub fn scalar(value: f64) -> Self {
        SymMatrix {
            dim: 1,
            data: vec![value],
        }
    }

    /// Diagonal matrix with the given entries.
    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (j, &v) in diag.iter().enumerate() {
            m.data[j * diag.len() + j] = v;
        }
        m
    }

    /// Builds a matrix from rows that must already be exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = check_square(rows)?;
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(dim, data)
    }

    /// Builds a matrix from a row-major buffer that must already be exactly symmetric.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {v}")));
        }
        for j in 0..dim {
            for k in (j + 1)..dim {
                if data[j * dim + k] != data[k * dim + j] {
                    return Err(Error::Input(format!(
                        "matrix is not symmetric at ({j},{k}): {} vs {}",
                        data[j * dim + k],
                        data[k * dim + j]
                    )));
                }
            }
        }
        Ok(SymMatrix { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.dim + k]
    }

    /// Sets both `(j,k)` and `(k,j)`.
    #[inline]
    pub fn set(&mut self, j: usize, k: usize, value: f64) {
        self.data[j * self.dim + k] = value;
        self.data[k * self.dim + j] = value;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|j| self.get(j, j)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self += weight * other`, entrywise.
    pub fn add_scaled(&mut self, other: &SymMatrix, weight: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += weight * b;
        }
    }

    /// `self += weight * x xᵀ` without materializing the outer product.
    #[inline]
    pub fn add_outer(&mut self, x: &[f64], weight: f64) {
        let d = self.dim;
        debug_assert_eq!(x.len(), d);
        for (row, &xj) in self.data.chunks_exact_mut(d).zip(x) {
            let wj = weight * xj;
            for (cell, &xk) in row.iter_mut().zip(x) {
                *cell += wj * xk;
            }
        }
    }

    /// Plain matrix product. The product of two symmetric matrices is not
    /// symmetric in general, so the result is returned row-major.
    pub fn matmul(&self, other: &SymMatrix) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for j in 0..d {
            for l in 0..d {
                let a = self.data[j * d + l];
                if a == 0.0 {
                    continue;
                }
                for k in 0..d {
                    out[j * d + k] += a * other.data[l * d + k];
                }
            }
        }
        out
    }

    /// `[I, x, x², …, x^max_power]`. Powers of a symmetric matrix are
    /// symmetric; rounding asymmetry is removed by averaging.
    pub fn powers(&self, max_power: usize) -> Vec<SymMatrix> {
        let mut out = Vec::with_capacity(max_power + 1);
        out.push(SymMatrix::identity(self.dim));
        for q in 1..=max_power {
            let prod = out[q - 1].matmul(self);
            out.push(symmetrize_unchecked(self.dim, &prod));
        }
        out
    }

    /// Eigenvalues in ascending order (cyclic Jacobi).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = jacobi_eigenvalues(self.dim, self.data.clone());
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim == 1 {
            return self.data[0];
        }
        self.eigenvalues()[0]
    }

    /// Lower-triangular factor `L` with `L Lᵀ = self`, row-major.
    ///
    /// Zero pivots (singular PSD input) yield zero columns; a pivot below
    /// `-1e-12·(1+‖m‖)` is reported as a non-PSD input.
    pub fn cholesky(&self) -> Result<Vec<f64>> {
        let d = self.dim;
        let scale = 1.0 + self.frobenius_norm();
        let mut l = vec![0.0; d * d];
        for j in 0..d {
            let mut pivot = self.get(j, j);
            for p in 0..j {
                pivot -= l[j * d + p] * l[j * d + p];
            }
            if pivot < -1e-12 * scale {
                return Err(Error::Numerical(format!(
                    "cholesky: matrix is not positive semidefinite (pivot {pivot} at {j})"
                )));
            }
            let diag = pivot.max(0.0).sqrt();
            l[j * d + j] = diag;
            for i in (j + 1)..d {
                let mut s = self.get(i, j);
                for p in 0..j {
                    s -= l[i * d + p] * l[j * d + p];
                }
                l[i * d + j] = if diag > 0.0 {
                    s / diag
                } else if s.abs() <= 1e-12 * scale {
                    0.0
                } else {
                    return Err(Error::Numerical(format!(
                        "cholesky: matrix is not positive semidefinite (zero pivot at {j})"
                    )));
                };
            }
        }
        Ok(l)
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scaled(rhs)
    }
}

fn check_square(rows: &[Vec<f64>]) -> Result<usize> {
    let dim = rows.len();
    if dim == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::Dimension(format!(
            "matrix is not square: {dim} rows but a row of length {}",
            r.len()
        )));
    }
    Ok(dim)
}

fn symmetrize_unchecked(dim: usize, raw: &[f64]) -> SymMatrix {
    let mut m = SymMatrix::zeros(dim);
    for j in 0..dim {
        m.data[j * dim + j] = raw[j * dim + j];
        for k in (j + 1)..dim {
            m.set(j, k, 0.5 * (raw[j * dim + k] + raw[k * dim + j]));
        }
    }
    m
}

/// Returns `(m + mᵀ)/2`.
pub fn symmetrize(rows: &[Vec<f64>]) -> Result<SymMatrix> {
    let dim = check_square(rows)?;
    let raw: Vec<f64> = rows.iter().flatten().copied().collect();
    if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("matrix entry {v}")));
    }
    Ok(symmetrize_unchecked(dim, &raw))
}

/// The rank-one matrix `x xᵀ`.
pub fn outer_product_increment(x: &[f64]) -> Result<SymMatrix> {
    if x.is_empty() {
        return Err(Error::Dimension("empty increment vector".into()));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("increment component {v}")));
    }
    let mut m = SymMatrix::zeros(x.len());
    m.add_outer(x, 1.0);
    Ok(m)
}

/// True iff the smallest eigenvalue is at least `-tol·(1+‖m‖_F)`.
pub fn is_psd(m: &SymMatrix, tol: f64) -> bool {
    debug_assert!(tol >= 0.0);
    m.min_eigenvalue() >= -tol * (1.0 + m.frobenius_norm())
}

/// Tolerance for PSD checks on sums of rank-one terms: `d·ε`.
pub fn psd_tolerance(dim: usize) -> f64 {
    dim as f64 * f64::EPSILON
}

fn jacobi_eigenvalues(d: usize, mut a: Vec<f64>) -> Vec<f64> {
    if d == 1 {
        return a;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|j| ((j + 1)..d).map(move |k| (j, k)))
            .map(|(j, k)| a[j * d + k] * a[j * d + k])
            .sum();
        let total: f64 = a.iter().map(|v| v * v).sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..d).map(|j| a[j * d + j]).collect()
}

/// Fourth-order tensor `T[j][k][l][m]`, used for `∂²_{jk,lm} g`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        Tensor4 {
            dim,
            data: vec![0.0; dim.pow(4)],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn idx(&self, j: usize, k: usize, l: usize, m: usize) -> usize {
        ((j * self.dim + k) * self.dim + l) * self.dim + m
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize, l: usize, m: usize) -> f64 {
        self.data[self.idx(j, k, l, m)]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, l: usize, m: usize, value: f64) {
        let i = self.idx(j, k, l, m);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `self += weight · (A ⊗ B)`, i.e. `T[jk,lm] += w·A[jk]·B[lm]`.
    pub fn add_outer(&mut self, a: &SymMatrix, b: &SymMatrix, weight: f64) {
        let d2 = self.dim * self.dim;
        for (p, &av) in a.as_slice().iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            for (q, &bv) in b.as_slice().iter().enumerate() {
                self.data[p * d2 + q] += weight * av * bv;
            }
        }
    }

    /// Average over the eight index permutations generated by `j↔k`,
    /// `l↔m` and the pair swap `(jk)↔(lm)`.
    pub fn symmetrized(&self) -> Tensor4 {
        let d = self.dim;
        let mut out = Tensor4::zeros(d);
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    for m in 0..d {
                        let s = self.get(j, k, l, m)
                            + self.get(k, j, l, m)
                            + self.get(j, k, m, l)
                            + self.get(k, j, m, l)
                            + self.get(l, m, j, k)
                            + self.get(m, l, j, k)
                            + self.get(l, m, k, j)
                            + self.get(m, l, k, j);
                        out.set(j, k, l, m, s / 8.0);
                    }
                }
            }
        }
        out
    }

    /// Whether all three index symmetries hold exactly.
    pub fn has_symmetries(&self) -> bool {
        let d = self.dim;
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    for m in 0..d {
                        let v = self.get(j, k, l, m);
                        if v != self.get(k, j, l, m)
                            || v != self.get(j, k, m, l)
                            || v != self.get(l, m, j, k)
                        {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// `Σ_{j,k,l,m} T[jk,lm]·(x^{jl}x^{km} + x^{jm}x^{kl})`.
    pub fn contract_covariance_form(&self, x: &SymMatrix) -> f64 {
        let d = self.dim;
        let mut sum = 0.0;
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    for m in 0..d {
                        let t = self.get(j, k, l, m);
                        if t != 0.0 {
                            sum += t * (x.get(j, l) * x.get(k, m) + x.get(j, m) * x.get(k, l));
                        }
                    }
                }
            }
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_examples() {
        let m = symmetrize(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(m.rows(), vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        let m = symmetrize(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(m.rows(), vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        let m = symmetrize(&[vec![3.0]]).unwrap();
        assert_eq!(m.rows(), vec![vec![3.0]]);
    }

    #[test]
    fn symmetrize_rejects_bad_input() {
        assert!(matches!(
            symmetrize(&[vec![1.0, 2.0]]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            symmetrize(&[vec![f64::NAN]]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn outer_product_examples() {
        assert_eq!(
            outer_product_increment(&[1.0, 0.0]).unwrap().rows(),
            vec![vec![1.0, 0.0], vec![0.0, 0.0]]
        );
        assert_eq!(
            outer_product_increment(&[1.0, 1.0]).unwrap().rows(),
            vec![vec![1.0, 1.0], vec![1.0, 1.0]]
        );
        assert_eq!(outer_product_increment(&[2.0]).unwrap().rows(), vec![vec![4.0]]);
        assert!(outer_product_increment(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn psd_examples() {
        assert!(is_psd(&SymMatrix::identity(2), 0.0));
        let anti = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(!is_psd(&anti, 1e-12));
        assert!(is_psd(&outer_product_increment(&[2.0]).unwrap(), 0.0));
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let m = SymMatrix::from_rows(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ])
        .unwrap();
        let ev = m.eigenvalues();
        let s = std::f64::consts::SQRT_2;
        for (got, want) in ev.iter().zip([2.0 - s, 2.0, 2.0 + s]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let m = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let l = m.cholesky().unwrap();
        let mut back = [0.0; 4];
        for j in 0..2 {
            for k in 0..2 {
                back[j * 2 + k] = (0..2).map(|p| l[j * 2 + p] * l[k * 2 + p]).sum();
            }
        }
        for (a, b) in back.iter().zip(m.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
        let bad = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(bad.cholesky().is_err());
    }

    #[test]
    fn powers_of_symmetric_matrix() {
        let x = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let p = x.powers(2);
        assert_eq!(p[0], SymMatrix::identity(2));
        assert_eq!(p[1], x);
        assert_eq!(p[2].rows(), vec![vec![2.0, 3.0], vec![3.0, 5.0]]);
    }

    #[test]
    fn tensor_symmetrization() {
        let mut t = Tensor4::zeros(2);
        t.set(0, 1, 1, 1, 8.0);
        let s = t.symmetrized();
        assert!(s.has_symmetries());
        // the orbit of (0,1,1,1) has four members, each fixed by two of the eight maps
        assert_eq!(s.get(1, 1, 1, 0), 2.0);
        assert_eq!(s.get(0, 1, 1, 1), 2.0);
    }
}
