//! Dense symmetric-matrix numerics.
//!
//! [`SymMat`] stores the upper triangle of a symmetric matrix, so symmetry
//! holds by construction. Spectral work goes through a cyclic Jacobi
//! eigensolver, which is accurate for the small (d up to a few hundred)
//! covariance matrices handled here. [`Matrix`] is a plain row-major
//! rectangular matrix used for sample paths and coefficient matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues below `-PSD_REL_TOL * lambda_max` make a matrix "not PSD".
pub const PSD_REL_TOL: f64 = 1e-6;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Symmetric `dim x dim` matrix, upper triangle stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMat {
    dim: usize,
    upper: Vec<f64>,
}

#[inline]
fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

impl SymMat {
    pub fn new(dim: usize, upper: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        if upper.len() != packed_len(dim) {
            return Err(Error::invalid(format!(
                "expected {} upper-triangle entries for dimension {dim}, got {}",
                packed_len(dim),
                upper.len()
            )));
        }
        Ok(Self { dim, upper })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self { dim, upper: vec![0.0; packed_len(dim)] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        Self::diag(&vec![s; dim])
    }

    /// Builds from a full row-major matrix, keeping the upper triangle.
    pub fn from_dense(dim: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != dim * dim {
            return Err(Error::invalid("dense buffer has wrong length"));
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, dense[i * dim + j]);
            }
        }
        Ok(m)
    }

    /// Builds from a full row-major matrix, averaging the two triangles.
    pub fn symmetrize(dim: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), dim * dim);
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, 0.5 * (dense[i * dim + j] + dense[j * dim + i]));
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("matrix rows must form a non-empty square"));
        }
        let dense: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_dense(d, &dense)
    }

    /// `v v^T`.
    pub fn outer(v: &[f64]) -> Self {
        let mut m = Self::zeros(v.len());
        m.add_outer(1.0, v);
        m
    }

    /// `A A^T` for a rectangular `A`.
    pub fn gram(a: &Matrix) -> Self {
        let d = a.rows();
        let mut m = Self::zeros(d);
        for i in 0..d {
            let ri = a.row(i);
            for j in i..d {
                let rj = a.row(j);
                m.set(i, j, ri.iter().zip(rj).map(|(x, y)| x * y).sum());
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[f64] {
        &self.upper
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.dim - i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.upper[k] = v;
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let v = self.get(i, j);
                out[i * d + j] = v;
                out[j * d + i] = v;
            }
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.to_dense().chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius norm of the full matrix.
    pub fn frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.get(i, j);
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s.sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { dim: self.dim, upper: self.upper.iter().map(|v| c * v).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        Self { dim: self.dim, upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        Self { dim: self.dim, upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a - b).collect() }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        for (a, b) in self.upper.iter_mut().zip(&other.upper) {
            *a += b;
        }
    }

    /// `self += w * v v^T`.
    pub fn add_outer(&mut self, w: f64, v: &[f64]) {
        assert_eq!(v.len(), self.dim);
        let d = self.dim;
        let mut k = 0;
        for i in 0..d {
            let wi = w * v[i];
            for &vj in &v[i..d] {
                self.upper[k] += wi * vj;
                k += 1;
            }
        }
    }

    /// `out = self * x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        debug_assert_eq!(x.len(), d);
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut k = 0;
        for i in 0..d {
            out[i] += self.upper[k] * x[i];
            k += 1;
            for j in i + 1..d {
                let a = self.upper[k];
                out[i] += a * x[j];
                out[j] += a * x[i];
                k += 1;
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// Symmetric part of the product `self * other` (exact when they commute).
    pub fn sym_product(&self, other: &Self) -> Self {
        let d = self.dim;
        let a = self.to_dense();
        let b = other.to_dense();
        let c = dense_matmul(&a, &b, d);
        Self::symmetrize(d, &c)
    }

    /// `self * other * self`, symmetric when both factors are.
    pub fn sandwich(&self, other: &Self) -> Self {
        let d = self.dim;
        let a = self.to_dense();
        let b = other.to_dense();
        let ab = dense_matmul(&a, &b, d);
        Self::symmetrize(d, &dense_matmul(&ab, &a, d))
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix { rows: self.dim, cols: self.dim, data: self.to_dense() }
    }

    pub fn min_diag(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).fold(f64::INFINITY, f64::min)
    }
}

fn dense_matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut c = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                c[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    c
}

/// Eigenvalues sorted descending with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    /// Row `i` holds the unit eigenvector for `values[i]`.
    vectors: Vec<f64>,
    dim: usize,
}

impl EigenDecomp {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `V diag(f(lambda)) V^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMat {
        let mut m = SymMat::zeros(self.dim);
        for (i, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w != 0.0 {
                m.add_outer(w, self.vector(i));
            }
        }
        m
    }

    pub fn reconstruct(&self) -> SymMat {
        self.reconstruct_with(|l| l)
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn eigen(a: &SymMat) -> Result<EigenDecomp> {
    if !a.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let d = a.dim();
    let mut m = a.to_dense();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }

    let scale = a.frobenius();
    if scale > 0.0 {
        let target = (f64::EPSILON * scale).powi(2) * 1e-2;
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..d {
                for q in p + 1..d {
                    off += m[p * d + q] * m[p * d + q];
                }
            }
            if off <= target {
                break;
            }
            for p in 0..d {
                for q in p + 1..d {
                    let apq = m[p * d + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = m[p * d + p];
                    let aqq = m[q * d + q];
                    // Negligible against both diagonal entries: drop it.
                    if apq.abs() * 1e18 < app.abs().min(aqq.abs()) {
                        m[p * d + q] = 0.0;
                        m[q * d + p] = 0.0;
                        continue;
                    }
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta.abs() > 1e150 {
                        0.5 / theta
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        if k == p || k == q {
                            continue;
                        }
                        let akp = m[k * d + p];
                        let akq = m[k * d + q];
                        let nkp = c * akp - s * akq;
                        let nkq = s * akp + c * akq;
                        m[k * d + p] = nkp;
                        m[p * d + k] = nkp;
                        m[k * d + q] = nkq;
                        m[q * d + k] = nkq;
                    }
                    m[p * d + p] = app - t * apq;
                    m[q * d + q] = aqq + t * apq;
                    m[p * d + q] = 0.0;
                    m[q * d + p] = 0.0;
                    for k in 0..d {
                        let vkp = v[k * d + p];
                        let vkq = v[k * d + q];
                        v[k * d + p] = c * vkp - s * vkq;
                        v[k * d + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[j * d + j].total_cmp(&m[i * d + i]));
    let values = order.iter().map(|&i| m[i * d + i]).collect();
    let mut vectors = vec![0.0; d * d];
    for (row, &col) in order.iter().enumerate() {
        for k in 0..d {
            vectors[row * d + k] = v[k * d + col];
        }
    }
    Ok(EigenDecomp { values, vectors, dim: d })
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(a: &SymMat) -> f64 {
    if a.dim() == 1 {
        return a.get(0, 0).abs();
    }
    match eigen(a) {
        Ok(e) => e.values.iter().map(|l| l.abs()).sum(),
        Err(_) => f64::NAN,
    }
}

/// Sum of singular values of a rectangular matrix.
pub fn nuclear_norm(a: &Matrix) -> f64 {
    // singular values are square roots of the eigenvalues of A^T A
    let at = a.transpose();
    let g = SymMat::gram(&at);
    match eigen(&g) {
        Ok(e) => {
            let floor = noise_floor(&e);
            e.values.iter().filter(|l| **l > floor).map(|l| l.sqrt()).sum()
        }
        Err(_) => f64::NAN,
    }
}

/// Spectral split of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralParts {
    pub positive: SymMat,
    pub negative: SymMat,
    pub absolute: SymMat,
}

/// `(Δ₊, Δ₋, |Δ|)` with `Δ = Δ₊ − Δ₋` and `|Δ| = Δ₊ + Δ₋`.
pub fn pos_neg_parts(delta: &SymMat) -> Result<SpectralParts> {
    let e = eigen(delta)?;
    Ok(SpectralParts {
        positive: e.reconstruct_with(|l| l.max(0.0)),
        negative: e.reconstruct_with(|l| (-l).max(0.0)),
        absolute: e.reconstruct_with(f64::abs),
    })
}

/// Result of a PSD projection: the projected matrix and the total
/// eigenvalue mass that was clipped away.
#[derive(Debug, Clone)]
pub struct Projection {
    pub matrix: SymMat,
    pub clipped: f64,
}

pub fn psd_project_with_info(a: &SymMat, tol: f64) -> Result<Projection> {
    if tol < 0.0 {
        return Err(Error::invalid("projection tolerance must be nonnegative"));
    }
    let e = eigen(a)?;
    if e.min_value() >= -tol {
        return Ok(Projection { matrix: a.clone(), clipped: 0.0 });
    }
    let clipped = e.values.iter().filter(|l| **l < 0.0).map(|l| -l).sum();
    Ok(Projection { matrix: e.reconstruct_with(|l| l.max(0.0)), clipped })
}

/// Clips negative eigenvalues at zero. Matrices whose smallest eigenvalue
/// is at least `-tol` are returned unchanged.
pub fn psd_project(a: &SymMat, tol: f64) -> Result<SymMat> {
    psd_project_with_info(a, tol).map(|p| p.matrix)
}

/// Eigenvalues this close to zero are indistinguishable from rounding.
pub(crate) fn noise_floor(e: &EigenDecomp) -> f64 {
    let scale = e.values.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    64.0 * f64::EPSILON * scale * e.dim() as f64
}

fn check_psd(e: &EigenDecomp) -> Result<()> {
    let max = e.max_value().max(0.0);
    let min = e.min_value();
    if min < 0.0 && min < -PSD_REL_TOL * max {
        return Err(Error::NotPsd { min_eigenvalue: min, max_eigenvalue: e.max_value() });
    }
    Ok(())
}

/// Symmetric PSD square root. Slightly negative eigenvalues are clipped.
pub fn sqrt_psd(a: &SymMat) -> Result<SymMat> {
    if a.dim() == 1 {
        let v = a.get(0, 0);
        if v < 0.0 {
            return Err(Error::NotPsd { min_eigenvalue: v, max_eigenvalue: v });
        }
        return Ok(SymMat::diag(&[v.sqrt()]));
    }
    let e = eigen(a)?;
    check_psd(&e)?;
    let floor = noise_floor(&e);
    Ok(e.reconstruct_with(|l| if l > floor { l.sqrt() } else { 0.0 }))
}

/// Moore-Penrose pseudo-inverse of a PSD matrix; eigenvalues at the
/// rounding floor are treated as zero.
pub fn pinv_psd(a: &SymMat) -> Result<SymMat> {
    let e = eigen(a)?;
    check_psd(&e)?;
    let floor = noise_floor(&e);
    Ok(e.reconstruct_with(|l| if l > floor { 1.0 / l } else { 0.0 }))
}

/// 2-Wasserstein distance between `N(0, s1)` and `N(0, s2)`.
pub fn gaussian_w2(s1: &SymMat, s2: &SymMat) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::invalid("covariance dimensions differ"));
    }
    let r = sqrt_psd(s1)?;
    // validates s2 as well
    sqrt_psd(s2)?;
    let cross = sqrt_psd(&r.sandwich(s2))?;
    let v = s1.trace() + s2.trace() - 2.0 * cross.trace();
    Ok(v.max(0.0).sqrt())
}

/// Row-major rectangular matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!("buffer of length {} does not fit a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::from_vec(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact would yield nothing for zero-width rows
        (0..self.rows).map(move |i| self.row(i))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| c * v).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut c = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    c.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        c
    }

    /// `out += self * x`.
    #[inline]
    pub fn mul_vec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
