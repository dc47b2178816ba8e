//! Small dense complex linear algebra.
//!
//! Everything here works on matrices with at most a few tens of rows and
//! columns: channel matrices, interference bases, stacked cross-link matrices
//! and ZF equalizers. Storage is row-major `Complex64`.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Shorthand for the complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Relative threshold below which a column space direction counts as absent.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Orthonormality tolerance for inputs that must have orthonormal columns.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-10;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    ZeroDimension { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is rank deficient (smallest/largest singular value ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("input columns are not orthonormal (max Gram deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Matrix whose columns are the given vectors (all of equal length).
    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, cols);
        for (c, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(LinalgError::DimensionMismatch(format!(
                    "column {c} has length {} but expected {rows}",
                    col.len()
                )));
            }
            m.set_column(c, col);
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[C64]) {
        for (r, &v) in values.iter().enumerate() {
            self[(r, c)] = v;
        }
    }

    /// Columns `range` as a new matrix.
    pub fn columns(&self, range: std::ops::Range<usize>) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.rows, range.len());
        for (dst, src) in range.enumerate() {
            for r in 0..self.rows {
                out[(r, dst)] = self[(r, src)];
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                for c in 0..rhs.cols {
                    out.data[r * rhs.cols + c] += a * rhs.data[k * rhs.cols + c];
                }
            }
        }
        Ok(out)
    }

    /// `self^H · rhs` without materialising the adjoint.
    pub fn adjoint_mul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.rows != rhs.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot form ({}x{})^H times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            for r in 0..self.cols {
                let a = self[(k, r)].conj();
                for c in 0..rhs.cols {
                    out.data[r * rhs.cols + c] += a * rhs.data[k * rhs.cols + c];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if self.cols != v.len() {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// `self^H · v`.
    pub fn adjoint_mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if self.rows != v.len() {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot form ({}x{})^H times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![ZERO; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += self.data[r * self.cols + c].conj() * vr;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.shape() != rhs.shape() {
            return Err(LinalgError::DimensionMismatch(format!(
                "cannot subtract {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(blocks: &[&ComplexMatrix]) -> Result<ComplexMatrix> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for b in blocks {
            if b.cols != cols {
                return Err(LinalgError::DimensionMismatch(format!(
                    "cannot stack blocks with {} and {} columns",
                    cols, b.cols
                )));
            }
            rows += b.rows;
            data.extend_from_slice(&b.data);
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entry magnitude of `self^H·self − I`.
    pub fn gram_deviation(&self) -> f64 {
        let gram = self
            .adjoint_mul(self)
            .expect("adjoint product of a matrix with itself is always defined");
        gram.sub(&ComplexMatrix::identity(self.cols))
            .expect("gram matrix is square")
            .max_abs()
    }

    /// Squared Euclidean norm of each column.
    pub fn column_norms_sqr(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (c, o) in out.iter_mut().enumerate() {
                *o += self.data[r * self.cols + c].norm_sqr();
            }
        }
        out
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `a^H · b`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Standard basis vector `e_index` of length `len`.
pub fn basis_vector(len: usize, index: usize) -> Vec<C64> {
    let mut v = vec![ZERO; len];
    v[index] = ONE;
    v
}

/// Rotates `v` so its first non-negligible component is real and non-negative.
pub fn normalize_phase(v: &mut [C64]) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(pivot) = v.iter().find(|z| z.norm() > 1e-12 * scale) {
        let rot = pivot.conj() / pivot.norm();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

/// One circularly-symmetric CN(0,1) sample.
#[inline]
pub fn draw_cn<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. CN(0,1) entries, drawn in row-major order.
pub fn draw_gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    if rows == 0 || cols == 0 {
        return Err(LinalgError::ZeroDimension { rows, cols });
    }
    let data = (0..rows * cols).map(|_| draw_cn(rng)).collect();
    Ok(ComplexMatrix { rows, cols, data })
}

/// Orthonormal basis of the column space of a full-column-rank matrix.
///
/// Modified Gram-Schmidt with one re-orthogonalization pass. Column `j` of
/// the result spans the same flag as the first `j + 1` columns of `a`.
pub fn qr_orthonormal_basis(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.rows == 0 || a.cols == 0 {
        return Err(LinalgError::ZeroDimension {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if a.cols > a.rows {
        return Err(LinalgError::RankDeficient { ratio: 0.0 });
    }
    let scale = a.column_norms_sqr().into_iter().fold(0.0, f64::max).sqrt();
    if scale == 0.0 {
        return Err(LinalgError::RankDeficient { ratio: 0.0 });
    }
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(a.cols);
    for c in 0..a.cols {
        let mut v = a.column(c);
        for _ in 0..2 {
            for q in &basis {
                let proj = inner(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = norm_sqr(&v).sqrt();
        if norm <= RANK_TOLERANCE * scale {
            return Err(LinalgError::RankDeficient {
                ratio: norm / scale,
            });
        }
        v.iter_mut().for_each(|z| *z /= norm);
        basis.push(v);
    }
    ComplexMatrix::from_columns(&basis)
}

/// Haar-distributed `n×n` unitary, redrawing on (probability-zero) degenerate draws.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ComplexMatrix> {
    loop {
        let g = draw_gaussian_matrix(n, n, rng)?;
        match qr_orthonormal_basis(&g) {
            Ok(q) => return Ok(q),
            Err(LinalgError::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Orthonormal basis of the orthogonal complement of span(`q`).
///
/// `q` must have orthonormal columns. When `q` has no columns the complement
/// is the whole space and a Haar-random unitary is returned, so that the
/// result carries no preferred basis.
pub fn null_space<R: Rng + ?Sized>(q: &ComplexMatrix, rng: &mut R) -> Result<ComplexMatrix> {
    let m = q.rows;
    if m == 0 {
        return Err(LinalgError::ZeroDimension {
            rows: q.rows,
            cols: q.cols,
        });
    }
    if q.cols > m {
        return Err(LinalgError::DimensionMismatch(format!(
            "basis with {} columns in dimension {m}",
            q.cols
        )));
    }
    if q.cols == 0 {
        return random_unitary(m, rng);
    }
    let deviation = q.gram_deviation();
    if deviation > ORTHONORMAL_TOLERANCE {
        return Err(LinalgError::NotOrthonormal { deviation });
    }
    let target = m - q.cols;
    let mut basis: Vec<Vec<C64>> = (0..q.cols).map(|c| q.column(c)).collect();
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(target);
    // Greedily complete with the canonical vector that keeps the largest residual.
    while out.len() < target {
        let mut best: Option<(f64, Vec<C64>)> = None;
        for e in 0..m {
            let mut v = basis_vector(m, e);
            for _ in 0..2 {
                for b in &basis {
                    let proj = inner(b, &v);
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= proj * bi;
                    }
                }
            }
            let n = norm_sqr(&v).sqrt();
            if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
                best = Some((n, v));
            }
        }
        let (n, mut v) = best.expect("dimension is positive");
        v.iter_mut().for_each(|z| *z /= n);
        basis.push(v.clone());
        out.push(v);
    }
    ComplexMatrix::from_columns(&out)
}

/// Singular value decomposition `G = left · diag(σ) · right^H`.
///
/// `singular_values` has one entry per column of `G` (trailing entries of a
/// wide matrix are numerically zero), `right` is a full `cols×cols` unitary
/// and `left` holds `min(rows, cols)` orthonormal columns.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub right: ComplexMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let k = self.left.cols;
        let mut scaled = self.left.clone();
        for c in 0..k {
            for r in 0..scaled.rows {
                scaled[(r, c)] *= self.singular_values[c];
            }
        }
        scaled
            .matmul(&self.right.columns(0..k).adjoint())
            .expect("svd factors have consistent shapes")
    }

    /// Right singular vector paired with the smallest singular value.
    pub fn smallest_right_vector(&self) -> Vec<C64> {
        self.right.column(self.right.cols - 1)
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Columns of a working copy of `G` are rotated pairwise until mutually
/// orthogonal; the accumulated rotations form `right` and the final column
/// norms are the singular values, which keeps small singular values
/// accurate to high relative precision.
pub fn svd(g: &ComplexMatrix) -> SvdResult {
    let (m, n) = g.shape();
    // Column-major working storage: columns are contiguous.
    let mut a: Vec<Vec<C64>> = (0..n).map(|c| g.column(c)).collect();
    let mut v: Vec<Vec<C64>> = (0..n).map(|c| basis_vector(n, c)).collect();
    let total: f64 = g.frobenius_norm_sqr();
    let negligible = if total > 0.0 { total * 1e-300 } else { 0.0 };

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = norm_sqr(&a[p]);
                let beta = norm_sqr(&a[q]);
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = inner(&a[p], &a[q]);
                let g_abs = gamma.norm();
                if g_abs <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Remove the phase of the coupling, then apply a real rotation.
                let phase = gamma.conj() / g_abs;
                let zeta = (beta - alpha) / (2.0 * g_abs);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut a, p, q, phase, c, s);
                rotate_pair(&mut v, p, q, phase, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = a.iter().map(|col| norm_sqr(col).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let singular_values: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let right_cols: Vec<Vec<C64>> = order.iter().map(|&i| v[i].clone()).collect();
    let right = ComplexMatrix::from_columns(&right_cols).expect("columns share a length");

    let k = m.min(n);
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let mut left_cols: Vec<Vec<C64>> = Vec::with_capacity(k);
    for (idx, &i) in order.iter().take(k).enumerate() {
        let sigma = singular_values[idx];
        if sigma > 0.0 && sigma > 1e-13 * sigma_max {
            let mut u: Vec<C64> = a[i].iter().map(|z| z / sigma).collect();
            // Re-orthogonalize against the previous columns.
            for prev in &left_cols {
                let proj = inner(prev, &u);
                for (ui, pi) in u.iter_mut().zip(prev) {
                    *ui -= proj * pi;
                }
            }
            let nu = norm_sqr(&u).sqrt();
            u.iter_mut().for_each(|z| *z /= nu);
            left_cols.push(u);
        } else {
            left_cols.push(complete_basis(&left_cols, m));
        }
    }
    let left = if m == 0 || k == 0 {
        ComplexMatrix::zeros(m, k)
    } else {
        ComplexMatrix::from_columns(&left_cols).expect("columns share a length")
    };

    SvdResult {
        left,
        singular_values,
        right,
    }
}

fn rotate_pair(cols: &mut [Vec<C64>], p: usize, q: usize, phase: C64, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * phase;
        let xp = *x;
        *x = xp * c - yq * s;
        *y = xp * s + yq * c;
    }
}

/// Unit vector orthogonal to every vector in `existing`.
fn complete_basis(existing: &[Vec<C64>], m: usize) -> Vec<C64> {
    let mut best = (0.0, basis_vector(m, 0));
    for e in 0..m {
        let mut v = basis_vector(m, e);
        for _ in 0..2 {
            for b in existing {
                let proj = inner(b, &v);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
        }
        let n = norm_sqr(&v).sqrt();
        if n > best.0 {
            best = (n, v);
        }
    }
    let (n, mut v) = best;
    v.iter_mut().for_each(|z| *z /= n);
    v
}

/// Inverse of a square matrix by Gauss-Jordan elimination with partial pivoting.
///
/// Rejects matrices whose smallest singular value is below
/// [`RANK_TOLERANCE`] times the largest.
pub fn invert(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (n, cols) = a.shape();
    if n != cols {
        return Err(LinalgError::NotSquare { rows: n, cols });
    }
    if n == 0 {
        return Err(LinalgError::ZeroDimension { rows: n, cols });
    }
    let sv = svd(a).singular_values;
    let largest = sv[0];
    let smallest = sv[n - 1];
    if !(largest > 0.0) || !(smallest > RANK_TOLERANCE * largest) {
        let condition = if smallest > 0.0 {
            largest / smallest
        } else {
            f64::INFINITY
        };
        return Err(LinalgError::Singular { condition });
    }

    let mut work = a.clone();
    let mut inv = ComplexMatrix::identity(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| work[(x, col)].norm().total_cmp(&work[(y, col)].norm()))
            .expect("non-empty pivot range");
        if pivot != col {
            for c in 0..n {
                work.data.swap(pivot * n + c, col * n + c);
                inv.data.swap(pivot * n + c, col * n + c);
            }
        }
        let d = work[(col, col)];
        for c in 0..n {
            work[(col, c)] /= d;
            inv[(col, c)] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = work[(r, col)];
            if factor == ZERO {
                continue;
            }
            for c in 0..n {
                let wv = work[(col, c)];
                let iv = inv[(col, c)];
                work[(r, c)] -= factor * wv;
                inv[(r, c)] -= factor * iv;
            }
        }
    }
    Ok(inv)
}

/// `‖U^H v‖²`: power of `v` outside the span of the complement of `U`.
pub fn projected_leakage(u: &ComplexMatrix, v: &[C64]) -> Result<f64> {
    Ok(norm_sqr(&u.adjoint_mul_vec(v)?))
}
