//! Minimal dense linear-algebra kernel for small systems (dimension ≲ 20).
//!
//! Everything downstream (plant algebra, Lyapunov certificates, LQE design)
//! goes through this module. Matrices are row-major `f64` with eagerly
//! validated shapes and finiteness. Hurwitz testing is done through Lyapunov
//! positive-definiteness rather than an eigensolver, which is exact enough at
//! the dimensions in scope and keeps the kernel small.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::mathx::{abs, norm2, norm_inf, sqrt};

/// Numerical tolerances used by the kernel, collected in one place.
pub mod tol {
    /// LU pivot threshold, relative to `‖a‖_∞`.
    pub const LU_PIVOT_REL: f64 = 1e-12;
    /// Residual bound for `lu_solve`, relative to `1 + ‖b‖_∞`.
    pub const SOLVE_RESIDUAL_REL: f64 = 1e-10;
    /// Residual bound for `lyapunov_solve`.
    pub const LYAPUNOV_RESIDUAL: f64 = 1e-9;
    /// Relative tolerance of the power iteration in `spectral_norm`.
    pub const POWER_ITER_REL: f64 = 1e-10;
    /// Iteration cap of the power iteration.
    pub const POWER_ITER_CAP: usize = 10_000;
    /// Rank pivot threshold, relative to `‖a‖_∞`.
    pub const RANK_PIVOT_REL: f64 = 1e-10;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixError {
    DimensionMismatch(String),
    SingularMatrix,
    NoConvergence,
    NonFiniteEntry,
    NotHurwitz,
    NotDetectable,
    InvalidStep,
    MissingEstimate,
    NonFiniteState,
    ParameterError(String),
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::DimensionMismatch(s) => write!(f, "dimension mismatch: {s}"),
            MatrixError::SingularMatrix => write!(f, "singular matrix"),
            MatrixError::NoConvergence => write!(f, "iteration did not converge"),
            MatrixError::NonFiniteEntry => write!(f, "non-finite entry"),
            MatrixError::NotHurwitz => write!(f, "matrix is not Hurwitz"),
            MatrixError::NotDetectable => write!(f, "pair is not detectable"),
            MatrixError::InvalidStep => write!(f, "step size outside the contraction range"),
            MatrixError::MissingEstimate => write!(f, "estimator predictions required"),
            MatrixError::NonFiniteState => write!(f, "state became non-finite"),
            MatrixError::ParameterError(s) => write!(f, "invalid parameter: {s}"),
        }
    }
}

#[cfg(test)]
impl std::error::Error for MatrixError {}

pub type Result<T> = core::result::Result<T, MatrixError>;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(MatrixError::DimensionMismatch(format!(
                "{}x{} needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(MatrixError::NonFiniteEntry);
        }
        Ok(Self { rows, cols, entries })
    }

    /// Builds from nested row slices.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(MatrixError::DimensionMismatch("ragged rows".into()));
        }
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            entries.extend_from_slice(row);
        }
        Self::new(r, c, entries)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    /// Column vector from a slice.
    pub fn col_vec(v: &[f64]) -> Self {
        Self { rows: v.len(), cols: 1, entries: v.to_vec() }
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

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatrixError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(MatrixError::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product into a fresh `Vec`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(MatrixError::DimensionMismatch(format!(
                "{}x{} * len {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// `selfᵀ · v`.
    pub fn matvec_t(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.rows != v.len() {
            return Err(MatrixError::DimensionMismatch(format!(
                "({}x{})ᵀ * len {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            for j in 0..self.cols {
                out[j] += self[(i, j)] * vi;
            }
        }
        Ok(out)
    }

    /// Max-magnitude entry.
    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.entries)
    }

    /// Assembles a block matrix from a grid of blocks (row-major grid).
    pub fn from_blocks(grid: &[&[&Matrix]]) -> Result<Matrix> {
        let grid_rows = grid.len();
        if grid_rows == 0 {
            return Ok(Matrix::zeros(0, 0));
        }
        let grid_cols = grid[0].len();
        if grid.iter().any(|r| r.len() != grid_cols) {
            return Err(MatrixError::DimensionMismatch("ragged block grid".into()));
        }
        let row_heights: Vec<usize> = grid.iter().map(|r| r[0].rows).collect();
        let col_widths: Vec<usize> = grid[0].iter().map(|b| b.cols).collect();
        for (bi, row) in grid.iter().enumerate() {
            for (bj, b) in row.iter().enumerate() {
                if b.rows != row_heights[bi] || b.cols != col_widths[bj] {
                    return Err(MatrixError::DimensionMismatch(format!(
                        "block ({bi},{bj}) is {}x{}, expected {}x{}",
                        b.rows, b.cols, row_heights[bi], col_widths[bj]
                    )));
                }
            }
        }
        let total_r: usize = row_heights.iter().sum();
        let total_c: usize = col_widths.iter().sum();
        let mut out = Matrix::zeros(total_r, total_c);
        let mut r0 = 0;
        for (bi, row) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (bj, b) in row.iter().enumerate() {
                for i in 0..b.rows {
                    for j in 0..b.cols {
                        out[(r0 + i, c0 + j)] = b[(i, j)];
                    }
                }
                c0 += col_widths[bj];
            }
            r0 += row_heights[bi];
        }
        Ok(out)
    }

    /// Extracts the block `[r0..r0+nr, c0..c0+nc]`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Result<Matrix> {
        if r0 + nr > self.rows || c0 + nc > self.cols {
            return Err(MatrixError::DimensionMismatch("block out of range".into()));
        }
        let mut out = Matrix::zeros(nr, nc);
        for i in 0..nr {
            for j in 0..nc {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        Ok(out)
    }

    /// Symmetrizes in place: `(M + Mᵀ)/2`.
    pub fn symmetrize(&mut self) {
        debug_assert!(self.is_square());
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.cols + j]
    }
}

/// Solves `a · x = b` by LU factorization with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(MatrixError::DimensionMismatch("lu_solve needs square a".into()));
    }
    if a.rows != b.rows {
        return Err(MatrixError::DimensionMismatch(format!(
            "a is {}x{}, b has {} rows",
            a.rows, a.cols, b.rows
        )));
    }
    let n = a.rows;
    let pivot_floor = tol::LU_PIVOT_REL * a.norm_inf();
    let mut lu = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        // partial pivoting
        let mut piv = col;
        let mut piv_mag = abs(lu[(col, col)]);
        for r in (col + 1)..n {
            let mag = abs(lu[(r, col)]);
            if mag > piv_mag {
                piv = r;
                piv_mag = mag;
            }
        }
        if piv_mag < pivot_floor || piv_mag == 0.0 {
            return Err(MatrixError::SingularMatrix);
        }
        if piv != col {
            for j in 0..n {
                let (a1, a2) = (lu[(col, j)], lu[(piv, j)]);
                lu[(col, j)] = a2;
                lu[(piv, j)] = a1;
            }
            for j in 0..x.cols {
                let (b1, b2) = (x[(col, j)], x[(piv, j)]);
                x[(col, j)] = b2;
                x[(piv, j)] = b1;
            }
        }
        for r in (col + 1)..n {
            let factor = lu[(r, col)] / lu[(col, col)];
            lu[(r, col)] = 0.0;
            if factor == 0.0 {
                continue;
            }
            for j in (col + 1)..n {
                lu[(r, j)] -= factor * lu[(col, j)];
            }
            for j in 0..x.cols {
                x[(r, j)] -= factor * x[(col, j)];
            }
        }
    }
    // back substitution
    for col in (0..n).rev() {
        for j in 0..x.cols {
            let mut acc = x[(col, j)];
            for k in (col + 1)..n {
                acc -= lu[(col, k)] * x[(k, j)];
            }
            x[(col, j)] = acc / lu[(col, col)];
        }
    }
    if x.entries.iter().any(|v| !v.is_finite()) {
        return Err(MatrixError::SingularMatrix);
    }
    Ok(x)
}

/// Solves the continuous Lyapunov equation `aᵀP + Pa = −q` via the Kronecker
/// linearization, then symmetrizes the result.
pub fn lyapunov_solve(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    if !a.is_square() || !q.is_square() || a.rows != q.rows {
        return Err(MatrixError::DimensionMismatch(
            "lyapunov_solve needs square a, q of equal size".into(),
        ));
    }
    let n = a.rows;
    // Vectorizing column-wise: (I ⊗ Aᵀ + Aᵀ ⊗ I) vec(P) = −vec(Q).
    let nn = n * n;
    let mut big = Matrix::zeros(nn, nn);
    for i in 0..n {
        for j in 0..n {
            let row = j * n + i; // vec index of P[i][j]
            for k in 0..n {
                // (Aᵀ P)[i][j] = Σ_k A[k][i] P[k][j]
                big[(row, j * n + k)] += a[(k, i)];
                // (P A)[i][j] = Σ_k P[i][k] A[k][j]
                big[(row, k * n + i)] += a[(k, j)];
            }
        }
    }
    let mut rhs = Matrix::zeros(nn, 1);
    for i in 0..n {
        for j in 0..n {
            rhs[(j * n + i, 0)] = -q[(i, j)];
        }
    }
    let sol = lu_solve(&big, &rhs)?;
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = sol[(j * n + i, 0)];
        }
    }
    p.symmetrize();
    // residual check
    let at_p = a.transpose().matmul(&p)?;
    let p_a = p.matmul(a)?;
    let resid = at_p.add(&p_a)?.add(q)?;
    if resid.norm_inf() > tol::LYAPUNOV_RESIDUAL * (1.0 + q.norm_inf()) {
        return Err(MatrixError::SingularMatrix);
    }
    Ok(p)
}

/// True iff all leading principal minors of `p` are positive (Sylvester's
/// criterion), evaluated by Gaussian elimination without pivoting.
pub fn positive_definite(p: &Matrix) -> bool {
    if !p.is_square() {
        return false;
    }
    let n = p.rows;
    let mut m = p.clone();
    for col in 0..n {
        let d = m[(col, col)];
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        for r in (col + 1)..n {
            let factor = m[(r, col)] / d;
            for j in col..n {
                m[(r, j)] -= factor * m[(col, j)];
            }
        }
    }
    true
}

/// Lyapunov-based Hurwitz test. On success returns the positive-definite
/// certificate `P` solving `aᵀP + Pa = −I`; indeterminate numerical cases
/// report `None` (not Hurwitz).
pub fn hurwitz_check(a: &Matrix) -> Option<Matrix> {
    if !a.is_square() {
        return None;
    }
    let p = lyapunov_solve(a, &Matrix::identity(a.rows)).ok()?;
    if positive_definite(&p) {
        Some(p)
    } else {
        None
    }
}

/// Largest singular value via power iteration on `aᵀa`.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    if a.rows == 0 || a.cols == 0 {
        return Err(MatrixError::DimensionMismatch("empty matrix".into()));
    }
    if a.norm_inf() == 0.0 {
        return Ok(0.0);
    }
    let n = a.cols;
    // deterministic start with all modes excited
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) / (n as f64 + 1.0)).collect();
    let nv = norm2(&v);
    for x in v.iter_mut() {
        *x /= nv;
    }
    let mut lambda = 0.0;
    for _ in 0..tol::POWER_ITER_CAP {
        let av = a.matvec(&v)?;
        let mut w = a.matvec_t(&av)?; // aᵀa v
        let new_lambda = norm2(&w);
        if new_lambda == 0.0 {
            return Ok(0.0);
        }
        for x in w.iter_mut() {
            *x /= new_lambda;
        }
        let rel = abs(new_lambda - lambda) / new_lambda;
        v = w;
        lambda = new_lambda;
        if rel < tol::POWER_ITER_REL {
            return Ok(sqrt(lambda));
        }
    }
    Err(MatrixError::NoConvergence)
}

/// Numerical rank via row-echelon reduction with partial pivoting.
pub fn numeric_rank(a: &Matrix) -> usize {
    if a.rows == 0 || a.cols == 0 {
        return 0;
    }
    let threshold = tol::RANK_PIVOT_REL * a.norm_inf();
    let mut m = a.clone();
    let mut rank = 0;
    let mut row = 0;
    for col in 0..m.cols {
        if row >= m.rows {
            break;
        }
        let mut piv = row;
        let mut piv_mag = abs(m[(row, col)]);
        for r in (row + 1)..m.rows {
            let mag = abs(m[(r, col)]);
            if mag > piv_mag {
                piv = r;
                piv_mag = mag;
            }
        }
        if piv_mag <= threshold {
            continue;
        }
        if piv != row {
            for j in 0..m.cols {
                let (a1, a2) = (m[(row, j)], m[(piv, j)]);
                m[(row, j)] = a2;
                m[(piv, j)] = a1;
            }
        }
        for r in (row + 1)..m.rows {
            let factor = m[(r, col)] / m[(row, col)];
            for j in col..m.cols {
                m[(r, j)] -= factor * m[(row, j)];
            }
        }
        rank += 1;
        row += 1;
    }
    rank
}
