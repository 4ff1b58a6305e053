//! Covariance builders and linear solvers.
//!
//! Increments of the mixed process are stationary, so their covariance is a
//! symmetric Toeplitz matrix `R` and every leading subsystem `R_k x = b 1`
//! can be solved in one O(n^2) Levinson sweep. The dense level covariance
//! `Gamma = L R L^T` is kept for the literal GLS formula and for
//! cross-checks.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{check_hurst_open_unit, GridSpec, ModelParams};
use crate::pathgen::{fgn_acov_unchecked, fmt_num};

/// Smallest admissible Levinson denominator `1 - eps^2`.
pub const BREAKDOWN_TOL: f64 = 1e-14;

/// First row of the increment covariance `c_k = sigma^2 h 1{k=0} + r_H(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzCovariance {
    first_row: Vec<f64>,
    pub hurst: f64,
    pub sigma: f64,
    pub step: f64,
}

impl ToeplitzCovariance {
    /// Covariance of `n` increments of `sigma W + B^H` on `grid`. Accepts
    /// any `H` in (0, 1).
    pub fn mixed(grid: &GridSpec, hurst: f64, sigma: f64) -> Result<Self> {
        check_hurst_open_unit(hurst)?;
        let h = grid.step();
        let mut first_row: Vec<f64> = (0..grid.steps() as u64)
            .map(|k| fgn_acov_unchecked(k, hurst, h))
            .collect();
        first_row[0] += sigma * sigma * h;
        Ok(Self {
            first_row,
            hurst,
            sigma,
            step: h,
        })
    }

    /// Arbitrary symmetric Toeplitz matrix given by its first row.
    pub fn from_first_row(first_row: Vec<f64>) -> Result<Self> {
        if first_row.is_empty() {
            return Err(Error::domain("empty Toeplitz row"));
        }
        if first_row[0] <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            first_row,
            hurst: f64::NAN,
            sigma: f64::NAN,
            step: f64::NAN,
        })
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn len(&self) -> usize {
        self.first_row.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_row.is_empty()
    }

    /// Dense leading `k x k` block.
    pub fn leading_dense(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(k, k, |i, j| self.first_row[i.abs_diff(j)])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.leading_dense(self.len())
    }

    /// `R_k x` for the leading block of size `x.len()`.
    pub fn mul_leading(&self, x: &[f64]) -> Vec<f64> {
        let k = x.len();
        (0..k)
            .map(|i| (0..k).map(|j| self.first_row[i.abs_diff(j)] * x[j]).sum())
            .collect()
    }
}

pub fn build_increment_covariance(
    grid: &GridSpec,
    params: &ModelParams,
) -> Result<ToeplitzCovariance> {
    params.validate()?;
    ToeplitzCovariance::mixed(grid, params.hurst, params.sigma)
}

/// Covariance of the levels `xi_{t_1..t_n}`:
/// `Gamma_ij = sigma^2 h min(i,j) + h^{2H} (i^{2H} + j^{2H} - |i-j|^{2H}) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCovariance {
    pub matrix: DMatrix<f64>,
    pub hurst: f64,
    pub sigma: f64,
    pub step: f64,
}

impl LevelCovariance {
    pub fn mixed(grid: &GridSpec, hurst: f64, sigma: f64) -> Result<Self> {
        check_hurst_open_unit(hurst)?;
        let n = grid.steps();
        let h = grid.step();
        let two_h = 2.0 * hurst;
        let scale = h.powf(two_h);
        let pow: Vec<f64> = (0..=n).map(|i| (i as f64).powf(two_h)).collect();
        let matrix = DMatrix::from_fn(n, n, |r, c| {
            let (i, j) = (r + 1, c + 1);
            sigma * sigma * h * i.min(j) as f64
                + 0.5 * scale * (pow[i] + pow[j] - pow[i.abs_diff(j)])
        });
        Ok(Self {
            matrix,
            hurst,
            sigma,
            step: h,
        })
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }
}

pub fn build_level_covariance(grid: &GridSpec, params: &ModelParams) -> Result<LevelCovariance> {
    params.validate()?;
    LevelCovariance::mixed(grid, params.hurst, params.sigma)
}

/// Lower-triangular rows `x^(1), ..., x^(n)` packed contiguously; row `k`
/// has length `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularTable {
    n: usize,
    data: Vec<f64>,
}

impl TriangularTable {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            n: 0,
            data: Vec::with_capacity(n * (n + 1) / 2),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.n + 1, "rows must grow by one");
        self.data.extend_from_slice(row);
        self.n += 1;
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Row `k` (1-based, `1 <= k <= len()`).
    pub fn row(&self, k: usize) -> &[f64] {
        assert!(k >= 1 && k <= self.n, "row {k} out of 1..={}", self.n);
        let start = (k - 1) * k / 2;
        &self.data[start..start + k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (1..=self.n).map(move |k| self.row(k))
    }
}

/// Levinson recursion over all leading systems `R_k x^(k) = b 1`, handing
/// each solution to `visit(k, x^(k))` as soon as it is available.
pub fn levinson_visit<F>(toeplitz: &ToeplitzCovariance, b: f64, mut visit: F) -> Result<()>
where
    F: FnMut(usize, &[f64]),
{
    let c = toeplitz.first_row();
    let n = c.len();
    if c[0] <= BREAKDOWN_TOL {
        return Err(Error::Breakdown {
            order: 1,
            denominator: c[0],
        });
    }
    // f solves R_k f = e_1; by symmetry reverse(f) solves R_k g = e_k.
    let mut f = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut scratch = Vec::with_capacity(n);
    f.push(1.0 / c[0]);
    x.push(b / c[0]);
    visit(1, &x);

    for k in 1..n {
        // R_{k+1} [f; 0] = e_1 + eps e_{k+1}
        let eps: f64 = (0..k).map(|j| c[k - j] * f[j]).sum();
        let denom = 1.0 - eps * eps;
        if denom < BREAKDOWN_TOL {
            return Err(Error::Breakdown {
                order: k + 1,
                denominator: denom,
            });
        }
        // f <- ([f; 0] - eps [0; reverse f]) / denom
        scratch.clear();
        scratch.extend((0..=k).map(|i| {
            let head = if i < k { f[i] } else { 0.0 };
            let tail = if i > 0 { f[k - i] } else { 0.0 };
            (head - eps * tail) / denom
        }));
        std::mem::swap(&mut f, &mut scratch);

        // R_{k+1} [x; 0] = b 1 + (delta - b) e_{k+1}, fixed with reverse(f).
        let delta: f64 = (0..k).map(|j| c[k - j] * x[j]).sum();
        x.push(0.0);
        let corr = b - delta;
        for i in 0..=k {
            x[i] += corr * f[k - i];
        }
        visit(k + 1, &x);
    }
    Ok(())
}

/// All leading solutions of `R_k x = b 1`, `k = 1..n`, in O(n^2) time.
pub fn levinson_solve_all(toeplitz: &ToeplitzCovariance, b: f64) -> Result<TriangularTable> {
    let mut table = TriangularTable::with_capacity(toeplitz.len());
    levinson_visit(toeplitz, b, |_, x| table.push_row(x))?;
    Ok(table)
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
pub fn spd_solve(matrix: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::domain("matrix is not square"));
    }
    if rhs.len() != matrix.nrows() {
        return Err(Error::LengthMismatch {
            expected: matrix.nrows(),
            got: rhs.len(),
        });
    }
    let chol = matrix
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(chol
        .solve(&DVector::from_column_slice(rhs))
        .as_slice()
        .to_vec())
}

/// Row-major dump with full precision, no header.
pub fn write_matrix_csv<W: Write>(mut out: W, matrix: &DMatrix<f64>) -> std::io::Result<()> {
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols())
            .map(|j| fmt_num(matrix[(i, j)]))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
