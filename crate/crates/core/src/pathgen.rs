//! Seeded synthesis of fractional Gaussian noise, Brownian increments,
//! mixed paths `xi = sigma W + B^H` and surplus levels.
//!
//! fGn is drawn exactly by circulant embedding of its autocovariance
//! (Davies-Harte). A dense Cholesky generator of the same covariance is kept
//! as an oracle for tests.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::model::{check_hurst_open_unit, GridSpec, ModelParams};
use crate::rng::{RngStream, SUBSTREAM_BROWNIAN, SUBSTREAM_FRACTIONAL};

/// Relative tolerance below zero accepted for circulant eigenvalues before
/// they are clipped.
const EIGEN_TOL: f64 = 1e-10;

/// Autocovariance of fGn with step `h` at integer lag `k`:
/// `h^{2H} (|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H}) / 2`.
pub fn fgn_autocovariance(lag: i64, hurst: f64, step: f64) -> Result<f64> {
    check_hurst_open_unit(hurst)?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::domain(format!("step must be positive, got {step}")));
    }
    Ok(fgn_acov_unchecked(lag.unsigned_abs(), hurst, step))
}

pub(crate) fn fgn_acov_unchecked(lag: u64, hurst: f64, step: f64) -> f64 {
    let two_h = 2.0 * hurst;
    let k = lag as f64;
    let core = if lag == 0 {
        1.0
    } else {
        0.5 * ((k + 1.0).powf(two_h) + (k - 1.0).powf(two_h) - 2.0 * k.powf(two_h))
    };
    step.powf(two_h) * core
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FgnMethod {
    #[default]
    Circulant,
    DenseFactor,
}

/// Precomputed fGn generator for one grid and Hurst index.
#[derive(Clone)]
pub struct FgnSampler {
    n: usize,
    kind: SamplerKind,
}

#[derive(Clone)]
enum SamplerKind {
    Circulant {
        /// `sqrt(lambda_j / m)` for the `m = 2n` circulant eigenvalues.
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Dense {
        lower: DMatrix<f64>,
    },
}

impl std::fmt::Debug for FgnSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let method = match self.kind {
            SamplerKind::Circulant { .. } => "circulant",
            SamplerKind::Dense { .. } => "dense_factor",
        };
        f.debug_struct("FgnSampler")
            .field("n", &self.n)
            .field("method", &method)
            .finish()
    }
}

impl FgnSampler {
    pub fn new(grid: &GridSpec, hurst: f64, method: FgnMethod) -> Result<Self> {
        check_hurst_open_unit(hurst)?;
        let n = grid.steps();
        let h = grid.step();
        let acov: Vec<f64> = (0..=n as u64)
            .map(|k| fgn_acov_unchecked(k, hurst, h))
            .collect();
        let kind = match method {
            FgnMethod::Circulant => circulant_kind(&acov, n)?,
            FgnMethod::DenseFactor => {
                let cov = DMatrix::from_fn(n, n, |i, j| acov[i.abs_diff(j)]);
                let lower = cov.cholesky().ok_or(Error::NotPositiveDefinite)?.unpack();
                SamplerKind::Dense { lower }
            }
        };
        Ok(Self { n, kind })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn method(&self) -> FgnMethod {
        match self.kind {
            SamplerKind::Circulant { .. } => FgnMethod::Circulant,
            SamplerKind::Dense { .. } => FgnMethod::DenseFactor,
        }
    }

    /// One draw of `n` fGn increments from `stream`.
    pub fn sample(&self, stream: &RngStream) -> Vec<f64> {
        match &self.kind {
            SamplerKind::Circulant { scale, fft } => {
                let m = scale.len();
                let z = stream.normals(2 * m);
                let mut buf: Vec<Complex<f64>> = scale
                    .iter()
                    .zip(z.chunks_exact(2))
                    .map(|(s, pair)| Complex::new(s * pair[0], s * pair[1]))
                    .collect();
                fft.process(&mut buf);
                buf.truncate(self.n);
                buf.into_iter().map(|c| c.re).collect()
            }
            SamplerKind::Dense { lower } => {
                let z = stream.normals(self.n);
                (0..self.n)
                    .map(|i| (0..=i).map(|j| lower[(i, j)] * z[j]).sum())
                    .collect()
            }
        }
    }
}

fn circulant_kind(acov: &[f64], n: usize) -> Result<SamplerKind> {
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
    row.extend(acov.iter().map(|&c| Complex::new(c, 0.0)));
    row.extend(acov[1..n].iter().rev().map(|&c| Complex::new(c, 0.0)));
    debug_assert_eq!(row.len(), m);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);

    let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
    let mut scale = Vec::with_capacity(m);
    for (index, c) in row.iter().enumerate() {
        let value = c.re;
        if value < -EIGEN_TOL * max {
            return Err(Error::NegativeEigenvalue { index, value });
        }
        scale.push((value.max(0.0) / m as f64).sqrt());
    }
    Ok(SamplerKind::Circulant { scale, fft })
}

/// Draws fGn increments on `grid`. Deterministic in `(stream, method)`.
pub fn sample_fgn(
    grid: &GridSpec,
    hurst: f64,
    stream: &RngStream,
    method: FgnMethod,
) -> Result<Vec<f64>> {
    Ok(FgnSampler::new(grid, hurst, method)?.sample(stream))
}

/// One realization of the mixed process, stored as increments.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPath {
    pub grid: GridSpec,
    pub dw: Vec<f64>,
    pub dbh: Vec<f64>,
    pub dxi: Vec<f64>,
}

impl MixedPath {
    /// Assembles a path from its parts; `dxi = sigma dw + dbh`.
    pub fn from_parts(grid: GridSpec, sigma: f64, dw: Vec<f64>, dbh: Vec<f64>) -> Result<Self> {
        let n = grid.steps();
        for len in [dw.len(), dbh.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        let dxi = dw.iter().zip(&dbh).map(|(w, b)| sigma * w + b).collect();
        Ok(Self { grid, dw, dbh, dxi })
    }

    /// A path with all increments zero (deterministic surplus).
    pub fn zero(grid: GridSpec) -> Self {
        let n = grid.steps();
        Self {
            grid,
            dw: vec![0.0; n],
            dbh: vec![0.0; n],
            dxi: vec![0.0; n],
        }
    }

    /// `xi_{t_0..t_n}` with `xi_{t_0} = 0`.
    pub fn xi_levels(&self) -> Vec<f64> {
        cumulative(&self.dxi)
    }

    pub fn bh_levels(&self) -> Vec<f64> {
        cumulative(&self.dbh)
    }
}

fn cumulative(incs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(incs.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for d in incs {
        acc += d;
        out.push(acc);
    }
    out
}

/// Reusable sampler of [`MixedPath`]s for one grid and parameter set.
#[derive(Debug, Clone)]
pub struct MixedPathSampler {
    grid: GridSpec,
    sigma: f64,
    fgn: FgnSampler,
}

impl MixedPathSampler {
    pub fn new(grid: GridSpec, params: &ModelParams, method: FgnMethod) -> Result<Self> {
        params.validate()?;
        Self::with_scales(grid, params.hurst, params.sigma, method)
    }

    /// Like [`MixedPathSampler::new`] but accepts any `H` in (0, 1) and
    /// `sigma >= 0`.
    pub fn with_scales(grid: GridSpec, hurst: f64, sigma: f64, method: FgnMethod) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::domain(format!("sigma must be >= 0, got {sigma}")));
        }
        let fgn = FgnSampler::new(&grid, hurst, method)?;
        Ok(Self { grid, sigma, fgn })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn sample(&self, stream: &RngStream) -> MixedPath {
        let root_h = self.grid.step().sqrt();
        let dw: Vec<f64> = stream
            .substream(SUBSTREAM_BROWNIAN)
            .normals(self.grid.steps())
            .into_iter()
            .map(|z| z * root_h)
            .collect();
        let dbh = self.fgn.sample(&stream.substream(SUBSTREAM_FRACTIONAL));
        let dxi = dw
            .iter()
            .zip(&dbh)
            .map(|(w, b)| self.sigma * w + b)
            .collect();
        MixedPath {
            grid: self.grid,
            dw,
            dbh,
            dxi,
        }
    }
}

pub fn sample_mixed_path(
    grid: &GridSpec,
    params: &ModelParams,
    stream: &RngStream,
) -> Result<MixedPath> {
    Ok(MixedPathSampler::new(*grid, params, FgnMethod::Circulant)?.sample(stream))
}

/// Surplus levels `X_{t_k} = u + theta t_k - xi_{t_k}`, `k = 0..=n`.
pub fn surplus_path(path: &MixedPath, params: &ModelParams) -> Vec<f64> {
    path.xi_levels()
        .into_iter()
        .enumerate()
        .map(|(k, xi)| params.u + params.theta * path.grid.time(k) - xi)
        .collect()
}

/// Formats a value with 17 significant digits (round-trip exact).
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `t,dW,dBH,dXi,X`, one row per grid step.
pub fn write_path_csv<W: Write>(
    mut out: W,
    path: &MixedPath,
    params: &ModelParams,
) -> std::io::Result<()> {
    let x = surplus_path(path, params);
    writeln!(out, "t,dW,dBH,dXi,X")?;
    for k in 0..path.grid.steps() {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_num(path.grid.time(k + 1)),
            fmt_num(path.dw[k]),
            fmt_num(path.dbh[k]),
            fmt_num(path.dxi[k]),
            fmt_num(x[k + 1])
        )?;
    }
    Ok(())
}
