//! Maximum-likelihood estimation of the drift `theta` with `H` and `sigma`
//! known.
//!
//! Two routes are offered. [`mle_discrete`] is the GLS estimator on levels,
//! `t^T Gamma^{-1} Y / t^T Gamma^{-1} t`. [`mle_kernel`] uses the
//! fundamental-martingale weights on increments,
//! `sum phi_i dY_i / (h sum phi_i)`. On the same grid the two agree exactly:
//! increments are an invertible linear map of levels.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::gausslin::{spd_solve, LevelCovariance};
use crate::kernel::KernelWeightTable;
use crate::model::{check_hurst_open_unit, GridSpec};
use crate::stats::ols_slope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMethod {
    DiscreteLevel,
    KernelIncrement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEstimate {
    pub value: f64,
    /// Exact variance of the estimator under the model.
    pub variance: f64,
    pub method: DriftMethod,
    pub grid: GridSpec,
    pub hurst: f64,
    pub sigma: f64,
}

/// Serialized form of a drift estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub method: DriftMethod,
    pub theta_hat: f64,
    pub variance: f64,
    pub n: usize,
    pub h: f64,
    #[serde(rename = "H")]
    pub hurst: f64,
    pub sigma: f64,
    pub seed: Option<u64>,
}

impl DriftEstimate {
    pub fn std_err(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn report(&self, seed: Option<u64>) -> DriftReport {
        DriftReport {
            method: self.method,
            theta_hat: self.value,
            variance: self.variance,
            n: self.grid.steps(),
            h: self.grid.step(),
            hurst: self.hurst,
            sigma: self.sigma,
            seed,
        }
    }
}

/// GLS estimator on levels with `Gamma^{-1} t` factored once, for repeated
/// use on many paths.
#[derive(Debug, Clone)]
pub struct LevelGls {
    grid: GridSpec,
    hurst: f64,
    sigma: f64,
    weights: Vec<f64>,
    information: f64,
}

impl LevelGls {
    pub fn new(grid: &GridSpec, hurst: f64, sigma: f64) -> Result<Self> {
        check_hurst_open_unit(hurst)?;
        if !(sigma >= 0.0) {
            return Err(Error::domain("sigma must be >= 0"));
        }
        let gamma_cov = LevelCovariance::mixed(grid, hurst, sigma)?;
        let t = grid.times();
        let weights = spd_solve(&gamma_cov.matrix, &t)?;
        let information: f64 = t.iter().zip(&weights).map(|(a, b)| a * b).sum();
        Ok(Self {
            grid: *grid,
            hurst,
            sigma,
            weights,
            information,
        })
    }

    /// `t^T Gamma^{-1} t`, the Fisher information for `theta`.
    pub fn information(&self) -> f64 {
        self.information
    }

    pub fn variance(&self) -> f64 {
        1.0 / self.information
    }

    pub fn estimate(&self, levels: &[f64]) -> Result<DriftEstimate> {
        if levels.len() != self.weights.len() {
            return Err(Error::LengthMismatch {
                expected: self.weights.len(),
                got: levels.len(),
            });
        }
        let num: f64 = self.weights.iter().zip(levels).map(|(w, y)| w * y).sum();
        Ok(DriftEstimate {
            value: num / self.information,
            variance: self.variance(),
            method: DriftMethod::DiscreteLevel,
            grid: self.grid,
            hurst: self.hurst,
            sigma: self.sigma,
        })
    }
}

/// GLS drift estimate from levels `Y_{t_1..t_n}` of `theta t - xi_t`.
pub fn mle_discrete(
    levels: &[f64],
    grid: &GridSpec,
    hurst: f64,
    sigma: f64,
) -> Result<DriftEstimate> {
    LevelGls::new(grid, hurst, sigma)?.estimate(levels)
}

/// Kernel-weight drift estimate from weights `phi` for the horizon
/// `phi.len()` and increments `dY`.
pub fn mle_kernel_weights(
    increments: &[f64],
    phi: &[f64],
    sigma: f64,
    step: f64,
) -> Result<(f64, f64)> {
    if increments.len() != phi.len() {
        return Err(Error::LengthMismatch {
            expected: phi.len(),
            got: increments.len(),
        });
    }
    let weight_sum: f64 = phi.iter().sum();
    if !(weight_sum > 0.0) {
        return Err(Error::Singular("kernel weights sum to zero".into()));
    }
    let num: f64 = phi.iter().zip(increments).map(|(p, d)| p * d).sum();
    Ok((num / (step * weight_sum), sigma / (step * weight_sum)))
}

/// Drift estimate from `n` increments using `phi^(n)` from `table`.
pub fn mle_kernel(increments: &[f64], table: &KernelWeightTable) -> Result<DriftEstimate> {
    let n = increments.len();
    if n == 0 || n > table.len() {
        return Err(Error::LengthMismatch {
            expected: table.len(),
            got: n,
        });
    }
    let step = table.grid.step();
    let (value, variance) = mle_kernel_weights(increments, table.phi(n), table.sigma, step)?;
    Ok(DriftEstimate {
        value,
        variance,
        method: DriftMethod::KernelIncrement,
        grid: GridSpec::with_step(step, n)?,
        hurst: table.hurst,
        sigma: table.sigma,
    })
}

/// Increments `Y_{t_i} - Y_{t_{i-1}}` of levels observed at `t_1..t_n`, with `Y_0 = 0`.
pub fn increments_from_levels(levels: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    levels
        .iter()
        .map(|&y| {
            let d = y - prev;
            prev = y;
            d
        })
        .collect()
}

/// `lambda_H = 2H Gamma(H + 1/2) Gamma(3 - 2H) / Gamma(3/2 - H)`, the limit of
/// `T^{2-2H} Var(theta_hat_T)`.
pub fn asymptotic_variance_constant(hurst: f64) -> Result<f64> {
    check_hurst_open_unit(hurst)?;
    Ok(2.0 * hurst * gamma(hurst + 0.5) * gamma(3.0 - 2.0 * hurst) / gamma(1.5 - hurst))
}

/// `(theta_hat - theta) / sqrt(variance)`.
pub fn normalized_stat(theta_hat: f64, theta: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::domain(format!(
            "variance must be positive, got {variance}"
        )));
    }
    Ok((theta_hat - theta) / variance.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRateScan {
    /// `(N, 1 / t^T Gamma^{-1} t)`.
    pub rows: Vec<(usize, f64)>,
    /// Least-squares slope of log variance on log N.
    pub slope: f64,
}

pub fn variance_rate_scan(
    hurst: f64,
    sigma: f64,
    step: f64,
    sizes: &[usize],
) -> Result<VarianceRateScan> {
    if sizes.len() < 2 || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(
            "sample sizes must be increasing, at least two",
        ));
    }
    let rows = sizes
        .iter()
        .map(|&n| {
            let grid = GridSpec::with_step(step, n)?;
            Ok((n, LevelGls::new(&grid, hurst, sigma)?.variance()))
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|(_, v)| v.ln()).collect();
    Ok(VarianceRateScan {
        slope: ols_slope(&x, &y),
        rows,
    })
}
