//! Ruin probabilities `psi(u, T) = P(inf_{t <= T} X_t < 0)`.
//!
//! [`crude_ruin_mc`] counts ruined surplus paths directly. The change-of-measure
//! estimator [`girsanov_ruin_mc`] simulates the drift-free mixed process,
//! stops at the first grid time `eta` with `xi + a t > u` and weights the path
//! by `exp(-(a + theta) M_eta - (a + theta)^2 <M>_eta / 2)`. Its expectation
//! does not depend on the tilt `a`. Because crossing times and martingale values
//! do not depend on `theta`, a single [`CrossingSample`] can be reweighted to
//! any `theta`, which gives the pathwise sensitivity and the plug-in estimator
//! at no extra simulation cost.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::drift::{mle_kernel_weights, DriftEstimate, DriftMethod};
use crate::error::{Error, Result};
use crate::kernel::{kernel_weight_table, visit_kernel_weights, KernelWeightTable};
use crate::mc::par_map_paths;
use crate::model::{GridSpec, ModelParams};
use crate::pathgen::{fmt_num, FgnMethod, MixedPath, MixedPathSampler};
use crate::rng::RngStream;
use crate::stats::{mean, pairwise_sum, std_error, Z_975};

/// Above this share of non-crossing paths an ultimate-ruin estimate is flagged.
pub const TRUNCATION_WARN_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuinMethod {
    Crude,
    Girsanov,
    Ultimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuinConfig {
    pub params: ModelParams,
    /// Finite horizon `T`, or the truncation horizon `T_max` in ultimate mode.
    pub horizon: f64,
    pub steps: usize,
    pub tilt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub ultimate: bool,
}

impl RuinConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.params.u > 0.0) {
            return Err(Error::domain("initial reserve u must be positive"));
        }
        if !self.tilt.is_finite() {
            return Err(Error::domain("tilt must be finite"));
        }
        if self.ultimate && !(self.tilt > 0.0) {
            return Err(Error::domain("ultimate ruin needs a positive tilt"));
        }
        if self.n_paths == 0 {
            return Err(Error::domain("need at least one path"));
        }
        GridSpec::new(self.horizon, self.steps)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.horizon, self.steps)
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self {
            params: self.params.with_theta(theta),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuinEstimate {
    pub psi_hat: f64,
    pub std_err: f64,
    pub n_paths: usize,
    pub method: RuinMethod,
    /// Share of paths that never crossed before `T_max` (ultimate mode only).
    pub truncated_fraction: Option<f64>,
    pub d_psi_d_theta: Option<f64>,
    pub config: RuinConfig,
}

impl RuinEstimate {
    /// Set in ultimate mode when too many paths were truncated.
    pub fn truncation_warning(&self) -> bool {
        self.truncated_fraction
            .is_some_and(|f| f > TRUNCATION_WARN_FRACTION)
    }

    pub fn report(&self) -> RuinReport {
        let c = &self.config;
        RuinReport {
            method: self.method,
            psi_hat: self.psi_hat,
            std_err: self.std_err,
            n_paths: self.n_paths,
            truncated_fraction: self.truncated_fraction,
            a: c.tilt,
            u: c.params.u,
            theta: c.params.theta,
            sigma: c.params.sigma,
            hurst: c.params.hurst,
            horizon: c.horizon,
            n: c.steps,
            seed: c.seed,
            d_psi_d_theta: self.d_psi_d_theta,
        }
    }
}

/// Serialized form of a ruin estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuinReport {
    pub method: RuinMethod,
    pub psi_hat: f64,
    pub std_err: f64,
    pub n_paths: usize,
    pub truncated_fraction: Option<f64>,
    pub a: f64,
    pub u: f64,
    pub theta: f64,
    pub sigma: f64,
    pub hurst: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n: usize,
    pub seed: u64,
    pub d_psi_d_theta: Option<f64>,
}

/// First grid index `k >= 1` with `xi_{t_k} + a t_k > u`.
pub fn first_passage_index(path: &MixedPath, a: f64, u: f64) -> Option<usize> {
    let mut xi = 0.0;
    for (i, d) in path.dxi.iter().enumerate() {
        xi += d;
        let k = i + 1;
        if xi + a * path.grid.time(k) > u {
            return Some(k);
        }
    }
    None
}

fn path_sampler(config: &RuinConfig) -> Result<MixedPathSampler> {
    MixedPathSampler::new(config.grid()?, &config.params, FgnMethod::Circulant)
}

/// Fraction of paths whose surplus drops below zero at some grid time.
pub fn crude_ruin_mc(config: &RuinConfig) -> Result<RuinEstimate> {
    config.validate()?;
    if config.ultimate {
        return Err(Error::domain("crude estimator needs a finite horizon"));
    }
    let sampler = path_sampler(config)?;
    let p = config.params;
    let hits = par_map_paths(config.n_paths, |i| {
        let path = sampler.sample(&RngStream::new(config.seed, i));
        // ruin iff xi_t - theta t > u
        first_passage_index(&path, -p.theta, p.u).is_some()
    });
    let ruined = hits.iter().filter(|&&h| h).count();
    let n = config.n_paths as f64;
    let psi = ruined as f64 / n;
    Ok(RuinEstimate {
        psi_hat: psi,
        std_err: (psi * (1.0 - psi) / n).sqrt(),
        n_paths: config.n_paths,
        method: RuinMethod::Crude,
        truncated_fraction: None,
        d_psi_d_theta: None,
        config: *config,
    })
}

/// Martingale value and quadratic variation at a path's crossing index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub index: usize,
    pub time: f64,
    pub martingale: f64,
    pub qv: f64,
}

/// Drift-free paths reduced to their crossing data for one `(u, a)` pair.
#[derive(Debug, Clone)]
pub struct CrossingSample {
    pub config: RuinConfig,
    pub crossings: Vec<Option<Crossing>>,
}

impl CrossingSample {
    pub fn simulate(config: &RuinConfig, table: &KernelWeightTable) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        if table.grid != grid
            || table.sigma != config.params.sigma
            || table.hurst != config.params.hurst
        {
            return Err(Error::domain(
                "kernel table does not match the ruin configuration",
            ));
        }
        let sampler = path_sampler(config)?;
        let (a, u, sigma) = (config.tilt, config.params.u, config.params.sigma);
        let crossings = par_map_paths(config.n_paths, |i| {
            let path = sampler.sample(&RngStream::new(config.seed, i));
            first_passage_index(&path, a, u).map(|k| {
                let phi = table.phi(k);
                let m = phi
                    .iter()
                    .zip(&path.dxi[..k])
                    .map(|(p, d)| p * d)
                    .sum::<f64>()
                    / sigma;
                Crossing {
                    index: k,
                    time: grid.time(k),
                    martingale: m,
                    qv: table.qv(k),
                }
            })
        });
        Ok(Self {
            config: *config,
            crossings,
        })
    }

    pub fn crossing_fraction(&self) -> f64 {
        self.crossings.iter().filter(|c| c.is_some()).count() as f64 / self.crossings.len() as f64
    }

    /// Per-path change-of-measure weights for drift `theta`.
    pub fn weights(&self, theta: f64) -> Vec<f64> {
        let c = self.config.tilt + theta;
        self.crossings
            .iter()
            .map(|x| x.map_or(0.0, |x| (-c * x.martingale - 0.5 * c * c * x.qv).exp()))
            .collect()
    }

    /// `d/dtheta` of each weight: `(-M - (a + theta) <M>) w`.
    pub fn weight_derivatives(&self, theta: f64) -> Vec<f64> {
        let c = self.config.tilt + theta;
        self.crossings
            .iter()
            .map(|x| {
                x.map_or(0.0, |x| {
                    let w = (-c * x.martingale - 0.5 * c * c * x.qv).exp();
                    (-x.martingale - c * x.qv) * w
                })
            })
            .collect()
    }

    pub fn psi(&self, theta: f64) -> (f64, f64) {
        let w = self.weights(theta);
        (mean(&w), std_error(&w))
    }

    pub fn d_psi(&self, theta: f64) -> (f64, f64) {
        let d = self.weight_derivatives(theta);
        (mean(&d), std_error(&d))
    }

    /// Writes `path_id,crossing_index,eta,weight`; non-crossing paths leave
    /// index and time empty.
    pub fn write_paths_csv<W: Write>(&self, mut out: W, theta: f64) -> std::io::Result<()> {
        writeln!(out, "path_id,crossing_index,eta,weight")?;
        for (id, (x, w)) in self.crossings.iter().zip(self.weights(theta)).enumerate() {
            match x {
                Some(x) => writeln!(out, "{},{},{},{}", id, x.index, fmt_num(x.time), fmt_num(w))?,
                None => writeln!(out, "{id},,,{}", fmt_num(w))?,
            }
        }
        Ok(())
    }

    /// Estimate at the configured drift; ultimate mode follows `config.ultimate`.
    pub fn summarize(&self, with_sensitivity: bool) -> RuinEstimate {
        let method = if self.config.ultimate {
            RuinMethod::Ultimate
        } else {
            RuinMethod::Girsanov
        };
        self.estimate(method, with_sensitivity)
    }

    fn estimate(&self, method: RuinMethod, with_sensitivity: bool) -> RuinEstimate {
        let theta = self.config.params.theta;
        let (psi_hat, std_err) = self.psi(theta);
        let truncated_fraction =
            (method == RuinMethod::Ultimate).then(|| 1.0 - self.crossing_fraction());
        RuinEstimate {
            psi_hat,
            std_err,
            n_paths: self.crossings.len(),
            method,
            truncated_fraction,
            d_psi_d_theta: with_sensitivity.then(|| self.d_psi(theta).0),
            config: self.config,
        }
    }
}

fn table_for(config: &RuinConfig) -> Result<KernelWeightTable> {
    kernel_weight_table(&config.grid()?, &config.params)
}

/// Change-of-measure estimate of `psi(u, T)` with a precomputed kernel table.
pub fn girsanov_ruin_mc_with(
    config: &RuinConfig,
    table: &KernelWeightTable,
) -> Result<RuinEstimate> {
    if config.ultimate {
        return ultimate_ruin_mc_with(config, table);
    }
    Ok(CrossingSample::simulate(config, table)?.estimate(RuinMethod::Girsanov, false))
}

pub fn girsanov_ruin_mc(config: &RuinConfig) -> Result<RuinEstimate> {
    girsanov_ruin_mc_with(config, &table_for(config)?)
}

/// Ultimate ruin `psi(u)` truncated at `T_max = config.horizon`.
pub fn ultimate_ruin_mc_with(
    config: &RuinConfig,
    table: &KernelWeightTable,
) -> Result<RuinEstimate> {
    if !(config.tilt > 0.0) {
        return Err(Error::domain("ultimate ruin needs a positive tilt"));
    }
    let config = RuinConfig {
        ultimate: true,
        ..*config
    };
    let est = CrossingSample::simulate(&config, table)?.estimate(RuinMethod::Ultimate, false);
    if est.truncation_warning() {
        warn!(
            "ultimate ruin: {:.2}% of paths did not cross before T_max = {}",
            100.0 * est.truncated_fraction.unwrap_or(0.0),
            config.horizon
        );
    }
    Ok(est)
}

pub fn ultimate_ruin_mc(config: &RuinConfig) -> Result<RuinEstimate> {
    ultimate_ruin_mc_with(config, &table_for(config)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub d_psi_d_theta: f64,
    pub std_err: f64,
    pub psi_hat: f64,
    pub psi_std_err: f64,
}

/// Pathwise `d psi / d theta` from the analytic derivative of the weight.
pub fn ruin_sensitivity_with(
    config: &RuinConfig,
    table: &KernelWeightTable,
) -> Result<Sensitivity> {
    let sample = CrossingSample::simulate(config, table)?;
    let theta = config.params.theta;
    let (d, d_se) = sample.d_psi(theta);
    let (psi, psi_se) = sample.psi(theta);
    Ok(Sensitivity {
        d_psi_d_theta: d,
        std_err: d_se,
        psi_hat: psi,
        psi_std_err: psi_se,
    })
}

pub fn ruin_sensitivity(config: &RuinConfig) -> Result<Sensitivity> {
    ruin_sensitivity_with(config, &table_for(config)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluginRuin {
    pub theta_hat: DriftEstimate,
    pub psi_hat_plugin: f64,
    /// Monte Carlo standard error of `psi_hat_plugin`.
    pub mc_std_err: f64,
    pub d_psi_d_theta: f64,
    pub d_psi_std_err: f64,
    /// Delta-method variance `(d psi)^2 Var(theta_hat)`.
    pub delta_variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Kernel-form drift estimate from surplus levels `X_{t_0..t_n}` on `obs_grid`.
pub fn estimate_drift_from_surplus(
    levels: &[f64],
    obs_grid: &GridSpec,
    hurst: f64,
    sigma: f64,
) -> Result<DriftEstimate> {
    let n = obs_grid.steps();
    if levels.len() != n + 1 {
        return Err(Error::LengthMismatch {
            expected: n + 1,
            got: levels.len(),
        });
    }
    let dy: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
    let mut last = Vec::new();
    visit_kernel_weights(obs_grid, hurst, sigma, |k, phi, _| {
        if k == n {
            last = phi.to_vec();
        }
    })?;
    let (value, variance) = mle_kernel_weights(&dy, &last, sigma, obs_grid.step())?;
    Ok(DriftEstimate {
        value,
        variance,
        method: DriftMethod::KernelIncrement,
        grid: *obs_grid,
        hurst,
        sigma,
    })
}

/// Plug-in ruin probability at the estimated drift with a delta-method
/// confidence interval. `config.params.theta` is ignored.
pub fn plugin_ruin_ci(
    levels: &[f64],
    obs_grid: &GridSpec,
    config: &RuinConfig,
) -> Result<PluginRuin> {
    let table = table_for(config)?;
    plugin_ruin_ci_with(levels, obs_grid, config, &table)
}

pub fn plugin_ruin_ci_with(
    levels: &[f64],
    obs_grid: &GridSpec,
    config: &RuinConfig,
    table: &KernelWeightTable,
) -> Result<PluginRuin> {
    if obs_grid.horizon() > config.horizon + 1e-12 && !config.ultimate {
        warn!("observation span exceeds the ruin horizon");
    }
    let p = config.params;
    let theta_hat = estimate_drift_from_surplus(levels, obs_grid, p.hurst, p.sigma)?;
    let sample = CrossingSample::simulate(&config.with_theta(theta_hat.value), table)?;
    let (psi, mc_se) = sample.psi(theta_hat.value);
    let (d, d_se) = sample.d_psi(theta_hat.value);
    let delta_variance = d * d * theta_hat.variance;
    let half = Z_975 * delta_variance.sqrt();
    Ok(PluginRuin {
        theta_hat,
        psi_hat_plugin: psi,
        mc_std_err: mc_se,
        d_psi_d_theta: d,
        d_psi_std_err: d_se,
        delta_variance,
        ci_low: psi - half,
        ci_high: psi + half,
    })
}

/// Sum of weights, used by tests that compare reductions bitwise.
pub fn weight_total(sample: &CrossingSample, theta: f64) -> f64 {
    pairwise_sum(&sample.weights(theta))
}
