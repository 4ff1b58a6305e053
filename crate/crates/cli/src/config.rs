//! Flat JSON run configuration. Every key is optional at parse time; each
//! command states which ones it needs and fails naming the first missing key.

use std::path::{Path, PathBuf};

use mfbm_ruin::pathgen::FgnMethod;
use mfbm_ruin::{GridSpec, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    /// Horizon.
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Grid steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Grid step, used by `table1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Tilt.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ultimate: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fgn_method: Option<FgnMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(rename = "T_obs", skip_serializing_if = "Option::is_none")]
    pub obs_horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_obs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon_multiple: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hurst_list: Option<Vec<f64>>,
    #[serde(rename = "T_list", skip_serializing_if = "Option::is_none")]
    pub horizon_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub write_paths: Option<bool>,
}

pub fn req<T: Clone>(value: &Option<T>, key: &str) -> CliResult<T> {
    value.clone().ok_or_else(|| CliError::missing(key))
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// `(H, sigma, theta, u)`; `theta` and `u` default to zero when the
    /// command does not use them.
    pub fn model(&self, need_theta: bool, need_u: bool) -> CliResult<ModelParams> {
        let hurst = req(&self.hurst, "hurst")?;
        let sigma = req(&self.sigma, "sigma")?;
        let theta = if need_theta {
            req(&self.theta, "theta")?
        } else {
            self.theta.unwrap_or(0.0)
        };
        let u = if need_u {
            req(&self.u, "u")?
        } else {
            self.u.unwrap_or(0.0)
        };
        Ok(ModelParams::new(hurst, sigma, theta, u)?)
    }

    pub fn grid(&self) -> CliResult<GridSpec> {
        let horizon = req(&self.horizon, "T")?;
        let n = req(&self.n, "n")?;
        Ok(GridSpec::new(horizon, n)?)
    }

    pub fn fgn(&self) -> FgnMethod {
        self.fgn_method.unwrap_or_default()
    }
}
