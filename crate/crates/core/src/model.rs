//! Grid and model parameter types shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid `t_k = k h`, `k = 0..=n`, with `h = T / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    horizon: f64,
    steps: usize,
}

impl GridSpec {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::domain("grid needs at least one step"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::domain(format!(
                "grid horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self { horizon, steps })
    }

    /// Grid with a given step size, `T = n h`.
    pub fn with_step(step: f64, steps: usize) -> Result<Self> {
        Self::new(step * steps as f64, steps)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Time of grid index `k` (0-based, `t_0 = 0`).
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.step()
        }
    }

    /// Observation times `t_1..t_n`.
    pub fn times(&self) -> Vec<f64> {
        (1..=self.steps).map(|k| self.time(k)).collect()
    }
}

/// Parameters of the surplus `X_t = u + theta t - (sigma W_t + B^H_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub hurst: f64,
    pub sigma: f64,
    pub theta: f64,
    pub u: f64,
}

impl ModelParams {
    pub fn new(hurst: f64, sigma: f64, theta: f64, u: f64) -> Result<Self> {
        let p = Self {
            hurst,
            sigma,
            theta,
            u,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.5 && self.hurst < 1.0) {
            return Err(Error::domain(format!(
                "hurst must lie in (1/2, 1), got {}",
                self.hurst
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::domain(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !self.theta.is_finite() {
            return Err(Error::domain("theta must be finite"));
        }
        if !(self.u.is_finite() && self.u >= 0.0) {
            return Err(Error::domain(format!(
                "initial reserve u must be >= 0, got {}",
                self.u
            )));
        }
        Ok(())
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self { theta, ..self }
    }

    pub fn with_u(self, u: f64) -> Self {
        Self { u, ..self }
    }
}

pub(crate) fn check_hurst_open_unit(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "hurst must lie in (0, 1), got {hurst}"
        )))
    }
}
