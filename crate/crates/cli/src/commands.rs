use std::path::Path;

use log::warn;
use mfbm_ruin::drift::{mle_discrete, DriftEstimate};
use mfbm_ruin::kernel::kernel_weight_table;
use mfbm_ruin::passage::{passage_row, write_passage_csv, PassageQuery, PassageRow};
use mfbm_ruin::pathgen::{write_path_csv, MixedPathSampler};
use mfbm_ruin::ruin::{
    crude_ruin_mc, estimate_drift_from_surplus, CrossingSample, RuinConfig, RuinEstimate,
};
use mfbm_ruin::{GridSpec, RngStream};
use serde::Serialize;

use crate::config::{req, Config};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

/// Independent seed for a named part of a run.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    RngStream::new(seed, 0).substream(tag).seed
}

pub fn simulate(cfg: &Config, seed: u64, out: &mut OutputDir) -> CliResult<()> {
    let params = cfg.model(true, true)?;
    let grid = cfg.grid()?;
    let path = MixedPathSampler::new(grid, &params, cfg.fgn())?.sample(&RngStream::new(seed, 0));
    out.write_with("path.csv", |w| write_path_csv(w, &path, &params))
}

pub fn kernel(cfg: &Config, out: &mut OutputDir) -> CliResult<()> {
    let params = cfg.model(false, false)?;
    let grid = cfg.grid()?;
    let table = kernel_weight_table(&grid, &params)?;
    out.write_with("kernel_weights.csv", |w| table.write_weights_csv(w))?;
    out.write_with("kernel_qv.csv", |w| table.write_qv_csv(w))
}

/// Reads `t` and either `Y` or `X` columns; `X` is shifted by `u`.
fn read_levels(path: &Path, u: Option<f64>) -> CliResult<(GridSpec, Vec<f64>)> {
    let bad = |why: String| CliError::invalid("input", why);
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let t_col = col("t").ok_or_else(|| bad("no `t` column".into()))?;
    let (y_col, shift) = match (col("Y"), col("X")) {
        (Some(c), _) => (c, 0.0),
        (None, Some(c)) => (c, u.ok_or_else(|| CliError::missing("u"))?),
        (None, None) => return Err(bad("need a `Y` or `X` column".into())),
    };
    let mut times = Vec::new();
    let mut levels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |c: usize| -> CliResult<f64> {
            record
                .get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad(format!("row {} is not numeric", line + 1)))
        };
        times.push(field(t_col)?);
        levels.push(field(y_col)? - shift);
    }
    if times.is_empty() {
        return Err(bad("no data rows".into()));
    }
    let h = times[0];
    let n = times.len();
    let grid = GridSpec::with_step(h, n).map_err(|e| bad(e.to_string()))?;
    if times
        .iter()
        .enumerate()
        .any(|(k, &t)| (t - grid.time(k + 1)).abs() > 1e-9 * t.abs().max(1.0))
    {
        return Err(bad(
            "times must be the equally spaced grid h, 2h, ..., nh".into()
        ));
    }
    Ok((grid, levels))
}

pub fn estimate_drift(cfg: &Config, seed: u64, out: &mut OutputDir) -> CliResult<()> {
    let hurst = req(&cfg.hurst, "hurst")?;
    let sigma = req(&cfg.sigma, "sigma")?;
    let input = req(&cfg.input, "input")?;
    let method = cfg.method.as_deref().unwrap_or("discrete_level");
    if !matches!(method, "discrete_level" | "kernel_increment") {
        return Err(CliError::invalid(
            "method",
            format!("`{method}` is not discrete_level or kernel_increment"),
        ));
    }
    let (grid, levels) = read_levels(&input, cfg.u)?;
    let estimate = drift_estimate(method, &levels, &grid, hurst, sigma)?;
    out.write_json("estimate.json", &estimate.report(Some(seed)))
}

fn drift_estimate(
    method: &str,
    levels: &[f64],
    grid: &GridSpec,
    hurst: f64,
    sigma: f64,
) -> CliResult<DriftEstimate> {
    Ok(match method {
        "kernel_increment" => {
            let with_origin: Vec<f64> =
                std::iter::once(0.0).chain(levels.iter().copied()).collect();
            estimate_drift_from_surplus(&with_origin, grid, hurst, sigma)?
        }
        _ => mle_discrete(levels, grid, hurst, sigma)?,
    })
}

pub fn ruin_config(cfg: &Config, seed: u64) -> CliResult<RuinConfig> {
    let params = cfg.model(true, true)?;
    let grid = cfg.grid()?;
    let config = RuinConfig {
        params,
        horizon: grid.horizon(),
        steps: grid.steps(),
        tilt: match cfg.a {
            Some(a) => a,
            None => params.theta,
        },
        n_paths: req(&cfg.n_paths, "n_paths")?,
        seed,
        ultimate: cfg.ultimate.unwrap_or(false),
    };
    config.validate()?;
    Ok(config)
}

/// Girsanov estimate with sensitivity; also returns the crossing sample.
pub fn girsanov_with_sample(config: &RuinConfig) -> CliResult<(RuinEstimate, CrossingSample, f64)> {
    let table = kernel_weight_table(&config.grid()?, &config.params)?;
    let sample = CrossingSample::simulate(config, &table)?;
    let est = sample.summarize(true);
    if est.truncation_warning() {
        warn!(
            "{:.2}% of paths did not cross before T_max",
            100.0 * est.truncated_fraction.unwrap_or(0.0)
        );
    }
    let (_, d_se) = sample.d_psi(config.params.theta);
    Ok((est, sample, d_se))
}

pub fn ruin(cfg: &Config, seed: u64, out: &mut OutputDir) -> CliResult<()> {
    let method = cfg
        .method
        .as_deref()
        .unwrap_or(if cfg.ultimate == Some(true) {
            "ultimate"
        } else {
            "girsanov"
        });
    let mut config = ruin_config(cfg, seed)?;
    match method {
        "crude" => {
            if config.ultimate {
                return Err(CliError::invalid("method", "crude needs a finite horizon"));
            }
            out.write_json("ruin.json", &crude_ruin_mc(&config)?.report())
        }
        "girsanov" | "ultimate" => {
            config.ultimate = method == "ultimate";
            config.validate()?;
            let (est, sample, _) = girsanov_with_sample(&config)?;
            out.write_json("ruin.json", &est.report())?;
            if cfg.write_paths.unwrap_or(false) {
                out.write_with("ruin_paths.csv", |w| {
                    sample.write_paths_csv(w, config.params.theta)
                })?;
            }
            Ok(())
        }
        other => Err(CliError::invalid(
            "method",
            format!("`{other}` is not crude, girsanov or ultimate"),
        )),
    }
}

pub struct PassagePlan {
    pub queries: Vec<PassageQuery>,
}

/// Builds and validates every row before any sampling.
pub fn passage_plan(cfg: &Config, seed: u64, defaults: bool) -> CliResult<PassagePlan> {
    let pick = |v: Option<f64>, key: &str, d: f64| {
        if defaults {
            Ok(v.unwrap_or(d))
        } else {
            req(&v, key)
        }
    };
    let hurst = pick(cfg.hurst, "hurst", 0.7)?;
    let sigma = pick(cfg.sigma, "sigma", 1.0)?;
    let a = pick(cfg.a, "a", 2.0)?;
    let vs = match (&cfg.v, defaults) {
        (Some(v), _) => v.clone(),
        (None, true) => vec![20.0, 50.0, 100.0],
        (None, false) => return Err(CliError::missing("v")),
    };
    let orders = cfg.order.clone().unwrap_or_else(|| vec![1]);
    let steps = cfg.n.unwrap_or(3000);
    let multiple = cfg.horizon_multiple.unwrap_or(3.0);
    let n_paths = cfg.n_paths.unwrap_or(1000);
    if !(a > 0.0) {
        return Err(CliError::invalid("a", "tilt must be positive"));
    }
    if !(multiple > 0.0) {
        return Err(CliError::invalid("horizon_multiple", "must be positive"));
    }
    let mut queries = Vec::new();
    for &v in &vs {
        if !(v > 0.0) {
            return Err(CliError::invalid(
                "v",
                format!("barrier {v} must be positive"),
            ));
        }
        for &order in &orders {
            let q = PassageQuery {
                v,
                a,
                order,
                hurst,
                sigma,
                grid: GridSpec::new(multiple * v / a, steps)?,
                n_paths,
                seed,
            };
            q.validate()?;
            queries.push(q);
        }
    }
    Ok(PassagePlan { queries })
}

pub fn passage(cfg: &Config, seed: u64, out: &mut OutputDir, defaults: bool) -> CliResult<()> {
    let plan = passage_plan(cfg, seed, defaults)?;
    let rows = plan
        .queries
        .iter()
        .map(passage_row)
        .collect::<Result<Vec<PassageRow>, _>>()?;
    for r in &rows {
        if let Some(b) = r.bound {
            if r.moment > b {
                warn!(
                    "v={} n={}: moment {} exceeds bound {}",
                    r.v, r.order, r.moment, b
                );
            }
        }
    }
    out.write_with("passage.csv", |w| write_passage_csv(w, &rows))
}

#[derive(Serialize)]
pub struct PluginSummary {
    pub theta_hat: f64,
    pub theta_variance: f64,
    pub psi_hat_plugin: f64,
    pub mc_std_err: f64,
    pub d_psi_d_theta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(rename = "T_obs")]
    pub obs_horizon: f64,
    pub n_obs: usize,
}
