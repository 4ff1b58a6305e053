use clap::ValueEnum;
use mfbm_ruin::drift::{asymptotic_variance_constant, normalized_stat, LevelGls};
use mfbm_ruin::kernel::{kernel_weight_table, visit_kernel_weights};
use mfbm_ruin::mc::par_map_paths;
use mfbm_ruin::pathgen::{
    fmt_num, surplus_path, write_path_csv, FgnMethod, MixedPath, MixedPathSampler,
};
use mfbm_ruin::ruin::{
    crude_ruin_mc, estimate_drift_from_surplus, plugin_ruin_ci_with, RuinConfig, RuinReport,
};
use mfbm_ruin::stats::{dagostino_pearson, summarize};
use mfbm_ruin::{GridSpec, RngStream};
use serde::Serialize;
use std::io::Write;

use crate::commands::{derive_seed, girsanov_with_sample, passage, ruin_config, PluginSummary};
use crate::config::{req, Config};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentId {
    Table1,
    RuinDemo,
    CltHist,
    PassageScan,
    Custom,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Table1 => "table1",
            ExperimentId::RuinDemo => "ruin_demo",
            ExperimentId::CltHist => "clt_hist",
            ExperimentId::PassageScan => "passage_scan",
            ExperimentId::Custom => "custom",
        }
    }
}

const SEED_CRUDE: u64 = 11;
const SEED_GIRSANOV: u64 = 12;
const SEED_OBSERVATION: u64 = 13;
const MAX_TABLE_HORIZON: usize = 4000;

pub fn run(id: ExperimentId, cfg: &Config, seed: u64, out: &mut OutputDir) -> CliResult<()> {
    if let Some(named) = &cfg.experiment {
        if named != id.name() {
            return Err(CliError::invalid(
                "experiment",
                format!("config names `{named}` but `{}` was requested", id.name()),
            ));
        }
    }
    match id {
        ExperimentId::Table1 => table1(cfg, out),
        ExperimentId::RuinDemo => ruin_demo(cfg, seed, out),
        ExperimentId::CltHist => clt_hist(cfg, seed, out),
        ExperimentId::PassageScan => passage(cfg, seed, out, true),
        ExperimentId::Custom => custom(cfg, seed, out),
    }
}

fn table1(cfg: &Config, out: &mut OutputDir) -> CliResult<()> {
    let hursts = cfg.hurst_list.clone().unwrap_or_else(|| vec![0.7, 0.75]);
    let mut horizons = cfg
        .horizon_list
        .clone()
        .unwrap_or_else(|| vec![500, 1000, 2000]);
    horizons.sort_unstable();
    horizons.dedup();
    let sigma = cfg.sigma.unwrap_or(1.0);
    let h = cfg.h.unwrap_or(1.0);
    let max = *horizons
        .last()
        .ok_or_else(|| CliError::invalid("T_list", "empty"))?;
    if horizons[0] == 0 || max > MAX_TABLE_HORIZON {
        return Err(CliError::invalid(
            "T_list",
            format!("grid sizes must lie in 1..={MAX_TABLE_HORIZON}"),
        ));
    }
    for &hurst in &hursts {
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(CliError::invalid(
                "hurst_list",
                format!("{hurst} is outside (1/2, 1)"),
            ));
        }
    }
    let grid = GridSpec::with_step(h, max)?;
    let mut rows = Vec::new();
    for &hurst in &hursts {
        let rhs = asymptotic_variance_constant(hurst)?;
        visit_kernel_weights(&grid, hurst, sigma, |k, phi, _| {
            if horizons.binary_search(&k).is_ok() {
                let t = k as f64 * h;
                let var = sigma / (h * phi.iter().sum::<f64>());
                rows.push((hurst, k, t.powf(2.0 - 2.0 * hurst) * var, rhs));
            }
        })?;
    }
    out.write_with("table1.csv", |w| {
        writeln!(w, "H,T_prime,lhs,rhs")?;
        for (hurst, k, lhs, rhs) in &rows {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_num(*hurst),
                k,
                fmt_num(*lhs),
                fmt_num(*rhs)
            )?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct RuinDemo {
    crude: RuinReport,
    girsanov: RuinReport,
    d_psi_std_err: f64,
    z_score: f64,
    agree: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    plugin: Option<PluginSummary>,
}

fn ruin_demo(cfg: &Config, seed: u64, out: &mut OutputDir) -> CliResult<()> {
    let mut filled = cfg.clone();
    filled.n_paths = Some(cfg.n_paths.unwrap_or(10_000));
    let base = ruin_config(&filled, seed)?;
    if base.steps > 4000 {
        return Err(CliError::invalid("n", "the demo is limited to n <= 4000"));
    }
    if base.n_paths > 100_000 {
        return Err(CliError::invalid(
            "n_paths",
            "the demo is limited to 1e5 paths",
        ));
    }
    if base.ultimate {
        return Err(CliError::invalid(
            "ultimate",
            "the demo uses a finite horizon",
        ));
    }
    let obs = plugin_grid(cfg)?;

    let crude = crude_ruin_mc(&RuinConfig {
        seed: derive_seed(seed, SEED_CRUDE),
        ..base
    })?;
    let girsanov_config = RuinConfig {
        seed: derive_seed(seed, SEED_GIRSANOV),
        ..base
    };
    let (girsanov, _, d_se) = girsanov_with_sample(&girsanov_config)?;
    let z = (girsanov.psi_hat - crude.psi_hat).abs()
        / (girsanov.std_err.powi(2) + crude.std_err.powi(2)).sqrt();
    let plugin = match obs {
        Some(grid) => Some(plugin(&girsanov_config, grid, seed)?),
        None => None,
    };
    out.write_json(
        "ruin_demo.json",
        &RuinDemo {
            crude: crude.report(),
            girsanov: girsanov.report(),
            d_psi_std_err: d_se,
            z_score: z,
            agree: z <= 3.0,
            plugin,
        },
    )
}

fn plugin_grid(cfg: &Config) -> CliResult<Option<GridSpec>> {
    match (cfg.obs_horizon, cfg.n_obs) {
        (Some(t), Some(n)) => Ok(Some(GridSpec::new(t, n)?)),
        (None, None) => Ok(None),
        (Some(_), None) => Err(CliError::missing("n_obs")),
        (None, Some(_)) => Err(CliError::missing("T_obs")),
    }
}

fn observed_levels(
    config: &RuinConfig,
    grid: GridSpec,
    seed: u64,
) -> CliResult<(MixedPath, Vec<f64>)> {
    let sampler = MixedPathSampler::new(grid, &config.params, FgnMethod::Circulant)?;
    let path = sampler.sample(&RngStream::new(derive_seed(seed, SEED_OBSERVATION), 0));
    let levels = surplus_path(&path, &config.params);
    Ok((path, levels))
}

fn plugin(config: &RuinConfig, obs: GridSpec, seed: u64) -> CliResult<PluginSummary> {
    let (_, levels) = observed_levels(config, obs, seed)?;
    let table = kernel_weight_table(&config.grid()?, &config.params)?;
    let p = plugin_ruin_ci_with(&levels, &obs, config, &table)?;
    Ok(PluginSummary {
        theta_hat: p.theta_hat.value,
        theta_variance: p.theta_hat.variance,
        psi_hat_plugin: p.psi_hat_plugin,
        mc_std_err: p.mc_std_err,
        d_psi_d_theta: p.d_psi_d_theta,
        ci_low: p.ci_low,
        ci_high: p.ci_high,
        obs_horizon: obs.horizon(),
        n_obs: obs.steps(),
    })
}

#[derive(Serialize)]
struct CltSummary {
    replications: usize,
    n: usize,
    h: f64,
    mean: f64,
    median: f64,
    sd: f64,
    skewness: f64,
    kurtosis: f64,
    k2: Option<f64>,
    p_value: Option<f64>,
}

fn clt_hist(cfg: &Config, seed: u64, out: &mut OutputDir) -> CliResult<()> {
    let params = cfg.model(true, false)?;
    let grid = cfg.grid()?;
    let reps = cfg.replications.unwrap_or(2000);
    if reps < 500 {
        return Err(CliError::invalid("replications", "need at least 500"));
    }
    let gls = LevelGls::new(&grid, params.hurst, params.sigma)?;
    let sampler = MixedPathSampler::new(grid, &params, cfg.fgn())?;
    let times = grid.times();
    let fits = par_map_paths(reps, |i| {
        let xi = sampler.sample(&RngStream::new(seed, i)).xi_levels();
        let y: Vec<f64> = times
            .iter()
            .zip(&xi[1..])
            .map(|(t, x)| params.theta * t - x)
            .collect();
        let e = gls.estimate(&y)?;
        Ok::<_, mfbm_ruin::Error>((e.value, normalized_stat(e.value, params.theta, e.variance)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let phi: Vec<f64> = fits.iter().map(|f| f.1).collect();
    out.write_with("clt_replicates.csv", |w| {
        writeln!(w, "replicate,theta_hat,phi")?;
        for (i, (t, p)) in fits.iter().enumerate() {
            writeln!(w, "{i},{},{}", fmt_num(*t), fmt_num(*p))?;
        }
        Ok(())
    })?;
    let s = summarize(&phi);
    let test = dagostino_pearson(&phi);
    out.write_json(
        "clt_summary.json",
        &CltSummary {
            replications: reps,
            n: grid.steps(),
            h: grid.step(),
            mean: s.mean,
            median: s.median,
            sd: s.std_dev,
            skewness: s.skewness,
            kurtosis: s.kurtosis,
            k2: test.map(|t| t.0),
            p_value: test.map(|t| t.1),
        },
    )
}

#[derive(Serialize)]
struct CustomRun {
    theta_hat: f64,
    theta_variance: f64,
    ruin: RuinReport,
    plugin: PluginSummary,
}

/// Observe one surplus path, estimate the drift, and report ruin at the
/// estimate with its confidence interval. Every key is required.
fn custom(cfg: &Config, seed: u64, out: &mut OutputDir) -> CliResult<()> {
    req(&cfg.a, "a")?;
    let config = ruin_config(cfg, seed)?;
    let obs = GridSpec::new(req(&cfg.obs_horizon, "T_obs")?, req(&cfg.n_obs, "n_obs")?)?;
    let (path, levels) = observed_levels(&config, obs, seed)?;
    let theta_hat =
        estimate_drift_from_surplus(&levels, &obs, config.params.hurst, config.params.sigma)?;
    let summary = plugin(&config, obs, seed)?;
    let (ruin, _, _) = girsanov_with_sample(&RuinConfig {
        params: config.params.with_theta(theta_hat.value),
        ..config
    })?;
    out.write_with("observed_path.csv", |w| {
        write_path_csv(w, &path, &config.params)
    })?;
    out.write_json(
        "custom.json",
        &CustomRun {
            theta_hat: theta_hat.value,
            theta_variance: theta_hat.variance,
            ruin: ruin.report(),
            plugin: summary,
        },
    )
}
