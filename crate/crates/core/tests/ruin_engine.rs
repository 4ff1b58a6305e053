use mfbm_ruin::drift::mle_kernel_weights;
use mfbm_ruin::kernel::{g_nystrom, kernel_weight_table, martingale_value, visit_kernel_weights};
use mfbm_ruin::mc::par_map_paths;
use mfbm_ruin::pathgen::{FgnMethod, MixedPathSampler};
use mfbm_ruin::ruin::{
    crude_ruin_mc, girsanov_ruin_mc_with, ruin_sensitivity_with, ultimate_ruin_mc_with,
    CrossingSample, RuinConfig,
};
use mfbm_ruin::stats::{mean, std_error, variance};
use mfbm_ruin::{GridSpec, ModelParams, RngStream};

fn config(u: f64, tilt: f64, horizon: f64, steps: usize, seed: u64) -> RuinConfig {
    RuinConfig {
        params: ModelParams::new(0.6, 1.0, 1.2, u).unwrap(),
        horizon,
        steps,
        tilt,
        n_paths: 5000,
        seed,
        ultimate: false,
    }
}

fn z(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
    (a - b).abs() / (sa * sa + sb * sb).sqrt()
}

#[test]
fn martingale_variance_matches_qv() {
    let grid = GridSpec::new(5.0, 500).unwrap();
    let params = ModelParams::new(0.6, 1.0, 0.0, 1.0).unwrap();
    let table = kernel_weight_table(&grid, &params).unwrap();
    let sampler = MixedPathSampler::new(grid, &params, FgnMethod::Circulant).unwrap();
    let m: Vec<f64> = par_map_paths(10_000, |i| {
        martingale_value(
            table.phi(500),
            &sampler.sample(&RngStream::new(8, i)).dxi,
            1.0,
        )
        .unwrap()
    });
    let sq: Vec<f64> = m.iter().map(|x| x * x).collect();
    assert!((mean(&sq) - table.qv(500)).abs() <= 3.0 * std_error(&sq));
    assert!(mean(&m).abs() <= 3.0 * std_error(&m));
}

#[test]
fn exponential_martingale_at_longer_horizon() {
    let grid = GridSpec::new(10.0, 500).unwrap();
    let params = ModelParams::new(0.6, 1.0, 0.0, 1.0).unwrap();
    let table = kernel_weight_table(&grid, &params).unwrap();
    let sampler = MixedPathSampler::new(grid, &params, FgnMethod::Circulant).unwrap();
    let c = 1.2;
    let qv = table.qv(500);
    let w: Vec<f64> = par_map_paths(10_000, |i| {
        let m = martingale_value(
            table.phi(500),
            &sampler.sample(&RngStream::new(9, i)).dxi,
            1.0,
        )
        .unwrap();
        (-c * m - 0.5 * c * c * qv).exp()
    });
    assert!(
        (mean(&w) - 1.0).abs() <= 3.0 * std_error(&w),
        "{}",
        mean(&w)
    );
}

#[test]
fn nystrom_integral_matches_discrete_qv() {
    let g = g_nystrom(0.7, 1.0, 1.0, 401).unwrap();
    let grid = GridSpec::new(1.0, 400).unwrap();
    let table = kernel_weight_table(&grid, &ModelParams::new(0.7, 1.0, 0.0, 1.0).unwrap()).unwrap();
    let rel = (g.quadratic_variation() - table.qv(400)).abs() / table.qv(400);
    assert!(rel < 0.01, "{rel}");
}

#[test]
fn crude_and_girsanov_agree_at_t10() {
    let c = config(2.0, 1.0, 10.0, 500, 0);
    let table = kernel_weight_table(&c.grid().unwrap(), &c.params).unwrap();
    for &u in &[1.0, 2.0, 4.0] {
        let crude = crude_ruin_mc(&config(u, 0.0, 10.0, 500, 1)).unwrap();
        for &a in &[0.5, 1.0, 2.0] {
            let g = girsanov_ruin_mc_with(&config(u, a, 10.0, 500, 2), &table).unwrap();
            assert!(
                z(g.psi_hat, g.std_err, crude.psi_hat, crude.std_err) <= 3.0,
                "u={u} a={a}"
            );
        }
    }
}

#[test]
fn tilt_invariance() {
    let c = config(2.0, 0.0, 20.0, 400, 0);
    let table = kernel_weight_table(&c.grid().unwrap(), &c.params).unwrap();
    let est: Vec<_> = [0.3, 1.2, 3.0]
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            girsanov_ruin_mc_with(&config(2.0, a, 20.0, 400, 50 + i as u64), &table).unwrap()
        })
        .collect();
    for x in &est {
        for y in &est {
            assert!(z(x.psi_hat, x.std_err, y.psi_hat, y.std_err) <= 3.0);
        }
    }
}

#[test]
fn paired_seed_monotonicity() {
    let c = config(1.0, 1.2, 20.0, 400, 0);
    let table = kernel_weight_table(&c.grid().unwrap(), &c.params).unwrap();
    let psi: Vec<f64> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&u| {
            girsanov_ruin_mc_with(&config(u, 1.2, 20.0, 400, 60), &table)
                .unwrap()
                .psi_hat
        })
        .collect();
    assert!(psi[0] > psi[1] && psi[1] > psi[2], "{psi:?}");

    // crude estimate is exactly monotone in u and T on shared paths
    let crude_u: Vec<f64> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&u| {
            crude_ruin_mc(&config(u, 0.0, 20.0, 400, 61))
                .unwrap()
                .psi_hat
        })
        .collect();
    assert!(crude_u.windows(2).all(|w| w[1] <= w[0]));
    // same step, longer horizon: the shorter grid is not a prefix of the
    // longer one's path, so compare through the Girsanov reweighting instead
    let short = crude_ruin_mc(&config(2.0, 0.0, 10.0, 200, 62)).unwrap();
    let long = crude_ruin_mc(&config(2.0, 0.0, 20.0, 400, 62)).unwrap();
    assert!(long.psi_hat + 3.0 * long.std_err >= short.psi_hat);
}

#[test]
fn ultimate_dominates_finite_horizon() {
    let finite = config(2.0, 1.2, 20.0, 400, 70);
    let table_f = kernel_weight_table(&finite.grid().unwrap(), &finite.params).unwrap();
    let f = girsanov_ruin_mc_with(&finite, &table_f).unwrap();
    let ult = RuinConfig {
        horizon: 100.0,
        steps: 2000,
        ultimate: true,
        ..finite
    };
    let table_u = kernel_weight_table(&ult.grid().unwrap(), &ult.params).unwrap();
    let u = ultimate_ruin_mc_with(&ult, &table_u).unwrap();
    assert!(u.psi_hat + 2.0 * (u.std_err.powi(2) + f.std_err.powi(2)).sqrt() >= f.psi_hat);
    let tf = u.truncated_fraction.unwrap();
    assert!((0.0..0.05).contains(&tf), "{tf}");

    let doubled = ultimate_ruin_mc_with(
        &RuinConfig {
            params: ult.params.with_u(4.0),
            ..ult
        },
        &table_u,
    )
    .unwrap();
    assert!(doubled.psi_hat < u.psi_hat);
}

#[test]
fn sensitivity_is_negative() {
    let c = config(2.0, 1.2, 20.0, 400, 80);
    let table = kernel_weight_table(&c.grid().unwrap(), &c.params).unwrap();
    let s = ruin_sensitivity_with(&c, &table).unwrap();
    assert!(s.d_psi_d_theta + 3.0 * s.std_err < 0.0);
    let up = girsanov_ruin_mc_with(
        &RuinConfig {
            params: c.params.with_theta(1.5),
            ..c
        },
        &table,
    )
    .unwrap();
    assert!(up.psi_hat < s.psi_hat);
}

/// Replication study: the spread of the plug-in estimate over repeated
/// observation windows against the delta-method variance.
#[test]
fn plugin_variance_matches_delta_method() {
    let (hurst, sigma, theta) = (0.6, 1.0, 1.2);
    let obs = GridSpec::new(100.0, 1000).unwrap();
    let params = ModelParams::new(hurst, sigma, theta, 2.0).unwrap();
    let mut phi = Vec::new();
    visit_kernel_weights(&obs, hurst, sigma, |k, p, _| {
        if k == 1000 {
            phi = p.to_vec();
        }
    })
    .unwrap();
    let sampler = MixedPathSampler::new(obs, &params, FgnMethod::Circulant).unwrap();
    let fits: Vec<(f64, f64)> = par_map_paths(500, |i| {
        let p = sampler.sample(&RngStream::new(90, i));
        let dy: Vec<f64> = p.dxi.iter().map(|d| theta * obs.step() - d).collect();
        mle_kernel_weights(&dy, &phi, sigma, obs.step()).unwrap()
    });
    let var_theta = fits[0].1;

    let ruin = RuinConfig {
        params,
        horizon: 200.0,
        steps: 2000,
        tilt: 1.2,
        n_paths: 10_000,
        seed: 91,
        ultimate: false,
    };
    let table = kernel_weight_table(&ruin.grid().unwrap(), &ruin.params).unwrap();
    let sample = CrossingSample::simulate(&ruin, &table).unwrap();
    let (d, _) = sample.d_psi(theta);
    // common random numbers: every replicate is reweighted on the same paths
    let psi: Vec<f64> = fits.iter().map(|(t, _)| sample.psi(*t).0).collect();
    let linear: Vec<f64> = fits.iter().map(|(t, _)| d * (t - theta)).collect();
    let delta = d * d * var_theta;
    let eps = 0.05;
    let curv = (sample.d_psi(theta + eps).0 - sample.d_psi(theta - eps).0) / (2.0 * eps);
    let second_order = delta + 0.5 * curv * curv * var_theta * var_theta;
    println!(
        "var(psi) {:.3e}, delta {delta:.3e}, second order {second_order:.3e}, var(linear) {:.3e}",
        variance(&psi),
        variance(&linear)
    );
    // the first-order term reproduces the delta variance
    assert!((variance(&linear) / delta - 1.0).abs() <= 0.25);
    // curvature of psi in theta inflates the plug-in spread above the delta value
    let ratio = variance(&psi) / delta;
    assert!((1.0..=1.5).contains(&ratio), "ratio {ratio:.3}");
    assert!((variance(&psi) / second_order - 1.0).abs() <= 0.25);
}
