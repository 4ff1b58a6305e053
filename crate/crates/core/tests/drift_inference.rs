use mfbm_ruin::drift::{
    asymptotic_variance_constant, mle_discrete, normalized_stat, variance_rate_scan, LevelGls,
};
use mfbm_ruin::gausslin::{spd_solve, ToeplitzCovariance};
use mfbm_ruin::kernel::{kernel_weight_table, visit_kernel_weights};
use mfbm_ruin::mc::par_map_paths;
use mfbm_ruin::pathgen::{FgnMethod, MixedPathSampler};
use mfbm_ruin::stats::{mean, std_dev, variance};
use mfbm_ruin::{GridSpec, ModelParams, RngStream};

fn replicate(grid: GridSpec, params: ModelParams, reps: usize, seed: u64) -> Vec<f64> {
    let gls = LevelGls::new(&grid, params.hurst, params.sigma).unwrap();
    let sampler = MixedPathSampler::new(grid, &params, FgnMethod::Circulant).unwrap();
    let times = grid.times();
    par_map_paths(reps, |i| {
        let xi = sampler.sample(&RngStream::new(seed, i)).xi_levels();
        let y: Vec<f64> = times
            .iter()
            .zip(&xi[1..])
            .map(|(t, x)| params.theta * t - x)
            .collect();
        gls.estimate(&y).unwrap().value
    })
}

#[test]
fn unbiased_with_exact_variance() {
    let grid = GridSpec::with_step(0.25, 64).unwrap();
    let params = ModelParams::new(0.7, 1.0, 1.5, 0.0).unwrap();
    let est = replicate(grid, params, 5000, 31);
    let (m, sd) = (mean(&est), std_dev(&est));
    assert!((m - 1.5).abs() <= 3.0 * sd / 5000f64.sqrt(), "mean {m}");
    let theory = LevelGls::new(&grid, 0.7, 1.0).unwrap().variance();
    let ratio = variance(&est) / theory;
    assert!((ratio - 1.0).abs() <= 0.1, "variance ratio {ratio}");
}

#[test]
fn discrete_variance_equals_increment_form() {
    let grid = GridSpec::with_step(0.25, 4).unwrap();
    let v = LevelGls::new(&grid, 0.6, 0.5).unwrap().variance();
    let r = ToeplitzCovariance::mixed(&grid, 0.6, 0.5)
        .unwrap()
        .to_dense();
    let x = spd_solve(&r, &[1.0; 4]).unwrap();
    let alt = 1.0 / (0.0625 * x.iter().sum::<f64>());
    assert!((v - alt).abs() <= 1e-10 * v);
}

#[test]
fn asymptotic_constant_values() {
    assert!((asymptotic_variance_constant(0.5).unwrap() - 1.0).abs() < 1e-12);
    assert!(asymptotic_variance_constant(1.0).is_err());
}

#[test]
fn scaled_kernel_variance_decreases_toward_lambda() {
    for &hurst in &[0.7, 0.75] {
        let grid = GridSpec::with_step(1.0, 2000).unwrap();
        let mut lhs = Vec::new();
        visit_kernel_weights(&grid, hurst, 1.0, |k, phi, _| {
            if matches!(k, 250 | 500 | 1000 | 2000) {
                lhs.push((k as f64).powf(2.0 - 2.0 * hurst) / phi.iter().sum::<f64>());
            }
        })
        .unwrap();
        let lambda = asymptotic_variance_constant(hurst).unwrap();
        assert!(lhs.windows(2).all(|w| w[1] < w[0]), "{lhs:?}");
        assert!(lhs.iter().all(|&v| v > lambda));
    }
    // the H = 0.75 column converges faster
    let grid = GridSpec::with_step(1.0, 2000).unwrap();
    let table =
        kernel_weight_table(&grid, &ModelParams::new(0.75, 1.0, 0.0, 0.0).unwrap()).unwrap();
    let v = 2000f64.powf(0.5) / table.phi(2000).iter().sum::<f64>();
    assert!((v - 1.0073).abs() < 5e-4, "{v}");
}

#[test]
fn brownian_rate_at_half() {
    let scan = variance_rate_scan(0.5, 1.0, 1.0, &[32, 64, 128, 256, 512]).unwrap();
    assert!((scan.slope + 1.0).abs() <= 0.15, "{}", scan.slope);
    assert!(variance_rate_scan(0.6, 1.0, 1.0, &[64, 32]).is_err());
}

#[test]
fn noiseless_paths_give_zero_statistic() {
    let grid = GridSpec::with_step(0.1, 128).unwrap();
    let y: Vec<f64> = grid.times().iter().map(|t| t * 1.0).collect();
    let e = mle_discrete(&y, &grid, 0.618, 0.25).unwrap();
    assert!(normalized_stat(e.value, 1.0, e.variance).unwrap().abs() < 1e-8);
}

#[test]
fn finer_grid_keeps_kernel_estimator_stable() {
    // the quasi-continuous variance converges as h -> 0 at fixed horizon
    let var_at = |n: usize| {
        let grid = GridSpec::new(10.0, n).unwrap();
        let table =
            kernel_weight_table(&grid, &ModelParams::new(0.7, 1.0, 0.0, 0.0).unwrap()).unwrap();
        1.0 / (grid.step() * table.phi(n).iter().sum::<f64>())
    };
    let (a, b, c) = (var_at(250), var_at(500), var_at(1000));
    assert!((b - c).abs() < (a - b).abs() + 1e-12);
    assert!((b - c).abs() / c < 1e-2);
}
