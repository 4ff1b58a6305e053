//! Fundamental-martingale kernel.
//!
//! On a grid with step `h` the martingale `M_{t_k} = (1/sigma) sum_i phi^(k)_i dxi_i`
//! uses the weights solving `R_k phi^(k) = sigma h 1`, where `R_k` is the
//! increment covariance. Its quadratic variation is
//! `<M>_{t_k} = (h / sigma) sum_i phi^(k)_i`. The weights approximate the
//! continuous kernel `g(s, t_k)` at subinterval midpoints.
//!
//! [`g_nystrom`] solves the continuous equation
//! `sigma g(s) + (1/sigma) H(2H-1) int_0^t g(r) |r-s|^{2H-2} dr = 1`
//! by product integration and serves as an independent check of the weights.

use std::io::Write;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gausslin::{levinson_visit, ToeplitzCovariance, TriangularTable};
use crate::model::{GridSpec, ModelParams};
use crate::pathgen::fmt_num;

/// Slack on the `phi <= 1/sigma` sanity bound.
const PHI_BOUND_SLACK: f64 = 1e-6;

/// Discrete kernel weights `phi^(k)` and quadratic variations for every
/// horizon index `k = 1..n`.
#[derive(Debug, Clone)]
pub struct KernelWeightTable {
    pub grid: GridSpec,
    pub sigma: f64,
    pub hurst: f64,
    weights: TriangularTable,
    qv: Vec<f64>,
}

impl KernelWeightTable {
    /// Number of horizons.
    pub fn len(&self) -> usize {
        self.qv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qv.is_empty()
    }

    /// `phi^(k)`, `1 <= k <= n`.
    pub fn phi(&self, k: usize) -> &[f64] {
        self.weights.row(k)
    }

    /// `<M>_{t_k}`, `1 <= k <= n`.
    pub fn qv(&self, k: usize) -> f64 {
        self.qv[k - 1]
    }

    pub fn qv_all(&self) -> &[f64] {
        &self.qv
    }

    /// `M_{t_k}` for the first `k` increments of `dxi`.
    pub fn martingale_at(&self, k: usize, dxi: &[f64]) -> Result<f64> {
        if dxi.len() < k {
            return Err(Error::LengthMismatch {
                expected: k,
                got: dxi.len(),
            });
        }
        martingale_value(self.phi(k), &dxi[..k], self.sigma)
    }

    /// Writes `k,i,phi` triplets.
    pub fn write_weights_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,i,phi")?;
        for k in 1..=self.len() {
            for (i, phi) in self.phi(k).iter().enumerate() {
                writeln!(out, "{},{},{}", k, i + 1, fmt_num(*phi))?;
            }
        }
        Ok(())
    }

    /// Writes `k,qv` rows.
    pub fn write_qv_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,qv")?;
        for (k, qv) in self.qv.iter().enumerate() {
            writeln!(out, "{},{}", k + 1, fmt_num(*qv))?;
        }
        Ok(())
    }
}

/// Streams `(k, phi^(k), qv_k)` for every horizon without storing the table.
pub fn visit_kernel_weights<F>(grid: &GridSpec, hurst: f64, sigma: f64, mut visit: F) -> Result<()>
where
    F: FnMut(usize, &[f64], f64),
{
    let h = grid.step();
    let toeplitz = ToeplitzCovariance::mixed(grid, hurst, sigma)?;
    levinson_visit(&toeplitz, sigma * h, |k, phi| {
        let qv = h / sigma * phi.iter().sum::<f64>();
        visit(k, phi, qv);
    })
}

pub fn kernel_weight_table(grid: &GridSpec, params: &ModelParams) -> Result<KernelWeightTable> {
    params.validate()?;
    let n = grid.steps();
    let sigma = params.sigma;
    let mut weights = TriangularTable::with_capacity(n);
    let mut qv = Vec::with_capacity(n);
    let mut bound_violations = 0usize;
    visit_kernel_weights(grid, params.hurst, sigma, |_, phi, q| {
        bound_violations += phi
            .iter()
            .filter(|&&p| !(p > 0.0 && p < 1.0 / sigma + PHI_BOUND_SLACK))
            .count();
        weights.push_row(phi);
        qv.push(q);
    })?;
    if bound_violations > 0 {
        warn!("{bound_violations} kernel weights fall outside (0, 1/sigma]");
    }
    if let Some(k) = qv.windows(2).position(|w| w[1] <= w[0]) {
        warn!("quadratic variation not increasing at horizon {}", k + 2);
    }
    Ok(KernelWeightTable {
        grid: *grid,
        sigma,
        hurst: params.hurst,
        weights,
        qv,
    })
}

/// `M = (1/sigma) sum_i phi_i dxi_i`.
pub fn martingale_value(phi: &[f64], dxi: &[f64], sigma: f64) -> Result<f64> {
    if phi.len() != dxi.len() {
        return Err(Error::LengthMismatch {
            expected: phi.len(),
            got: dxi.len(),
        });
    }
    Ok(phi.iter().zip(dxi).map(|(p, d)| p * d).sum::<f64>() / sigma)
}

/// Continuous kernel `g(., t)` on uniform nodes, piecewise linear in between.
#[derive(Debug, Clone)]
pub struct NystromKernel {
    pub horizon: f64,
    pub sigma: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    /// Max-norm residual of the discrete system at the solution.
    pub residual: f64,
}

impl NystromKernel {
    /// Linear interpolation of `g(s, t)` for `s` in `[0, t]`.
    pub fn eval(&self, s: f64) -> f64 {
        let m = self.nodes.len();
        let dx = self.horizon / (m - 1) as f64;
        let pos = (s / dx).clamp(0.0, (m - 1) as f64);
        let j = (pos.floor() as usize).min(m - 2);
        let w = pos - j as f64;
        self.values[j] * (1.0 - w) + self.values[j + 1] * w
    }

    /// `int_0^t g(s, t) ds` (exact for the piecewise-linear representation).
    pub fn integral(&self) -> f64 {
        let dx = self.horizon / (self.nodes.len() - 1) as f64;
        self.values
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]) * dx)
            .sum()
    }

    /// `<M>_t = (1/sigma) int_0^t g(s, t) ds`.
    pub fn quadratic_variation(&self) -> f64 {
        self.integral() / self.sigma
    }
}

/// Solves the kernel equation on `m` uniform nodes of `[0, t]` by product
/// integration: `g` is piecewise linear and `|r - s|^{2H-2}` is integrated
/// exactly against each hat function.
pub fn g_nystrom(hurst: f64, sigma: f64, horizon: f64, nodes: usize) -> Result<NystromKernel> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::domain(format!(
            "hurst must lie in (1/2, 1), got {hurst}"
        )));
    }
    if !(sigma > 0.0 && horizon > 0.0) {
        return Err(Error::domain("sigma and horizon must be positive"));
    }
    if nodes < 2 {
        return Err(Error::domain("need at least two nodes"));
    }
    let m = nodes;
    let dx = horizon / (m - 1) as f64;
    let s: Vec<f64> = (0..m).map(|j| j as f64 * dx).collect();
    let alpha = 2.0 * hurst - 1.0;
    let coef = hurst * (2.0 * hurst - 1.0) / sigma;

    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        a[(i, i)] += sigma;
        for j in 0..m - 1 {
            let (left, right) = (s[j], s[j + 1]);
            let (p, q, sign) = if left >= s[i] {
                (left - s[i], right - s[i], 1.0)
            } else {
                (s[i] - right, s[i] - left, -1.0)
            };
            // int |r-s|^{alpha-1} and int (r-s)|r-s|^{alpha-1} over the cell
            let i0 = (q.powf(alpha) - p.powf(alpha)) / alpha;
            let i1 = sign * (q.powf(alpha + 1.0) - p.powf(alpha + 1.0)) / (alpha + 1.0);
            let upper = (i0 * (s[i] - left) + i1) / dx;
            a[(i, j)] += coef * (i0 - upper);
            a[(i, j + 1)] += coef * upper;
        }
    }
    let ones = DVector::from_element(m, 1.0);
    let g = a
        .clone()
        .lu()
        .solve(&ones)
        .ok_or_else(|| Error::Singular("Nystrom system".into()))?;
    let residual = (&a * &g - &ones).amax();
    if !(residual <= 1e-8) {
        return Err(Error::Singular(format!("Nystrom residual {residual:e}")));
    }
    let values = g.as_slice().to_vec();
    if values
        .iter()
        .any(|&v| !(v > 0.0 && v <= 1.0 / sigma + PHI_BOUND_SLACK))
    {
        warn!("Nystrom kernel leaves (0, 1/sigma] for H={hurst}, sigma={sigma}, t={horizon}");
    }
    Ok(NystromKernel {
        horizon,
        sigma,
        nodes: s,
        values,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(hurst: f64, sigma: f64) -> ModelParams {
        ModelParams::new(hurst, sigma, 0.0, 1.0).unwrap()
    }

    #[test]
    fn single_step_weights() {
        let t = kernel_weight_table(&GridSpec::new(1.0, 1).unwrap(), &params(0.75, 1.0)).unwrap();
        assert!((t.phi(1)[0] - 0.5).abs() < 1e-15);
        assert!((t.qv(1) - 0.5).abs() < 1e-15);

        let h = 1e-4;
        let t = kernel_weight_table(&GridSpec::new(h, 1).unwrap(), &params(0.75, 1.0)).unwrap();
        let expected = h / (h + h.powf(1.5));
        assert!((t.phi(1)[0] - expected).abs() < 1e-15);
        assert!((t.phi(1)[0] - 0.99).abs() < 1e-3);
    }

    #[test]
    fn table_invariants() {
        let grid = GridSpec::new(3.0, 150).unwrap();
        let p = params(0.7, 0.8);
        let t = kernel_weight_table(&grid, &p).unwrap();
        let toeplitz = ToeplitzCovariance::mixed(&grid, 0.7, 0.8).unwrap();
        let b = p.sigma * grid.step();
        for k in [1, 2, 17, 150] {
            let phi = t.phi(k);
            assert_eq!(phi.len(), k);
            for r in toeplitz.mul_leading(phi) {
                assert!((r - b).abs() < 1e-8 * b);
            }
            assert!(phi.iter().all(|&v| v > 0.0 && v < 1.0 / p.sigma + 1e-6));
        }
        assert!(t.qv_all().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn qv_equals_variance_of_m() {
        // (h/sigma) sum phi against phi^T R phi / sigma^2 computed densely
        let grid = GridSpec::new(2.0, 60).unwrap();
        let t = kernel_weight_table(&grid, &params(0.8, 1.5)).unwrap();
        let r = ToeplitzCovariance::mixed(&grid, 0.8, 1.5).unwrap();
        for k in [1, 30, 60] {
            let phi = t.phi(k);
            let rphi = r.mul_leading(phi);
            let var: f64 = phi.iter().zip(&rphi).map(|(a, b)| a * b).sum::<f64>() / (1.5 * 1.5);
            assert!((var - t.qv(k)).abs() <= 1e-12 * t.qv(k));
        }
    }

    #[test]
    fn martingale_value_basics() {
        assert_eq!(
            martingale_value(&[0.3, 0.2], &[0.0, 0.0], 1.0).unwrap(),
            0.0
        );
        assert_eq!(martingale_value(&[0.5], &[2.0], 1.0).unwrap(), 1.0);
        assert_eq!(martingale_value(&[0.5], &[2.0], 2.0).unwrap(), 0.5);
        assert!(matches!(
            martingale_value(&[0.5], &[2.0, 1.0], 1.0),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn nystrom_near_zero_horizon() {
        for &(hu, s) in &[(0.6, 1.0), (0.9, 0.5), (0.75, 2.0)] {
            // the correction decays like t^{2H-1}, so t must be tiny for H near 1/2
            let g = g_nystrom(hu, s, 1e-25, 20).unwrap();
            assert!((g.eval(0.0) - 1.0 / s).abs() < 1e-3 / s, "H={hu}");
        }
    }

    #[test]
    fn nystrom_solution_properties() {
        let g = g_nystrom(0.7, 1.0, 1.0, 100).unwrap();
        assert!(g.residual <= 1e-8);
        assert!(g.values.iter().all(|&v| v > 0.0 && v <= 1.0));
        // symmetric about t/2
        let m = g.values.len();
        for j in 0..m {
            assert!((g.values[j] - g.values[m - 1 - j]).abs() < 1e-10);
        }
    }

    #[test]
    fn nystrom_self_convergence() {
        let coarse = g_nystrom(0.7, 1.0, 1.0, 100).unwrap();
        let fine = g_nystrom(0.7, 1.0, 1.0, 200).unwrap();
        let worst = coarse
            .nodes
            .iter()
            .zip(&coarse.values)
            .map(|(&s, &v)| (fine.eval(s) - v).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-3, "node-wise difference {worst}");
    }

    #[test]
    fn nystrom_rejects_bad_input() {
        assert!(g_nystrom(0.5, 1.0, 1.0, 10).is_err());
        assert!(g_nystrom(0.7, 1.0, 1.0, 1).is_err());
        assert!(g_nystrom(0.7, 0.0, 1.0, 10).is_err());
    }

    #[test]
    fn kernel_csv_layout() {
        let t = kernel_weight_table(&GridSpec::new(1.0, 2).unwrap(), &params(0.75, 1.0)).unwrap();
        let mut w = Vec::new();
        t.write_weights_csv(&mut w).unwrap();
        let w = String::from_utf8(w).unwrap();
        assert_eq!(w.lines().count(), 1 + 3);
        assert!(w.starts_with("k,i,phi\n1,1,"));
        let mut q = Vec::new();
        t.write_qv_csv(&mut q).unwrap();
        assert_eq!(String::from_utf8(q).unwrap().lines().count(), 3);
    }
}
