//! First-passage times `eta_a(v) = inf{t > 0 : xi_t + a t > v}`: the `L_n`
//! integral, the moment upper bound and Monte Carlo moments.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use log::warn;

use crate::error::{Error, Result};
use crate::mc::par_map_paths;
use crate::model::{check_hurst_open_unit, GridSpec};
use crate::pathgen::{fmt_num, FgnMethod, MixedPath, MixedPathSampler};
use crate::quad::integrate;
use crate::rng::RngStream;
use crate::ruin::first_passage_index;
use crate::stats::{mean, std_error};

pub const LN_REL_TOL: f64 = 1e-6;
const TAIL_DROP: f64 = 60.0;

/// `L_n(u, H, a) = int_0^inf exp(-(u t^{-H/(n-H)} - a t^{(1-H)/(n-H)})^2 / 2) dt`
/// for real `n > H`.
pub fn ln_integral(u: f64, hurst: f64, a: f64, n: f64) -> Result<f64> {
    if a == 0.0 {
        return Err(Error::Divergent("L_n diverges for a = 0".into()));
    }
    if !(a > 0.0) || !(u > 0.0) || !a.is_finite() || !u.is_finite() {
        return Err(Error::domain("L_n needs u > 0 and a > 0"));
    }
    if !(hurst > 0.0 && hurst < n) || !n.is_finite() {
        return Err(Error::domain("L_n needs 0 < H < n"));
    }
    let d = n - hurst;
    let (p, q) = (hurst / d, (1.0 - hurst) / d);
    // log of the integrand after t = e^s, including the Jacobian
    let log_f = |s: f64| {
        let inner = u * (-p * s).exp() - a * (q * s).exp();
        s - 0.5 * inner * inner
    };
    let s0 = d * (u / a).ln();
    let c = u.powf(1.0 - hurst) * a.powf(hurst);
    let step = (d / c.max(1e-3)).clamp(1e-3, 5.0);

    let mut peak = (s0, log_f(s0));
    let mut bounds = [s0, s0];
    for (dir, bound) in [(-1.0, 0), (1.0, 1)] {
        let mut s = s0;
        let mut extent = 0;
        loop {
            s += dir * step;
            let g = log_f(s);
            if g > peak.1 {
                peak = (s, g);
            }
            if g < peak.1 - TAIL_DROP || !g.is_finite() {
                break;
            }
            extent += 1;
            if extent > 100_000 {
                return Err(Error::Quadrature("L_n integrand does not decay".into()));
            }
        }
        bounds[bound] = s;
    }
    let (value, _) = integrate(
        |s| (log_f(s) - peak.1).exp(),
        bounds[0],
        bounds[1],
        &[peak.0],
        LN_REL_TOL * 0.1,
        0.0,
    )?;
    Ok(value * peak.1.exp())
}

/// Large-`u` asymptote `sqrt(2 pi) (n - H) a^{-n} u^{n-1}`.
pub fn ln_asymptote(u: f64, hurst: f64, a: f64, n: f64) -> f64 {
    (2.0 * PI).sqrt() * (n - hurst) * a.powf(-n) * u.powf(n - 1.0)
}

/// Barrier, tilt and moment order for passage diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassageQuery {
    pub v: f64,
    pub a: f64,
    pub order: u32,
    pub hurst: f64,
    pub sigma: f64,
    pub grid: GridSpec,
    pub n_paths: usize,
    pub seed: u64,
}

impl PassageQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.v > 0.0) || !self.v.is_finite() {
            return Err(Error::domain("barrier v must be positive"));
        }
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(Error::domain("tilt a must be positive"));
        }
        if self.order == 0 {
            return Err(Error::domain("moment order must be at least 1"));
        }
        check_hurst_open_unit(self.hurst)?;
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::domain("sigma must be non-negative"));
        }
        Ok(())
    }

    /// `(v/a)^n`.
    pub fn asymptote(&self) -> f64 {
        (self.v / self.a).powi(self.order as i32)
    }
}

/// `H' = (2H + 1) / 4`.
pub fn reduced_hurst(hurst: f64) -> f64 {
    (2.0 * hurst + 1.0) / 4.0
}

/// Upper bound on `E eta_a(v)^n` for unit Brownian scale.
pub fn moment_upper_bound(q: &PassageQuery) -> Result<f64> {
    q.validate()?;
    if q.sigma != 1.0 {
        return Err(Error::domain("moment bound is stated for sigma = 1"));
    }
    let hp = reduced_hurst(q.hurst);
    let n = q.order as f64;
    let (vs, as_) = (q.v / SQRT_2, q.a / SQRT_2);
    let first = q.v * hp / (SQRT_2 * (n - hp)) * ln_integral(vs, hp, as_, n)?;
    let second = (1.0 - hp) * q.a / (SQRT_2 * (n + 1.0 - hp)) * ln_integral(vs, hp, as_, n + 1.0)?;
    Ok((first + second) / (2.0 * PI).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassageMoment {
    pub moment: f64,
    pub std_err: f64,
    pub non_crossing_fraction: f64,
    pub n_paths: usize,
}

/// Monte Carlo moment of the grid crossing time over paths from `source`.
pub fn passage_moment_from<F>(q: &PassageQuery, source: F) -> Result<PassageMoment>
where
    F: Fn(u64) -> MixedPath + Sync,
{
    q.validate()?;
    if q.n_paths == 0 {
        return Err(Error::domain("need at least one path"));
    }
    let times = par_map_paths(q.n_paths, |i| {
        let path = source(i);
        first_passage_index(&path, q.a, q.v).map(|k| path.grid.time(k).powi(q.order as i32))
    });
    let crossed: Vec<f64> = times.iter().flatten().copied().collect();
    let non_crossing_fraction = 1.0 - crossed.len() as f64 / q.n_paths as f64;
    if non_crossing_fraction > 0.01 {
        warn!(
            "{:.2}% of paths did not cross v = {} before T = {}",
            100.0 * non_crossing_fraction,
            q.v,
            q.grid.horizon()
        );
    }
    if crossed.is_empty() {
        return Err(Error::Divergent("no path crossed the barrier".into()));
    }
    Ok(PassageMoment {
        moment: mean(&crossed),
        std_err: if crossed.len() > 1 {
            std_error(&crossed)
        } else {
            f64::NAN
        },
        non_crossing_fraction,
        n_paths: q.n_paths,
    })
}

pub fn passage_moment_mc(q: &PassageQuery) -> Result<PassageMoment> {
    q.validate()?;
    let sampler = MixedPathSampler::with_scales(q.grid, q.hurst, q.sigma, FgnMethod::Circulant)?;
    passage_moment_from(q, |i| sampler.sample(&RngStream::new(q.seed, i)))
}

/// Grid with horizon `multiple * v / a` and step close to `step`.
pub fn passage_grid(v: f64, a: f64, multiple: f64, step: f64) -> Result<GridSpec> {
    let horizon = multiple * v / a;
    GridSpec::new(horizon, (horizon / step).ceil().max(1.0) as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassageRow {
    pub v: f64,
    pub a: f64,
    pub order: u32,
    pub moment: f64,
    pub std_err: f64,
    /// Only defined for unit Brownian scale.
    pub bound: Option<f64>,
    pub ratio_to_asymptote: f64,
}

pub fn passage_row(q: &PassageQuery) -> Result<PassageRow> {
    let m = passage_moment_mc(q)?;
    let bound = if q.sigma == 1.0 {
        Some(moment_upper_bound(q)?)
    } else {
        None
    };
    Ok(PassageRow {
        v: q.v,
        a: q.a,
        order: q.order,
        moment: m.moment,
        std_err: m.std_err,
        bound,
        ratio_to_asymptote: m.moment / q.asymptote(),
    })
}

pub fn write_passage_csv<W: Write>(mut out: W, rows: &[PassageRow]) -> std::io::Result<()> {
    writeln!(out, "v,a,n,moment,std_err,bound,ratio_to_asymptote")?;
    for r in rows {
        let bound = r.bound.map(fmt_num).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_num(r.v),
            fmt_num(r.a),
            r.order,
            fmt_num(r.moment),
            fmt_num(r.std_err),
            bound,
            fmt_num(r.ratio_to_asymptote)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tilt_diverges() {
        assert!(matches!(
            ln_integral(1.0, 0.6, 0.0, 2.0),
            Err(Error::Divergent(_))
        ));
        assert!(ln_integral(-1.0, 0.6, 1.0, 2.0).is_err());
        assert!(ln_integral(1.0, 2.5, 1.0, 2.0).is_err());
    }

    #[test]
    fn scaling_identity_instance() {
        let (n, h, u, a): (f64, f64, f64, f64) = (2.0, 0.6, 4.0, 1.0);
        let c = u.powf(1.0 - h) * a.powf(h);
        let lhs = ln_integral(u, h, a, n).unwrap();
        let rhs = (u / a).powf(n - h) * ln_integral(c, h, c, n).unwrap();
        assert!(((lhs - rhs) / lhs).abs() < 1e-5, "{lhs} vs {rhs}");
    }

    #[test]
    fn asymptote_ratio_at_large_u() {
        let r = ln_integral(50.0, 0.6, 1.0, 2.0).unwrap() / ln_asymptote(50.0, 0.6, 1.0, 2.0);
        assert!((0.9..=1.1).contains(&r), "{r}");
    }

    #[test]
    fn closed_form_at_half() {
        // H = 1/2, n = 1: int exp(-(u/t - a t)^2 / 2) dt = sqrt(pi/2) / a for any u
        for &(u, a) in &[(2.0, 1.5), (0.3, 4.0), (20.0, 0.5)] {
            let v = ln_integral(u, 0.5, a, 1.0).unwrap();
            let exact = (PI / 2.0).sqrt() / a;
            assert!(
                ((v - exact) / exact).abs() < 1e-6,
                "u={u} a={a}: {v} vs {exact}"
            );
        }
    }

    fn query(v: f64, order: u32) -> PassageQuery {
        PassageQuery {
            v,
            a: 2.0,
            order,
            hurst: 0.7,
            sigma: 1.0,
            grid: passage_grid(v, 2.0, 3.0, 0.01).unwrap(),
            n_paths: 10,
            seed: 3,
        }
    }

    #[test]
    fn bound_dominates_mean() {
        let b = moment_upper_bound(&query(10.0, 1)).unwrap();
        assert!(b >= 5.0);
        let b2 = moment_upper_bound(&query(10.0, 2)).unwrap();
        assert!(b2 >= 25.0);
        let r = moment_upper_bound(&query(100.0, 1)).unwrap() / 50.0;
        assert!(r > 1.0 && r < 1.05, "{r}");
    }

    #[test]
    fn bound_rejects_other_sigma() {
        let q = PassageQuery {
            sigma: 2.0,
            ..query(10.0, 1)
        };
        assert!(moment_upper_bound(&q).is_err());
    }

    #[test]
    fn zero_noise_crosses_at_v_over_a() {
        for order in 1..=3 {
            let q = query(10.0, order);
            let m = passage_moment_from(&q, |_| MixedPath::zero(q.grid)).unwrap();
            let lo = 5.0_f64.powi(order as i32);
            let hi = (5.0 + q.grid.step()).powi(order as i32);
            assert!(
                m.moment > lo - 1e-9 && m.moment <= hi + 1e-9,
                "{}",
                m.moment
            );
            assert_eq!(m.non_crossing_fraction, 0.0);
        }
    }

    #[test]
    fn csv_layout() {
        let rows = [PassageRow {
            v: 10.0,
            a: 2.0,
            order: 1,
            moment: 5.1,
            std_err: 0.1,
            bound: None,
            ratio_to_asymptote: 1.02,
        }];
        let mut out = Vec::new();
        write_passage_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("v,a,n,moment,std_err,bound,ratio_to_asymptote")
        );
        assert_eq!(lines.next().unwrap().split(',').nth(5), Some(""));
    }
}
