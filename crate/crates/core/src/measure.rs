//! Surface measure `σ` of balls on a sphere configuration and volume measure
//! `ν` of balls on its cone, computed analytically and by Monte Carlo.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cap_area, cap_factor_from_offset, Side, SphereConfig, SUPPORT_TOL};
use crate::linalg::{dot, norm};
use crate::quadrature::{integrate_piecewise, QuadratureOptions};
use crate::rng;

pub const SIGMA_ABS_TOL: f64 = 1e-9;
pub const NU_ABS_TOL: f64 = 1e-6;

/// Samples drawn from one random stream before switching to the next.
pub const CHUNK: u64 = 1 << 16;

struct Local {
    a: f64,
    plane: f64,
}

fn local(config: &SphereConfig, i: usize, x: &[f64]) -> Local {
    let c = &config.centers[i];
    let plane = c[3..].iter().zip(&x[3..]).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    Local {
        a: norm(&x[..3]),
        plane,
    }
}

/// `σ(B(x, R) ∩ S_i)` through the cap formula.
pub fn sphere_ball_area(config: &SphereConfig, i: usize, x: &[f64], radius: f64) -> f64 {
    let rho = config.r;
    let full = 4.0 * PI * rho * rho;
    if radius <= 0.0 {
        return 0.0;
    }
    let Local { a, plane } = local(config, i, x);
    if a == 0.0 {
        return sphere_ball_area_axis(config, i, x, radius);
    }
    let offset = (a - rho).abs();
    let near = plane.hypot(offset);
    let far = plane.hypot(a + rho);
    if radius <= near {
        return 0.0;
    }
    if radius >= far {
        return full;
    }
    match cap_factor_from_offset(rho, offset, Side::of(a, rho)) {
        Ok(c) => cap_area(rho, (c * (radius - near) * (radius + near)).sqrt()),
        Err(_) => sphere_ball_area_axis(config, i, x, radius),
    }
}

/// `σ(B(x, R) ∩ S_i)` by integrating along the axis of `S_i` through `P_V(x)`.
///
/// Slicing the sphere perpendicular to that axis at height `h` gives circles
/// of equal area density `2πρ dh`; the ball contains the slice iff
/// `2ah ≥ δ² + a² + ρ² − R²`. When `a = 0` every point is at the same
/// distance and the integral is a step.
pub fn sphere_ball_area_axis(config: &SphereConfig, i: usize, x: &[f64], radius: f64) -> f64 {
    let rho = config.r;
    if radius <= 0.0 {
        return 0.0;
    }
    let Local { a, plane } = local(config, i, x);
    let k = plane * plane + a * a + rho * rho - radius * radius;
    let covered = if a == 0.0 {
        if k <= 0.0 {
            2.0 * rho
        } else {
            0.0
        }
    } else {
        (rho - k / (2.0 * a)).clamp(0.0, 2.0 * rho)
    };
    2.0 * PI * rho * covered
}

pub fn sigma_ball_analytic(config: &SphereConfig, x: &[f64], radius: f64) -> Result<f64> {
    check_query(config, x, radius)?;
    Ok((0..config.len()).map(|i| sphere_ball_area(config, i, x, radius)).sum())
}

pub fn sigma_ball_axis(config: &SphereConfig, x: &[f64], radius: f64) -> Result<f64> {
    check_query(config, x, radius)?;
    Ok((0..config.len()).map(|i| sphere_ball_area_axis(config, i, x, radius)).sum())
}

fn check_query(config: &SphereConfig, x: &[f64], radius: f64) -> Result<()> {
    if x.len() != config.d {
        return Err(Error::Dimension(format!("point has {} coordinates, expected {}", x.len(), config.d)));
    }
    if radius.is_nan() || radius < 0.0 {
        return Err(Error::Precondition(format!("radius {radius} must be non-negative")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

fn count_hits<F>(samples: u64, seed: u64, domain: u64, major: u32, hit: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|k| {
            let n = CHUNK.min(samples - k * CHUNK);
            let mut rng = rng::stream(seed, domain, major, k as u32);
            (0..n).filter(|_| hit(&mut rng)).count() as u64
        })
        .sum()
}

struct Probe {
    norm2: f64,
    along: f64,
}

fn probes(config: &SphereConfig, x: &[f64]) -> Vec<Probe> {
    config
        .centers
        .iter()
        .map(|c| Probe {
            norm2: config.r * config.r + dot(&c[3..], &c[3..]),
            along: dot(&c[3..], &x[3..]),
        })
        .collect()
}

/// Uniform samples on every sphere, `samples` split evenly between spheres.
pub fn sigma_ball_mc(config: &SphereConfig, x: &[f64], radius: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    check_query(config, x, radius)?;
    if samples == 0 {
        return Err(Error::Precondition("samples must be at least 1".into()));
    }
    let n = config.len() as u64;
    let per = samples.div_ceil(n);
    let xv = [x[0], x[1], x[2]];
    let x2 = dot(x, x);
    let r2 = radius * radius;
    let rho = config.r;
    let area = config.sphere_area();
    let mut estimate = 0.0;
    let mut var = 0.0;
    for (i, p) in probes(config, x).iter().enumerate() {
        let hits = count_hits(per, seed, rng::DOMAIN_SIGMA, i as u32, |g| {
            let u: [f64; 3] = UnitSphere.sample(g);
            let inner = rho * (u[0] * xv[0] + u[1] * xv[1] + u[2] * xv[2]) + p.along;
            p.norm2 - 2.0 * inner + x2 <= r2
        });
        let f = hits as f64 / per as f64;
        estimate += area * f;
        var += area * area * f * (1.0 - f) / per as f64;
    }
    Ok(McEstimate {
        estimate,
        stderr: var.sqrt(),
        samples: per * n,
    })
}

fn shell(x: &[f64], r: f64) -> (f64, f64, f64) {
    let lambda = norm(x);
    ((lambda - r).max(0.0), lambda + r, lambda)
}

/// `ν(B(x, r))` by slicing the ball with the spheres `|y| = ρ` and
/// integrating the slice areas `ρ² σ(B(e, R'(ρ)))`, `e = x/|x|`.
pub fn cone_ball_analytic(config: &SphereConfig, x: &[f64], r: f64, opts: &QuadratureOptions) -> Result<f64> {
    check_query(config, x, r)?;
    if r.is_nan() || r <= 0.0 {
        return Err(Error::Precondition(format!("radius {r} must be positive")));
    }
    let total = config.total_area();
    let (lo, hi, lambda) = shell(x, r);
    if lambda == 0.0 {
        return Ok(r.powi(3) / 3.0 * total);
    }
    let e: Vec<f64> = x.iter().map(|v| v / lambda).collect();
    let off = config.distance_to_support(&e);
    if off > SUPPORT_TOL {
        return Err(Error::Precondition(format!("point is {off:e} away from the cone")));
    }

    let slice = |rho: f64| {
        if rho <= 0.0 {
            return 0.0;
        }
        let span = r * r - (rho - lambda).powi(2);
        if span <= 0.0 {
            return 0.0;
        }
        let reach = (span / (rho * lambda)).sqrt();
        let area: f64 = (0..config.len()).map(|i| sphere_ball_area(config, i, &e, reach)).sum();
        rho * rho * area
    };

    let mut breaks = Vec::new();
    for i in 0..config.len() {
        let Local { a, plane } = local(config, i, &e);
        for k in [plane.hypot(a - config.r), plane.hypot(a + config.r)] {
            breaks.extend(slice_transitions(lambda, r, k));
        }
    }
    Ok(integrate_piecewise(slice, lo, hi, &breaks, opts).value)
}

/// Shell radii where `R'(ρ) = K`: roots of `ρ² + λ(K² − 2)ρ + λ² − r² = 0`.
fn slice_transitions(lambda: f64, r: f64, k: f64) -> Vec<f64> {
    let b = lambda * (k * k - 2.0);
    let c = lambda * lambda - r * r;
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = Vec::with_capacity(2);
    if q != 0.0 {
        roots.push(q);
        roots.push(c / q);
    } else {
        roots.push(0.0);
    }
    roots.retain(|v| *v > 0.0 && v.is_finite());
    roots
}

/// Samples `ρ` with density `∝ ρ²` on the shell around `|x|` and a point of
/// `σ`, and counts how often `ρ·w` lands in `B(x, r)`.
pub fn cone_ball_mc(config: &SphereConfig, x: &[f64], r: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    check_query(config, x, r)?;
    if samples == 0 {
        return Err(Error::Precondition("samples must be at least 1".into()));
    }
    let (lo, hi, lambda) = shell(x, r);
    let (lo3, hi3) = (lo.powi(3), hi.powi(3));
    let weight = config.total_area() * (hi3 - lo3) / 3.0;
    let xv = [x[0], x[1], x[2]];
    let probes = probes(config, x);
    let n = probes.len();
    let rho_s = config.r;
    let (x2, r2) = (lambda * lambda, r * r);
    let hits = count_hits(samples, seed, rng::DOMAIN_CONE, 0, |g| {
        let rho = (lo3 + g.random::<f64>() * (hi3 - lo3)).cbrt();
        let p = &probes[g.random_range(0..n)];
        let u: [f64; 3] = UnitSphere.sample(g);
        let inner = rho_s * (u[0] * xv[0] + u[1] * xv[1] + u[2] * xv[2]) + p.along;
        rho * rho * p.norm2 - 2.0 * rho * inner + x2 <= r2
    });
    let f = hits as f64 / samples as f64;
    Ok(McEstimate {
        estimate: weight * f,
        stderr: weight * (f * (1.0 - f) / samples as f64).sqrt(),
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Sigma,
    Nu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub kind: MeasureKind,
    pub trial: usize,
    pub x: Vec<f64>,
    pub radius: f64,
    pub analytic: f64,
    pub mc_estimate: f64,
    pub mc_stderr: f64,
    pub target: f64,
    pub samples: u64,
    pub seed: u64,
    pub abs_tol: f64,
    pub verdict: Verdict,
}

impl MeasureReport {
    #[allow(clippy::too_many_arguments)]
    pub fn judge(kind: MeasureKind, trial: usize, x: Vec<f64>, radius: f64, analytic: f64, mc: McEstimate, target: f64, seed: u64, abs_tol: f64) -> Self {
        let ok = (analytic - target).abs() <= abs_tol && (mc.estimate - target).abs() <= 3.0 * mc.stderr + abs_tol;
        MeasureReport {
            kind,
            trial,
            x,
            radius,
            analytic,
            mc_estimate: mc.estimate,
            mc_stderr: mc.stderr,
            target,
            samples: mc.samples,
            seed,
            abs_tol,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// `φ(R)` for the spherical component of a conical 3-uniform measure.
pub fn sigma_target(radius: f64) -> f64 {
    if radius < 2.0 {
        PI * radius * radius
    } else {
        4.0 * PI
    }
}

pub fn nu_target(r: f64) -> f64 {
    4.0 / 3.0 * PI * r.powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub trials: usize,
    pub samples: u64,
    pub seed: u64,
    pub sigma_abs_tol: f64,
    pub nu_abs_tol: f64,
    pub quadrature: QuadratureOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            trials: 20,
            samples: 1_000_000,
            seed: 42,
            sigma_abs_tol: SIGMA_ABS_TOL,
            nu_abs_tol: NU_ABS_TOL,
            quadrature: QuadratureOptions::default(),
        }
    }
}

/// A random base point for one trial: a point `w` of `σ`, its dilate
/// `x = s·w` with `s ∈ [0.1, 10]`, a cone radius in `(0, 4|x|)` and a
/// sphere-level radius in `(0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub sphere: usize,
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub r: f64,
    pub big_r: f64,
}

pub fn draw_trial(config: &SphereConfig, seed: u64, trial: usize) -> Trial {
    let mut g = rng::stream(seed, rng::DOMAIN_TRIAL, trial as u32, 0);
    let sphere = g.random_range(0..config.len());
    let u: [f64; 3] = UnitSphere.sample(&mut g);
    let w = config.sphere_point(sphere, u);
    let s = g.random_range(0.1..=10.0);
    let x: Vec<f64> = w.iter().map(|v| v * s).collect();
    let lambda = norm(&x);
    let r = loop {
        let v = g.random::<f64>() * 4.0 * lambda;
        if v > 0.0 {
            break v;
        }
    };
    let big_r = 2.0 * (1.0 - g.random::<f64>());
    Trial { sphere, w, x, r, big_r }
}

/// Two reports per trial, `σ` first, in trial order.
pub fn verify_uniformity(config: &SphereConfig, opts: &VerifyOptions) -> Result<Vec<MeasureReport>> {
    if opts.trials == 0 {
        return Err(Error::Precondition("trials must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(2 * opts.trials);
    for t in 0..opts.trials {
        let trial = draw_trial(config, opts.seed, t);
        let sigma_seed = rng::derive_seed(opts.seed, 2 * t as u64);
        let nu_seed = rng::derive_seed(opts.seed, 2 * t as u64 + 1);

        let analytic = sigma_ball_analytic(config, &trial.w, trial.big_r)?;
        let mc = sigma_ball_mc(config, &trial.w, trial.big_r, opts.samples, sigma_seed)?;
        out.push(MeasureReport::judge(
            MeasureKind::Sigma,
            t,
            trial.w.clone(),
            trial.big_r,
            analytic,
            mc,
            sigma_target(trial.big_r),
            sigma_seed,
            opts.sigma_abs_tol,
        ));

        let analytic = cone_ball_analytic(config, &trial.x, trial.r, &opts.quadrature)?;
        let mc = cone_ball_mc(config, &trial.x, trial.r, opts.samples, nu_seed)?;
        out.push(MeasureReport::judge(
            MeasureKind::Nu,
            t,
            trial.x,
            trial.r,
            analytic,
            mc,
            nu_target(trial.r),
            nu_seed,
            opts.nu_abs_tol,
        ));
    }
    Ok(out)
}

pub fn all_pass(reports: &[MeasureReport]) -> bool {
    reports.iter().all(MeasureReport::passed)
}
