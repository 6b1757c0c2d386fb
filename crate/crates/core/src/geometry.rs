//! Unions of equal-radius 2-spheres sharing the 3-plane `V` spanned by the
//! first three coordinates, and the pointwise geometry used by the measures.

use std::f64::consts::PI;

use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::embedding::CenterSet;
use crate::error::{Error, Result};
use crate::linalg::{dist, norm};
use crate::rng;

/// Tolerance for "lies on the support" and for matching layer radii.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Sphere points sampled per sphere when a config is built.
pub const CHECK_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereConfig {
    pub d: usize,
    pub r: f64,
    /// Full `d`-vectors; the first three coordinates are zero.
    pub centers: Vec<Vec<f64>>,
}

impl SphereConfig {
    /// Checks shapes only: every center has `d ≥ 3` coordinates and lies in `V⊥`.
    pub fn new(d: usize, r: f64, centers: Vec<Vec<f64>>) -> Result<Self> {
        if d < 3 {
            return Err(Error::Dimension(format!("ambient dimension {d} < 3")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidInput(format!("sphere radius {r} must be positive")));
        }
        if centers.is_empty() {
            return Err(Error::InvalidInput("no spheres".into()));
        }
        for (i, c) in centers.iter().enumerate() {
            if c.len() != d {
                return Err(Error::Dimension(format!("center {} has {} coordinates, expected {d}", i + 1, c.len())));
            }
            if c[..3].iter().any(|&v| v != 0.0) {
                return Err(Error::InvalidInput(format!("center {} is not orthogonal to V", i + 1)));
            }
        }
        Ok(SphereConfig { d, r, centers })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn sphere_area(&self) -> f64 {
        4.0 * PI * self.r * self.r
    }

    pub fn total_area(&self) -> f64 {
        self.sphere_area() * self.len() as f64
    }

    /// The point of sphere `i` in direction `u` (a unit 3-vector).
    pub fn sphere_point(&self, i: usize, u: [f64; 3]) -> Vec<f64> {
        let mut p = self.centers[i].clone();
        for k in 0..3 {
            p[k] = self.r * u[k];
        }
        p
    }

    /// Euclidean distance from `z` to sphere `i`.
    pub fn distance_to_sphere(&self, i: usize, z: &[f64]) -> f64 {
        let a = norm(&z[..3]);
        let delta = plane_distance(&self.centers[i], z);
        delta.hypot(a - self.r)
    }

    pub fn distance_to_support(&self, z: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| self.distance_to_sphere(i, z))
            .fold(f64::INFINITY, f64::min)
    }

    /// The sphere closest to `z` and the distance to it.
    pub fn home_sphere(&self, z: &[f64]) -> (usize, f64) {
        (0..self.len())
            .map(|i| (i, self.distance_to_sphere(i, z)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    fn check_point(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.d {
            return Err(Error::Dimension(format!("point has {} coordinates, expected {}", z.len(), self.d)));
        }
        Ok(())
    }
}

fn plane_distance(center: &[f64], z: &[f64]) -> f64 {
    dist(&center[3..], &z[3..])
}

/// Lifts a center set to the sphere configuration `S_i = (r·S², ξ_i)`.
pub fn build_config(centers: &CenterSet) -> Result<SphereConfig> {
    let (r, t) = (centers.r, centers.t);
    let lifted: Vec<Vec<f64>> = centers
        .points
        .iter()
        .map(|xi| [0.0, 0.0, 0.0].iter().chain(xi).copied().collect())
        .collect();
    for (i, xi) in centers.points.iter().enumerate() {
        if xi.len() != centers.q {
            return Err(Error::Dimension(format!("center {} has {} coordinates, expected {}", i + 1, xi.len(), centers.q)));
        }
        let dev = (norm(xi) - t).abs();
        if dev > SUPPORT_TOL {
            return Err(Error::InvalidInput(format!(
                "center {} has norm {} instead of {t} (deviation {dev:e})",
                i + 1,
                norm(xi)
            )));
        }
    }
    let config = SphereConfig::new(centers.q + 3, r, lifted)?;

    let mut sampler = rng::stream(0, rng::DOMAIN_CHECK, 0, 0);
    for i in 0..config.len() {
        for _ in 0..CHECK_SAMPLES {
            let u: [f64; 3] = UnitSphere.sample(&mut sampler);
            let dev = (norm(&config.sphere_point(i, u)) - 1.0).abs();
            if dev > SUPPORT_TOL {
                return Err(Error::InvalidInput(format!("sphere {} leaves the unit sphere (deviation {dev:e})", i + 1)));
            }
        }
    }
    let min_gap = min_center_distance(&config);
    if min_gap < 2.0 * r - SUPPORT_TOL {
        return Err(Error::InvalidInput(format!("spheres overlap: closest centers {min_gap} < 2r = {}", 2.0 * r)));
    }
    Ok(config)
}

pub fn min_center_distance(config: &SphereConfig) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..config.len() {
        for j in i + 1..config.len() {
            best = best.min(dist(&config.centers[i], &config.centers[j]));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearFar {
    pub nearest: Vec<f64>,
    pub farthest: Vec<f64>,
    pub near: f64,
    pub far: f64,
    pub plane: f64,
}

/// Closest and farthest points of sphere `i` from `z`, their distances, and
/// the distance `δ` from `z` to the affine plane `V + c_i`.
pub fn nearest_farthest(config: &SphereConfig, i: usize, z: &[f64]) -> Result<NearFar> {
    config.check_point(z)?;
    let a = norm(&z[..3]);
    if a == 0.0 {
        return Err(Error::DegenerateProjection);
    }
    let c = &config.centers[i];
    let plane = plane_distance(c, z);
    let mut nearest = c.clone();
    let mut farthest = c.clone();
    for k in 0..3 {
        nearest[k] = config.r * z[k] / a;
        farthest[k] = -nearest[k];
    }
    Ok(NearFar {
        nearest,
        farthest,
        near: plane.hypot(a - config.r),
        far: plane.hypot(a + config.r),
        plane,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Inside,
    Outside,
}

impl Side {
    /// `a` is `|P_V(z)|`, the distance of the in-plane projection from the
    /// sphere's center; ties fall on the branch where both formulas agree.
    pub fn of(a: f64, rho: f64) -> Side {
        if a < rho {
            Side::Inside
        } else {
            Side::Outside
        }
    }
}

/// Ratio `c = ρ / (ρ ± √(D² − δ²))`, with `+` outside and `−` inside.
pub fn cap_factor(rho: f64, near: f64, plane: f64, side: Side) -> Result<f64> {
    cap_factor_from_offset(rho, (near * near - plane * plane).max(0.0).sqrt(), side)
}

/// Same as [`cap_factor`] with `s = √(D² − δ²) = ||P_V(z)| − ρ|` given directly,
/// which avoids the cancellation in `D² − δ²`.
pub fn cap_factor_from_offset(rho: f64, s: f64, side: Side) -> Result<f64> {
    let denom = match side {
        Side::Outside => rho + s,
        Side::Inside => rho - s,
    };
    if denom <= 0.0 {
        return Err(Error::Geometry(format!("cap denominator {denom} is not positive")));
    }
    Ok(rho / denom)
}

/// Chord radius `x` of the cap `B(z, R) ∩ S` measured from the nearest point
/// of `S`. `None` when the ball misses the sphere.
pub fn cap_radius(rho: f64, near: f64, plane: f64, radius: f64, side: Side) -> Result<Option<f64>> {
    if radius <= near {
        return Ok(None);
    }
    let c = cap_factor(rho, near, plane, side)?;
    Ok(Some((c * (radius * radius - near * near)).sqrt()))
}

/// Area of a cap of chord radius `x` on a sphere of radius `ρ`.
pub fn cap_area(rho: f64, x: f64) -> f64 {
    PI * x.min(2.0 * rho).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SphereView {
    #[serde(rename = "D")]
    pub near: f64,
    #[serde(rename = "D_bar")]
    pub far: f64,
    pub delta: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerStructure {
    pub base_point: Vec<f64>,
    /// 0-based index of the sphere containing the base point.
    pub home: usize,
    /// `R_1, R_2, …`; `radii[i - 1]` is `R_i`.
    pub radii: Vec<f64>,
    /// `C^0, C^1, …` as 0-based sphere indices.
    pub layers: Vec<Vec<usize>>,
    pub spheres: Vec<SphereView>,
    /// `m(z)`, or `None` when the induction stalls before reaching `R = 2`.
    pub depth: Option<usize>,
    /// `Σ_{C^i} c_S − 1` for each computed layer below the depth.
    pub cs_residuals: Vec<f64>,
    /// Completed area minus `Σ_{C^i} c_S D_S²` for each computed layer.
    pub csds_residuals: Vec<f64>,
    pub unassigned: Vec<usize>,
}

impl LayerStructure {
    pub fn max_residual(&self) -> f64 {
        self.cs_residuals
            .iter()
            .chain(&self.csds_residuals)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_complete(&self) -> bool {
        self.depth.is_some() && self.unassigned.is_empty()
    }
}

/// Runs the layer induction from a base point `z` on the support.
pub fn layer_structure(config: &SphereConfig, z: &[f64]) -> Result<LayerStructure> {
    config.check_point(z)?;
    let (home, gap) = config.home_sphere(z);
    if gap > SUPPORT_TOL {
        return Err(Error::Precondition(format!("base point is {gap:e} away from the support")));
    }
    let a = norm(&z[..3]);
    let rho = config.r;
    let side = Side::of(a, rho);
    let spheres = (0..config.len())
        .map(|i| {
            let nf = nearest_farthest(config, i, z)?;
            let c = cap_factor_from_offset(rho, (a - rho).abs(), side)?;
            Ok(SphereView {
                near: nf.near,
                far: nf.far,
                delta: nf.plane,
                c,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = config.len();
    let mut radii = Vec::new();
    let mut layers = vec![vec![home]];
    let mut assigned = vec![false; n];
    assigned[home] = true;
    let mut depth = None;
    let mut current_radius = 2.0 * rho;
    for step in 1..=n + 1 {
        let r_i = if step == 1 {
            current_radius
        } else {
            match layers.last().unwrap().iter().map(|&s| spheres[s].far).reduce(f64::min) {
                Some(v) => v,
                None => break,
            }
        };
        current_radius = r_i;
        radii.push(r_i);
        let prev = layers.last().unwrap();
        let mut next: Vec<usize> = if step == 1 {
            Vec::new()
        } else {
            prev.iter().copied().filter(|&s| spheres[s].far > r_i + SUPPORT_TOL).collect()
        };
        for s in 0..n {
            if !assigned[s] && (spheres[s].near - r_i).abs() <= SUPPORT_TOL {
                assigned[s] = true;
                next.push(s);
            }
        }
        next.sort_unstable();
        let done = next.is_empty();
        layers.push(next);
        if done {
            if (r_i - 2.0).abs() <= SUPPORT_TOL {
                depth = Some(step);
            }
            break;
        }
    }

    let depth_bound = depth.unwrap_or(layers.len());
    let sphere_area = rho * rho;
    let mut completed = 0.0;
    let mut cs_residuals = Vec::new();
    let mut csds_residuals = Vec::new();
    for i in 0..depth_bound.min(layers.len()) {
        if i > 0 {
            let dropped = layers[i - 1].iter().filter(|s| !layers[i].contains(s)).count();
            completed += 4.0 * sphere_area * dropped as f64;
        }
        let layer = &layers[i];
        let sum_c: f64 = layer.iter().map(|&s| spheres[s].c).sum();
        let sum_cd: f64 = layer.iter().map(|&s| spheres[s].c * spheres[s].near.powi(2)).sum();
        cs_residuals.push(sum_c - 1.0);
        csds_residuals.push(completed - sum_cd);
    }
    let unassigned = (0..n).filter(|&s| !assigned[s]).collect();
    Ok(LayerStructure {
        base_point: z.to_vec(),
        home,
        radii,
        layers,
        spheres,
        depth,
        cs_residuals,
        csds_residuals,
        unassigned,
    })
}

/// The cone `{x : x/|x| ∈ Ω} ∪ {0}` over a sphere configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSupport {
    pub config: SphereConfig,
}

impl ConeSupport {
    pub fn new(config: SphereConfig) -> Self {
        ConeSupport { config }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        cone_membership(&self.config, x, tol)
    }
}

pub fn cone_membership(config: &SphereConfig, x: &[f64], tol: f64) -> bool {
    let n = norm(x);
    if n == 0.0 {
        return true;
    }
    let w: Vec<f64> = x.iter().map(|v| v / n).collect();
    config.distance_to_support(&w) <= tol
}
