//! Recovery of distance-symmetric centers `ξ_i` from a positive semidefinite
//! `Δ`, and the direct parallelotope construction used by the dyadic family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layering::Layering;
use crate::linalg::{dist, dot, jacobi_eigen, norm, Matrix};
use crate::report::{ValidationReport, Violation};
use crate::spectral::{delta_matrix, SpectralReport};

/// Chord-distance, norm and antipodality tolerance of [`verify_center_set`].
pub const CENTER_TOL: f64 = 1e-9;
/// Geodesic comparison goes through `arccos`, which loses half the digits
/// near antipodal pairs.
pub const GEODESIC_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSet {
    pub m: usize,
    pub q: usize,
    pub r: f64,
    pub t: f64,
    pub points: Vec<Vec<f64>>,
}

impl CenterSet {
    /// Radii for `m = 2p` spheres: `r = 1/√(2p)` and `t = √((2p-1)/(2p))`.
    pub fn radii(m: usize) -> (f64, f64) {
        let r = (1.0 / m as f64).sqrt();
        let t = ((m as f64 - 1.0) / m as f64).sqrt();
        (r, t)
    }

    pub fn gram(&self) -> Matrix {
        Matrix::from_fn(self.m, |i, j| dot(&self.points[i], &self.points[j]))
    }

    /// Returns a copy with every point mapped through `f` (e.g. an orthogonal map).
    pub fn map_points(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> CenterSet {
        let points: Vec<Vec<f64>> = self.points.iter().map(|p| f(p)).collect();
        CenterSet {
            q: points.first().map_or(self.q, |p| p.len()),
            points,
            ..self.clone()
        }
    }
}

fn factor_points(gram: &Matrix, keep_above: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let eig = jacobi_eigen(gram)?;
    let m = gram.n();
    let mut kept: Vec<(f64, Vec<f64>)> = eig
        .values
        .iter()
        .zip(eig.vectors)
        .filter(|(v, _)| **v > keep_above)
        .map(|(v, mut vec)| {
            if let Some(first) = vec.iter().find(|x| x.abs() > 1e-10).copied() {
                if first < 0.0 {
                    vec.iter_mut().for_each(|x| *x = -*x);
                }
            }
            (*v, vec)
        })
        .collect();
    kept.sort_by(|a, b| b.0.total_cmp(&a.0));
    let points = (0..m)
        .map(|i| kept.iter().map(|(v, vec)| v.sqrt() * vec[i]).collect())
        .collect();
    Ok((points, eig.values))
}

/// Factors `((2p-1)/(2p))·Δ = AᵀA` and returns the columns of `A` expressed in
/// the eigen-directions whose eigenvalue exceeds the rank tolerance.
pub fn embed(layering: &Layering, report: &SpectralReport) -> Result<CenterSet> {
    if !report.embeddable {
        return Err(Error::Precondition(
            "embed requires an embeddable layering (Δ is not PSD)".into(),
        ));
    }
    let m = layering.m();
    let (r, t) = CenterSet::radii(m);
    let scale = t * t;
    let delta = delta_matrix(layering).matrix;
    let gram = Matrix::from_fn(m, |i, j| scale * delta[(i, j)]);
    let (points, values) = factor_points(&gram, report.rank_tolerance * scale)?;
    if let Some(neg) = values.iter().find(|&&v| v < -report.psd_tolerance * scale) {
        return Err(Error::Numeric(format!(
            "Gram matrix has eigenvalue {neg:e} below the PSD tolerance"
        )));
    }
    let q = points.first().map_or(0, |p: &Vec<f64>| p.len());
    Ok(CenterSet {
        m,
        q,
        r,
        t,
        points,
    })
}

/// Negative-control embedding: drops the negative part of the spectrum of
/// `((2p-1)/(2p))·Δ` and pushes each point back onto the radius-`t` sphere.
/// The result is generally not distance symmetric.
pub fn truncated_embedding(layering: &Layering) -> Result<CenterSet> {
    let m = layering.m();
    let (r, t) = CenterSet::radii(m);
    let delta = delta_matrix(layering).matrix;
    let gram = Matrix::from_fn(m, |i, j| t * t * delta[(i, j)]);
    let (mut points, _) = factor_points(&gram, 1e-12)?;
    for p in points.iter_mut() {
        let n = norm(p);
        if n == 0.0 {
            return Err(Error::Numeric("truncation collapsed a center to 0".into()));
        }
        p.iter_mut().for_each(|x| *x *= t / n);
    }
    let q = points[0].len();
    Ok(CenterSet {
        m,
        q,
        r,
        t,
        points,
    })
}

pub mod rules {
    pub const DIMENSION: &str = "dimension";
    pub const RADII: &str = "radii";
    pub const NORM: &str = "norm";
    pub const DISTANCE: &str = "distance";
    pub const ANTIPODAL: &str = "antipodal";
    pub const GEODESIC: &str = "geodesic";
}

/// Checks norms, chord distances `|ξ_i - ξ_j|² = 2 d_ij / p`, antipodal
/// pairing, `r² + t² = 1`, and the geodesic form of the distances.
pub fn verify_center_set(centers: &CenterSet, layering: &Layering) -> ValidationReport {
    let m = layering.m();
    let mut v = Vec::new();
    if centers.m != m
        || centers.points.len() != m
        || centers.points.iter().any(|p| p.len() != centers.q)
    {
        v.push(Violation::new(rules::DIMENSION, vec![centers.m, m]));
        return ValidationReport::from_violations(v);
    }
    let p = layering.p() as f64;
    let (r, t) = CenterSet::radii(m);
    let mut worst = 0.0f64;

    let radii_dev = (centers.r - r).abs().max((centers.t - t).abs());
    let identity_dev = (centers.r * centers.r + centers.t * centers.t - 1.0).abs();
    if radii_dev.max(identity_dev) > CENTER_TOL {
        v.push(Violation::new(rules::RADII, vec![]).with_deviation(radii_dev.max(identity_dev)));
    }
    worst = worst.max(radii_dev).max(identity_dev);

    for (i, xi) in centers.points.iter().enumerate() {
        let dev = (norm(xi) - t).abs();
        worst = worst.max(dev);
        if dev > CENTER_TOL {
            v.push(Violation::new(rules::NORM, vec![i + 1]).with_deviation(dev));
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let (a, b) = (&centers.points[i], &centers.points[j]);
            let d = layering.dist(i, j) as f64;
            let want = (2.0 * d / p).sqrt();
            let dev = (dist(a, b) - want).abs();
            worst = worst.max(dev);
            if dev > CENTER_TOL {
                v.push(Violation::new(rules::DISTANCE, vec![i + 1, j + 1]).with_deviation(dev));
            }
            let cos_actual = (dot(a, b) / (t * t)).clamp(-1.0, 1.0);
            let cos_want = ((2.0 * p - 1.0 - 2.0 * d) / (2.0 * p - 1.0)).clamp(-1.0, 1.0);
            let gdev = t * (cos_actual.acos() - cos_want.acos()).abs();
            if gdev > GEODESIC_TOL {
                v.push(Violation::new(rules::GEODESIC, vec![i + 1, j + 1]).with_deviation(gdev));
            }
        }
    }
    for i in 0..m {
        let j = layering.apply(m - 1, i);
        if j < i {
            continue;
        }
        let dev = antipodal_pair_defect(centers, i, j);
        worst = worst.max(dev);
        if dev > CENTER_TOL {
            v.push(Violation::new(rules::ANTIPODAL, vec![i + 1, j + 1]).with_deviation(dev));
        }
    }
    ValidationReport::from_violations(v).with_max_deviation(worst)
}

/// `max_i |ξ_i + ξ_{l_{m-1}(i)}|`.
pub fn antipodal_defect(centers: &CenterSet, layering: &Layering) -> f64 {
    let last = layering.m() - 1;
    (0..layering.m())
        .map(|i| antipodal_pair_defect(centers, i, layering.apply(last, i)))
        .fold(0.0, f64::max)
}

fn antipodal_pair_defect(centers: &CenterSet, i: usize, j: usize) -> f64 {
    centers.points[i]
        .iter()
        .zip(&centers.points[j])
        .map(|(a, b)| (a + b) * (a + b))
        .sum::<f64>()
        .sqrt()
}

/// Vertices of the dyadic rectangular parallelotope, centred at the origin.
///
/// Label `v` (0-based) has coordinate `±√(2^k)·r` on axis `k`, negative where
/// bit `k` of `v` is set, so that edges have lengths `2√(2^k)·r`.
pub fn dyadic_centers(n: u32) -> CenterSet {
    let q = n as usize + 1;
    let m = 1usize << q;
    let (r, t) = CenterSet::radii(m);
    let points = (0..m)
        .map(|v| {
            (0..q)
                .map(|k| {
                    let side = (2f64.powi(k as i32)).sqrt() * r;
                    if v >> k & 1 == 1 {
                        -side
                    } else {
                        side
                    }
                })
                .collect()
        })
        .collect();
    CenterSet { m, q, r, t, points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layering::dyadic_layering;
    use crate::spectral::{spectral_report, SpectralOptions};

    fn embed_dyadic(n: u32) -> (Layering, CenterSet) {
        let l = dyadic_layering(n).unwrap();
        let rep = spectral_report(&l, &SpectralOptions::default()).unwrap();
        let c = embed(&l, &rep).unwrap();
        (l, c)
    }

    #[test]
    fn m2_centers_are_antipodal() {
        let (_, c) = embed_dyadic(0);
        assert_eq!(c.q, 1);
        assert!((c.points[0][0] + c.points[1][0]).abs() < 1e-15);
        assert!((c.points[0][0].abs() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn k4_embeds_as_a_rectangle() {
        let (l, c) = embed_dyadic(1);
        assert_eq!(c.q, 2);
        let rep = verify_center_set(&c, &l);
        assert!(rep.valid, "{rep:?}");
        assert!(rep.max_deviation.unwrap() < 1e-9);
        let mut sides: Vec<f64> = (1..4).map(|j| dist(&c.points[0], &c.points[j])).collect();
        sides.sort_by(f64::total_cmp);
        assert!((sides[0] - 1.0).abs() < 1e-12);
        assert!((sides[1] - 2f64.sqrt()).abs() < 1e-12);
        assert!((sides[2] - 3f64.sqrt()).abs() < 1e-12);
        assert!(c.points.iter().all(|p| (norm(p) - 0.75f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn perturbed_point_is_reported() {
        let (l, mut c) = embed_dyadic(1);
        c.points[2][0] += 1e-3;
        let rep = verify_center_set(&c, &l);
        assert!(!rep.valid);
        assert!(rep.has_rule(rules::DISTANCE));
    }

    #[test]
    fn non_embeddable_report_is_refused() {
        let (l, _) = embed_dyadic(1);
        let mut rep = spectral_report(&l, &SpectralOptions::default()).unwrap();
        rep.embeddable = false;
        assert!(matches!(embed(&l, &rep), Err(Error::Precondition(_))));
    }

    #[test]
    fn dyadic_coordinates() {
        let c = dyadic_centers(0);
        assert_eq!(c.points, vec![vec![0.5f64.sqrt()], vec![-(0.5f64.sqrt())]]);
        let c = dyadic_centers(1);
        assert_eq!(c.r, 0.5);
        assert!((dist(&c.points[0], &c.points[1]) - 1.0).abs() < 1e-15);
        let c = dyadic_centers(2);
        let r = 2f64.powf(-1.5);
        assert!((c.r - r).abs() < 1e-15);
        let diag = dist(&c.points[0], &c.points[7]);
        assert!((diag - 2.0 * 7f64.sqrt() * r).abs() < 1e-14);
        assert!((diag - 2.0 * c.t).abs() < 1e-14);
    }

    #[test]
    fn dyadic_centers_validate_against_dyadic_layering() {
        for n in 0..=4 {
            let l = dyadic_layering(n).unwrap();
            let rep = verify_center_set(&dyadic_centers(n), &l);
            assert!(rep.valid, "n = {n}: {rep:?}");
        }
    }

    #[test]
    fn dyadic_edge_histogram() {
        let c = dyadic_centers(2);
        let r = c.r;
        let mut counts = [0usize; 3];
        for i in 0..8 {
            for j in (i + 1)..8 {
                let d = dist(&c.points[i], &c.points[j]);
                for (k, len) in [2.0 * r, 2.0 * 2f64.sqrt() * r, 4.0 * r].iter().enumerate() {
                    if (d - len).abs() < 1e-12 {
                        counts[k] += 1;
                    }
                }
            }
        }
        // A 3-cube has 4 parallel edges in each direction.
        assert_eq!(counts, [4, 4, 4]);
    }

    #[test]
    fn embedding_and_direct_construction_share_a_gram_matrix() {
        for n in 0..=3 {
            let (_, c) = embed_dyadic(n);
            let d = dyadic_centers(n);
            assert_eq!(c.q, d.q);
            let (g1, g2) = (c.gram(), d.gram());
            for i in 0..c.m {
                for j in 0..c.m {
                    assert!((g1[(i, j)] - g2[(i, j)]).abs() < 1e-12);
                }
            }
        }
    }
}
