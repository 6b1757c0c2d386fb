//! Graph matrices of a layering and the spectral-gap embeddability test.
//!
//! For a layering on `m = 2p` labels the weighted graph has adjacency
//! `A_ij = d_ij`, constant degree `p(2p-1)` and Laplacian `L = D - A`. The
//! prospective Gram matrix `Δ = J - 2p I + 2/(2p-1) L` is positive
//! semidefinite exactly when the second-smallest Laplacian eigenvalue reaches
//! `p(2p-1)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layering::Layering;
use crate::linalg::{jacobi_eigen, Matrix};

#[derive(Debug, Clone)]
pub struct GraphMatrices {
    pub adjacency: Matrix,
    pub degree: Matrix,
    pub laplacian: Matrix,
    /// Exact integer degrees; all equal to `m(m-1)/2`.
    pub degrees: Vec<i64>,
}

pub fn graph_matrices(layering: &Layering) -> GraphMatrices {
    let m = layering.m();
    let adjacency = Matrix::from_fn(m, |i, j| layering.dist(i, j) as f64);
    let degrees: Vec<i64> = (0..m)
        .map(|i| (0..m).map(|j| layering.dist(i, j) as i64).sum())
        .collect();
    let degree = Matrix::from_fn(m, |i, j| if i == j { degrees[i] as f64 } else { 0.0 });
    let laplacian = Matrix::from_fn(m, |i, j| degree[(i, j)] - adjacency[(i, j)]);
    GraphMatrices {
        adjacency,
        degree,
        laplacian,
        degrees,
    }
}

#[derive(Debug, Clone)]
pub struct DeltaMatrix {
    pub p: usize,
    pub matrix: Matrix,
}

impl DeltaMatrix {
    /// `(2p-1)·Δ` as exact integers.
    pub fn scaled_integer(&self, layering: &Layering) -> Vec<Vec<i64>> {
        let k = 2 * self.p as i64 - 1;
        (0..layering.m())
            .map(|i| {
                (0..layering.m())
                    .map(|j| k - 2 * layering.dist(i, j) as i64)
                    .collect()
            })
            .collect()
    }
}

pub fn delta_matrix(layering: &Layering) -> DeltaMatrix {
    let p = layering.p();
    let k = (2 * p - 1) as f64;
    let matrix = Matrix::from_fn(layering.m(), |i, j| {
        (k - 2.0 * layering.dist(i, j) as f64) / k
    });
    DeltaMatrix { p, matrix }
}

/// Verifies `(2p-1)Δ = (2p-1)(J - 2pI) + 2L` in integer arithmetic.
pub fn delta_identity_exact(layering: &Layering) -> bool {
    let m = layering.m();
    let k = 2 * layering.p() as i64 - 1;
    let g = graph_matrices(layering);
    let lap = |i: usize, j: usize| -> i64 {
        if i == j {
            g.degrees[i]
        } else {
            -(layering.dist(i, j) as i64)
        }
    };
    (0..m).all(|i| {
        (0..m).all(|j| {
            let lhs = k - 2 * layering.dist(i, j) as i64;
            let kron = if i == j { 1 } else { 0 };
            let rhs = k * (1 - 2 * layering.p() as i64 * kron) + 2 * lap(i, j);
            lhs == rhs
        })
    })
}

/// Largest entrywise deviation of the floating-point identity
/// `Δ = J - 2pI + 2/(2p-1) L`.
pub fn delta_identity_residual(layering: &Layering) -> f64 {
    let m = layering.m();
    let p = layering.p() as f64;
    let delta = delta_matrix(layering).matrix;
    let lap = graph_matrices(layering).laplacian;
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let kron = if i == j { 1.0 } else { 0.0 };
            let rhs = 1.0 - 2.0 * p * kron + 2.0 / (2.0 * p - 1.0) * lap[(i, j)];
            worst = worst.max((delta[(i, j)] - rhs).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpectralOptions {
    /// Accept Δ-eigenvalues down to `-psd_tolerance`. `None` means `1e-9·m`.
    pub psd_tolerance: Option<f64>,
    /// Eigenvalues above this count toward the rank. `None` means
    /// `1e-8 × largest Δ-eigenvalue`.
    pub rank_tolerance: Option<f64>,
}

impl SpectralOptions {
    pub fn with_psd_tolerance(tol: f64) -> Self {
        SpectralOptions {
            psd_tolerance: Some(tol),
            ..Default::default()
        }
    }

    pub fn psd_tolerance_for(&self, m: usize) -> f64 {
        self.psd_tolerance.unwrap_or(1e-9 * m as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub gap: f64,
    pub threshold: f64,
    pub embeddable: bool,
    pub delta_rank: usize,
    pub l_eigs: Vec<f64>,
    pub delta_eigs: Vec<f64>,
    #[serde(skip)]
    pub psd_tolerance: f64,
    #[serde(skip)]
    pub rank_tolerance: f64,
}

pub fn spectral_report(layering: &Layering, opts: &SpectralOptions) -> Result<SpectralReport> {
    let m = layering.m();
    let p = layering.p() as f64;
    let psd_tolerance = opts.psd_tolerance_for(m);
    if psd_tolerance < 0.0 || psd_tolerance.is_nan() {
        return Err(Error::Precondition("psd_tolerance must be >= 0".into()));
    }
    let l_eigs = jacobi_eigen(&graph_matrices(layering).laplacian)?.values;
    let delta_eigs = jacobi_eigen(&delta_matrix(layering).matrix)?.values;

    let gap = l_eigs[1];
    let threshold = p * (2.0 * p - 1.0);
    let psd_test = delta_eigs[0] >= -psd_tolerance;
    let gap_test = gap >= threshold - (2.0 * p - 1.0) / 2.0 * psd_tolerance;
    if psd_test != gap_test {
        return Err(Error::Numeric(format!(
            "gap test ({gap} vs {threshold}) and PSD test (min Δ-eigenvalue {}) disagree",
            delta_eigs[0]
        )));
    }
    let largest = *delta_eigs.last().expect("m >= 2");
    let rank_tolerance = opts.rank_tolerance.unwrap_or(1e-8 * largest.abs());
    let delta_rank = delta_eigs.iter().filter(|&&x| x > rank_tolerance).count();

    Ok(SpectralReport {
        gap,
        threshold,
        embeddable: psd_test,
        delta_rank,
        l_eigs,
        delta_eigs,
        psd_tolerance,
        rank_tolerance,
    })
}

/// A failure attached to the position of the offending layering in its stream.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("layering #{index}: {error}")]
pub struct IndexedError {
    pub index: usize,
    pub error: Error,
}

fn keep(layering: &Layering, report: &SpectralReport) -> Result<bool> {
    if !report.embeddable {
        return Ok(false);
    }
    let p = layering.p();
    // m = 2 is the light cone; its 4-element partition argument degenerates.
    if layering.m() >= 4 && (!p.is_multiple_of(2) || report.delta_rank > p) {
        return Err(Error::Numeric(format!(
            "embeddable layering with p = {p}, rank {} breaks the parity/rank bound",
            report.delta_rank
        )));
    }
    Ok(true)
}

/// Order-preserving filter that keeps only embeddable layerings.
pub fn screen<I>(
    layerings: I,
    opts: SpectralOptions,
) -> impl Iterator<Item = std::result::Result<(Layering, SpectralReport), IndexedError>>
where
    I: IntoIterator<Item = Layering>,
{
    layerings
        .into_iter()
        .enumerate()
        .filter_map(move |(index, l)| {
            let attach = |error| IndexedError { index, error };
            match spectral_report(&l, &opts).and_then(|r| keep(&l, &r).map(|k| (k, r))) {
                Ok((true, r)) => Some(Ok((l, r))),
                Ok((false, _)) => None,
                Err(e) => Some(Err(attach(e))),
            }
        })
}

/// Parallel [`screen`]; results come back in input order.
pub fn screen_par(
    layerings: &[Layering],
    opts: SpectralOptions,
) -> Vec<std::result::Result<(usize, SpectralReport), IndexedError>> {
    let evaluated: Vec<_> = layerings
        .par_iter()
        .enumerate()
        .map(|(index, l)| {
            spectral_report(l, &opts)
                .and_then(|r| keep(l, &r).map(|k| (k, r)))
                .map_err(|error| IndexedError { index, error })
                .map(|(k, r)| (index, k, r))
        })
        .collect();
    evaluated
        .into_iter()
        .filter_map(|res| match res {
            Ok((i, true, r)) => Some(Ok((i, r))),
            Ok((_, false, _)) => None,
            Err(e) => Some(Err(e)),
        })
        .collect()
}
