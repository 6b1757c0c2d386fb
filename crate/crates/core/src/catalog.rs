//! Named cones: the light cone, the dyadic family `C_k`, the rectangle
//! configuration in 5-space and an 8-sphere configuration built from a
//! non-dyadic layering of `K_8`.

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::embedding::{dyadic_centers, embed, CenterSet};
use crate::error::{Error, Result};
use crate::geometry::{build_config, cone_membership, SphereConfig};
use crate::layering::Layering;
use crate::linalg::dot;
use crate::spectral::{spectral_report, SpectralOptions};

pub const MAX_CK_LEVEL: u32 = 12;

/// `Σ coef · x_index² = 0`, with 0-based coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equation {
    pub terms: Vec<(usize, i64)>,
}

impl Equation {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c as f64 * x[i] * x[i]).sum()
    }

    /// Residual relative to `|x|²`, so that membership is dilation invariant.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let n2 = dot(x, x);
        if n2 == 0.0 {
            0.0
        } else {
            self.eval(x).abs() / n2
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, &(i, c)) in self.terms.iter().enumerate() {
            let sign = if c < 0 { "-" } else if k > 0 { "+" } else { "" };
            let mag = c.unsigned_abs();
            let coef = if mag == 1 { String::new() } else { format!("{mag}·") };
            s.push_str(&format!("{}{sign} {coef}x{}²", if k > 0 { " " } else { "" }, i + 1));
        }
        s.push_str(" = 0");
        s.trim_start().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<u32>,
    pub config: SphereConfig,
    pub equations: Vec<Equation>,
}

impl CatalogEntry {
    pub fn satisfies_equations(&self, x: &[f64], tol: f64) -> bool {
        self.equations.iter().all(|e| e.relative_residual(x) <= tol)
    }

    pub fn max_equation_residual(&self, x: &[f64]) -> f64 {
        self.equations.iter().map(|e| e.relative_residual(x)).fold(0.0, f64::max)
    }

    pub fn on_support(&self, x: &[f64], tol: f64) -> bool {
        cone_membership(&self.config, x, tol)
    }

    pub fn squared_radius_sum(&self) -> f64 {
        self.config.r * self.config.r * self.config.len() as f64
    }

    /// A random point of the variety cut out by the equations, for entries
    /// in the `C_k` family: a free 3-vector, then every further coordinate
    /// fixed up to a random sign.
    pub fn sample_equation_point(&self, rng: &mut impl Rng) -> Option<Vec<f64>> {
        let k = self.k? as usize;
        let u: [f64; 3] = UnitSphere.sample(rng);
        let s = rng.random_range(0.1..10.0);
        let mut x: Vec<f64> = u.iter().map(|v| v * s).collect();
        x.reserve(k + 1);
        for l in 0..=k {
            let mag = s * 2f64.powi(l as i32).sqrt();
            x.push(if rng.random::<bool>() { mag } else { -mag });
        }
        Some(x)
    }
}

fn sparse(terms: &[(usize, i64)]) -> Equation {
    Equation { terms: terms.to_vec() }
}

/// `x₄² = x₁² + x₂² + x₃²` and `x_{l+4}² = 2^l x₄²` for `l = 1..k`.
pub fn ck_equations(k: u32) -> Vec<Equation> {
    let mut eqs = vec![sparse(&[(3, 1), (0, -1), (1, -1), (2, -1)])];
    for l in 1..=k as usize {
        eqs.push(sparse(&[(l + 3, 1), (3, -(1i64 << l))]));
    }
    eqs
}

pub fn kp_cone() -> CatalogEntry {
    let mut e = ck_cone(0).expect("level 0 is within the cap");
    e.name = "kp".into();
    e
}

pub fn ck_cone(k: u32) -> Result<CatalogEntry> {
    if k > MAX_CK_LEVEL {
        return Err(Error::Capacity(format!("C_{k} exceeds the level cap {MAX_CK_LEVEL}")));
    }
    Ok(CatalogEntry {
        name: format!("ck{k}"),
        k: Some(k),
        config: build_config(&dyadic_centers(k))?,
        equations: ck_equations(k),
    })
}

pub fn rect4() -> Result<CatalogEntry> {
    let (r, t) = CenterSet::radii(4);
    let (w, l) = (0.5, 2f64.sqrt() / 2.0);
    let points = vec![vec![w, l], vec![-w, l], vec![w, -l], vec![-w, -l]];
    let centers = CenterSet { m: 4, q: 2, r, t, points };
    Ok(CatalogEntry {
        name: "rect4".into(),
        k: Some(1),
        config: build_config(&centers)?,
        equations: ck_equations(1),
    })
}

/// A layering of `K_8` whose centers are a regular tetrahedron and its
/// antipode; not isomorphic to the dyadic one.
pub const TETRA8_ROWS: [[i64; 8]; 8] = [
    [0, 1, 2, 3, 4, 5, 6, 7],
    [1, 0, 3, 5, 2, 4, 7, 6],
    [2, 3, 0, 1, 6, 7, 4, 5],
    [3, 5, 1, 0, 7, 6, 2, 4],
    [4, 2, 6, 7, 0, 1, 5, 3],
    [5, 4, 7, 6, 1, 0, 3, 2],
    [6, 7, 4, 2, 5, 3, 0, 1],
    [7, 6, 5, 4, 3, 2, 1, 0],
];

pub fn tetra8_layering() -> Layering {
    let rows: Vec<Vec<i64>> = TETRA8_ROWS.iter().map(|r| r.to_vec()).collect();
    Layering::from_rows(&rows).expect("tetra8 rows form a layering")
}

pub fn tetra8() -> Result<CatalogEntry> {
    let layering = tetra8_layering();
    let report = spectral_report(&layering, &SpectralOptions::default())?;
    let centers = embed(&layering, &report)?;
    Ok(CatalogEntry {
        name: "tetra8".into(),
        k: None,
        config: build_config(&centers)?,
        equations: Vec::new(),
    })
}
