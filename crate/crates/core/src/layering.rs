//! Layerings: families of fixed-point-free involutions `l_1 … l_{m-1}` on
//! `m` labels, stored as their integer distance matrix `d_ij` (the colour of
//! edge `{i, j}` in a normalized proper `(m-1)`-edge-colouring of `K_m`).
//!
//! All indices in this module's API are 0-based; JSON and violation reports
//! are 1-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{ValidationReport, Violation};

/// Default bound on `m` for enumeration.
pub const DEFAULT_MAX_ORDER: usize = 10;
/// Default bound on the dyadic level `n` (so `m = 2^{n+1} ≤ 64`).
pub const DEFAULT_MAX_DYADIC_LEVEL: u32 = 5;

pub mod rules {
    pub const EVEN_ORDER: &str = "even-order";
    pub const ZERO_DIAGONAL: &str = "zero-diagonal";
    pub const SYMMETRY: &str = "symmetry";
    pub const RANGE: &str = "range";
    pub const LATIN_ROW: &str = "latin-row";
    pub const NORMALIZATION: &str = "normalization";
    pub const ANTIPODAL_REFLECTION: &str = "antipodal-reflection";
    pub const ANTIPODAL_COMPOSITION: &str = "antipodal-composition";
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LayeringJson", into = "LayeringJson")]
pub struct Layering {
    m: usize,
    dist: Vec<u16>,
}

#[derive(Serialize, Deserialize)]
struct LayeringJson {
    m: usize,
    d: Vec<Vec<i64>>,
}

impl TryFrom<LayeringJson> for Layering {
    type Error = Error;
    fn try_from(j: LayeringJson) -> Result<Self> {
        if j.d.len() != j.m {
            return Err(Error::Dimension(format!(
                "declared m = {} but matrix has {} rows",
                j.m,
                j.d.len()
            )));
        }
        Layering::from_rows(&j.d)
    }
}

impl From<Layering> for LayeringJson {
    fn from(l: Layering) -> Self {
        LayeringJson {
            m: l.m,
            d: l.rows(),
        }
    }
}

impl Layering {
    /// Builds a layering from a distance matrix, rejecting anything that
    /// fails [`validate_layering`].
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let report = validate_layering(rows)?;
        if !report.valid {
            let rules: Vec<&str> = report.violations.iter().map(|v| v.rule.as_str()).collect();
            return Err(Error::InvalidInput(format!(
                "not a layering: {} violation(s) [{}]",
                report.violations.len(),
                rules.join(", ")
            )));
        }
        let m = rows.len();
        let dist = rows.iter().flatten().map(|&x| x as u16).collect();
        Ok(Layering { m, dist })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Half the order, `p = m / 2`.
    pub fn p(&self) -> usize {
        self.m / 2
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> usize {
        self.dist[i * self.m + j] as usize
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        (0..self.m)
            .map(|i| (0..self.m).map(|j| self.dist(i, j) as i64).collect())
            .collect()
    }

    /// `l_colour(j)`: the unique `k` with `d_jk = colour`.
    pub fn apply(&self, colour: usize, j: usize) -> usize {
        if colour == 0 {
            return j;
        }
        (0..self.m)
            .find(|&k| self.dist(j, k) == colour)
            .expect("layering rows are Latin")
    }

    /// Rebuilds the distance matrix from the involutions `l_1 … l_{m-1}`.
    pub fn from_permutations(perms: &[Involution]) -> Result<Self> {
        let m = perms.len() + 1;
        let mut rows = vec![vec![-1i64; m]; m];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 0;
        }
        for (c, perm) in perms.iter().enumerate() {
            if perm.0.len() != m {
                return Err(Error::Dimension(format!(
                    "involution l_{} acts on {} labels, expected {m}",
                    c + 1,
                    perm.0.len()
                )));
            }
            for (j, &k) in perm.0.iter().enumerate() {
                if k >= m || k == j {
                    return Err(Error::InvalidInput(format!(
                        "l_{} is not fixed-point free on {m} labels",
                        c + 1
                    )));
                }
                rows[j][k] = (c + 1) as i64;
            }
        }
        Layering::from_rows(&rows)
    }
}

/// Checks every axiom of a layering and lists each violation.
///
/// Only a non-square matrix is an error; every other defect is reported.
pub fn validate_layering(rows: &[Vec<i64>]) -> Result<ValidationReport> {
    let m = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
        return Err(Error::Dimension(format!(
            "row {} has {} entries, expected {m}",
            i + 1,
            r.len()
        )));
    }
    let mut v = Vec::new();
    if m == 0 || !m.is_multiple_of(2) {
        v.push(Violation::new(rules::EVEN_ORDER, vec![m]));
    }
    for i in 0..m {
        if rows[i][i] != 0 {
            v.push(Violation::new(rules::ZERO_DIAGONAL, vec![i + 1]));
        }
        for j in 0..m {
            if j > i && rows[i][j] != rows[j][i] {
                v.push(Violation::new(rules::SYMMETRY, vec![i + 1, j + 1]));
            }
            if i != j && !(1..m as i64).contains(&rows[i][j]) {
                v.push(Violation::new(rules::RANGE, vec![i + 1, j + 1]));
            }
        }
        let mut seen = vec![false; m];
        let mut latin = true;
        for (j, &x) in rows[i].iter().enumerate() {
            if j == i || !(1..m as i64).contains(&x) {
                continue;
            }
            if std::mem::replace(&mut seen[x as usize], true) {
                latin = false;
            }
        }
        if !latin {
            v.push(Violation::new(rules::LATIN_ROW, vec![i + 1]));
        }
    }
    if m > 0 {
        for j in 0..m {
            if rows[0][j] != j as i64 {
                v.push(Violation::new(rules::NORMALIZATION, vec![1, j + 1]));
            }
        }
    }
    Ok(ValidationReport::from_violations(v))
}

/// A fixed-point-free involution stored as its image table (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Involution(pub Vec<usize>);

impl Involution {
    pub fn apply(&self, j: usize) -> usize {
        self.0[j]
    }

    pub fn is_fixed_point_free_involution(&self) -> bool {
        self.0
            .iter()
            .enumerate()
            .all(|(j, &k)| k != j && k < self.0.len() && self.0[k] == j)
    }

    /// Disjoint transpositions, each as a 1-based `(a, b)` with `a < b`.
    pub fn cycles(&self) -> Vec<(usize, usize)> {
        self.0
            .iter()
            .enumerate()
            .filter(|(j, &k)| *j < k)
            .map(|(j, &k)| (j + 1, k + 1))
            .collect()
    }
}

/// The involutions `l_1 … l_{m-1}`; entry `c - 1` is `l_c`.
pub fn permutations_of(layering: &Layering) -> Vec<Involution> {
    let m = layering.m();
    let mut perms = vec![vec![0usize; m]; m.saturating_sub(1)];
    for j in 0..m {
        for k in 0..m {
            if j != k {
                perms[layering.dist(j, k) - 1][j] = k;
            }
        }
    }
    perms.into_iter().map(Involution).collect()
}

/// Distance matrix of the vertex set of the dyadic rectangular parallelotope,
/// `m = 2^{n+1}`.
///
/// The block recursion `l_i(2^k + j) = 2^k + l_i(j)`, `l_{2^k}` = block swap,
/// `l_{2^k + i} = l_{2^k} ∘ l_i` closes to `d_ij = (i - 1) XOR (j - 1)`.
pub fn dyadic_layering(n: u32) -> Result<Layering> {
    dyadic_layering_capped(n, DEFAULT_MAX_DYADIC_LEVEL)
}

pub fn dyadic_layering_capped(n: u32, max_level: u32) -> Result<Layering> {
    if n > max_level {
        return Err(Error::Capacity(format!(
            "dyadic level {n} exceeds the configured cap {max_level}"
        )));
    }
    let m = 1usize << (n + 1);
    // Explicit block recursion, kept literal so the XOR closed form is a checked property.
    let mut perms: Vec<Vec<usize>> = vec![vec![1, 0]];
    let mut size = 2;
    while size < m {
        let mut next: Vec<Vec<usize>> = Vec::with_capacity(2 * size - 1);
        for l in &perms {
            let mut ext = l.clone();
            ext.extend(l.iter().map(|&x| x + size));
            next.push(ext);
        }
        let swap: Vec<usize> = (0..2 * size).map(|x| (x + size) % (2 * size)).collect();
        next.push(swap.clone());
        for l in &perms {
            let ext: Vec<usize> = (0..2 * size)
                .map(|x| {
                    if x < size {
                        size + l[x]
                    } else {
                        l[x - size]
                    }
                })
                .collect();
            next.push(ext);
        }
        perms = next;
        size *= 2;
    }
    Layering::from_permutations(&perms.into_iter().map(Involution).collect::<Vec<_>>())
}

/// Outcome of checking the antipodal identities
/// `l_{m-1}(j) = m + 1 - j` and `l_i ∘ l_{m-1} = l_{m-1} ∘ l_i = l_{m-1-i}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntipodalCheck {
    pub holds: bool,
    pub violations: Vec<Violation>,
}

/// Tests the antipodal identities. They are necessary when an embedding
/// exists, so this is a pre-filter, never a substitute for the spectral test.
pub fn check_antipodal_structure(layering: &Layering) -> AntipodalCheck {
    let m = layering.m();
    let last = m - 1;
    let perms = permutations_of(layering);
    let mut violations = Vec::new();
    for j in 0..m {
        if layering.dist(j, m - 1 - j) != last {
            violations.push(Violation::new(rules::ANTIPODAL_REFLECTION, vec![last, j + 1]));
        }
    }
    let apply = |c: usize, j: usize| if c == 0 { j } else { perms[c - 1].apply(j) };
    for i in 1..last {
        for j in 0..m {
            let target = apply(last - i, j);
            if apply(i, apply(last, j)) != target || apply(last, apply(i, j)) != target {
                violations.push(Violation::new(rules::ANTIPODAL_COMPOSITION, vec![i, j + 1]));
            }
        }
    }
    AntipodalCheck {
        holds: violations.is_empty(),
        violations,
    }
}

/// Lazily enumerates all normalized layerings of `K_m` in lexicographic order
/// of the flattened distance matrix.
pub fn enumerate_layerings(m: usize, limit: Option<usize>) -> Result<LayeringIter> {
    enumerate_layerings_capped(m, limit, DEFAULT_MAX_ORDER)
}

pub fn enumerate_layerings_capped(
    m: usize,
    limit: Option<usize>,
    max_order: usize,
) -> Result<LayeringIter> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "layerings exist only for even m >= 2, got {m}"
        )));
    }
    if m > max_order {
        return Err(Error::Capacity(format!(
            "m = {m} exceeds the enumeration cap {max_order}"
        )));
    }
    Ok(LayeringIter::new(m, limit))
}

/// Row-major backtracking over the free upper-triangle cells, pruning any
/// colour already used at either endpoint.
pub struct LayeringIter {
    m: usize,
    cells: Vec<(usize, usize)>,
    dist: Vec<u16>,
    used: Vec<u32>,
    choice: Vec<u16>,
    fresh: bool,
    exhausted: bool,
    remaining: Option<usize>,
}

impl LayeringIter {
    fn new(m: usize, limit: Option<usize>) -> Self {
        let mut dist = vec![0u16; m * m];
        let mut used = vec![0u32; m];
        for j in 1..m {
            dist[j] = j as u16;
            dist[j * m] = j as u16;
            used[0] |= 1 << j;
            used[j] |= 1 << j;
        }
        let cells: Vec<(usize, usize)> = (1..m)
            .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
            .collect();
        let choice = vec![0; cells.len()];
        LayeringIter {
            m,
            cells,
            dist,
            used,
            choice,
            fresh: true,
            exhausted: false,
            remaining: limit,
        }
    }

    fn set(&mut self, k: usize, colour: u16) {
        let (i, j) = self.cells[k];
        let old = self.choice[k];
        if old != 0 {
            self.used[i] &= !(1 << old);
            self.used[j] &= !(1 << old);
        }
        self.choice[k] = colour;
        self.dist[i * self.m + j] = colour;
        self.dist[j * self.m + i] = colour;
        if colour != 0 {
            self.used[i] |= 1 << colour;
            self.used[j] |= 1 << colour;
        }
    }

    /// Moves to the next complete colouring; false once the tree is exhausted.
    fn advance(&mut self) -> bool {
        let n = self.cells.len();
        if n == 0 {
            return std::mem::replace(&mut self.fresh, false);
        }
        let mut k: isize = if self.fresh { 0 } else { n as isize - 1 };
        self.fresh = false;
        loop {
            if k < 0 {
                return false;
            }
            let ku = k as usize;
            let (i, j) = self.cells[ku];
            let blocked = self.used[i] | self.used[j];
            let start = self.choice[ku] + 1;
            // `blocked` still holds this cell's current colour, which is below `start`.
            let next = (start..self.m as u16).find(|&c| blocked & (1 << c) == 0);
            match next {
                Some(c) => {
                    self.set(ku, c);
                    if ku + 1 == n {
                        return true;
                    }
                    k += 1;
                }
                None => {
                    self.set(ku, 0);
                    k -= 1;
                }
            }
        }
    }
}

impl Iterator for LayeringIter {
    type Item = Layering;

    fn next(&mut self) -> Option<Layering> {
        if self.exhausted || self.remaining == Some(0) {
            return None;
        }
        if !self.advance() {
            self.exhausted = true;
            return None;
        }
        if let Some(r) = self.remaining.as_mut() {
            *r -= 1;
        }
        Some(Layering {
            m: self.m,
            dist: self.dist.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k4() -> Vec<Vec<i64>> {
        vec![
            vec![0, 1, 2, 3],
            vec![1, 0, 3, 2],
            vec![2, 3, 0, 1],
            vec![3, 2, 1, 0],
        ]
    }

    #[test]
    fn k4_matrix_is_valid() {
        assert!(validate_layering(&k4()).unwrap().valid);
    }

    #[test]
    fn duplicate_colour_in_first_row_is_a_latin_violation() {
        let mut d = k4();
        d[0][2] = 1;
        d[2][0] = 1;
        let r = validate_layering(&d).unwrap();
        assert!(!r.valid);
        assert!(r
            .violations
            .iter()
            .any(|v| v.rule == rules::LATIN_ROW && v.indices == vec![1]));
    }

    #[test]
    fn non_square_input_is_a_dimension_error() {
        let d = vec![vec![0, 1], vec![1]];
        assert!(matches!(validate_layering(&d), Err(Error::Dimension(_))));
    }

    #[test]
    fn asymmetric_and_unnormalized_are_reported() {
        let d = vec![
            vec![0, 2, 1, 3],
            vec![2, 0, 3, 1],
            vec![1, 3, 0, 2],
            vec![3, 2, 1, 0],
        ];
        let r = validate_layering(&d).unwrap();
        assert!(r.has_rule(rules::NORMALIZATION));
        assert!(r.has_rule(rules::SYMMETRY));
    }

    #[test]
    fn odd_order_is_rejected() {
        let d = vec![vec![0, 1, 2], vec![1, 0, 2], vec![2, 2, 0]];
        assert!(validate_layering(&d).unwrap().has_rule(rules::EVEN_ORDER));
    }

    #[test]
    fn m2_permutation_is_a_swap() {
        let l = Layering::from_rows(&[vec![0, 1], vec![1, 0]]).unwrap();
        let perms = permutations_of(&l);
        assert_eq!(perms, vec![Involution(vec![1, 0])]);
    }

    #[test]
    fn k4_permutations_read_off_the_matrix() {
        let l = Layering::from_rows(&k4()).unwrap();
        let cycles: Vec<_> = permutations_of(&l).iter().map(|p| p.cycles()).collect();
        assert_eq!(
            cycles,
            vec![
                vec![(1, 2), (3, 4)],
                vec![(1, 3), (2, 4)],
                vec![(1, 4), (2, 3)],
            ]
        );
    }

    #[test]
    fn permutations_fix_first_label_normalization() {
        let l = dyadic_layering(2).unwrap();
        for (c, p) in permutations_of(&l).iter().enumerate() {
            assert_eq!(p.apply(0), c + 1);
            assert!(p.is_fixed_point_free_involution());
        }
    }

    #[test]
    fn dyadic_small_cases() {
        assert_eq!(dyadic_layering(0).unwrap().rows(), vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(dyadic_layering(1).unwrap().rows(), k4());
        let l = dyadic_layering(2).unwrap();
        // Rows 5-8 are rows 1-4 pushed through the block involution l_4.
        for i in 0..4 {
            for j in 0..8 {
                assert_eq!(l.dist(i + 4, j), l.dist(i, (j + 4) % 8));
            }
        }
    }

    #[test]
    fn dyadic_matches_xor_closed_form() {
        for n in 0..=4 {
            let l = dyadic_layering(n).unwrap();
            for i in 0..l.m() {
                for j in 0..l.m() {
                    assert_eq!(l.dist(i, j), i ^ j);
                }
            }
        }
    }

    #[test]
    fn dyadic_cap_is_enforced() {
        assert!(matches!(dyadic_layering(6), Err(Error::Capacity(_))));
        assert!(dyadic_layering_capped(6, 6).is_ok());
    }

    #[test]
    fn antipodal_structure_of_dyadic() {
        for n in 0..=4 {
            assert!(check_antipodal_structure(&dyadic_layering(n).unwrap()).holds);
        }
    }

    #[test]
    fn small_enumeration_counts() {
        assert_eq!(enumerate_layerings(2, None).unwrap().count(), 1);
        assert_eq!(enumerate_layerings(4, None).unwrap().count(), 1);
        assert_eq!(enumerate_layerings(6, None).unwrap().count(), 6);
    }

    #[test]
    fn enumeration_limit_and_domain() {
        assert_eq!(enumerate_layerings(8, Some(5)).unwrap().count(), 5);
        assert!(matches!(enumerate_layerings(5, None), Err(Error::Domain(_))));
        assert!(matches!(enumerate_layerings(12, None), Err(Error::Capacity(_))));
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let all: Vec<Vec<i64>> = enumerate_layerings(6, None)
            .unwrap()
            .map(|l| l.rows().concat())
            .collect();
        for w in all.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn some_k6_layering_breaks_antipodal_reflection() {
        let bad: Vec<_> = enumerate_layerings(6, None)
            .unwrap()
            .map(|l| check_antipodal_structure(&l))
            .filter(|c| !c.holds)
            .collect();
        assert!(!bad.is_empty());
        assert!(bad.iter().any(|c| c
            .violations
            .iter()
            .any(|v| v.rule == rules::ANTIPODAL_REFLECTION)));
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let l = dyadic_layering(1).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(s, r#"{"m":4,"d":[[0,1,2,3],[1,0,3,2],[2,3,0,1],[3,2,1,0]]}"#);
        let back: Layering = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
        assert!(serde_json::from_str::<Layering>(r#"{"m":2,"d":[[0,1],[0,0]]}"#).is_err());
    }
}
