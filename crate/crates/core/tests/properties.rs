use std::f64::consts::PI;
use std::sync::OnceLock;

use forge_core::catalog::{self, CatalogEntry};
use forge_core::embedding::{antipodal_defect, dyadic_centers, embed, truncated_embedding, verify_center_set, CenterSet};
use forge_core::geometry::{
    build_config, cap_area, cap_radius, cone_membership, layer_structure, nearest_farthest, Side, SphereConfig,
};
use forge_core::layering::{enumerate_layerings, permutations_of, validate_layering, Layering};
use forge_core::linalg::{dist, norm, scale};
use forge_core::measure::{
    cone_ball_analytic, cone_ball_mc, sigma_ball_analytic, sigma_ball_axis, sigma_ball_mc, verify_uniformity,
    VerifyOptions,
};
use forge_core::spectral::{delta_identity_exact, screen, spectral_report, SpectralOptions};
use proptest::prelude::*;

fn k8() -> &'static [Layering] {
    static ALL: OnceLock<Vec<Layering>> = OnceLock::new();
    ALL.get_or_init(|| enumerate_layerings(8, None).unwrap().collect())
}

fn survivors() -> &'static [(Layering, CenterSet)] {
    static KEPT: OnceLock<Vec<(Layering, CenterSet)>> = OnceLock::new();
    KEPT.get_or_init(|| {
        let mut all: Vec<Layering> = Vec::new();
        for m in [2, 4, 6] {
            all.extend(enumerate_layerings(m, None).unwrap());
        }
        all.extend(k8().iter().cloned());
        screen(all, SpectralOptions::default())
            .map(|r| {
                let (l, rep) = r.unwrap();
                let c = embed(&l, &rep).unwrap();
                (l, c)
            })
            .collect()
    })
}

fn configs() -> &'static [SphereConfig] {
    static CONFIGS: OnceLock<Vec<SphereConfig>> = OnceLock::new();
    CONFIGS.get_or_init(|| survivors().iter().map(|(_, c)| build_config(c).unwrap()).collect())
}

fn unit3() -> impl Strategy<Value = [f64; 3]> {
    (-1.0f64..1.0, 0.0f64..(2.0 * PI)).prop_map(|(z, phi)| {
        let s = (1.0 - z * z).sqrt();
        [s * phi.cos(), s * phi.sin(), z]
    })
}

fn support_point() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (0..configs().len(), any::<prop::sample::Index>(), unit3()).prop_map(|(c, i, u)| {
        let config = &configs()[c];
        (c, config.sphere_point(i.index(config.len()), u))
    })
}

fn ambient_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumerated_layerings_validate(idx in any::<prop::sample::Index>()) {
        let l = &k8()[idx.index(k8().len())];
        prop_assert!(validate_layering(&l.rows()).unwrap().valid);
        let perms = permutations_of(l);
        prop_assert!(perms.iter().all(|p| p.is_fixed_point_free_involution()));
        prop_assert_eq!(&Layering::from_permutations(&perms).unwrap(), l);
        for (c, p) in perms.iter().enumerate() {
            prop_assert_eq!(p.apply(0), c + 1);
        }
    }

    #[test]
    fn delta_identity_on_k8(idx in any::<prop::sample::Index>()) {
        prop_assert!(delta_identity_exact(&k8()[idx.index(k8().len())]));
    }

    #[test]
    fn spectral_verdict_matches_gap_threshold(idx in any::<prop::sample::Index>()) {
        let l = &k8()[idx.index(k8().len())];
        let r = spectral_report(l, &SpectralOptions::default()).unwrap();
        prop_assert_eq!(r.embeddable, r.gap >= r.threshold - 1e-6);
        prop_assert!(r.l_eigs[0].abs() < 1e-9);
    }

    #[test]
    fn nearest_and_farthest_bound_sampled_distances(
        (c, _) in support_point(),
        z in ambient_point(16),
        s in any::<prop::sample::Index>(),
        dirs in prop::collection::vec(unit3(), 1000),
    ) {
        let config = &configs()[c];
        let z = &z[..config.d];
        let i = s.index(config.len());
        let nf = nearest_farthest(config, i, z).unwrap();
        prop_assert!(config.distance_to_sphere(i, &nf.nearest) < 1e-12);
        prop_assert!(config.distance_to_sphere(i, &nf.farthest) < 1e-12);
        prop_assert!((dist(&nf.nearest, z) - nf.near).abs() < 1e-12);
        prop_assert!((dist(&nf.farthest, z) - nf.far).abs() < 1e-12);
        let plane: f64 = config.centers[i][3..].iter().zip(&z[3..]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!((nf.plane - plane).abs() < 1e-12);
        for u in dirs {
            let w = config.sphere_point(i, u);
            let d = dist(&w, z);
            prop_assert!(nf.near <= d + 1e-12 && d <= nf.far + 1e-12);
        }
    }

    #[test]
    fn cap_radius_grows_with_the_ball(
        rho in 0.1f64..2.0,
        a in 0.01f64..3.0,
        delta in 0.0f64..2.0,
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let near = delta.hypot(a - rho);
        let far = delta.hypot(a + rho);
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let side = Side::of(a, rho);
        let x1 = cap_radius(rho, near, delta, near + lo * (far - near), side).unwrap().unwrap_or(0.0);
        let x2 = cap_radius(rho, near, delta, near + hi * (far - near), side).unwrap().unwrap_or(0.0);
        prop_assert!(x1 >= 0.0 && x1 <= x2 + 1e-12);
        prop_assert!(cap_area(rho, x2) <= 4.0 * PI * rho * rho + 1e-12);
    }

    #[test]
    fn layer_identities_hold((c, z) in support_point()) {
        let ls = layer_structure(&configs()[c], &z).unwrap();
        prop_assert!(ls.is_complete());
        prop_assert!(ls.max_residual() < 1e-9, "residual {}", ls.max_residual());
    }

    #[test]
    fn cone_membership_is_dilation_invariant((c, z) in support_point(), probe in ambient_point(16)) {
        let config = &configs()[c];
        for x in [z.clone(), probe[..config.d].to_vec()] {
            let base = cone_membership(config, &x, 1e-9);
            for s in [0.5, 2.0, 10.0] {
                prop_assert_eq!(cone_membership(config, &scale(&x, s), 1e-9), base);
            }
        }
        prop_assert!(cone_membership(config, &z, 1e-9));
    }

    #[test]
    fn sigma_is_uniform_on_support((c, z) in support_point(), radius in 0.0f64..=2.0) {
        let v = sigma_ball_analytic(&configs()[c], &z, radius).unwrap();
        prop_assert!((v - PI * radius * radius).abs() < 1e-9);
        for big in [2.0, 2.5, 10.0] {
            prop_assert!((sigma_ball_analytic(&configs()[c], &z, big).unwrap() - 4.0 * PI).abs() < 1e-9);
        }
    }

    #[test]
    fn cap_and_axis_routes_agree(c in 0..configs().len(), x in ambient_point(16), radius in 0.0f64..3.5) {
        let config = &configs()[c];
        let x = &x[..config.d];
        let a = sigma_ball_analytic(config, x, radius).unwrap();
        let b = sigma_ball_axis(config, x, radius).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn measures_are_monotone((c, z) in support_point(), x in ambient_point(16), s in 0.1f64..10.0) {
        let config = &configs()[c];
        let x = &x[..config.d];
        let mut prev = (0.0, 0.0);
        for k in 0..=40 {
            let r = k as f64 * 0.07;
            let sig = sigma_ball_analytic(config, x, r).unwrap();
            let nu = if r > 0.0 { cone_ball_analytic(config, &scale(&z, s), r * s, &Default::default()).unwrap() } else { 0.0 };
            prop_assert!(sig >= prev.0 - 1e-12 && nu >= prev.1 - 1e-9);
            prev = (sig, nu);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn nu_is_uniform_at_every_scale((c, z) in support_point(), t in 0.01f64..4.0) {
        for lambda in [0.1, 1.0, 10.0] {
            let r = t * lambda;
            let v = cone_ball_analytic(&configs()[c], &scale(&z, lambda), r, &Default::default()).unwrap();
            prop_assert!((v - 4.0 / 3.0 * PI * r.powi(3)).abs() < 1e-6, "λ = {lambda}, r = {r}: {v}");
        }
    }
}

#[test]
fn every_survivor_is_antipodal_and_valid() {
    assert_eq!(survivors().len(), 1 + 1 + 5);
    for (l, c) in survivors() {
        assert!(antipodal_defect(c, l) < 1e-9);
        assert!(verify_center_set(c, l).valid);
        assert!(c.q <= l.p().max(1));
    }
}

#[test]
fn tetra8_is_a_survivor() {
    let t = catalog::tetra8_layering();
    assert!(survivors().iter().any(|(l, _)| *l == t));
}

#[test]
fn analytic_and_mc_sigma_agree_off_support() {
    let mut worst: f64 = 0.0;
    for (k, config) in configs().iter().enumerate() {
        for trial in 0..50u64 {
            let x: Vec<f64> = (0..config.d).map(|i| ((trial * 7 + i as u64 * 13 + k as u64) % 17) as f64 / 8.0 - 1.0).collect();
            let radius = 0.1 + (trial % 10) as f64 * 0.25;
            let a = sigma_ball_analytic(config, &x, radius).unwrap();
            let mc = sigma_ball_mc(config, &x, radius, 100_000, trial).unwrap();
            worst = worst.max((a - mc.estimate).abs() / mc.stderr.max(1e-12));
        }
    }
    // More than 350 comparisons; 4σ keeps the test stable under the fixed seeds.
    assert!(worst < 4.0, "worst z-score {worst}");
}

#[test]
fn mc_is_bit_reproducible_across_pool_sizes() {
    let config = &configs()[3];
    let z = config.sphere_point(1, [0.0, 0.6, 0.8]);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            (
                sigma_ball_mc(config, &z, 1.1, 300_000, 9).unwrap(),
                cone_ball_mc(config, &scale(&z, 2.0), 1.7, 300_000, 9).unwrap(),
            )
        })
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.0.estimate.to_bits(), b.0.estimate.to_bits());
    assert_eq!(a.1.estimate.to_bits(), b.1.estimate.to_bits());
}

#[test]
fn negative_control_fails_sigma() {
    for l in enumerate_layerings(6, None).unwrap() {
        let c = truncated_embedding(&l).unwrap();
        let lifted: Vec<Vec<f64>> = c.points.iter().map(|p| [0.0, 0.0, 0.0].iter().chain(p).copied().collect()).collect();
        let config = SphereConfig::new(c.q + 3, c.r, lifted).unwrap();
        let opts = VerifyOptions {
            samples: 20_000,
            ..VerifyOptions::default()
        };
        let reports = verify_uniformity(&config, &opts).unwrap();
        assert!(reports.iter().any(|r| r.kind == forge_core::measure::MeasureKind::Sigma && !r.passed()));
    }
}

fn entries() -> Vec<CatalogEntry> {
    let mut v = vec![catalog::kp_cone(), catalog::rect4().unwrap(), catalog::tetra8().unwrap()];
    for k in 0..=4 {
        v.push(catalog::ck_cone(k).unwrap());
    }
    v
}

#[test]
fn catalog_predicates_agree_in_both_directions() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for e in entries() {
        assert!((e.squared_radius_sum() - 1.0).abs() < 1e-12, "{}", e.name);
        let cfg = &e.config;
        for n in 0..10_000 {
            let probe: Vec<f64> = match n % 3 {
                0 => {
                    let u: [f64; 3] = rand_distr::Distribution::sample(&rand_distr::UnitSphere, &mut rng);
                    scale(&cfg.sphere_point(rng.random_range(0..cfg.len()), u), rng.random_range(0.1..10.0))
                }
                1 => match e.sample_equation_point(&mut rng) {
                    Some(x) => x,
                    None => continue,
                },
                _ => (0..cfg.d).map(|_| rng.random_range(-2.0..2.0)).collect(),
            };
            let on = e.on_support(&probe, 1e-7);
            if e.equations.is_empty() {
                assert_eq!(on, n % 3 == 0);
            } else {
                assert_eq!(e.satisfies_equations(&probe, 1e-7), on, "{} probe {probe:?}", e.name);
            }
            if n % 3 == 0 {
                assert!(e.max_equation_residual(&probe) < 1e-9);
            }
        }
    }
}

#[test]
fn rect4_and_c1_are_congruent() {
    let dists = |c: &SphereConfig| {
        let mut v = Vec::new();
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                v.push(dist(&c.centers[i], &c.centers[j]));
            }
        }
        v.sort_by(f64::total_cmp);
        v
    };
    let a = dists(&catalog::rect4().unwrap().config);
    let b = dists(&catalog::ck_cone(1).unwrap().config);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
    let expect = [1.0, 1.0, 2f64.sqrt(), 2f64.sqrt(), 3f64.sqrt(), 3f64.sqrt()];
    for (x, y) in a.iter().zip(&expect) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn dyadic_unit_norms() {
    for n in 0..=4 {
        let c = dyadic_centers(n);
        assert!(c.points.iter().all(|p| (norm(p) - c.t).abs() < 1e-12));
    }
}
