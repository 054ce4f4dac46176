use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use fk_ground::comparison::{contact_propagation, scenario_graph, ContactScenario, CONTACT_TOL, SCENARIO_TOL};
use fk_ground::foliation::{bracket_witness, build_foliation, check_axioms, Generator};
use fk_ground::graph::{build_graph, DEFAULT_EDGE_THRESHOLD};
use fk_ground::groundstate::{minimize_window, MinimizeOptions};
use fk_ground::hull::HullFunction;
use fk_ground::model::{builtin, Field, FourierPotential, InteractionSpec, LatticeConfiguration, Perturbation};
use fk_ground::site::{cube, interval, widen, Site, SiteSet};

fn spec_for(kind: u8) -> InteractionSpec {
    let v = Some(Arc::new(FourierPotential::cosine_demo(0.05, vec![1.0])));
    match kind % 5 {
        0 => builtin::fk_periodic(1, v).unwrap(),
        1 => builtin::fk_quasiperiodic(Arc::new(FourierPotential::cosine_demo(0.01, vec![1.0, 2f64.sqrt()]))).unwrap(),
        2 => builtin::long_range_pair(&builtin::geometric_coefficients(3), v).unwrap(),
        3 => builtin::three_body(0.5, v).unwrap(),
        _ => builtin::blocks(3).unwrap(),
    }
}

fn perturbation(values: &[(i64, f64)]) -> Perturbation {
    values.iter().map(|&(n, v)| (Site::d1(n), v)).collect()
}

fn background(omega: f64, beta: f64, noise: &[f64]) -> LatticeConfiguration {
    let phi = noise.iter().enumerate().map(|(i, &v)| (Site::d1(i as i64 - 5), v)).collect();
    LatticeConfiguration::linear(1, omega, beta).with_perturbation(phi)
}

fn random_hull(coeffs: &[(i64, i64, f64, f64)]) -> HullFunction {
    let mut h = HullFunction::zero(vec![1.0, 2f64.sqrt()], 0.618_033_988_749_894_9, 3).unwrap();
    for &(a, b, re, im) in coeffs {
        if (a, b) != (0, 0) {
            h.set_coeff(&[a, b], Complex64::new(re, im)).unwrap();
        }
    }
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relative_energy_ignores_anchor_growth(
        kind in 0u8..5,
        omega in 0.0..1.0f64,
        beta in -1.0..1.0f64,
        noise in prop::collection::vec(-0.5..0.5f64, 11),
        phi in prop::collection::vec((-3i64..=3, -1.0..1.0f64), 1..4),
        extra in 1i64..6,
    ) {
        let spec = spec_for(kind);
        let u = background(omega, beta, &noise);
        let phi = perturbation(&phi);
        let support: SiteSet = phi.keys().copied().collect();
        let g0 = spec.relative_energy(&u, &phi, &support).unwrap();
        let g1 = spec.relative_energy(&u, &phi, &widen(&support, extra as u64)).unwrap();
        prop_assert!((g0 - g1).abs() <= 1e-12, "{g0} vs {g1}");
        prop_assert_eq!(spec.relative_energy(&u, &Perturbation::new(), &support).unwrap(), 0.0);
    }

    #[test]
    fn hessian_is_exactly_symmetric(
        kind in 0u8..5,
        omega in 0.0..1.0f64,
        noise in prop::collection::vec(-0.5..0.5f64, 11),
        p in -3i64..=3,
        d in -3i64..=3,
    ) {
        let spec = spec_for(kind);
        let u = background(omega, 0.0, &noise);
        let (p, q) = (Site::d1(p), Site::d1(p + d));
        prop_assert_eq!(spec.hessian_entry(&u, &p, &q).unwrap(), spec.hessian_entry(&u, &q, &p).unwrap());
    }

    #[test]
    fn translations_compose(
        coeffs in prop::collection::vec((-3i64..=3, -3i64..=3, -0.1..0.1f64, -0.1..0.1f64), 1..6),
        b1 in -2.0..2.0f64,
        b2 in -2.0..2.0f64,
    ) {
        let h = random_hull(&coeffs);
        let a = h.translate(b1).translate(b2);
        let b = h.translate(b1 + b2);
        prop_assert!((a.offset() - b.offset()).abs() <= 1e-12);
        for (k, c) in b.modes() {
            prop_assert!((a.coeff(&k) - c).norm() <= 1e-12, "mode {:?}", k);
        }
        let back = h.translate(b1).translate(-b1);
        for (k, c) in h.modes() {
            prop_assert!((back.coeff(&k) - c).norm() <= 1e-14);
        }
    }

    #[test]
    fn potential_derivative_matches_differences(
        theta in prop::collection::vec(0.0..1.0f64, 2),
        eps in 0.001..0.1f64,
    ) {
        let v = FourierPotential::cosine_demo(eps, vec![1.0, 2f64.sqrt()]);
        let h = 1e-6;
        let shift = |s: f64| -> Vec<f64> { theta.iter().zip(v.alpha()).map(|(t, a)| t + s * a).collect() };
        let fd = (v.value(&shift(h)) - v.value(&shift(-h))) / (2.0 * h);
        prop_assert!((v.d_alpha(&theta) - fd).abs() <= 1e-7);
    }

    #[test]
    fn graph_distance_is_a_metric(
        couplings in prop::collection::vec(prop_oneof![Just(0.0), Just(-0.5)], 1..4),
        lo in -6i64..0,
        len in 2i64..10,
        picks in prop::collection::vec((0usize..64, 0usize..64, 0usize..64), 8),
    ) {
        let mut couplings = couplings;
        couplings.push(-0.25);
        let spec = builtin::long_range_pair(&couplings, None).unwrap();
        let window = interval(lo, lo + len);
        let probe = [LatticeConfiguration::linear(1, 0.3, 0.0)];
        let g = build_graph(&spec, &probe, &window, DEFAULT_EDGE_THRESHOLD).unwrap();
        let sites: Vec<Site> = window.iter().copied().collect();
        let n = sites.len();
        for (a, b, c) in picks {
            let (x, y, z) = (sites[a % n], sites[b % n], sites[c % n]);
            let (dxy, dyx) = (g.distance(&x, &y).unwrap(), g.distance(&y, &x).unwrap());
            prop_assert_eq!(dxy, dyx);
            prop_assert_eq!(g.distance(&x, &x).unwrap(), Some(0));
            if x != y {
                prop_assert_ne!(dxy, Some(0));
            }
            if let (Some(xy), Some(yz), Some(xz)) = (dxy, g.distance(&y, &z).unwrap(), g.distance(&x, &z).unwrap()) {
                prop_assert!(xz <= xy + yz);
            }
            let pair: SiteSet = [x, z].into_iter().collect();
            if xz_reachable(&g, &x, &z) {
                let con = g.connected_hull(&pair).unwrap();
                prop_assert!(con.is_superset(&pair));
                prop_assert_eq!(g.components_of(&con).len(), 1);
            }
        }
    }

    #[test]
    fn frontier_of_a_proper_subset_grows(lo in -5i64..0, len in 3i64..12, cut in 1usize..11) {
        let spec = builtin::fk_periodic(1, None).unwrap();
        let window = interval(lo, lo + len - 1);
        let probe = [LatticeConfiguration::linear(1, 0.3, 0.0)];
        let g = build_graph(&spec, &probe, &window, DEFAULT_EDGE_THRESHOLD).unwrap();
        let sub: SiteSet = window.iter().copied().take(cut.min(len as usize - 1)).collect();
        prop_assert_eq!(g.frontier_grows(&sub).unwrap(), Some(true));
    }

    #[test]
    fn contact_certificate_strictly_contains_the_window(
        lo in -4i64..0,
        len in 2i64..7,
        contact in 0usize..7,
        omega in 0.0..1.0f64,
        magnitude in 0.05..1.0f64,
        negative in any::<bool>(),
    ) {
        let spec = builtin::fk_periodic(1, None).unwrap();
        let window = interval(lo, lo + len - 1);
        let hi = lo + len - 1;
        let sign = if negative { -1.0 } else { 1.0 };
        let sc = ContactScenario {
            base: LatticeConfiguration::linear(1, omega, 0.0),
            eta: perturbation(&[(hi + 3, sign * magnitude)]),
            contact_site: Site::d1(lo + (contact as i64 % len)),
            window: window.clone(),
        };
        let g = scenario_graph(&spec, &sc).unwrap();
        let r1 = contact_propagation(&spec, &g, &sc, SCENARIO_TOL, CONTACT_TOL).unwrap();
        let r2 = contact_propagation(&spec, &g, &sc, SCENARIO_TOL, CONTACT_TOL).unwrap();
        prop_assert!(r1.certified.is_superset(&window) && r1.certified.len() > window.len());
        prop_assert_eq!(r1.certified, r2.certified);
    }

    #[test]
    fn window_gamma_is_monotone_and_stationary(beta in -1.0..1.0f64, omega in 0.0..1.0f64) {
        // (2π)²ε stays below the smallest Dirichlet eigenvalue of a 7-site
        // window, so each window problem has a single critical point.
        let spec = builtin::fk_periodic(1, Some(Arc::new(FourierPotential::cosine_demo(0.002, vec![1.0])))).unwrap();
        let u = LatticeConfiguration::linear(1, omega, beta);
        let opts = MinimizeOptions::default();
        let mut last = f64::NEG_INFINITY;
        for r in 0..4 {
            let w = interval(-r, r);
            let m = minimize_window(&spec, &u, &w, &opts).unwrap();
            prop_assert!(m.gamma_star >= last - 1e-12, "{} after {}", m.gamma_star, last);
            last = m.gamma_star;
            let moved = u.perturbed(&m.phi_star);
            for s in &w {
                prop_assert!(spec.residual(&moved, s).unwrap().abs() < opts.stationarity_tol);
            }
            let support: SiteSet = m.phi_star.keys().copied().collect();
            if !support.is_empty() {
                let g0 = spec.relative_energy(&u, &m.phi_star, &support).unwrap();
                let g1 = spec.relative_energy(&u, &m.phi_star, &widen(&support, 3)).unwrap();
                prop_assert!((g0 - g1).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn members_cross_every_value(v in -5.0..5.0f64, n in -10i64..10) {
        let spec = builtin::fk_periodic(1, None).unwrap();
        let gen = Generator::Linear { dim: 1, omega: 0.3 };
        let fam = build_foliation(&spec, gen.clone(), &fk_ground::foliation::default_beta_grid(21), &interval(-12, 12), None).unwrap();
        let s = Site::d1(n);
        if let Some(b) = bracket_witness(&gen, &fam, &s, v) {
            prop_assert!((gen.value(&s, b) - v).abs() < 1e-9);
        }
    }
}

fn xz_reachable(g: &fk_ground::graph::InteractionGraph, x: &Site, z: &Site) -> bool {
    g.distance(x, z).unwrap().is_some()
}

#[test]
fn axiom_pass_survives_sub_windows() {
    let spec = builtin::fk_periodic(2, None).unwrap();
    let gen = Generator::Linear { dim: 2, omega: 0.3 };
    let grid = fk_ground::foliation::default_beta_grid(21);
    let big = cube(2, -4, 4);
    let fam = build_foliation(&spec, gen.clone(), &grid, &big, None).unwrap();
    assert!(check_axioms(&fam, &[0.0, 1.7]).unwrap().all_pass());
    for (lo, hi) in [(-1, 1), (0, 3), (-4, -2)] {
        let sub = cube(2, lo, hi);
        assert!(check_axioms(&fam.restrict(&sub), &[0.0, 1.7]).unwrap().all_pass());
    }
    let u = gen.member(0.2);
    for s in &big {
        assert!(spec.residual(&u, s).unwrap().abs() < 1e-12);
        assert!(u.value(s).is_finite());
    }
}
