use std::f64::consts::PI;

use faer::c64;
use floq::invariants::{
    build_mapping, closed_form_kicked_table, composite_invariants, kicked_invariants, limiting_rule,
    polynomial_roots, sample_loop, static_x_invariants, v2_critical_jx1, winding_integral, x_sector_gaps,
    zero_pole_invariant, Closing, MappingKind, WINDING_GRID,
};
use floq::model::{Frame, ModelParams, Protocol};
use proptest::prelude::*;

fn v1(jx0: f64, jx1: f64) -> ModelParams {
    ModelParams::new(Protocol::KickedV1, jx0, jx1, 0.5, 1.0)
}

#[test]
fn worked_kicked_points() {
    let cases = [
        (PI / 3.0, PI / 3.0, (0, 0)),
        (2.0 * PI / 3.0, 2.0 * PI / 3.0, (0, 1)),
        (PI / 3.0, 2.0 * PI / 3.0, (1, 0)),
        (PI / 2.0, PI / 2.0, (0, 0)),
        (PI / 2.0, PI, (1, 1)),
        (PI / 4.0, PI / 2.0, (1, 0)),
        (0.75 * PI, 0.75 * PI, (0, 1)),
    ];
    for (a, b, want) in cases {
        let r = kicked_invariants(&v1(a, b)).unwrap();
        assert_eq!(r.omega_pair, want, "({a}, {b})");
        assert_eq!(closed_form_kicked_table(&v1(a, b)), want);
    }
}

#[test]
fn static_ladder_invariant_and_half_winding() {
    let at = |a: f64, b: f64| static_x_invariants(&ModelParams::new(Protocol::Static, a, b, 0.5, 1.0)).unwrap();
    assert_eq!(at(0.5, 1.0).omega_pair.0, 1);
    assert_eq!(at(1.0, 0.5).omega_pair.0, 0);
    let crit = at(0.8, 0.8);
    assert_eq!(crit.closing, Closing::ZeroClosing);
    assert!((crit.w_pair.0 - 0.5).abs() < 1e-9, "{:?}", crit.w_pair);
    assert!(!crit.w_resolved);
}

#[test]
fn kicked_half_windings_at_criticality() {
    // On J_x0 = J_x1 the zero gap closes; the averaged winding sits halfway.
    let r = kicked_invariants(&v1(2.0 * PI / 3.0, 2.0 * PI / 3.0)).unwrap();
    assert_eq!(r.closing, Closing::ZeroClosing);
    assert!((r.w_pair.0 - 0.5).abs() < 1e-6, "{:?}", r.w_pair);
    assert!((r.w_pair.1 - 1.0).abs() < 1e-6, "{:?}", r.w_pair);
}

#[test]
fn roots_of_known_polynomial() {
    let want = [c64::new(0.5, 0.0), c64::new(-0.2, 0.7), c64::new(2.0, -1.0)];
    // (z - a)(z - b)(z - c) in ascending powers.
    let (a, b, c) = (want[0], want[1], want[2]);
    let one = c64::new(1.0, 0.0);
    let coeffs = [-(a * b * c), a * b + a * c + b * c, -(a + b + c), one];
    let roots = polynomial_roots(&coeffs).unwrap();
    assert_eq!(roots.len(), 3);
    for w in want {
        assert!(roots.iter().any(|r| (r - w).norm() < 1e-12), "{w} not in {roots:?}");
    }
}

#[test]
fn second_protocol_critical_values() {
    let (jx0, jx1p) = (PI / 2.0, PI / 2.0);
    // With J'_x1 = pi/2 only nu = 0 fits the ellipse, so J_x1 = |mu pi - pi/2|.
    let want = [0.5 * PI, 1.5 * PI, 2.5 * PI];
    let got: Vec<f64> = v2_critical_jx1(jx0, jx1p, 3.0 * PI).into_iter().map(|(j, _)| j).collect();
    assert_eq!(got.len(), want.len(), "{got:?}");
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-12);
        let (gaps, closing) = x_sector_gaps(&ModelParams::kicked_v2(jx0, *g, jx1p, 0.5, 1.0)).unwrap();
        assert_ne!(closing, Closing::Gapped);
        assert!(gaps.gap0.min(gaps.gap_pi) < 1e-6);
    }
}

#[test]
fn second_protocol_phases_and_boundaries() {
    let at = |j: f64| composite_invariants(&ModelParams::kicked_v2(PI / 2.0, j, PI / 2.0, 0.5, 1.0)).unwrap();
    assert_eq!(at(1.0).omega_pair, (0, 0));
    assert_eq!(at(PI).omega_pair, (1, 1));
    assert_eq!(at(2.0 * PI).omega_pair, (2, 2));
    assert_eq!(at(2.9 * PI).omega_pair, (3, 3));
    // On the boundaries the smaller neighbour wins.
    assert_eq!(at(0.5 * PI).omega_pair, (0, 0));
    let b1 = at(1.5 * PI);
    assert_eq!((b1.omega_pair, b1.predicted), ((1, 1), (4, 4)));
    let b2 = at(2.5 * PI);
    assert_eq!((b2.omega_pair, b2.predicted), ((2, 2), (8, 8)));
}

#[test]
fn gapped_sample_near_the_circle_is_rejected() {
    let p = v1(1.0, 1.0 + 1e-12);
    let f = build_mapping(MappingKind::KickedX, &p, Frame::Sym1).unwrap();
    assert!(zero_pole_invariant(&f, Closing::Gapped).is_err());
}

#[test]
fn limiting_rule_on_every_critical_line() {
    for nu in -1..=4 {
        for sign in [1.0, -1.0] {
            for k in 0..16 {
                let jx0 = (k as f64 + 0.29) * PI / 8.0;
                let jx1 = if sign > 0.0 { nu as f64 * PI - jx0 } else { jx0 - nu as f64 * PI };
                if !(0.05..2.0 * PI - 0.05).contains(&jx1) {
                    continue;
                }
                let p = v1(jx0, jx1);
                let r = kicked_invariants(&p).unwrap();
                assert_ne!(r.closing, Closing::Gapped);
                assert_eq!(limiting_rule(&p, r.closing).unwrap(), r.omega_pair, "{p:?}");
            }
        }
    }
}

fn rounded(w: (f64, f64)) -> (i32, i32) {
    (w.0.round() as i32, w.1.round() as i32)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn winding_equals_zero_pole_when_gapped(jx0 in 0.0..2.0 * PI, jx1 in 0.0..2.0 * PI) {
        let r = kicked_invariants(&v1(jx0, jx1)).unwrap();
        // Within a hair of a closing the sampled loop grazes the origin.
        let g = &r.gap_report;
        prop_assume!(r.closing == Closing::Gapped && g.gap0.min(g.gap_pi) > 1e-2);
        prop_assert!(r.w_resolved);
        prop_assert_eq!(rounded(r.w_pair), r.omega_pair);
        prop_assert!((r.w_pair.0 - r.omega_pair.0 as f64).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn second_protocol_winding_equals_zero_pole(jx0 in 0.1..3.0, jx1 in 0.1..3.0 * PI, jx1p in 0.3..2.5) {
        let p = ModelParams::kicked_v2(jx0, jx1, jx1p, 0.5, 1.0);
        let (g, closing) = x_sector_gaps(&p).unwrap();
        prop_assume!(closing == Closing::Gapped && g.gap0.min(g.gap_pi) > 1e-2);
        let r = kicked_invariants(&p).unwrap();
        prop_assert!(r.w_resolved);
        prop_assert_eq!(rounded(r.w_pair), r.omega_pair);
    }

    #[test]
    fn polynomial_winding_counts_inner_roots(
        re in prop::collection::vec(-2.0..2.0f64, 1..6),
        im in prop::collection::vec(-2.0..2.0f64, 6),
    ) {
        let roots: Vec<c64> = re.iter().zip(&im).map(|(&a, &b)| c64::new(a, b)).collect();
        prop_assume!(roots.iter().all(|r| (r.norm() - 1.0).abs() > 0.05));
        let inside = roots.iter().filter(|r| r.norm() < 1.0).count() as f64;
        let samples = sample_loop(WINDING_GRID, |k| {
            let z = c64::from_polar(1.0, k);
            roots.iter().fold(c64::new(1.0, 0.0), |acc, r| acc * (z - r))
        });
        let w = winding_integral(&samples).unwrap();
        prop_assert!(w.resolved);
        prop_assert!((w.value - inside).abs() < 1e-9);
    }
}
