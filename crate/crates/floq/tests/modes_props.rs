use std::f64::consts::PI;

use faer::{c64, Col};
use floq::lab::{clean_operator, clean_spectrum, observed_counts, table_points, MODE_TOL};
use floq::model::{
    floquet_x_realspace, kicked_2d, realspace_h, Boundary, ChainModel, Frame, ModelParams, Protocol, Repr,
};
use floq::modes::{
    corner_mode, corner_modes, fit_decay, kicked_decays, kicked_edge_mode, orthonormalize, static_edge_mode,
    subspace_overlap, x_marginal, Place, Target,
};
use floq::spectral::{default_ipr_min, eig};
use proptest::prelude::*;

const OBC: (Boundary, Boundary) = (Boundary::Open, Boundary::Open);

fn apply(op: &floq::model::LatticeOperator, v: &Col<c64>) -> Col<c64> {
    let Repr::Dense(m) = op.repr() else { panic!("expected a dense chain operator") };
    m * v
}

fn residual(a: &Col<c64>, b: &Col<c64>) -> f64 {
    (a - b).norm_l2()
}

#[test]
fn ssh_edge_mode_example() {
    let p = ModelParams::new(Protocol::Static, 0.0, 0.0, 0.5, 1.0);
    let (m, v) = static_edge_mode(ChainModel::Ssh, Place::B, &p, 100).unwrap();
    assert!(m.normalizable);
    assert!((v.norm_l2() - 1.0).abs() < 1e-14);
    for cell in 0..20 {
        assert_eq!(v[2 * cell + 1], c64::new(0.0, 0.0));
        assert!(((v[2 * cell + 2] / v[2 * cell]) - c64::new(-0.5, 0.0)).norm() < 1e-12);
    }
    let h = realspace_h(ChainModel::Ssh, 100, Boundary::Open, &p).unwrap();
    assert!(apply(&h, &v).norm_l2() < 1e-10);
}

#[test]
fn ladder_edge_mode_examples() {
    let crit = ModelParams::new(Protocol::Static, 0.7, -0.7, 0.0, 0.0);
    assert!(!static_edge_mode(ChainModel::Cl, Place::L, &crit, 30).unwrap().0.normalizable);
    let flat = ModelParams::new(Protocol::Static, 0.0, 1.0, 0.0, 0.0);
    let (_, v) = static_edge_mode(ChainModel::Cl, Place::L, &flat, 30).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert!((v[0] - c64::new(s, 0.0)).norm() < 1e-15);
    assert!((v[1] - c64::new(0.0, -s)).norm() < 1e-15);
    assert!(v.iter().skip(2).all(|z| z.norm() == 0.0));
    let h = realspace_h(ChainModel::Cl, 30, Boundary::Open, &flat).unwrap();
    assert!(apply(&h, &v).norm_l2() < 1e-14);
}

#[test]
fn kicked_decays_example_and_eigenrelation() {
    let p = ModelParams::new(Protocol::KickedV1, PI / 2.0, 0.75 * PI, 0.0, 0.0);
    let (d0, dpi) = kicked_decays(&p);
    let t = (0.375 * PI).tan();
    assert!((d0.unwrap() + 1.0 / t).abs() < 1e-12);
    assert!((dpi.unwrap() - 1.0 / t).abs() < 1e-12);
    let u = floquet_x_realspace(120, Boundary::Open, &p).unwrap();
    for side in [Place::L, Place::R] {
        for (target, phase) in [(Target::Zero, 1.0), (Target::Pi, -1.0)] {
            let (m, v) = kicked_edge_mode(side, target, &p, 120).unwrap();
            assert!(m.normalizable);
            let uv = apply(&u, &v);
            let want = Col::from_fn(v.nrows(), |i| v[i] * phase);
            assert!(residual(&uv, &want) < 1e-8, "{side:?} {target:?}");
        }
    }
}

#[test]
fn kicked_decays_on_critical_lines() {
    for j in [0.3, 1.0, 2.0, 2.9, 4.0, 5.5] {
        let p = ModelParams::new(Protocol::KickedV1, j, j, 0.0, 0.0);
        let (d0, dpi) = kicked_decays(&p);
        assert!((d0.unwrap() + 1.0).abs() < 1e-12);
        let dpi = dpi.unwrap();
        assert!((dpi - 1.0 / (j / 2.0).tan().powi(2)).abs() < 1e-9);
        assert_eq!(dpi.abs() < 1.0, j > PI / 2.0 && j < 1.5 * PI, "J = {j}");
        let q = ModelParams::new(Protocol::KickedV1, j, PI - j, 0.0, 0.0);
        let (d0, dpi) = kicked_decays(&q);
        assert!((dpi.unwrap().abs() - 1.0).abs() < 1e-9);
        if j < PI {
            assert_eq!(d0.unwrap().abs() < 1.0, j < PI / 2.0, "J = {j}");
        }
    }
}

#[test]
fn static_corner_example() {
    let p = ModelParams::new(Protocol::Static, 0.5, 1.0, 0.5, 1.0);
    for (m, v) in corner_modes(&p, Target::Zero, (30, 30)).unwrap() {
        assert!(m.normalizable);
        assert_eq!(m.decay_x, Some(-0.5));
        assert_eq!(m.decay_y, Some(-0.5));
        assert!((v.norm_l2() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn kicked_corner_predicates() {
    let p = ModelParams::from_angles(0.75 * PI, PI, Protocol::KickedV1);
    assert!(corner_mode(Place::LB, Target::Zero, &p, (20, 20)).unwrap().0.normalizable);
    assert!(!corner_mode(Place::LB, Target::Pi, &p, (20, 20)).unwrap().0.normalizable);
    assert!(corner_mode(Place::L, Target::Zero, &p, (20, 20)).is_err());
}

#[test]
fn missing_subspace_is_an_error() {
    let p = ModelParams::from_angles(0.75 * PI, PI, Protocol::KickedV1);
    let spec = clean_spectrum(&p, (20, 20), OBC).unwrap();
    let vecs: Vec<_> = corner_modes(&p, Target::Pi, (20, 20)).unwrap().into_iter().map(|(_, v)| v).collect();
    assert!(subspace_overlap(&vecs, &spec, PI, MODE_TOL).is_err());
}

#[test]
fn predicates_predict_counts() {
    for (theta, phi) in table_points() {
        let p = ModelParams::from_angles(theta, phi, Protocol::KickedV1);
        let predict = |t: Target| {
            let modes = corner_modes(&p, t, (40, 40)).unwrap();
            4 * modes.iter().all(|(m, _)| m.normalizable) as usize
        };
        let spec = clean_spectrum(&p, (40, 40), OBC).unwrap();
        assert_eq!(observed_counts(&spec, &p, MODE_TOL), (predict(Target::Zero), predict(Target::Pi)), "({theta}, {phi})");
    }
}

#[test]
fn fitted_decay_matches_closed_form() {
    for (theta, target) in [(PI, Target::Zero), (PI, Target::Pi), (0.5 * PI, Target::Zero)] {
        let p = ModelParams::from_angles(theta, PI, Protocol::KickedV1);
        let op = clean_operator(&p, (60, 60), OBC).unwrap();
        let spec = eig(&op).unwrap();
        let idx = spec.select(target.value(), MODE_TOL, default_ipr_min(&spec));
        assert_eq!(idx.len(), 4);
        let vecs: Vec<_> = idx.iter().map(|&i| spec.vector(i).unwrap()).collect();
        let fitted = fit_decay(&x_marginal(&vecs, op.basis()));
        let (d0, dpi) = kicked_decays(&p);
        let want = if target == Target::Zero { d0 } else { dpi }.unwrap().abs();
        assert!((fitted - want).abs() < 0.05 * want, "{theta} {target:?}: {fitted} vs {want}");
    }
}

/// Composite chiral operator of the symmetric frames: `sy` on the ladder
/// legs times `tz` on the SSH sublattices.
fn chiral(v: &Col<c64>, ly: usize) -> Col<c64> {
    let per_x = 2 * ly;
    Col::from_fn(v.nrows(), |i| {
        let (row_x, row_y) = (i / per_x, i % per_x);
        let partner = (row_x ^ 1) * per_x + row_y;
        let sy = if row_x % 2 == 0 { c64::new(0.0, -1.0) } else { c64::new(0.0, 1.0) };
        let tz = if row_y % 2 == 0 { 1.0 } else { -1.0 };
        sy * v[partner] * tz
    })
}

#[test]
fn chiral_partner_stays_in_eigenspace() {
    let (lx, ly) = (30, 30);
    for (theta, frame) in [(PI, Frame::Sym1), (PI, Frame::Sym2), (0.75 * PI, Frame::Sym1)] {
        let p = ModelParams::from_angles(theta, PI, Protocol::KickedV1);
        let spec = eig(&kicked_2d(&p, (lx, ly), OBC, frame).unwrap()).unwrap();
        for target in [0.0, PI] {
            let idx: Vec<usize> = (0..spec.len()).filter(|&i| spec.distance(spec.values[i], target) < 1e-6).collect();
            let basis: Vec<_> = idx.iter().map(|&i| spec.vector(i).unwrap()).collect();
            for v in &basis {
                let sv = chiral(v, ly);
                let mut rest = sv.clone();
                for w in &basis {
                    let c = w.adjoint() * &sv;
                    for r in 0..rest.nrows() {
                        rest[r] -= w[r] * c;
                    }
                }
                assert!(rest.norm_l2() < 1e-8, "{theta} {frame:?} {target}");
            }
        }
    }
}

proptest! {
    // Most random points decay too slowly for 40 cells and are rejected.
    #![proptest_config(ProptestConfig { cases: 32, max_global_rejects: 8192, ..ProptestConfig::default() })]

    #[test]
    fn corners_are_fourfold(theta in 0.0..2.0 * PI, phi in 0.0..2.0 * PI, pi_target in any::<bool>()) {
        let p = ModelParams::from_angles(theta, phi, Protocol::KickedV1);
        let target = if pi_target { Target::Pi } else { Target::Zero };
        let cells = 40;
        let modes = match corner_modes(&p, target, (cells, cells)) {
            Ok(m) => m,
            // Exact tan poles are measure zero; skip them.
            Err(_) => return Ok(()),
        };
        let flags: Vec<bool> = modes.iter().map(|(m, _)| m.normalizable).collect();
        prop_assert!(flags.iter().all(|&f| f == flags[0]));
        let (dx, dy) = (modes[0].0.decay_x.unwrap().abs(), modes[0].0.decay_y.unwrap().abs());
        prop_assume!(flags[0] && dx.max(dy).powi(cells as i32) < 1e-10);
        for i in 0..4 {
            for j in i + 1..4 {
                let o = (modes[i].1.adjoint() * &modes[j].1).norm();
                prop_assert!(o < 1e-8, "corners {i},{j}: {o}");
            }
        }
        let vecs: Vec<_> = modes.into_iter().map(|(_, v)| v).collect();
        prop_assert!(orthonormalize(&vecs).is_ok());
    }
}
