mod common;

use std::f64::consts::PI;

use common::{same_on_circle, same_on_line};
use faer::{c64, Mat};
use floq::lab::{clean_spectrum, MODE_TOL};
use floq::linalg::expm_hermitian;
use floq::model::{floquet_x_realspace, floquet_x_su2, kicked_2d, Boundary, Frame, ModelParams, Protocol};
use floq::modes::{corner_mode, Place, Target};
use floq::spectral::{
    count_modes, default_ipr_min, eig, eig_unitary_matrix, gaps, gaps_of, ipr, max_residual, mixed_bc_spectrum,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OBC: (Boundary, Boundary) = (Boundary::Open, Boundary::Open);

fn random_unitary(n: usize, seed: u64) -> Mat<c64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Mat::from_fn(n, n, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let h = Mat::from_fn(n, n, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5);
    expm_hermitian(h.as_ref(), 1.0).unwrap()
}

/// `V diag(exp(-i eps)) V^dag` with a random unitary `V`.
fn with_phases(phases: &[f64], seed: u64) -> Mat<c64> {
    let n = phases.len();
    let v = random_unitary(n, seed);
    let d = Mat::from_fn(n, n, |i, j| if i == j { c64::from_polar(1.0, -phases[i]) } else { c64::new(0.0, 0.0) });
    &v * &d * v.adjoint()
}

#[test]
fn prescribed_phases_with_degeneracies() {
    let phases = [0.0, 0.0, 0.0, PI / 2.0, PI / 2.0, -1.0, 2.5, 2.5, -PI, -PI, 0.3, -0.3];
    let u = with_phases(&phases, 11);
    let s = eig_unitary_matrix(u.as_ref()).unwrap();
    assert!(same_on_circle(&s.values, &phases, 1e-9));
    assert!(max_residual(u.as_ref(), &s) < 1e-9);
}

#[test]
fn rejects_non_unitary_input() {
    let mut u = random_unitary(6, 3);
    u[(0, 0)] += c64::new(1e-6, 0.0);
    assert!(eig_unitary_matrix(u.as_ref()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_unitary_residuals(seed in any::<u64>()) {
        let u = random_unitary(16, seed);
        let s = eig_unitary_matrix(u.as_ref()).unwrap();
        prop_assert_eq!(s.len(), 16);
        prop_assert!(max_residual(u.as_ref(), &s) < 1e-10);
        prop_assert!(s.values.iter().all(|&e| (-PI..PI).contains(&e)));
        let v = Mat::from_fn(16, 16, |r, c| s.vector(c).unwrap()[r]);
        let gram = v.adjoint() * &v;
        for i in 0..16 {
            for j in 0..16 {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[(i, j)] - c64::new(want, 0.0)).norm() < 1e-9);
            }
        }
        for &p in &s.iprs {
            prop_assert!((1.0 / 16.0 - 1e-12..=1.0 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn count_modes_is_monotone(theta in 0.0..2.0 * PI, e1 in 1e-10..1e-2f64, e2 in 1e-10..1e-2f64) {
        let p = ModelParams::from_angles(theta, PI, Protocol::KickedV1);
        let s = clean_spectrum(&p, (8, 8), OBC).unwrap();
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let m = default_ipr_min(&s);
        for t in [0.0, PI] {
            prop_assert!(count_modes(&s, t, lo, m) <= count_modes(&s, t, hi, m));
            prop_assert!(count_modes(&s, t, hi, 2.0 * m) <= count_modes(&s, t, hi, m));
        }
    }
}

#[test]
fn ipr_examples() {
    let mut delta = vec![c64::new(0.0, 0.0); 10];
    delta[4] = c64::new(0.0, 1.0);
    assert_eq!(ipr(&delta).unwrap(), 1.0);
    let uniform = vec![c64::new(1.0 / 40.0, 0.0); 1600];
    assert!((ipr(&uniform).unwrap() - 6.25e-4).abs() < 1e-15);
    assert!(ipr(&[c64::new(0.5, 0.0)]).is_err());
}

/// `sum r^(4m) / (sum r^(2m))^2` over `cells` terms.
fn geometric_ipr(r: f64, cells: usize) -> f64 {
    let (r2, r4) = (r * r, r.powi(4));
    let num = (1.0 - r4.powi(cells as i32)) / (1.0 - r4);
    let den = (1.0 - r2.powi(cells as i32)) / (1.0 - r2);
    num / (den * den)
}

#[test]
fn analytic_corner_mode_ipr_is_geometric() {
    let p = ModelParams::new(Protocol::Static, 1.0 / 3.0, 1.0, 0.5 / 3.0, 0.5);
    let cells = 12;
    let (_, v) = corner_mode(Place::LB, Target::Zero, &p, (cells, cells)).unwrap();
    let amps: Vec<c64> = v.iter().copied().collect();
    // The ladder spinor spreads each cell evenly over its two legs.
    let want = 0.5 * geometric_ipr(1.0 / 3.0, cells) * geometric_ipr(1.0 / 3.0, cells);
    assert!((ipr(&amps).unwrap() - want).abs() < 1e-14);
}

#[test]
fn gap_examples() {
    let g = gaps_of(&[0.3, -0.3]);
    assert!((g.gap0 - 0.3).abs() < 1e-15 && (g.gap_pi - (PI - 0.3)).abs() < 1e-15);
    let g = gaps_of(&[-PI, 0.1]);
    assert!(g.gap_pi == 0.0 && (g.gap0 - 0.1).abs() < 1e-15);
}

fn bloch_bands(p: &ModelParams, n: usize) -> Vec<f64> {
    (0..n)
        .flat_map(|j| {
            let e = floquet_x_su2(2.0 * PI * j as f64 / n as f64 - PI, p, Frame::Raw).unwrap().quasienergy();
            [e, -e]
        })
        .collect()
}

#[test]
fn bloch_gaps_on_critical_lines() {
    let g = gaps_of(&bloch_bands(&ModelParams::new(Protocol::KickedV1, 1.1, PI - 1.1, 0.0, 0.0), 2048));
    assert!(g.gap_pi < 1e-3 && g.gap0 > 0.1, "{g:?}");
    let j = 2.0 * PI / 3.0;
    let g = gaps_of(&bloch_bands(&ModelParams::new(Protocol::KickedV1, j, j, 0.0, 0.0), 2048));
    assert!(g.gap0 < 1e-3, "{g:?}");
}

#[test]
fn counts_at_critical_points() {
    let at = |theta: f64| clean_spectrum(&ModelParams::from_angles(theta, PI, Protocol::KickedV1), (40, 40), OBC).unwrap();
    let s = at(0.75 * PI);
    assert_eq!(s.len(), 6400);
    assert_eq!(count_modes(&s, 0.0, 1e-6, 0.05), 4);
    assert_eq!(count_modes(&s, PI, 1e-6, 0.05), 0);
    let s = at(1.25 * PI);
    assert_eq!(count_modes(&s, PI, 1e-6, 0.05), 4);
    assert_eq!(count_modes(&s, 0.0, MODE_TOL, default_ipr_min(&s)), 0);
}

#[test]
fn mixed_boundaries_have_no_localized_modes() {
    let p = ModelParams::from_angles(0.75 * PI, PI, Protocol::KickedV1);
    let cells = 20;
    for bc in [(Boundary::Periodic, Boundary::Open), (Boundary::Open, Boundary::Periodic)] {
        let s = mixed_bc_spectrum(&p, bc, (cells, cells)).unwrap();
        assert_eq!(s.len(), 4 * cells * cells);
        let top = s.iprs.iter().copied().fold(0.0, f64::max);
        assert!(top < 2.0 / cells as f64, "{bc:?}: {top}");
    }
    let both = clean_spectrum(&p, (cells, cells), OBC).unwrap();
    assert!(both.iprs.iter().copied().fold(0.0, f64::max) > 0.1);
}

#[test]
fn mixed_path_matches_dense_path() {
    let p = ModelParams::from_angles(1.1, 2.4, Protocol::KickedV1);
    for bc in [(Boundary::Periodic, Boundary::Open), (Boundary::Open, Boundary::Periodic)] {
        let mixed = mixed_bc_spectrum(&p, bc, (5, 4)).unwrap();
        let u = kicked_2d(&p, (5, 4), bc, Frame::Raw).unwrap().to_dense();
        let dense = eig_unitary_matrix(u.as_ref()).unwrap();
        assert!(same_on_circle(&mixed.values, &dense.values, 1e-9));
    }
}

#[test]
fn trivial_y_factor_repeats_x_spectrum() {
    let p = ModelParams::new(Protocol::KickedV1, 0.8, 2.2, 0.0, 0.0);
    let (lx, ly) = (6, 3);
    let x = eig(&floquet_x_realspace(lx, Boundary::Open, &p).unwrap()).unwrap();
    let repeated: Vec<f64> = x.values.iter().flat_map(|&e| std::iter::repeat_n(e, 2 * ly)).collect();
    let s = mixed_bc_spectrum(&p, (Boundary::Open, Boundary::Periodic), (lx, ly)).unwrap();
    assert!(same_on_circle(&s.values, &repeated, 1e-10));
    let full = clean_spectrum(&p, (lx, ly), OBC).unwrap();
    assert!(same_on_circle(&full.values, &repeated, 1e-10));
    let g = gaps(&full);
    let gx = gaps(&x);
    assert!(same_on_line(&[g.gap0, g.gap_pi], &[gx.gap0, gx.gap_pi], 1e-12));
}
