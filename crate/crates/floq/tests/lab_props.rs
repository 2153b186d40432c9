mod common;

use std::f64::consts::PI;

use common::same_on_circle;
use floq::lab::{
    clean_spectrum, corner_side, decay_bound, required_length, robustness_experiment,
    scan_phase_diagram, trajectory_spectra, verify_one, Axis, Perturbation, RobustnessSpec, ScanKind, ScanSpec,
    TrajectorySpec, BC_COMBOS, MODE_TOL, RELAXED_TOL,
};
use floq::model::{Boundary, Deltas, ModelParams, Protocol};
use floq::modes::Target;
use floq::spectral::{count_modes, default_ipr_min};

const OBC: (Boundary, Boundary) = (Boundary::Open, Boundary::Open);

#[test]
fn axis_layouts() {
    let e = Axis::endpoints(0.0, 1.0, 5);
    assert_eq!(e.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    let c = Axis::centered(0.0, 1.0, 4);
    assert_eq!(c.values(), vec![0.125, 0.375, 0.625, 0.875]);
    assert_eq!(c.step(), 0.25);
}

fn distance_to(x: f64, loci: &[f64]) -> f64 {
    loci.iter().map(|l| (x - l).abs()).fold(f64::INFINITY, f64::min)
}

#[test]
fn kicked_scan_boundaries_follow_closing_loci() {
    let axis = Axis::endpoints(0.0, 2.0 * PI, 33);
    let grid = scan_phase_diagram(&ScanSpec { kind: ScanKind::ThetaPhi, a: axis, b: axis }).unwrap();
    assert_eq!(grid.labels(), vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    assert!(grid.sandwich_violations().is_empty());
    let theta_loci = [0.25 * PI, 0.75 * PI, 1.25 * PI, 1.75 * PI];
    let phi_loci = [0.5 * PI, 1.5 * PI];
    for e in &grid.boundaries {
        let (a, b) = e.at.expect("every boundary edge is located");
        let (f, t) = (&grid.points[e.from], &grid.points[e.to]);
        let d = if f.a != t.a { distance_to(a, &theta_loci) } else { distance_to(b, &phi_loci) };
        assert!(d < 1e-9, "edge at ({a}, {b})");
        assert!(e.critical.is_some());
    }
    // Regions of equal label are connected blocks; the (0,0) region must
    // touch only zero critical pairs.
    for e in &grid.boundaries {
        let labels = (grid.points[e.from].label, grid.points[e.to].label);
        if labels.0 == (0, 0) || labels.1 == (0, 0) {
            assert_eq!(e.critical, Some((0, 0)));
        }
    }
}

#[test]
fn scan_is_reproducible() {
    let axis = Axis::centered(0.0, 2.0 * PI, 12);
    let spec = ScanSpec { kind: ScanKind::ThetaPhi, a: axis, b: axis };
    let (g1, g2) = (scan_phase_diagram(&spec).unwrap(), scan_phase_diagram(&spec).unwrap());
    assert_eq!(g1.points, g2.points);
    assert_eq!(g1.boundaries, g2.boundaries);
    assert_eq!(g1.components, g2.components);
}

#[test]
fn second_protocol_scan() {
    let spec = ScanSpec {
        kind: ScanKind::Jx1Phi { jx0: PI / 2.0, jx1p: PI / 2.0 },
        a: Axis::centered(0.0, 3.0 * PI, 24),
        b: Axis::centered(0.0, 2.0 * PI, 6),
    };
    let grid = scan_phase_diagram(&spec).unwrap();
    assert_eq!(grid.labels(), vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
    assert!(grid.sandwich_violations().is_empty());
    let mut seen = vec![];
    for e in &grid.boundaries {
        let (f, t) = (&grid.points[e.from], &grid.points[e.to]);
        if f.a == t.a {
            continue;
        }
        let (a, _) = e.at.unwrap();
        assert!(distance_to(a, &[0.5 * PI, 1.5 * PI, 2.5 * PI]) < 1e-6, "J_x1 boundary at {a}");
        if f.label != (0, 0) && t.label != (0, 0) {
            seen.push(e.critical.unwrap());
        }
    }
    assert!(seen.contains(&(1, 1)) && seen.contains(&(2, 2)));
}

#[test]
fn static_scan() {
    let spec = ScanSpec {
        kind: ScanKind::StaticJx1Jy1 { jx0: 0.5, jy0: 0.5 },
        a: Axis::centered(0.0, 2.0, 10),
        b: Axis::centered(0.0, 2.0, 10),
    };
    let grid = scan_phase_diagram(&spec).unwrap();
    assert_eq!(grid.labels(), vec![(0, 0), (1, 0)]);
    for e in &grid.boundaries {
        let (a, b) = e.at.unwrap();
        let (f, t) = (&grid.points[e.from], &grid.points[e.to]);
        let d = if f.a != t.a { (a - 0.5).abs() } else { (b - 0.5).abs() };
        assert!(d < 1e-9);
    }
}

#[test]
fn default_trajectory_waypoints() {
    let t = TrajectorySpec::default();
    let w = [(0.5, 0.5), (0.75, 0.5), (0.75, 1.5), (1.25, 1.5), (1.25, 0.5), (1.5, 0.5)];
    assert_eq!(t.waypoints.len(), w.len());
    for (got, want) in t.waypoints.iter().zip(w) {
        assert_eq!(*got, (want.0 * PI, want.1 * PI));
    }
    let pts = TrajectorySpec { samples_per_segment: 3, ..t }.points();
    assert_eq!(pts.len(), 16);
    assert_eq!(pts.last().map(|p| (p.1, p.2)), Some((1.5 * PI, 0.5 * PI)));
}

#[test]
fn trajectory_modes_only_on_the_vertical_segments() {
    let t = TrajectorySpec { samples_per_segment: 4, ..TrajectorySpec::default() };
    let pts = trajectory_spectra(&t, OBC, (40, 40)).unwrap();
    for p in &pts {
        let interior = (p.phi - 0.5 * PI).abs() > 1e-9 && (p.phi - 1.5 * PI).abs() > 1e-9;
        let want = match p.segment {
            1 if interior => (4, 0),
            3 if interior => (0, 4),
            _ => (0, 0),
        };
        assert_eq!((p.n0, p.npi), want, "segment {} at ({}, {})", p.segment, p.theta, p.phi);
    }
    // The corner modes switch on right after the waypoint (3pi/4, pi/2).
    let first = pts.iter().position(|p| p.segment == 1).unwrap();
    assert_eq!((pts[first].n0, pts[first + 1].n0), (0, 4));
}

#[test]
fn periodic_trajectory_is_gapless() {
    let t = TrajectorySpec { samples_per_segment: 4, ..TrajectorySpec::default() };
    let pts = trajectory_spectra(&t, (Boundary::Periodic, Boundary::Periodic), (40, 40)).unwrap();
    for p in &pts {
        assert!(p.gaps.gap0.min(p.gaps.gap_pi) < 0.05, "({}, {}): {:?}", p.theta, p.phi, p.gaps);
        assert!(p.max_ipr < 0.01);
    }
}

#[test]
fn every_boundary_combination_runs() {
    let t = TrajectorySpec { waypoints: vec![(0.75 * PI, PI), (1.25 * PI, PI)], samples_per_segment: 2 };
    for bc in BC_COMBOS {
        let pts = trajectory_spectra(&t, bc, (6, 6)).unwrap();
        assert_eq!(pts.len(), 3);
        assert!(pts.iter().all(|p| p.spectrum.len() == 144));
    }
}

#[test]
fn bcc_examples() {
    let v = verify_one(&ModelParams::from_angles(0.75 * PI, PI, Protocol::KickedV1), (40, 40), MODE_TOL).unwrap();
    assert_eq!((v.predicted, v.observed, v.pass), ((4, 0), (4, 0), true));
    let p = ModelParams::kicked_v2(PI / 2.0, 1.5 * PI, PI / 2.0, PI / 4.0, 0.75 * PI);
    let v = verify_one(&p, (60, 60), MODE_TOL).unwrap();
    assert_eq!((v.predicted, v.observed), ((4, 4), (4, 4)));
}

#[test]
fn decay_bound_and_required_length() {
    let p = ModelParams::from_angles(PI, PI, Protocol::KickedV1);
    let d = decay_bound(&p).unwrap();
    assert!((d - (PI / 8.0).tan()).abs() < 1e-6, "{d}");
    assert_eq!(required_length(d, 20, 1e-8), 30);
    assert_eq!(required_length(d, 40, 1e-8), 40);
    assert_eq!(required_length(0.777, 60, 1e-8), 80);
    assert_eq!(required_length(0.0, 60, 1e-8), 60);
    let v2 = ModelParams::kicked_v2(PI / 2.0, 2.5 * PI, PI / 2.0, PI / 4.0, 0.75 * PI);
    assert!(decay_bound(&v2).unwrap() > 0.7);
    assert_eq!((corner_side(40), corner_side(21)), (10, 6));
}

#[test]
fn zero_disorder_reproduces_clean_counts() {
    let cells = 10;
    for (theta, target) in [(0.75 * PI, Target::Zero), (1.25 * PI, Target::Pi)] {
        let base = ModelParams::from_angles(theta, PI, Protocol::KickedV1);
        let clean = clean_spectrum(&base, (cells, cells), OBC).unwrap();
        let want = count_modes(&clean, target.value(), RELAXED_TOL, default_ipr_min(&clean));
        for perturbation in [
            Perturbation::Disorder { lambda: 0.0, realizations: 2, seed: 5 },
            Perturbation::Deltas(Deltas::default()),
        ] {
            let spec = RobustnessSpec { base, target, perturbation, lengths: (cells, cells), eps_tol: RELAXED_TOL };
            let s = robustness_experiment(&spec).unwrap();
            for r in &s.realizations {
                assert_eq!(r.count, want);
                let clean_values: Vec<f64> = clean
                    .select(target.value(), RELAXED_TOL, default_ipr_min(&clean))
                    .iter()
                    .map(|&i| clean.values[i])
                    .collect();
                assert!(same_on_circle(&r.quasienergies, &clean_values, 1e-9));
            }
            assert_eq!(s.retained_fraction, if want == 4 { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn disorder_is_seeded() {
    let base = ModelParams::from_angles(0.75 * PI, PI, Protocol::KickedV1);
    let spec = RobustnessSpec {
        base,
        target: Target::Zero,
        perturbation: Perturbation::Disorder { lambda: 0.2, realizations: 2, seed: 9 },
        lengths: (6, 6),
        eps_tol: RELAXED_TOL,
    };
    let (a, b) = (robustness_experiment(&spec).unwrap(), robustness_experiment(&spec).unwrap());
    // Debug output compares NaN fields too.
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    assert_eq!(a.realizations.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![Some(9), Some(10)]);
    let other = RobustnessSpec { perturbation: Perturbation::Disorder { lambda: 0.2, realizations: 2, seed: 11 }, ..spec };
    assert_ne!(robustness_experiment(&other).unwrap().realizations[0].median_ipr, a.realizations[0].median_ipr);
}
