//! Experiments: phase-diagram scans, spectra along critical trajectories,
//! bulk-corner correspondence checks and robustness against perturbations
//! and disorder.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use faer::{c64, Col};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::invariants::{
    build_mapping, composite_invariants, critical_indicators, x_sector_gaps, y_sector_closing, Closing,
    MappingKind,
};
use crate::model::{
    disordered_floquet_2d, kicked_2d, perturbed_floquet_2d, static_2d_h, Basis, BasisLabel, Boundary, Deltas,
    Frame, LatticeOperator, ModelParams, Protocol,
};
use crate::modes::Target;
use crate::spectral::{
    count_modes, default_ipr_min, eig, gaps, mixed_bc_spectrum, GapReport, Spectrum, Vectors,
};

/// Tolerance for counting modes at 0 or pi in clean spectra.
pub const MODE_TOL: f64 = 1e-8;
/// Relaxed tolerance for perturbed and disordered spectra.
pub const RELAXED_TOL: f64 = 1e-2;

// ---------------------------------------------------------------- scans

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    /// Cell-centred points `lo + (i + 1/2) h` instead of both endpoints.
    pub centered: bool,
}

impl Axis {
    pub fn endpoints(lo: f64, hi: f64, n: usize) -> Axis {
        Axis { lo, hi, n, centered: false }
    }

    pub fn centered(lo: f64, hi: f64, n: usize) -> Axis {
        Axis { lo, hi, n, centered: true }
    }

    pub fn value(&self, i: usize) -> f64 {
        let w = self.hi - self.lo;
        if self.centered {
            self.lo + w * (i as f64 + 0.5) / self.n as f64
        } else if self.n == 1 {
            self.lo
        } else {
            self.lo + w * i as f64 / (self.n - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }

    pub fn step(&self) -> f64 {
        if self.centered {
            (self.hi - self.lo) / self.n as f64
        } else {
            (self.hi - self.lo) / (self.n.max(2) - 1) as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScanKind {
    /// Kicked v1 in the angle parameterization.
    ThetaPhi,
    /// Kicked v2 over `(J_x1, phi)`; the y couplings follow phi.
    Jx1Phi { jx0: f64, jx1p: f64 },
    /// `(J_x0, J_x1)` at fixed y couplings (static or kicked v1).
    Jx0Jx1 { protocol: Protocol, jy0: f64, jy1: f64 },
    /// Static model over `(J_x1, J_y1)` at fixed `J_x0`, `J_y0`.
    StaticJx1Jy1 { jx0: f64, jy0: f64 },
}

impl ScanKind {
    pub fn axis_names(&self) -> (&'static str, &'static str) {
        match self {
            ScanKind::ThetaPhi => ("theta", "phi"),
            ScanKind::Jx1Phi { .. } => ("jx1", "phi"),
            ScanKind::Jx0Jx1 { .. } => ("jx0", "jx1"),
            ScanKind::StaticJx1Jy1 { .. } => ("jx1", "jy1"),
        }
    }

    pub fn params(&self, a: f64, b: f64) -> ModelParams {
        let y_of = |phi: f64| (FRAC_PI_2 + FRAC_PI_4 * phi.cos(), FRAC_PI_2 - FRAC_PI_4 * phi.cos());
        match *self {
            ScanKind::ThetaPhi => ModelParams::from_angles(a, b, Protocol::KickedV1),
            ScanKind::Jx1Phi { jx0, jx1p } => {
                let (jy0, jy1) = y_of(b);
                ModelParams::kicked_v2(jx0, a, jx1p, jy0, jy1)
            }
            ScanKind::Jx0Jx1 { protocol, jy0, jy1 } => ModelParams::new(protocol, a, b, jy0, jy1),
            ScanKind::StaticJx1Jy1 { jx0, jy0 } => ModelParams::new(Protocol::Static, jx0, a, jy0, b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanSpec {
    pub kind: ScanKind,
    pub a: Axis,
    pub b: Axis,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanPoint {
    pub a: f64,
    pub b: f64,
    pub label: (i32, i32),
    /// Bulk gaps of the x sector.
    pub gaps: GapReport,
    pub closing_x: Closing,
    pub closing_y: Closing,
}

/// Edge of the grid whose two endpoints carry different labels.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub from: usize,
    pub to: usize,
    /// Critical point located on the edge by bisection, in axis coordinates.
    pub at: Option<(f64, f64)>,
    /// Composite invariants at that point.
    pub critical: Option<(i32, i32)>,
}

#[derive(Clone, Debug)]
pub struct ScanGrid {
    pub spec: ScanSpec,
    /// Row-major, `a` outer.
    pub points: Vec<ScanPoint>,
    /// Connected-component id per point (4-neighbour, equal labels).
    pub components: Vec<usize>,
    pub boundaries: Vec<BoundaryEdge>,
}

impl ScanGrid {
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.spec.b.n + j
    }

    pub fn labels(&self) -> Vec<(i32, i32)> {
        let mut l: Vec<(i32, i32)> = self.points.iter().map(|p| p.label).collect();
        l.sort();
        l.dedup();
        l
    }

    /// Edges violating the sandwich rule: a nonzero critical pair must sit
    /// between two distinct nontrivial phases.
    pub fn sandwich_violations(&self) -> Vec<&BoundaryEdge> {
        self.boundaries
            .iter()
            .filter(|e| match e.critical {
                Some(c) if c != (0, 0) => {
                    let (l, r) = (self.points[e.from].label, self.points[e.to].label);
                    l == (0, 0) || r == (0, 0) || l == r
                }
                _ => false,
            })
            .collect()
    }
}

fn scan_label(p: &ModelParams) -> Result<ScanPoint> {
    let c = composite_invariants(p)?;
    let (gaps, closing_x) = x_sector_gaps(p)?;
    Ok(ScanPoint { a: 0.0, b: 0.0, label: c.omega_pair, gaps, closing_x, closing_y: y_sector_closing(p) })
}

pub fn scan_phase_diagram(spec: &ScanSpec) -> Result<ScanGrid> {
    if spec.a.n == 0 || spec.b.n == 0 {
        return Err(Error::InvalidInput("empty scan axis".into()));
    }
    let (na, nb) = (spec.a.n, spec.b.n);
    let points = (0..na * nb)
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (spec.a.value(idx / nb), spec.b.value(idx % nb));
            let mut pt = scan_label(&spec.kind.params(a, b))?;
            pt.a = a;
            pt.b = b;
            Ok(pt)
        })
        .collect::<Result<Vec<_>>>()?;

    let components = connected_components(&points, na, nb);

    let mut pairs = vec![];
    for i in 0..na {
        for j in 0..nb {
            let here = i * nb + j;
            if i + 1 < na && points[here].label != points[here + nb].label {
                pairs.push((here, here + nb));
            }
            if j + 1 < nb && points[here].label != points[here + 1].label {
                pairs.push((here, here + 1));
            }
        }
    }
    let boundaries = pairs
        .into_par_iter()
        .map(|(from, to)| {
            let (pa, pb) = (&points[from], &points[to]);
            let at = bisect_edge(&spec.kind, (pa.a, pa.b), (pb.a, pb.b));
            let critical = at.and_then(|(a, b)| composite_invariants(&spec.kind.params(a, b)).ok()).map(|c| c.omega_pair);
            BoundaryEdge { from, to, at, critical }
        })
        .collect();
    Ok(ScanGrid { spec: *spec, points, components, boundaries })
}

fn connected_components(points: &[ScanPoint], na: usize, nb: usize) -> Vec<usize> {
    let mut comp = vec![usize::MAX; points.len()];
    let mut next = 0;
    for start in 0..points.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k / nb, k % nb);
            let mut nbrs = Vec::with_capacity(4);
            if i > 0 {
                nbrs.push(k - nb);
            }
            if i + 1 < na {
                nbrs.push(k + nb);
            }
            if j > 0 {
                nbrs.push(k - 1);
            }
            if j + 1 < nb {
                nbrs.push(k + 1);
            }
            for n in nbrs {
                if comp[n] == usize::MAX && points[n].label == points[k].label {
                    comp[n] = next;
                    queue.push_back(n);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Indicator magnitude below which a grid point already sits on a locus.
const ON_LOCUS: f64 = 1e-12;

/// Locates a critical point on the segment between two grid points by
/// bisecting the first indicator that changes sign along it.
fn bisect_edge(kind: &ScanKind, p: (f64, f64), q: (f64, f64)) -> Option<(f64, f64)> {
    let at = |t: f64| (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1));
    let ind = |t: f64| {
        let (a, b) = at(t);
        critical_indicators(&kind.params(a, b))
    };
    let (i0, i1) = (ind(0.0), ind(1.0));
    for (k, (&u, &v)) in i0.iter().zip(&i1).enumerate() {
        let crosses = u.is_finite() && v.is_finite() && u.signum() != v.signum();
        if !crosses || u.abs() < ON_LOCUS || v.abs() < ON_LOCUS {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut flo = u;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = ind(mid)[k];
            if !fm.is_finite() {
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let best = if ind(lo)[k].abs() <= ind(hi)[k].abs() { lo } else { hi };
        return Some(at(best));
    }
    // An endpoint already on a locus. Prefer an indicator that vanishes at
    // one end only: the edge may run along another locus it never leaves.
    let on = |x: f64| x.abs() < ON_LOCUS;
    for (u, v, t) in [(&i0, &i1, 0.0), (&i1, &i0, 1.0)] {
        if u.iter().zip(v.iter()).any(|(&x, &y)| on(x) && !on(y)) {
            return Some(at(t));
        }
    }
    for (u, t) in [(&i0, 0.0), (&i1, 1.0)] {
        if u.iter().any(|&x| on(x)) {
            return Some(at(t));
        }
    }
    None
}

// ---------------------------------------------------------------- spectra

/// Boundary-condition combinations, x first.
pub const BC_COMBOS: [(Boundary, Boundary); 4] = [
    (Boundary::Periodic, Boundary::Periodic),
    (Boundary::Periodic, Boundary::Open),
    (Boundary::Open, Boundary::Periodic),
    (Boundary::Open, Boundary::Open),
];

pub fn bc_name(bc: (Boundary, Boundary)) -> String {
    format!("{},{}", bc.0.name(), bc.1.name())
}

/// Clean 2D operator (Kronecker-structured).
pub fn clean_operator(p: &ModelParams, lengths: (usize, usize), bc: (Boundary, Boundary)) -> Result<LatticeOperator> {
    p.validate()?;
    match p.protocol {
        Protocol::Static => static_2d_h(p, lengths, bc),
        _ => kicked_2d(p, lengths, bc, Frame::Raw),
    }
}

/// Spectrum of the clean 2D model. Kicked models with mixed boundaries use
/// Bloch blocks along the periodic direction and carry no eigenvectors.
pub fn clean_spectrum(p: &ModelParams, lengths: (usize, usize), bc: (Boundary, Boundary)) -> Result<Spectrum> {
    if lengths.0 < 2 || lengths.1 < 2 {
        return Err(Error::InvalidInput(format!("lengths {lengths:?} below 2 cells")));
    }
    if p.protocol.is_kicked() && bc.0 != bc.1 {
        return mixed_bc_spectrum(p, bc, lengths);
    }
    eig(&clean_operator(p, lengths, bc)?)
}

fn target_value(p: &ModelParams, t: Target) -> f64 {
    if p.protocol.is_kicked() {
        t.value()
    } else {
        0.0
    }
}

// ---------------------------------------------------------------- trajectory

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySpec {
    pub waypoints: Vec<(f64, f64)>,
    pub samples_per_segment: usize,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec {
            waypoints: vec![
                (PI / 2.0, PI / 2.0),
                (0.75 * PI, PI / 2.0),
                (0.75 * PI, 1.5 * PI),
                (1.25 * PI, 1.5 * PI),
                (1.25 * PI, PI / 2.0),
                (1.5 * PI, PI / 2.0),
            ],
            samples_per_segment: 20,
        }
    }
}

impl TrajectorySpec {
    /// `(segment, theta, phi)` for every sample, the final waypoint included.
    pub fn points(&self) -> Vec<(usize, f64, f64)> {
        let mut out = vec![];
        let s = self.samples_per_segment.max(1);
        for (seg, w) in self.waypoints.windows(2).enumerate() {
            for i in 0..s {
                let t = i as f64 / s as f64;
                out.push((seg, w[0].0 + t * (w[1].0 - w[0].0), w[0].1 + t * (w[1].1 - w[0].1)));
            }
        }
        if let Some(&(th, ph)) = self.waypoints.last() {
            out.push((self.waypoints.len().saturating_sub(2), th, ph));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryPoint {
    pub segment: usize,
    pub theta: f64,
    pub phi: f64,
    /// Quasienergies and IPRs (no eigenvectors).
    pub spectrum: Spectrum,
    pub max_ipr: f64,
    pub n0: usize,
    pub npi: usize,
    pub gaps: GapReport,
}

pub fn trajectory_spectra(
    t: &TrajectorySpec,
    bc: (Boundary, Boundary),
    lengths: (usize, usize),
) -> Result<Vec<TrajectoryPoint>> {
    if t.waypoints.len() < 2 {
        return Err(Error::InvalidInput("a trajectory needs at least two waypoints".into()));
    }
    t.points()
        .into_par_iter()
        .map(|(segment, theta, phi)| {
            let p = ModelParams::from_angles(theta, phi, Protocol::KickedV1);
            let mut spectrum = clean_spectrum(&p, lengths, bc)?;
            spectrum.vectors = Vectors::None;
            let ipr_min = default_ipr_min(&spectrum);
            Ok(TrajectoryPoint {
                segment,
                theta,
                phi,
                max_ipr: spectrum.iprs.iter().copied().fold(0.0, f64::max),
                n0: count_modes(&spectrum, 0.0, MODE_TOL, ipr_min),
                npi: count_modes(&spectrum, PI, MODE_TOL, ipr_min),
                gaps: gaps(&spectrum),
                spectrum,
            })
        })
        .collect()
}

// ---------------------------------------------------------------- bcc

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BccVerdict {
    pub params: ModelParams,
    pub omega_pair: (i32, i32),
    pub predicted: (usize, usize),
    pub observed: (usize, usize),
    pub pass: bool,
}

/// Counts `(N_0, N_pi)` of corner modes in the clean OBC spectrum.
pub fn observed_counts(spec: &Spectrum, p: &ModelParams, eps_tol: f64) -> (usize, usize) {
    let ipr_min = default_ipr_min(spec);
    let n0 = count_modes(spec, 0.0, eps_tol, ipr_min);
    let npi = if p.protocol.is_kicked() { count_modes(spec, PI, eps_tol, ipr_min) } else { 0 };
    (n0, npi)
}

pub fn verify_one(p: &ModelParams, lengths: (usize, usize), eps_tol: f64) -> Result<BccVerdict> {
    let c = composite_invariants(p)?;
    let spec = clean_spectrum(p, lengths, (Boundary::Open, Boundary::Open))?;
    let observed = observed_counts(&spec, p, eps_tol);
    Ok(BccVerdict { params: *p, omega_pair: c.omega_pair, predicted: c.predicted, observed, pass: c.predicted == observed })
}

pub fn verify_bcc(params: &[ModelParams], lengths: (usize, usize), eps_tol: f64) -> Result<Vec<BccVerdict>> {
    params.par_iter().map(|p| verify_one(p, lengths, eps_tol)).collect()
}

/// Nine `(theta, phi)` points covering the gapped and critical rows of the
/// kicked phase table.
pub fn table_points() -> Vec<(f64, f64)> {
    vec![
        (0.25 * PI, PI),
        (PI, PI),
        (1.75 * PI, PI),
        (0.5 * PI, PI),
        (1.5 * PI, PI),
        (0.75 * PI, PI),
        (1.25 * PI, PI),
        (PI, 0.25 * PI),
        (0.75 * PI, 0.5 * PI),
    ]
}

// ---------------------------------------------------------------- decay

/// Largest modulus among mapping-function roots strictly inside the unit
/// disk, over both frames and the SSH factor: an upper bound on the
/// per-cell decay factor of the corner modes.
pub fn decay_bound(p: &ModelParams) -> Result<f64> {
    let mut worst = 0.0f64;
    if p.protocol.is_kicked() {
        for frame in [Frame::Sym1, Frame::Sym2] {
            for z in build_mapping(MappingKind::KickedX, p, frame)?.roots()? {
                if z.norm() < 1.0 - 1e-6 {
                    worst = worst.max(z.norm());
                }
            }
        }
    } else if p.jx1 != 0.0 && (p.jx0 / p.jx1).abs() < 1.0 {
        worst = worst.max((p.jx0 / p.jx1).abs());
    }
    if p.jy1 != 0.0 && (p.jy0 / p.jy1).abs() < 1.0 {
        worst = worst.max((p.jy0 / p.jy1).abs());
    }
    Ok(worst)
}

/// Smallest length (a multiple of ten, at least `base`) with
/// `decay^L < threshold`.
pub fn required_length(decay: f64, base: usize, threshold: f64) -> usize {
    if decay <= 0.0 || decay.powi(base as i32) < threshold {
        return base;
    }
    let need = (threshold.ln() / decay.ln()).ceil() as usize + 1;
    need.div_ceil(10) * 10
}

// ---------------------------------------------------------------- corners

/// Side of the corner squares, in cells.
pub fn corner_side(cells: usize) -> usize {
    cells.div_ceil(4)
}

/// Probability inside the union of the four corner squares.
pub fn corner_fraction(v: &Col<c64>, basis: &Basis) -> f64 {
    let Basis::Plane { x, y } = basis else { return f64::NAN };
    let (sx, sy) = (corner_side(x.cells), corner_side(y.cells));
    let near = |c: usize, n: usize, s: usize| c < s || c >= n - s;
    let mut inside = 0.0;
    let mut total = 0.0;
    for (i, z) in v.iter().enumerate() {
        let w = z.norm_sqr();
        total += w;
        if let BasisLabel::Plane { cell_x, cell_y, .. } = basis.label(i) {
            if near(cell_x, x.cells, sx) && near(cell_y, y.cells, sy) {
                inside += w;
            }
        }
    }
    inside / total
}

// ---------------------------------------------------------------- robustness

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Perturbation {
    Deltas(Deltas),
    Disorder { lambda: f64, realizations: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobustnessSpec {
    pub base: ModelParams,
    pub target: Target,
    pub perturbation: Perturbation,
    pub lengths: (usize, usize),
    pub eps_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub seed: Option<u64>,
    /// Localized states within `eps_tol` of the target.
    pub count: usize,
    pub mode_iprs: Vec<f64>,
    pub median_ipr: f64,
    /// Smallest corner fraction among the counted modes.
    pub corner_fraction: f64,
    /// Site carrying the largest summed mode probability.
    pub peak_site: Option<BasisLabel>,
    pub quasienergies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessStats {
    pub realizations: Vec<Realization>,
    /// Fraction of realizations keeping exactly four modes.
    pub retained_fraction: f64,
}

fn realization(op: &LatticeOperator, target: f64, eps_tol: f64, seed: Option<u64>) -> Result<Realization> {
    let spec = eig(op)?;
    let ipr_min = default_ipr_min(&spec);
    let idx = spec.select(target, eps_tol, ipr_min);
    let basis = op.basis();
    let mut prob = vec![0.0; basis.len()];
    let mut frac = f64::INFINITY;
    for &i in &idx {
        let v = spec.vector(i).ok_or_else(|| Error::InvalidInput("spectrum without vectors".into()))?;
        frac = frac.min(corner_fraction(&v, basis));
        for (r, z) in v.iter().enumerate() {
            prob[r] += z.norm_sqr();
        }
    }
    let peak_site = (!idx.is_empty()).then(|| {
        let r = (0..prob.len()).max_by(|&a, &b| prob[a].total_cmp(&prob[b])).unwrap_or(0);
        basis.label(r)
    });
    Ok(Realization {
        seed,
        count: idx.len(),
        mode_iprs: idx.iter().map(|&i| spec.iprs[i]).collect(),
        median_ipr: spec.median_ipr(),
        corner_fraction: if idx.is_empty() { f64::NAN } else { frac },
        peak_site,
        quasienergies: idx.iter().map(|&i| spec.values[i]).collect(),
    })
}

pub fn robustness_experiment(s: &RobustnessSpec) -> Result<RobustnessStats> {
    if s.base.protocol != Protocol::KickedV1 {
        return Err(Error::InvalidInput("robustness runs use kicked_v1".into()));
    }
    let bc = (Boundary::Open, Boundary::Open);
    let target = target_value(&s.base, s.target);
    let realizations = match s.perturbation {
        Perturbation::Deltas(d) => {
            let op = perturbed_floquet_2d(&s.base, &d, s.lengths, bc, Frame::Raw)?;
            vec![realization(&op, target, s.eps_tol, None)?]
        }
        Perturbation::Disorder { lambda, realizations, seed } => (0..realizations as u64)
            .into_par_iter()
            .map(|r| {
                let sd = seed.wrapping_add(r);
                let op = disordered_floquet_2d(&s.base, lambda, sd, s.lengths, bc, Frame::Raw)?;
                realization(&op, target, s.eps_tol, Some(sd))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let kept = realizations.iter().filter(|r| r.count == 4).count();
    let retained_fraction = kept as f64 / realizations.len().max(1) as f64;
    Ok(RobustnessStats { realizations, retained_fraction })
}
