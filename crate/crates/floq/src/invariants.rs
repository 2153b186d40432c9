//! Winding numbers by phase integration, generalized invariants by zero/pole
//! counting of mapping functions, the closed-form kicked table, and the
//! composite 2D invariants.

use std::f64::consts::{PI, TAU};

use faer::{c64, Mat};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::Su2;
use crate::model::{floquet_x_su2, Frame, ModelParams, Protocol};
use crate::spectral::GapReport;

/// Roots with `| |z| - 1 | < ANNULUS` are on the unit circle and not counted.
pub const ANNULUS: f64 = 1e-7;
/// Distance to a critical line below which a point is treated as critical.
pub const CRITICAL_TOL: f64 = 1e-9;
/// Numeric gap below which a kicked_v2 point is treated as critical.
pub const V2_GAP_TOL: f64 = 1e-6;
/// Off-critical step used by the limiting rule.
pub const LIMIT_OFFSET: f64 = 1e-3;
/// Grid used for winding integrals.
pub const WINDING_GRID: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Closing {
    Gapped,
    ZeroClosing,
    PiClosing,
    BothClosing,
}

impl Closing {
    pub fn from_flags(zero: bool, pi: bool) -> Closing {
        match (zero, pi) {
            (false, false) => Closing::Gapped,
            (true, false) => Closing::ZeroClosing,
            (false, true) => Closing::PiClosing,
            (true, true) => Closing::BothClosing,
        }
    }

    pub fn zero(self) -> bool {
        matches!(self, Closing::ZeroClosing | Closing::BothClosing)
    }

    pub fn pi(self) -> bool {
        matches!(self, Closing::PiClosing | Closing::BothClosing)
    }

    pub fn name(self) -> &'static str {
        match self {
            Closing::Gapped => "gapped",
            Closing::ZeroClosing => "zero_closing",
            Closing::PiClosing => "pi_closing",
            Closing::BothClosing => "both_closing",
        }
    }
}

// ---------------------------------------------------------------- winding

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Winding {
    pub value: f64,
    /// False when some increment exceeded pi/2, i.e. the grid passes too
    /// close to a zero of the sampled function.
    pub resolved: bool,
}

/// `(1/2pi) sum arg(g_{j+1}/g_j)` around the closed loop of samples.
pub fn winding_integral(samples: &[c64]) -> Result<Winding> {
    if samples.len() < 64 {
        return Err(Error::InvalidInput(format!("winding grid {} < 64", samples.len())));
    }
    let n = samples.len();
    let mut total = 0.0;
    let mut resolved = true;
    for j in 0..n {
        let a = samples[j];
        let b = samples[(j + 1) % n];
        let inc = (b * a.conj()).arg();
        if inc.abs() > PI / 2.0 || a == c64::new(0.0, 0.0) {
            // a zero on the loop: its near-pi jump is split evenly between
            // the two sides, giving the principal value
            resolved = false;
            total += inc - PI.copysign(inc);
            continue;
        }
        total += inc;
    }
    Ok(Winding { value: total / TAU, resolved })
}

/// Samples `g` on `k_j = -pi + 2pi (j + 1/2)/n`; the half-step offset keeps
/// the high-symmetry momenta 0 and pi off the grid.
pub fn sample_loop(n: usize, mut g: impl FnMut(f64) -> c64) -> Vec<c64> {
    (0..n).map(|j| g(-PI + TAU * (j as f64 + 0.5) / n as f64)).collect()
}

/// `d_x + i d_z` of a symmetric-frame SU(2) element.
pub fn dz_loop(u: &Su2) -> c64 {
    c64::new(u.v[0], u.v[2])
}

// ---------------------------------------------------------------- mapping

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    ClStatic,
    SshStatic,
    KickedF1x,
    KickedF2x,
    NumericFft,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MappingKind {
    ClStatic,
    SshStatic,
    KickedX,
}

/// `f(z) = P(z) / z^pole_order`, numerator in ascending powers.
#[derive(Clone, Debug)]
pub struct MappingFunction {
    pub numerator: Vec<c64>,
    pub pole_order: usize,
    pub provenance: Provenance,
}

impl MappingFunction {
    pub fn eval(&self, z: c64) -> c64 {
        let mut acc = c64::new(0.0, 0.0);
        for c in self.numerator.iter().rev() {
            acc = acc * z + c;
        }
        acc / z.powi(self.pole_order as i32)
    }

    /// Numerator roots with multiplicity, from the balanced companion matrix.
    pub fn roots(&self) -> Result<Vec<c64>> {
        polynomial_roots(&self.numerator)
    }
}

/// Roots of `sum c_i z^i`. Negligible leading coefficients are dropped
/// (their roots lie far outside the unit disk); exact zeros at the low end
/// are returned as roots at the origin.
pub fn polynomial_roots(coeffs: &[c64]) -> Result<Vec<c64>> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::InvalidInput("identically zero mapping function".into()));
    }
    let mut top = coeffs.len() - 1;
    while coeffs[top].norm() <= 1e-14 * scale {
        top -= 1;
    }
    let mut low = 0;
    while coeffs[low].norm() == 0.0 {
        low += 1;
    }
    let mut roots = vec![c64::new(0.0, 0.0); low];
    let deg = top - low;
    if deg == 0 {
        return Ok(roots);
    }
    let c = &coeffs[low..=top];
    let lead = c[deg];
    let mut comp = Mat::<c64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = c64::new(1.0, 0.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    balance(&mut comp);
    let ev = comp.eigenvalues().map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    roots.extend(ev);
    Ok(roots)
}

/// Diagonal similarity scaling that equalizes row and column norms
/// (the classic Parlett-Reinsch iteration, powers of two only).
fn balance(a: &mut Mat<c64>) {
    let n = a.nrows();
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].norm();
                    r += a[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let s = c + r;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

fn kicked_v1_mapping(p: &ModelParams, frame: Frame) -> MappingFunction {
    let (s0, c0) = (p.jx0.sin(), p.jx0.cos());
    let (s1, c1) = (p.jx1.sin(), p.jx1.cos());
    let (sh0, ch0) = ((p.jx0 / 2.0).sin(), (p.jx0 / 2.0).cos());
    let (sh1, ch1) = ((p.jx1 / 2.0).sin(), (p.jx1 / 2.0).cos());
    let r = |x: f64| c64::new(x, 0.0);
    match frame {
        Frame::Sym2 => MappingFunction {
            numerator: vec![r(0.0), r(-s1 * sh0 * sh0), r(c1 * s0), r(s1 * ch0 * ch0)],
            pole_order: 2,
            provenance: Provenance::KickedF2x,
        },
        _ => MappingFunction {
            numerator: vec![r(s0 * ch1 * ch1), r(c0 * s1), r(-s0 * sh1 * sh1)],
            pole_order: 0,
            provenance: Provenance::KickedF1x,
        },
    }
}

/// Laurent expansion of `d_x + i d_z` by FFT on a `2^m` grid, doubled until
/// the aliasing band is below 1e-10.
fn numeric_mapping(p: &ModelParams, frame: Frame) -> Result<MappingFunction> {
    let mut planner = FftPlanner::<f64>::new();
    let mut trailing = f64::INFINITY;
    for m in 10..=16 {
        let n = 1usize << m;
        let mut buf: Vec<c64> = Vec::with_capacity(n);
        for j in 0..n {
            let k = TAU * j as f64 / n as f64;
            buf.push(dz_loop(&floquet_x_su2(k, p, frame)?));
        }
        planner.plan_fft_forward(n).process(&mut buf);
        let coef = |q: i64| -> c64 {
            let idx = q.rem_euclid(n as i64) as usize;
            buf[idx] / n as f64
        };
        let half = (n / 2) as i64;
        let band = half / 4;
        trailing = (half - band..half)
            .chain(-half..-half + band)
            .map(|q| coef(q).norm())
            .fold(0.0, f64::max);
        if trailing > 1e-10 {
            continue;
        }
        let all: Vec<(i64, c64)> = (-half..half).map(|q| (q, coef(q))).collect();
        let big = all.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max);
        let keep: Vec<&(i64, c64)> = all.iter().filter(|(_, c)| c.norm() >= 1e-12 * big).collect();
        let lo = keep.iter().map(|(q, _)| *q).min().unwrap_or(0);
        let hi = keep.iter().map(|(q, _)| *q).max().unwrap_or(0);
        let start = lo.min(0);
        let numerator = (start..=hi)
            .map(|q| if q < lo { c64::new(0.0, 0.0) } else { coef(q) })
            .collect();
        return Ok(MappingFunction {
            numerator,
            pole_order: (-start) as usize,
            provenance: Provenance::NumericFft,
        });
    }
    Err(Error::Truncation { trailing })
}

pub fn build_mapping(kind: MappingKind, p: &ModelParams, frame: Frame) -> Result<MappingFunction> {
    p.validate()?;
    let r = |x: f64| c64::new(x, 0.0);
    match kind {
        MappingKind::ClStatic => Ok(MappingFunction {
            numerator: vec![r(p.jx0), r(p.jx1)],
            pole_order: 0,
            provenance: Provenance::ClStatic,
        }),
        MappingKind::SshStatic => Ok(MappingFunction {
            numerator: vec![r(p.jy0), r(p.jy1)],
            pole_order: 0,
            provenance: Provenance::SshStatic,
        }),
        MappingKind::KickedX => {
            if frame == Frame::Raw {
                return Err(Error::InvalidInput("mapping functions live in sym1/sym2".into()));
            }
            match p.protocol {
                Protocol::KickedV1 => Ok(kicked_v1_mapping(p, frame)),
                Protocol::KickedV2 => numeric_mapping(p, frame),
                Protocol::Static => Err(Error::InvalidInput("static protocol has no kicked mapping".into())),
            }
        }
    }
}

/// `N_z - N_p`, or `N_z - N_p/2` when the pi gap is closed.
pub fn zero_pole_invariant(f: &MappingFunction, closing: Closing) -> Result<i32> {
    let roots = f.roots()?;
    let mut nz = 0i32;
    for z in &roots {
        let r = z.norm();
        if r < 1.0 - ANNULUS {
            nz += 1;
        } else if r <= 1.0 + ANNULUS && closing == Closing::Gapped {
            return Err(Error::Inconsistent(format!(
                "{:?} root on the unit circle (|z| = {r}) at a gapped point",
                f.provenance
            )));
        }
    }
    let np = f.pole_order as i32;
    if closing.pi() {
        if np % 2 != 0 {
            return Err(Error::HalfInteger(format!("{:?} with pole order {np}", f.provenance)));
        }
        Ok(nz - np / 2)
    } else {
        Ok(nz - np)
    }
}

// ---------------------------------------------------------------- closings

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `J_x0 + J_x1 = nu pi`.
    Sum,
    /// `J_x0 - J_x1 = nu pi`.
    Difference,
    /// `(mu pi - J_x0)^2 / J_x1^2 + nu^2 pi^2 / J'_x1^2 = 1`.
    Ellipse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClosingSolution {
    pub family: Family,
    pub mu: i32,
    pub nu: i32,
    /// True when the bands meet at quasienergy pi.
    pub at_pi: bool,
}

/// Signed ellipse residual for one `(mu, nu)`, or `None` when `nu` is
/// excluded by the kick amplitude.
pub fn ellipse_residual(p: &ModelParams, mu: i32, nu: i32) -> Option<f64> {
    let a = (mu as f64 * PI - p.jx0) / p.jx1;
    let b = nu as f64 * PI / p.jx1p;
    if !(b.abs() <= 1.0) {
        return None;
    }
    Some(a * a + b * b - 1.0)
}

/// Closing conditions satisfied at `p` (within `CRITICAL_TOL`).
pub fn gap_closing_locus(p: &ModelParams) -> Vec<ClosingSolution> {
    let mut out = vec![];
    match p.protocol {
        Protocol::KickedV2 => {
            for mu in -4..=4 {
                for nu in -4..=4 {
                    if let Some(r) = ellipse_residual(p, mu, nu) {
                        if r.abs() < 1e-8 {
                            let at_pi = (mu - nu).rem_euclid(2) == 1;
                            out.push(ClosingSolution { family: Family::Ellipse, mu, nu, at_pi });
                        }
                    }
                }
            }
        }
        _ => {
            for (family, s) in [(Family::Sum, p.jx0 + p.jx1), (Family::Difference, p.jx0 - p.jx1)] {
                let nu = (s / PI).round();
                if (s - nu * PI).abs() < CRITICAL_TOL {
                    let nu = nu as i32;
                    out.push(ClosingSolution { family, mu: 0, nu, at_pi: nu.rem_euclid(2) == 1 });
                }
            }
        }
    }
    out
}

/// Critical `J_x1 > 0` of the second protocol up to `jx1_max`, each with the
/// ellipse solutions that produce it.
pub fn v2_critical_jx1(jx0: f64, jx1p: f64, jx1_max: f64) -> Vec<(f64, Vec<ClosingSolution>)> {
    let mut found: Vec<(f64, Vec<ClosingSolution>)> = vec![];
    for mu in -8..=8 {
        for nu in -8..=8 {
            let b = nu as f64 * PI / jx1p;
            let rhs = 1.0 - b * b;
            if rhs <= 0.0 {
                continue;
            }
            let j = (mu as f64 * PI - jx0).abs() / rhs.sqrt();
            if j <= 0.0 || j > jx1_max {
                continue;
            }
            let sol = ClosingSolution { family: Family::Ellipse, mu, nu, at_pi: (mu - nu).rem_euclid(2) == 1 };
            match found.iter_mut().find(|(v, _)| (v - j).abs() < 1e-12) {
                Some((_, s)) => s.push(sol),
                None => found.push((j, vec![sol])),
            }
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found
}

/// Analytic gap pair of the first protocol: the extremes of
/// `cos eps = cos J0 cos J1 - sin J0 sin J1 cos k` sit at k = 0 and pi.
fn v1_gaps(p: &ModelParams) -> GapReport {
    let a = (p.jx0 + p.jx1).cos();
    let b = (p.jx0 - p.jx1).cos();
    GapReport { gap0: a.max(b).clamp(-1.0, 1.0).acos(), gap_pi: PI - a.min(b).clamp(-1.0, 1.0).acos() }
}

/// Numeric gap pair of the second protocol: 4096-point grid, then a
/// golden-section polish around the best grid points.
fn v2_gaps(p: &ModelParams) -> Result<GapReport> {
    let n = 4096;
    let eps = |k: f64| -> Result<f64> { Ok(floquet_x_su2(k, p, Frame::Raw)?.quasienergy()) };
    let grid: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
    let vals = grid.iter().map(|&k| eps(k)).collect::<Result<Vec<_>>>()?;
    let h = TAU / n as f64;
    let polish = |f: &dyn Fn(f64) -> f64, k0: f64| -> f64 {
        let (mut a, mut b) = (k0 - h, k0 + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        f(0.5 * (a + b)).min(f(k0))
    };
    let f0 = |k: f64| floquet_x_su2(k, p, Frame::Raw).map(|u| u.quasienergy()).unwrap_or(PI);
    let fp = |k: f64| PI - floquet_x_su2(k, p, Frame::Raw).map(|u| u.quasienergy()).unwrap_or(0.0);
    let best = |key: &dyn Fn(f64) -> f64, f: &dyn Fn(f64) -> f64| -> f64 {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| key(vals[a]).total_cmp(&key(vals[b])));
        idx.iter().take(8).map(|&i| polish(f, grid[i])).fold(f64::INFINITY, f64::min)
    };
    Ok(GapReport { gap0: best(&|e| e, &f0), gap_pi: best(&|e| PI - e, &fp) })
}

/// Bulk gaps and closing flag of the x sector.
pub fn x_sector_gaps(p: &ModelParams) -> Result<(GapReport, Closing)> {
    match p.protocol {
        Protocol::Static => {
            let g = (p.jx1.abs() - p.jx0.abs()).abs();
            let closing = Closing::from_flags(g < CRITICAL_TOL, false);
            Ok((GapReport { gap0: g, gap_pi: f64::NAN }, closing))
        }
        Protocol::KickedV1 => {
            let sol = gap_closing_locus(p);
            let closing = Closing::from_flags(sol.iter().any(|s| !s.at_pi), sol.iter().any(|s| s.at_pi));
            Ok((v1_gaps(p), closing))
        }
        Protocol::KickedV2 => {
            let g = v2_gaps(p)?;
            Ok((g, Closing::from_flags(g.gap0 < V2_GAP_TOL, g.gap_pi < V2_GAP_TOL)))
        }
    }
}

/// Whether the SSH sector sits on its critical line `|J_y1| = |J_y0|`.
pub fn y_sector_closing(p: &ModelParams) -> Closing {
    Closing::from_flags((p.jy1.abs() - p.jy0.abs()).abs() < CRITICAL_TOL, false)
}

// ---------------------------------------------------------------- reports

#[derive(Clone, Debug)]
pub struct InvariantReport {
    pub params: ModelParams,
    /// `(w_0, w_pi)`, or `(w, 0)` for a static sector.
    pub w_pair: (f64, f64),
    pub w_resolved: bool,
    /// `(omega_0, omega_pi)`, or `(omega, 0)` for a static sector.
    pub omega_pair: (i32, i32),
    /// Frame invariants `(omega_1, omega_2)` of a kicked sector.
    pub frame_omegas: Option<(i32, i32)>,
    pub gap_report: GapReport,
    pub closing: Closing,
    /// Direct zero/pole result for second-protocol critical points, where
    /// the limiting rule is authoritative.
    pub zero_pole_pair: Option<(i32, i32)>,
    pub note: Option<String>,
}

/// `(omega_0x, omega_pi x)` from the tan-half-angle conditions, evaluated as
/// polynomial inequalities so that tan poles need no special care. Ties
/// (critical lines) take the non-strict branch.
pub fn closed_form_kicked_table(p: &ModelParams) -> (i32, i32) {
    let (s0, c0) = ((p.jx0 / 2.0).sin(), (p.jx0 / 2.0).cos());
    let (s1, c1) = ((p.jx1 / 2.0).sin(), (p.jx1 / 2.0).cos());
    let ratio = (s1 * c0).abs() > (s0 * c1).abs() + CRITICAL_TOL;
    let product = (s0 * s1).abs() > (c0 * c1).abs() + CRITICAL_TOL;
    (ratio as i32, product as i32)
}

fn frame_windings(p: &ModelParams) -> Result<(Winding, Winding)> {
    let mut out = [Winding { value: 0.0, resolved: true }; 2];
    for (i, frame) in [Frame::Sym1, Frame::Sym2].into_iter().enumerate() {
        let mut err = None;
        let s = sample_loop(WINDING_GRID, |k| match floquet_x_su2(k, p, frame) {
            Ok(u) => dz_loop(&u),
            Err(e) => {
                err = Some(e);
                c64::new(0.0, 0.0)
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        out[i] = winding_integral(&s)?;
    }
    Ok((out[0], out[1]))
}

fn combine(w1: i32, w2: i32, what: &str) -> Result<(i32, i32)> {
    if (w1 + w2) % 2 != 0 {
        return Err(Error::HalfInteger(format!("{what}: frame invariants ({w1}, {w2})")));
    }
    Ok(((w1 + w2) / 2, (w1 - w2) / 2))
}

fn zero_pole_pair(p: &ModelParams, closing: Closing) -> Result<((i32, i32), (i32, i32))> {
    let f1 = build_mapping(MappingKind::KickedX, p, Frame::Sym1)?;
    let f2 = build_mapping(MappingKind::KickedX, p, Frame::Sym2)?;
    let w1 = zero_pole_invariant(&f1, closing)?;
    let w2 = zero_pole_invariant(&f2, closing)?;
    Ok(((w1, w2), combine(w1, w2, "zero/pole")?))
}

/// Invariants of the kicked x sector.
pub fn kicked_invariants(p: &ModelParams) -> Result<InvariantReport> {
    p.validate()?;
    if !p.protocol.is_kicked() {
        return Err(Error::InvalidInput("kicked_invariants needs a kicked protocol".into()));
    }
    let (gap_report, closing) = x_sector_gaps(p)?;
    let (a, b) = frame_windings(p)?;
    let w_pair = (0.5 * (a.value + b.value), 0.5 * (a.value - b.value));
    let mut report = InvariantReport {
        params: *p,
        w_pair,
        w_resolved: a.resolved && b.resolved,
        omega_pair: (0, 0),
        frame_omegas: None,
        gap_report,
        closing,
        zero_pole_pair: None,
        note: None,
    };
    if p.protocol == Protocol::KickedV1 || closing == Closing::Gapped {
        let (frames, pair) = zero_pole_pair(p, closing)?;
        report.frame_omegas = Some(frames);
        report.omega_pair = pair;
        if p.protocol == Protocol::KickedV1 {
            let table = closed_form_kicked_table(p);
            if table != pair {
                return Err(Error::Inconsistent(format!(
                    "closed-form table {table:?} vs zero/pole {pair:?} at {p:?}"
                )));
            }
        }
        return Ok(report);
    }
    // Second protocol on a critical line: the limiting rule decides, the
    // direct zero/pole count is kept for comparison.
    let limit = limiting_rule(p, closing)?;
    report.omega_pair = limit;
    report.frame_omegas = Some((limit.0 + limit.1, limit.0 - limit.1));
    match zero_pole_pair(p, closing) {
        Ok((_, pair)) => {
            report.zero_pole_pair = Some(pair);
            if pair != limit {
                report.note = Some(format!("zero/pole count {pair:?} differs from limiting rule {limit:?}"));
            }
        }
        Err(e) => report.note = Some(format!("zero/pole count unavailable: {e}")),
    }
    Ok(report)
}

/// Critical invariants from the two neighbouring gapped phases at
/// `J_x1 -/+ LIMIT_OFFSET`: the closing gap takes the smaller magnitude, a
/// gap that stays open must carry the same value on both sides.
pub fn limiting_rule(p: &ModelParams, closing: Closing) -> Result<(i32, i32)> {
    let side = |s: f64| -> Result<(i32, i32)> {
        let q = ModelParams { jx1: p.jx1 + s * LIMIT_OFFSET, ..*p };
        let (_, c) = x_sector_gaps(&q)?;
        if c != Closing::Gapped {
            return Err(Error::Inconsistent(format!("limiting-rule sample {q:?} is not gapped")));
        }
        Ok(zero_pole_pair(&q, c)?.1)
    };
    let (lo, hi) = (side(-1.0)?, side(1.0)?);
    let pick = |closes: bool, a: i32, b: i32, which: &str| -> Result<i32> {
        if closes {
            Ok(a.abs().min(b.abs()))
        } else if a == b {
            Ok(a)
        } else {
            Err(Error::Inconsistent(format!(
                "open {which} gap changes invariant across {p:?}: {a} vs {b}"
            )))
        }
    };
    Ok((pick(closing.zero(), lo.0, hi.0, "zero")?, pick(closing.pi(), lo.1, hi.1, "pi")?))
}

fn static_sector(p: &ModelParams, kind: MappingKind) -> Result<(Winding, i32, Closing, f64)> {
    let (j0, j1) = match kind {
        MappingKind::ClStatic => (p.jx0, p.jx1),
        _ => (p.jy0, p.jy1),
    };
    let gap = (j1.abs() - j0.abs()).abs();
    let closing = Closing::from_flags(gap < CRITICAL_TOL, false);
    let f = build_mapping(kind, p, Frame::Sym1)?;
    let w = winding_integral(&sample_loop(WINDING_GRID, |k| f.eval(c64::from_polar(1.0, k))))?;
    Ok((w, zero_pole_invariant(&f, closing)?, closing, gap))
}

/// Invariants of the static x sector (`omega_pair = (omega_x, 0)`).
pub fn static_x_invariants(p: &ModelParams) -> Result<InvariantReport> {
    let (w, omega, closing, gap) = static_sector(p, MappingKind::ClStatic)?;
    Ok(InvariantReport {
        params: *p,
        w_pair: (w.value, 0.0),
        w_resolved: w.resolved,
        omega_pair: (omega, 0),
        frame_omegas: None,
        gap_report: GapReport { gap0: gap, gap_pi: f64::NAN },
        closing,
        zero_pole_pair: None,
        note: None,
    })
}

#[derive(Clone, Debug)]
pub struct CompositeReport {
    pub params: ModelParams,
    pub x: InvariantReport,
    pub w_y: f64,
    pub omega_y: i32,
    pub closing_y: Closing,
    /// `(omega_0, omega_pi)`; static models report `(omega, 0)`.
    pub omega_pair: (i32, i32),
    /// `4 (omega_0, omega_pi)`.
    pub predicted: (usize, usize),
}

pub fn composite_invariants(p: &ModelParams) -> Result<CompositeReport> {
    p.validate()?;
    let (wy, omega_y, closing_y, _) = static_sector(p, MappingKind::SshStatic)?;
    let x = if p.protocol.is_kicked() { kicked_invariants(p)? } else { static_x_invariants(p)? };
    let omega_pair = if p.protocol.is_kicked() {
        ((x.omega_pair.0 * omega_y).abs(), (x.omega_pair.1 * omega_y).abs())
    } else {
        (x.omega_pair.0 * omega_y, 0)
    };
    let predicted = (4 * omega_pair.0.unsigned_abs() as usize, 4 * omega_pair.1.unsigned_abs() as usize);
    Ok(CompositeReport { params: *p, x, w_y: wy.value, omega_y, closing_y, omega_pair, predicted })
}

/// Scalar functions whose zero sets are the critical loci of the composite
/// model; a sign change between two parameter points means a locus lies
/// between them.
pub fn critical_indicators(p: &ModelParams) -> Vec<f64> {
    let mut out = vec![p.jy1 * p.jy1 - p.jy0 * p.jy0];
    match p.protocol {
        Protocol::Static => out.push(p.jx1 * p.jx1 - p.jx0 * p.jx0),
        Protocol::KickedV1 => {
            out.push((p.jx0 + p.jx1).sin());
            out.push((p.jx0 - p.jx1).sin());
        }
        Protocol::KickedV2 => {
            for mu in -4..=4 {
                for nu in -4..=4 {
                    out.push(ellipse_residual(p, mu, nu).unwrap_or(f64::NAN));
                }
            }
        }
    }
    out
}
