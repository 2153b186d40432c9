//! Closed-form edge and corner modes, their localization predicates, and
//! comparison with numerically obtained eigenspaces.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use faer::{c64, Col, Mat};

use crate::error::{Error, Result};
use crate::model::{Basis, ChainModel, ModelParams, Protocol};
use crate::spectral::Spectrum;

/// `|decay|` must stay below `1 - DECAY_TOL` for a mode to count as normalizable.
pub const DECAY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Place {
    L,
    R,
    B,
    T,
    LB,
    LT,
    RB,
    RT,
}

impl Place {
    pub const CORNERS: [Place; 4] = [Place::LB, Place::LT, Place::RB, Place::RT];

    pub fn name(self) -> &'static str {
        match self {
            Place::L => "L",
            Place::R => "R",
            Place::B => "B",
            Place::T => "T",
            Place::LB => "LB",
            Place::LT => "LT",
            Place::RB => "RB",
            Place::RT => "RT",
        }
    }

    fn split(self) -> Option<(Place, Place)> {
        match self {
            Place::LB => Some((Place::L, Place::B)),
            Place::LT => Some((Place::L, Place::T)),
            Place::RB => Some((Place::R, Place::B)),
            Place::RT => Some((Place::R, Place::T)),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Zero,
    Pi,
}

impl Target {
    pub fn value(self) -> f64 {
        match self {
            Target::Zero => 0.0,
            Target::Pi => PI,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::Zero => "0",
            Target::Pi => "pi",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticMode {
    pub place: Place,
    pub target: Target,
    /// Amplitude ratio between neighbouring cells, moving away from the edge.
    pub decay_x: Option<f64>,
    pub decay_y: Option<f64>,
    /// Per-cell sublattice spinor of each direction.
    pub amplitudes_x: Option<[c64; 2]>,
    pub amplitudes_y: Option<[c64; 2]>,
    pub normalizable: bool,
}

fn localized(r: f64) -> bool {
    r.abs() < 1.0 - DECAY_TOL
}

/// `r^d` for the distance `d` of each cell from the edge, rescaled so the
/// largest entry stays O(1) even when `|r| > 1`.
fn profile(r: f64, cells: usize, from_left: bool) -> Vec<f64> {
    let dist = |m: usize| if from_left { m } else { cells - 1 - m };
    (0..cells)
        .map(|m| {
            let d = dist(m) as i32;
            if r.abs() <= 1.0 {
                r.powi(d)
            } else {
                (1.0 / r).powi(cells as i32 - 1 - d)
            }
        })
        .collect()
}

fn chain_vector(prof: &[f64], spinor: [c64; 2]) -> Col<c64> {
    let mut v = Col::from_fn(2 * prof.len(), |i| spinor[i % 2] * prof[i / 2]);
    let n = v.norm_l2();
    v /= n;
    v
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den == 0.0 {
        if num == 0.0 {
            return Err(Error::TanPole(format!("{what} is 0/0")));
        }
        return Err(Error::TanPole(what.to_string()));
    }
    Ok(num / den)
}

/// Zero-energy edge mode of the static ladder (`L`, `R`) or SSH chain (`B`, `T`).
pub fn static_edge_mode(
    model: ChainModel,
    side: Place,
    p: &ModelParams,
    length: usize,
) -> Result<(AnalyticMode, Col<c64>)> {
    if length < 2 {
        return Err(Error::InvalidInput(format!("length {length} < 2 cells")));
    }
    let s = FRAC_1_SQRT_2;
    let (r, spinor, from_left) = match (model, side) {
        (ChainModel::Cl, Place::L | Place::R) => {
            if p.jx1 == 0.0 {
                return Err(Error::InvalidInput("J_x1 = 0 leaves no edge mode".into()));
            }
            let left = side == Place::L;
            let sp = if left { [c64::new(s, 0.0), c64::new(0.0, -s)] } else { [c64::new(s, 0.0), c64::new(0.0, s)] };
            (-p.jx0 / p.jx1, sp, left)
        }
        (ChainModel::Ssh, Place::B | Place::T) => {
            if p.jy1 == 0.0 {
                return Err(Error::InvalidInput("J_y1 = 0 leaves no edge mode".into()));
            }
            let bottom = side == Place::B;
            let sp = if bottom { [c64::new(1.0, 0.0), c64::new(0.0, 0.0)] } else { [c64::new(0.0, 0.0), c64::new(1.0, 0.0)] };
            (-p.jy0 / p.jy1, sp, bottom)
        }
        _ => return Err(Error::InvalidInput(format!("{model:?} has no {side:?} edge"))),
    };
    let v = chain_vector(&profile(r, length, from_left), spinor);
    let x_dir = model == ChainModel::Cl;
    let mode = AnalyticMode {
        place: side,
        target: Target::Zero,
        decay_x: x_dir.then_some(r),
        decay_y: (!x_dir).then_some(r),
        amplitudes_x: x_dir.then_some(spinor),
        amplitudes_y: (!x_dir).then_some(spinor),
        normalizable: localized(r),
    };
    Ok((mode, v))
}

/// Decay factors `(r_0, r_pi) = (-tan(J0/2)/tan(J1/2), 1/(tan(J0/2) tan(J1/2)))`
/// of the kicked ladder, in half-angle form.
pub fn kicked_decays(p: &ModelParams) -> (Result<f64>, Result<f64>) {
    let (s0, c0) = ((p.jx0 / 2.0).sin(), (p.jx0 / 2.0).cos());
    let (s1, c1) = ((p.jx1 / 2.0).sin(), (p.jx1 / 2.0).cos());
    (ratio(-s0 * c1, c0 * s1, "zero-mode decay"), ratio(c0 * c1, s0 * s1, "pi-mode decay"))
}

/// Zero or pi edge mode of the kicked ladder (first protocol, raw frame).
pub fn kicked_edge_mode(
    side: Place,
    target: Target,
    p: &ModelParams,
    length: usize,
) -> Result<(AnalyticMode, Col<c64>)> {
    if p.protocol != Protocol::KickedV1 {
        return Err(Error::InvalidInput("closed-form kicked modes exist for kicked_v1 only".into()));
    }
    if length < 2 {
        return Err(Error::InvalidInput(format!("length {length} < 2 cells")));
    }
    let (s0, c0) = ((p.jx0 / 2.0).sin(), (p.jx0 / 2.0).cos());
    let rho = (c0 - s0) * FRAC_1_SQRT_2;
    let lam = (c0 + s0) * FRAC_1_SQRT_2;
    let first = [c64::new(rho, 0.0), c64::new(0.0, -lam)];
    let second = [c64::new(lam, 0.0), c64::new(0.0, rho)];
    let (d0, dpi) = kicked_decays(p);
    let (r, spinor, from_left) = match (side, target) {
        (Place::L, Target::Zero) => (d0?, first, true),
        (Place::L, Target::Pi) => (dpi?, second, true),
        (Place::R, Target::Zero) => (d0?, second, false),
        (Place::R, Target::Pi) => (dpi?, first, false),
        _ => return Err(Error::InvalidInput(format!("kicked ladder has no {side:?} edge"))),
    };
    let v = chain_vector(&profile(r, length, from_left), spinor);
    let mode = AnalyticMode {
        place: side,
        target,
        decay_x: Some(r),
        decay_y: None,
        amplitudes_x: Some(spinor),
        amplitudes_y: None,
        normalizable: localized(r),
    };
    Ok((mode, v))
}

/// Corner mode: x-edge mode (static or kicked) times the SSH zero mode.
pub fn corner_mode(
    corner: Place,
    target: Target,
    p: &ModelParams,
    lengths: (usize, usize),
) -> Result<(AnalyticMode, Col<c64>)> {
    let Some((xs, ys)) = corner.split() else {
        return Err(Error::InvalidInput(format!("{corner:?} is not a corner")));
    };
    let (mx, vx) = match p.protocol {
        Protocol::Static => {
            if target != Target::Zero {
                return Err(Error::InvalidInput("static corner modes sit at zero energy".into()));
            }
            static_edge_mode(ChainModel::Cl, xs, p, lengths.0)?
        }
        Protocol::KickedV1 => kicked_edge_mode(xs, target, p, lengths.0)?,
        Protocol::KickedV2 => {
            return Err(Error::InvalidInput("kicked_v2 corner modes have no closed form".into()))
        }
    };
    let (my, vy) = static_edge_mode(ChainModel::Ssh, ys, p, lengths.1)?;
    let ny = vy.nrows();
    let v = Col::from_fn(vx.nrows() * ny, |i| vx[i / ny] * vy[i % ny]);
    let mode = AnalyticMode {
        place: corner,
        target,
        decay_x: mx.decay_x,
        decay_y: my.decay_y,
        amplitudes_x: mx.amplitudes_x,
        amplitudes_y: my.amplitudes_y,
        normalizable: mx.normalizable && my.normalizable,
    };
    Ok((mode, v))
}

/// All four corner modes in the fixed order LB, LT, RB, RT.
pub fn corner_modes(p: &ModelParams, target: Target, lengths: (usize, usize)) -> Result<Vec<(AnalyticMode, Col<c64>)>> {
    Place::CORNERS.iter().map(|&c| corner_mode(c, target, p, lengths)).collect()
}

/// Gram-Schmidt in the given order (twice, for stability).
pub fn orthonormalize(vectors: &[Col<c64>]) -> Result<Vec<Col<c64>>> {
    let mut out: Vec<Col<c64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let proj = q.adjoint() * &w;
                for i in 0..w.nrows() {
                    w[i] -= q[i] * proj;
                }
            }
        }
        let n = w.norm_l2();
        if n < 1e-12 {
            return Err(Error::InvalidInput("linearly dependent mode set".into()));
        }
        w /= n;
        out.push(w);
    }
    Ok(out)
}

/// Smallest singular value of the overlap between the analytic vectors and
/// the numeric eigenvectors within `eps_tol` of `target`.
pub fn subspace_overlap(analytic: &[Col<c64>], numeric: &Spectrum, target: f64, eps_tol: f64) -> Result<f64> {
    let idx: Vec<usize> = (0..numeric.len())
        .filter(|&i| numeric.distance(numeric.values[i], target) < eps_tol)
        .collect();
    if idx.len() < analytic.len() || idx.is_empty() {
        return Err(Error::SubspaceTooSmall { found: idx.len(), needed: analytic.len().max(1) });
    }
    let cols: Vec<Col<c64>> = idx
        .iter()
        .map(|&i| numeric.vector(i).ok_or_else(|| Error::InvalidInput("spectrum has no eigenvectors".into())))
        .collect::<Result<_>>()?;
    let m = Mat::from_fn(analytic.len(), cols.len(), |i, j| analytic[i].adjoint() * &cols[j]);
    let sv = m.singular_values().map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    Ok(sv.iter().copied().fold(f64::INFINITY, f64::min))
}

/// x-marginal probability per cell, summed over a set of vectors.
pub fn x_marginal(vectors: &[Col<c64>], basis: &Basis) -> Vec<f64> {
    let (cells, per_cell) = match basis {
        Basis::Chain(c) => (c.cells, 2),
        Basis::Plane { x, y } => (x.cells, 2 * y.len()),
    };
    let mut p = vec![0.0; cells];
    for v in vectors {
        for (i, z) in v.iter().enumerate() {
            p[i / per_cell] += z.norm_sqr();
        }
    }
    p
}

/// Least-squares decay factor `|r|` from `P(m) ~ |r|^{2m}` over the first
/// quarter of the cells (where the opposite edge contributes nothing).
pub fn fit_decay(marginal: &[f64]) -> f64 {
    let top = marginal.iter().copied().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = marginal[..(marginal.len() / 4).max(2)]
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-28 * top)
        .map(|(m, &v)| (m as f64, v.ln()))
        .collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
    (0.5 * num / den).exp()
}
