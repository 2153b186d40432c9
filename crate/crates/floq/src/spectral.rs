//! Eigendecomposition of unitary and Hermitian lattice operators, IPRs,
//! spectral gaps at 0 and pi, and localized-mode counting.

use std::f64::consts::{PI, TAU};

use faer::{c64, Col, Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::linalg::unitarity_residual;
use crate::model::{Boundary, LatticeOperator, ModelParams, OperatorKind, Repr, UNITARY_TOL};

/// Two eigenvalues of `(U + U^dag)/2` closer than this are treated as one
/// cluster and split by the anti-Hermitian part.
pub const CLUSTER_TOL: f64 = 1e-8;

/// Folds a phase into `[-pi, pi)`.
pub fn fold(e: f64) -> f64 {
    let r = (e + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// Distance on the unit circle between two phases.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Quasienergies on the circle.
    Circle,
    /// Energies on the real line.
    Line,
}

#[derive(Clone, Debug)]
pub enum Vectors {
    Dense(Mat<c64>),
    /// Eigenvectors of a Kronecker-structured operator, kept as factor pairs.
    Product { x: Mat<c64>, y: Mat<c64>, pairs: Vec<(usize, usize)> },
    None,
}

/// Sorted eigenvalues with IPRs and (optionally) eigenvectors. For Floquet
/// operators `values` are quasienergies in `[-pi, pi)`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub iprs: Vec<f64>,
    pub vectors: Vectors,
    pub metric: Metric,
}

pub type QuasienergySpectrum = Spectrum;

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn distance(&self, value: f64, target: f64) -> f64 {
        match self.metric {
            Metric::Circle => circle_dist(value, target),
            Metric::Line => (value - target).abs(),
        }
    }

    pub fn vector(&self, i: usize) -> Option<Col<c64>> {
        match &self.vectors {
            Vectors::Dense(v) => Some(v.col(i).to_owned()),
            Vectors::Product { x, y, pairs } => {
                let (ix, iy) = pairs[i];
                let (cx, cy) = (x.col(ix), y.col(iy));
                let ny = cy.nrows();
                Some(Col::from_fn(cx.nrows() * ny, |r| cx[r / ny] * cy[r % ny]))
            }
            Vectors::None => None,
        }
    }

    /// Indices of states within `eps_tol` of `target` whose IPR exceeds `ipr_min`.
    pub fn select(&self, target: f64, eps_tol: f64, ipr_min: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.distance(self.values[i], target) < eps_tol && self.iprs[i] > ipr_min)
            .collect()
    }

    pub fn median_ipr(&self) -> f64 {
        median(&self.iprs)
    }

    fn sorted(mut self) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.values = order.iter().map(|&i| self.values[i]).collect();
        self.iprs = order.iter().map(|&i| self.iprs[i]).collect();
        self.vectors = match self.vectors {
            Vectors::Dense(v) => Vectors::Dense(Mat::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, order[c])])),
            Vectors::Product { x, y, pairs } => {
                let pairs = order.iter().map(|&i| pairs[i]).collect();
                Vectors::Product { x, y, pairs }
            }
            Vectors::None => Vectors::None,
        };
        self
    }
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn ipr_unchecked(v: impl Iterator<Item = c64>) -> f64 {
    v.map(|z| z.norm_sqr() * z.norm_sqr()).sum()
}

/// Inverse participation ratio `sum |psi|^4` of a normalized vector.
pub fn ipr(v: &[c64]) -> Result<f64> {
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let dev = (norm.sqrt() - 1.0).abs();
    if dev > 1e-8 {
        return Err(Error::NotNormalized { deviation: dev });
    }
    Ok(ipr_unchecked(v.iter().copied()))
}

fn column_iprs(v: MatRef<'_, c64>) -> Vec<f64> {
    (0..v.ncols()).map(|j| ipr_unchecked(v.col(j).iter().copied())).collect()
}

/// Two-stage unitary eigensolver: diagonalize `(U + U^dag)/2`, then split
/// each degenerate cluster with `(U - U^dag)/(2i)`, whose eigenvalue on
/// `exp(-i eps)` is `-sin eps`.
pub fn eig_unitary_matrix(u: MatRef<'_, c64>) -> Result<Spectrum> {
    let r = unitarity_residual(u);
    if r > UNITARY_TOL {
        return Err(Error::NotUnitary { residual: r });
    }
    let n = u.nrows();
    let half = c64::new(0.5, 0.0);
    let herm = Mat::from_fn(n, n, |i, j| (u[(i, j)] + u[(j, i)].conj()) * half);
    let anti = Mat::from_fn(n, n, |i, j| (u[(i, j)] - u[(j, i)].conj()) * c64::new(0.0, -0.5));
    let evd = herm
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let cosines: Vec<f64> = (0..n).map(|i| evd.S().column_vector()[i].re).collect();
    let mut v = evd.U().to_owned();
    let av = &anti * &v;
    let mut sines = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && cosines[end] - cosines[end - 1] < CLUSTER_TOL {
            end += 1;
        }
        if end - start == 1 {
            let col = v.col(start);
            let mut s = c64::new(0.0, 0.0);
            for i in 0..n {
                s += col[i].conj() * av[(i, start)];
            }
            sines[start] = s.re;
        } else {
            let block = v.subcols(start, end - start);
            let small = block.adjoint() * av.subcols(start, end - start);
            let small = Mat::from_fn(small.nrows(), small.ncols(), |i, j| {
                (small[(i, j)] + small[(j, i)].conj()) * half
            });
            let sevd = small
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
            let rotated = block * sevd.U();
            for j in 0..end - start {
                sines[start + j] = sevd.S().column_vector()[j].re;
            }
            v.subcols_mut(start, end - start).copy_from(&rotated);
        }
        start = end;
    }
    let values = (0..n).map(|i| fold((-sines[i]).atan2(cosines[i]))).collect();
    let iprs = column_iprs(v.as_ref());
    Ok(Spectrum { values, iprs, vectors: Vectors::Dense(v), metric: Metric::Circle }.sorted())
}

pub fn eig_hermitian_matrix(h: MatRef<'_, c64>) -> Result<Spectrum> {
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let n = h.nrows();
    let values = (0..n).map(|i| evd.S().column_vector()[i].re).collect();
    let v = evd.U().to_owned();
    let iprs = column_iprs(v.as_ref());
    Ok(Spectrum { values, iprs, vectors: Vectors::Dense(v), metric: Metric::Line }.sorted())
}

fn product_spectrum(a: Spectrum, b: Spectrum, combine: impl Fn(f64, f64) -> f64) -> Spectrum {
    let (Vectors::Dense(x), Vectors::Dense(y)) = (a.vectors, b.vectors) else {
        unreachable!("factor spectra are dense")
    };
    let mut values = Vec::with_capacity(a.values.len() * b.values.len());
    let mut iprs = Vec::with_capacity(values.capacity());
    let mut pairs = Vec::with_capacity(values.capacity());
    for (i, (ea, pa)) in a.values.iter().zip(&a.iprs).enumerate() {
        for (j, (eb, pb)) in b.values.iter().zip(&b.iprs).enumerate() {
            values.push(combine(*ea, *eb));
            iprs.push(pa * pb);
            pairs.push((i, j));
        }
    }
    Spectrum { values, iprs, vectors: Vectors::Product { x, y, pairs }, metric: a.metric }.sorted()
}

/// Quasienergy spectrum of a Floquet operator. Kronecker-structured
/// operators are solved factor by factor.
pub fn eig_unitary(op: &LatticeOperator) -> Result<Spectrum> {
    if op.kind() != OperatorKind::Floquet {
        return Err(Error::InvalidInput("eig_unitary needs a Floquet operator".into()));
    }
    match op.repr() {
        Repr::Dense(m) => eig_unitary_matrix(m.as_ref()),
        Repr::Kron(a, b) => {
            Ok(product_spectrum(eig_unitary(a)?, eig_unitary(b)?, |x, y| fold(x + y)))
        }
        Repr::KronSum(..) => Err(Error::InvalidInput("Kronecker sum is not unitary".into())),
    }
}

/// Energy spectrum of a Hamiltonian; Kronecker sums are solved per factor.
pub fn eig_hermitian(op: &LatticeOperator) -> Result<Spectrum> {
    if op.kind() != OperatorKind::Hamiltonian {
        return Err(Error::InvalidInput("eig_hermitian needs a Hamiltonian".into()));
    }
    match op.repr() {
        Repr::Dense(m) => eig_hermitian_matrix(m.as_ref()),
        Repr::KronSum(a, b) => Ok(product_spectrum(eig_hermitian(a)?, eig_hermitian(b)?, |x, y| x + y)),
        Repr::Kron(..) => Err(Error::InvalidInput("Kronecker product Hamiltonian".into())),
    }
}

/// Eigen-solve dispatching on the operator kind.
pub fn eig(op: &LatticeOperator) -> Result<Spectrum> {
    match op.kind() {
        OperatorKind::Floquet => eig_unitary(op),
        OperatorKind::Hamiltonian => eig_hermitian(op),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapReport {
    pub gap0: f64,
    pub gap_pi: f64,
}

/// Minimum circle distance of the spectrum to 0 and to pi.
pub fn gaps(spec: &Spectrum) -> GapReport {
    gaps_of(&spec.values)
}

pub fn gaps_of(values: &[f64]) -> GapReport {
    let mut g = GapReport { gap0: f64::INFINITY, gap_pi: f64::INFINITY };
    for &e in values {
        g.gap0 = g.gap0.min(circle_dist(e, 0.0));
        g.gap_pi = g.gap_pi.min(circle_dist(e, PI));
    }
    g
}

/// Number of states within `eps_tol` of `target` with IPR above `ipr_min`.
pub fn count_modes(spec: &Spectrum, target: f64, eps_tol: f64, ipr_min: f64) -> usize {
    spec.select(target, eps_tol, ipr_min).len()
}

/// Default localization threshold: ten times the median IPR.
pub fn default_ipr_min(spec: &Spectrum) -> f64 {
    10.0 * spec.median_ipr()
}

/// Spectrum with one periodic and one open direction. The periodic
/// direction is block-diagonalized on `k = 2 pi j / L`; each state's IPR is
/// the internal IPR of the Bloch eigenvector over `L` times the IPR of the
/// open-direction state.
pub fn mixed_bc_spectrum(
    p: &ModelParams,
    bc: (Boundary, Boundary),
    lengths: (usize, usize),
) -> Result<Spectrum> {
    use crate::model::{floquet_x_realspace, floquet_x_su2, floquet_y_realspace, floquet_y_su2, Frame};
    let x_periodic = match bc {
        (Boundary::Periodic, Boundary::Open) => true,
        (Boundary::Open, Boundary::Periodic) => false,
        _ => {
            return Err(Error::InvalidInput(
                "mixed spectrum needs exactly one periodic and one open direction".into(),
            ))
        }
    };
    if !p.protocol.is_kicked() {
        return Err(Error::InvalidInput("mixed spectrum is implemented for kicked protocols".into()));
    }
    let (lp, open) = if x_periodic {
        (lengths.0, eig_unitary(&floquet_y_realspace(lengths.1, Boundary::Open, p)?)?)
    } else {
        (lengths.1, eig_unitary(&floquet_x_realspace(lengths.0, Boundary::Open, p)?)?)
    };
    if lp < 2 {
        return Err(Error::InvalidInput(format!("length {lp} < 2 cells")));
    }
    let mut values = Vec::with_capacity(2 * lp * open.len());
    let mut iprs = Vec::with_capacity(values.capacity());
    for j in 0..lp {
        let k = fold(TAU * j as f64 / lp as f64);
        let u = if x_periodic { floquet_x_su2(k, p, Frame::Raw)? } else { floquet_y_su2(k, p) };
        let bloch = eig_unitary_matrix(u.to_mat().as_ref())?;
        for (eb, ib) in bloch.values.iter().zip(&bloch.iprs) {
            for (eo, io) in open.values.iter().zip(&open.iprs) {
                values.push(fold(eb + eo));
                iprs.push(ib / lp as f64 * io);
            }
        }
    }
    Ok(Spectrum { values, iprs, vectors: Vectors::None, metric: Metric::Circle }.sorted())
}

/// Largest residual `|U v - exp(-i eps) v|` over a dense spectrum.
pub fn max_residual(u: MatRef<'_, c64>, spec: &Spectrum) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..spec.len() {
        let v = spec.vector(i).expect("spectrum carries vectors");
        let uv = u * &v;
        let ph = c64::from_polar(1.0, -spec.values[i]);
        let r: f64 = (0..v.nrows()).map(|r| (uv[r] - ph * v[r]).norm_sqr()).sum();
        worst = worst.max(r.sqrt());
    }
    worst
}
