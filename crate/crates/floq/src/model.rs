//! Lattice models: static Creutz ladder (x) and SSH chain (y), their kicked
//! Floquet versions, and the perturbed / disordered 2D composites.
//!
//! Every real-space operator is assembled from one nearest-neighbour pattern
//!
//! ```text
//! H = sum_m c_m^dag D c_m + (c_m^dag T c_{m+1} + h.c.)
//! ```
//!
//! whose Bloch form is `D + T e^{ik} + T^dag e^{-ik}`. A `cos k M` term is the
//! hop `T = M/2` and a `sin k M` term is `T = M/(2i)`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use faer::{c64, Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    expm_hermitian, hermiticity_residual, kron, m2_add, m2_scale, m2_to_mat, max_abs,
    unitarity_residual, Su2, ID2, LOWER, M2, SX, SY, SZ,
};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Protocol {
    Static,
    KickedV1,
    KickedV2,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Static => "static",
            Protocol::KickedV1 => "kicked_v1",
            Protocol::KickedV2 => "kicked_v2",
        }
    }

    pub fn parse(s: &str) -> Option<Protocol> {
        match s {
            "static" => Some(Protocol::Static),
            "kicked_v1" | "v1" => Some(Protocol::KickedV1),
            "kicked_v2" | "v2" => Some(Protocol::KickedV2),
            _ => None,
        }
    }

    pub fn is_kicked(self) -> bool {
        self != Protocol::Static
    }
}

/// Coupling constants of the coupled ladder/chain model. `jx1p` is the kick
/// amplitude of the second protocol and is ignored otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub jx0: f64,
    pub jx1: f64,
    pub jy0: f64,
    pub jy1: f64,
    pub jx1p: f64,
    pub protocol: Protocol,
}

impl ModelParams {
    pub fn new(protocol: Protocol, jx0: f64, jx1: f64, jy0: f64, jy1: f64) -> Self {
        ModelParams { jx0, jx1, jy0, jy1, jx1p: 0.0, protocol }
    }

    pub fn kicked_v2(jx0: f64, jx1: f64, jx1p: f64, jy0: f64, jy1: f64) -> Self {
        ModelParams { jx0, jx1, jy0, jy1, jx1p, protocol: Protocol::KickedV2 }
    }

    /// Angle parameterization of the kicked phase diagram.
    pub fn from_angles(theta: f64, phi: f64, protocol: Protocol) -> Self {
        ModelParams {
            jx0: FRAC_PI_2 - FRAC_PI_4 * theta.sin(),
            jx1: FRAC_PI_2 - FRAC_PI_4 * theta.cos(),
            jy0: FRAC_PI_2 + FRAC_PI_4 * phi.cos(),
            jy1: FRAC_PI_2 - FRAC_PI_4 * phi.cos(),
            jx1p: 0.0,
            protocol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.jx0, self.jx1, self.jy0, self.jy1, self.jx1p];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coupling in {self:?}")));
        }
        Ok(())
    }

    fn require_kicked(&self) -> Result<()> {
        if !self.protocol.is_kicked() {
            return Err(Error::InvalidInput("operation needs a kicked protocol".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Open,
    NotApplicable,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Open => "open",
            Boundary::NotApplicable => "not_applicable",
        }
    }

    pub fn parse(s: &str) -> Option<Boundary> {
        match s {
            "periodic" | "pbc" => Some(Boundary::Periodic),
            "open" | "obc" => Some(Boundary::Open),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChainKind {
    /// Creutz ladder, legs u and v.
    Ladder,
    /// SSH chain, sublattices a and b.
    Ssh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sublattice {
    U,
    V,
    A,
    B,
}

impl Sublattice {
    pub fn name(self) -> &'static str {
        match self {
            Sublattice::U => "u",
            Sublattice::V => "v",
            Sublattice::A => "a",
            Sublattice::B => "b",
        }
    }

    fn slot(self) -> usize {
        match self {
            Sublattice::U | Sublattice::A => 0,
            Sublattice::V | Sublattice::B => 1,
        }
    }
}

impl ChainKind {
    fn sublattice(self, slot: usize) -> Sublattice {
        match (self, slot) {
            (ChainKind::Ladder, 0) => Sublattice::U,
            (ChainKind::Ladder, _) => Sublattice::V,
            (ChainKind::Ssh, 0) => Sublattice::A,
            (ChainKind::Ssh, _) => Sublattice::B,
        }
    }

    fn owns(self, s: Sublattice) -> bool {
        match self {
            ChainKind::Ladder => matches!(s, Sublattice::U | Sublattice::V),
            ChainKind::Ssh => matches!(s, Sublattice::A | Sublattice::B),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ChainBasis {
    pub kind: ChainKind,
    pub cells: usize,
}

impl ChainBasis {
    pub fn len(&self) -> usize {
        2 * self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells == 0
    }
}

/// Basis of an operator. 2D rows use x-outer ordering:
/// `row = x_row * dim_y + y_row` with `x_row = 2 * cell_x + sub_x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Chain(ChainBasis),
    Plane { x: ChainBasis, y: ChainBasis },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisLabel {
    Chain { cell: usize, sub: Sublattice },
    Plane { cell_x: usize, sub_x: Sublattice, cell_y: usize, sub_y: Sublattice },
}

impl Basis {
    pub fn len(&self) -> usize {
        match self {
            Basis::Chain(c) => c.len(),
            Basis::Plane { x, y } => x.len() * y.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, row: usize) -> BasisLabel {
        match self {
            Basis::Chain(c) => BasisLabel::Chain { cell: row / 2, sub: c.kind.sublattice(row % 2) },
            Basis::Plane { x, y } => {
                let (rx, ry) = (row / y.len(), row % y.len());
                BasisLabel::Plane {
                    cell_x: rx / 2,
                    sub_x: x.kind.sublattice(rx % 2),
                    cell_y: ry / 2,
                    sub_y: y.kind.sublattice(ry % 2),
                }
            }
        }
    }

    pub fn index(&self, label: &BasisLabel) -> Option<usize> {
        match (self, label) {
            (Basis::Chain(c), BasisLabel::Chain { cell, sub }) => {
                (*cell < c.cells && c.kind.owns(*sub)).then(|| 2 * cell + sub.slot())
            }
            (Basis::Plane { x, y }, BasisLabel::Plane { cell_x, sub_x, cell_y, sub_y }) => {
                let ok = *cell_x < x.cells
                    && *cell_y < y.cells
                    && x.kind.owns(*sub_x)
                    && y.kind.owns(*sub_y);
                ok.then(|| (2 * cell_x + sub_x.slot()) * y.len() + 2 * cell_y + sub_y.slot())
            }
            _ => None,
        }
    }

    pub fn labels(&self) -> impl Iterator<Item = BasisLabel> + '_ {
        (0..self.len()).map(move |i| self.label(i))
    }

    fn describe(&self) -> String {
        match self {
            Basis::Chain(c) => format!("{:?} chain", c.kind),
            Basis::Plane { x, y } => format!("{:?} x {:?} plane", x.kind, y.kind),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Hamiltonian,
    Floquet,
}

/// Storage of a lattice operator. Factorized forms keep the two 1D factors
/// so that spectra can be assembled without touching the full matrix.
#[derive(Clone, Debug)]
pub enum Repr {
    Dense(Mat<c64>),
    /// `x (x) y`, used for Floquet operators.
    Kron(Box<LatticeOperator>, Box<LatticeOperator>),
    /// `x (x) 1 + 1 (x) y`, used for static Hamiltonians.
    KronSum(Box<LatticeOperator>, Box<LatticeOperator>),
}

#[derive(Clone, Debug)]
pub struct LatticeOperator {
    repr: Repr,
    basis: Basis,
    bc_x: Boundary,
    bc_y: Boundary,
    kind: OperatorKind,
}

impl LatticeOperator {
    /// Wraps a dense matrix, checking its shape and Hermiticity / unitarity.
    pub fn dense(
        matrix: Mat<c64>,
        basis: Basis,
        bc_x: Boundary,
        bc_y: Boundary,
        kind: OperatorKind,
    ) -> Result<Self> {
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{} but basis has {} labels",
                matrix.nrows(),
                matrix.ncols(),
                basis.len()
            )));
        }
        match kind {
            OperatorKind::Hamiltonian => {
                let r = hermiticity_residual(matrix.as_ref());
                if r > HERMITIAN_TOL {
                    return Err(Error::NotHermitian { residual: r });
                }
            }
            OperatorKind::Floquet => {
                let r = unitarity_residual(matrix.as_ref());
                if r > UNITARY_TOL {
                    return Err(Error::NotUnitary { residual: r });
                }
            }
        }
        Ok(LatticeOperator { repr: Repr::Dense(matrix), basis, bc_x, bc_y, kind })
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn bc_x(&self) -> Boundary {
        self.bc_x
    }

    pub fn bc_y(&self) -> Boundary {
        self.bc_y
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_factorized(&self) -> bool {
        !matches!(self.repr, Repr::Dense(_))
    }

    /// The full matrix; factorized operators are expanded.
    pub fn to_dense(&self) -> Mat<c64> {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Kron(a, b) => kron(a.to_dense().as_ref(), b.to_dense().as_ref()),
            Repr::KronSum(a, b) => {
                let (da, db) = (a.dim(), b.dim());
                let ia = crate::linalg::identity(da);
                let ib = crate::linalg::identity(db);
                kron(a.to_dense().as_ref(), ib.as_ref()) + kron(ia.as_ref(), b.to_dense().as_ref())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlochMatrix {
    pub k: f64,
    pub matrix: Mat<c64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    Raw,
    Sym1,
    Sym2,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Raw => "raw",
            Frame::Sym1 => "sym1",
            Frame::Sym2 => "sym2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainModel {
    Cl,
    Ssh,
}

// ---------------------------------------------------------------- Bloch

fn pauli_sum(ax: f64, ay: f64, az: f64) -> M2 {
    m2_add(
        &m2_add(&m2_scale(&SX, ax.into()), &m2_scale(&SY, ay.into())),
        &m2_scale(&SZ, az.into()),
    )
}

pub fn bloch_hx(kx: f64, p: &ModelParams) -> BlochMatrix {
    let m = pauli_sum(p.jx0 + p.jx1 * kx.cos(), 0.0, p.jx1 * kx.sin());
    BlochMatrix { k: kx, matrix: m2_to_mat(&m) }
}

/// SSH Bloch Hamiltonian; `tau_x`, `tau_y` act on (a, b).
pub fn bloch_hy(ky: f64, p: &ModelParams) -> BlochMatrix {
    let m = pauli_sum(p.jy0 + p.jy1 * ky.cos(), p.jy1 * ky.sin(), 0.0);
    BlochMatrix { k: ky, matrix: m2_to_mat(&m) }
}

/// The two evolution steps `U = exp(-i left) exp(-i right)` of the x sector
/// at momentum `kx`, as Pauli vectors.
fn x_steps_bloch(kx: f64, p: &ModelParams) -> ([f64; 3], [f64; 3]) {
    match p.protocol {
        Protocol::KickedV2 => ([p.jx0 + p.jx1 * kx.cos(), 0.0, 0.0], [0.0, 0.0, p.jx1p * kx.sin()]),
        _ => ([p.jx0, 0.0, 0.0], [p.jx1 * kx.cos(), 0.0, p.jx1 * kx.sin()]),
    }
}

fn half(a: [f64; 3]) -> [f64; 3] {
    [0.5 * a[0], 0.5 * a[1], 0.5 * a[2]]
}

/// Kicked x-sector Floquet operator as an SU(2) element. Frame `Sym1` splits
/// the first-acting (right) step, `Sym2` the last-acting (left) one.
pub fn floquet_x_su2(kx: f64, p: &ModelParams, frame: Frame) -> Result<Su2> {
    p.require_kicked()?;
    let (l, r) = x_steps_bloch(kx, p);
    Ok(match frame {
        Frame::Raw => Su2::exp(l).mul(&Su2::exp(r)),
        Frame::Sym1 => {
            let rh = Su2::exp(half(r));
            rh.mul(&Su2::exp(l)).mul(&rh)
        }
        Frame::Sym2 => {
            let lh = Su2::exp(half(l));
            lh.mul(&Su2::exp(r)).mul(&lh)
        }
    })
}

pub fn floquet_x_bloch(kx: f64, p: &ModelParams, frame: Frame) -> Result<BlochMatrix> {
    Ok(BlochMatrix { k: kx, matrix: floquet_x_su2(kx, p, frame)?.to_mat() })
}

/// `exp(-i H_y(ky))`, the y-sector factor of the kicked model.
pub fn floquet_y_su2(ky: f64, p: &ModelParams) -> Su2 {
    Su2::exp([p.jy0 + p.jy1 * ky.cos(), p.jy1 * ky.sin(), 0.0])
}

pub fn floquet_2d_bloch(ux: &BlochMatrix, uy: &BlochMatrix) -> Result<BlochMatrix> {
    for u in [ux, uy] {
        let r = unitarity_residual(u.matrix.as_ref());
        if r > UNITARY_TOL {
            return Err(Error::NotUnitary { residual: r });
        }
    }
    Ok(BlochMatrix { k: f64::NAN, matrix: kron(ux.matrix.as_ref(), uy.matrix.as_ref()) })
}

// ---------------------------------------------------------------- real space

/// Dense chain Hamiltonian from per-cell on-site blocks and per-bond hops.
/// Bond `m` couples cell `m` to `m + 1`; with periodic boundaries bond
/// `cells - 1` wraps back to cell 0.
pub fn chain_matrix(
    cells: usize,
    bc: Boundary,
    onsite: impl Fn(usize) -> M2,
    hop: impl Fn(usize) -> M2,
) -> Mat<c64> {
    let n = 2 * cells;
    let mut h = Mat::<c64>::zeros(n, n);
    for m in 0..cells {
        let d = onsite(m);
        for a in 0..2 {
            for b in 0..2 {
                h[(2 * m + a, 2 * m + b)] += d[a][b];
            }
        }
    }
    let bonds = if bc == Boundary::Periodic { cells } else { cells - 1 };
    for m in 0..bonds {
        let t = hop(m);
        let m2 = (m + 1) % cells;
        for a in 0..2 {
            for b in 0..2 {
                h[(2 * m + a, 2 * m2 + b)] += t[a][b];
                h[(2 * m2 + b, 2 * m + a)] += t[a][b].conj();
            }
        }
    }
    h
}

fn check_chain(length: usize, bc: Boundary) -> Result<()> {
    if length < 2 {
        return Err(Error::InvalidInput(format!("length {length} < 2 cells")));
    }
    if bc == Boundary::NotApplicable {
        return Err(Error::InvalidInput("chain needs an open or periodic boundary".into()));
    }
    Ok(())
}

/// Hop pattern of the ladder's diagonal + leg bonds at unit amplitude:
/// `(sx - i sz)/2`, the real-space form of `cos k sx + sin k sz`.
fn ladder_hop() -> M2 {
    m2_add(&m2_scale(&SX, 0.5.into()), &m2_scale(&SZ, c64::new(0.0, -0.5)))
}

fn ssh_onsite(j: f64) -> M2 {
    m2_scale(&SX, j.into())
}

fn ssh_hop(j: f64) -> M2 {
    m2_scale(&LOWER, j.into())
}

pub fn realspace_h(
    model: ChainModel,
    length: usize,
    bc: Boundary,
    p: &ModelParams,
) -> Result<LatticeOperator> {
    check_chain(length, bc)?;
    p.validate()?;
    let (matrix, kind) = match model {
        ChainModel::Cl => {
            let d = m2_scale(&SX, p.jx0.into());
            let t = m2_scale(&ladder_hop(), p.jx1.into());
            (chain_matrix(length, bc, |_| d, |_| t), ChainKind::Ladder)
        }
        ChainModel::Ssh => {
            let (d, t) = (ssh_onsite(p.jy0), ssh_hop(p.jy1));
            (chain_matrix(length, bc, |_| d, |_| t), ChainKind::Ssh)
        }
    };
    let basis = Basis::Chain(ChainBasis { kind, cells: length });
    LatticeOperator::dense(matrix, basis, bc, Boundary::NotApplicable, OperatorKind::Hamiltonian)
}

/// Unit-amplitude x-sector step terms: each step is an optional on-site
/// pattern and an optional hop pattern, each carrying its own amplitude.
#[derive(Clone, Copy, Debug)]
struct StepTerms {
    onsite: Option<(f64, M2)>,
    hop: Option<(f64, M2)>,
}

/// Bond identity of an x-sector term, used to share disorder between steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum XBond {
    Rung,
    Link,
}

fn x_step_terms(p: &ModelParams) -> [(StepTerms, [Option<XBond>; 2]); 2] {
    match p.protocol {
        Protocol::KickedV2 => [
            (
                StepTerms {
                    onsite: Some((p.jx0, SX)),
                    hop: Some((p.jx1, m2_scale(&SX, 0.5.into()))),
                },
                [Some(XBond::Rung), Some(XBond::Link)],
            ),
            (
                StepTerms { onsite: None, hop: Some((p.jx1p, m2_scale(&SZ, c64::new(0.0, -0.5)))) },
                [None, Some(XBond::Link)],
            ),
        ],
        _ => [
            (StepTerms { onsite: Some((p.jx0, SX)), hop: None }, [Some(XBond::Rung), None]),
            (StepTerms { onsite: None, hop: Some((p.jx1, ladder_hop())) }, [None, Some(XBond::Link)]),
        ],
    }
}

fn step_chain(cells: usize, bc: Boundary, s: &StepTerms) -> Mat<c64> {
    let zero = m2_scale(&ID2, 0.0.into());
    let d = s.onsite.map(|(j, m)| m2_scale(&m, j.into())).unwrap_or(zero);
    let t = s.hop.map(|(j, m)| m2_scale(&m, j.into())).unwrap_or(zero);
    chain_matrix(cells, bc, |_| d, |_| t)
}

/// Combines `exp(-i left)`, `exp(-i right)` into the requested frame.
fn compose_frame(left: MatRef<'_, c64>, right: MatRef<'_, c64>, frame: Frame) -> Result<Mat<c64>> {
    Ok(match frame {
        Frame::Raw => expm_hermitian(left, 1.0)? * expm_hermitian(right, 1.0)?,
        Frame::Sym1 => {
            let rh = expm_hermitian(right, 0.5)?;
            &rh * expm_hermitian(left, 1.0)? * &rh
        }
        Frame::Sym2 => {
            let lh = expm_hermitian(left, 0.5)?;
            &lh * expm_hermitian(right, 1.0)? * &lh
        }
    })
}

/// Real-space kicked ladder Floquet operator (raw frame).
pub fn floquet_x_realspace(length: usize, bc: Boundary, p: &ModelParams) -> Result<LatticeOperator> {
    floquet_x_realspace_in(length, bc, p, Frame::Raw)
}

pub fn floquet_x_realspace_in(
    length: usize,
    bc: Boundary,
    p: &ModelParams,
    frame: Frame,
) -> Result<LatticeOperator> {
    check_chain(length, bc)?;
    p.validate()?;
    p.require_kicked()?;
    let [(l, _), (r, _)] = x_step_terms(p);
    let u = compose_frame(
        step_chain(length, bc, &l).as_ref(),
        step_chain(length, bc, &r).as_ref(),
        frame,
    )?;
    let basis = Basis::Chain(ChainBasis { kind: ChainKind::Ladder, cells: length });
    LatticeOperator::dense(u, basis, bc, Boundary::NotApplicable, OperatorKind::Floquet)
}

/// `exp(-i H_y)` on an SSH chain.
pub fn floquet_y_realspace(length: usize, bc: Boundary, p: &ModelParams) -> Result<LatticeOperator> {
    let h = realspace_h(ChainModel::Ssh, length, bc, p)?;
    let Repr::Dense(m) = h.repr() else { unreachable!() };
    let u = expm_hermitian(m.as_ref(), 1.0)?;
    LatticeOperator::dense(u, *h.basis(), bc, Boundary::NotApplicable, OperatorKind::Floquet)
}

fn chain_basis(op: &LatticeOperator) -> Result<ChainBasis> {
    match op.basis() {
        Basis::Chain(c) => Ok(*c),
        b => Err(Error::InvalidInput(format!("expected a 1D factor, got {}", b.describe()))),
    }
}

/// `U_x (x) U_y`, stored factorized.
pub fn floquet_2d(ux: LatticeOperator, uy: LatticeOperator) -> Result<LatticeOperator> {
    let (bx, by) = (chain_basis(&ux)?, chain_basis(&uy)?);
    if ux.kind() != OperatorKind::Floquet || uy.kind() != OperatorKind::Floquet {
        return Err(Error::InvalidInput("floquet_2d needs two Floquet factors".into()));
    }
    let basis = Basis::Plane { x: bx, y: by };
    let (bc_x, bc_y) = (ux.bc_x(), uy.bc_x());
    Ok(LatticeOperator {
        repr: Repr::Kron(Box::new(ux), Box::new(uy)),
        basis,
        bc_x,
        bc_y,
        kind: OperatorKind::Floquet,
    })
}

/// `H_x (x) 1 + 1 (x) H_y`, stored factorized.
pub fn static_2d(hx: LatticeOperator, hy: LatticeOperator) -> Result<LatticeOperator> {
    let (bx, by) = (chain_basis(&hx)?, chain_basis(&hy)?);
    if hx.kind() != OperatorKind::Hamiltonian || hy.kind() != OperatorKind::Hamiltonian {
        return Err(Error::InvalidInput("static_2d needs two Hamiltonians".into()));
    }
    let (bc_x, bc_y) = (hx.bc_x(), hy.bc_x());
    Ok(LatticeOperator {
        repr: Repr::KronSum(Box::new(hx), Box::new(hy)),
        basis: Basis::Plane { x: bx, y: by },
        bc_x,
        bc_y,
        kind: OperatorKind::Hamiltonian,
    })
}

/// Clean kicked composite `U_x (x) U_y` on an `lx x ly` cell lattice.
pub fn kicked_2d(
    p: &ModelParams,
    lengths: (usize, usize),
    bc: (Boundary, Boundary),
    frame: Frame,
) -> Result<LatticeOperator> {
    let ux = floquet_x_realspace_in(lengths.0, bc.0, p, frame)?;
    let uy = floquet_y_realspace(lengths.1, bc.1, p)?;
    floquet_2d(ux, uy)
}

/// Static composite Hamiltonian on an `lx x ly` cell lattice.
pub fn static_2d_h(
    p: &ModelParams,
    lengths: (usize, usize),
    bc: (Boundary, Boundary),
) -> Result<LatticeOperator> {
    let hx = realspace_h(ChainModel::Cl, lengths.0, bc.0, p)?;
    let hy = realspace_h(ChainModel::Ssh, lengths.1, bc.1, p)?;
    static_2d(hx, hy)
}

// ---------------------------------------------------------------- 2D dense

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Deltas {
    pub dx: f64,
    pub dy: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Per-bond amplitude shifts of the 2D lattice.
struct BondField {
    /// x rung / link shifts indexed `[m][n][sy]`.
    rung: Vec<f64>,
    link: Vec<f64>,
    /// y intra / inter shifts indexed `[m][n]`.
    intra: Vec<f64>,
    inter: Vec<f64>,
    ly: usize,
}

impl BondField {
    fn clean(lx: usize, ly: usize) -> Self {
        BondField {
            rung: vec![0.0; lx * ly * 2],
            link: vec![0.0; lx * ly * 2],
            intra: vec![0.0; lx * ly],
            inter: vec![0.0; lx * ly],
            ly,
        }
    }

    fn random(lx: usize, ly: usize, lambda: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| lambda * rng.random_range(-1.0..=1.0)).collect()
        };
        let rung = draw(lx * ly * 2);
        let link = draw(lx * ly * 2);
        let intra = draw(lx * ly);
        let inter = draw(lx * ly);
        BondField { rung, link, intra, inter, ly }
    }

    fn x(&self, bond: XBond, m: usize, n: usize, sy: usize) -> f64 {
        let i = (m * self.ly + n) * 2 + sy;
        match bond {
            XBond::Rung => self.rung[i],
            XBond::Link => self.link[i],
        }
    }

    fn y_intra(&self, m: usize, n: usize) -> f64 {
        self.intra[m * self.ly + n]
    }

    fn y_inter(&self, m: usize, n: usize) -> f64 {
        self.inter[m * self.ly + n]
    }
}

struct Plane {
    lx: usize,
    ly: usize,
    bc: (Boundary, Boundary),
}

impl Plane {
    fn dim(&self) -> usize {
        4 * self.lx * self.ly
    }

    fn idx(&self, m: usize, sx: usize, n: usize, sy: usize) -> usize {
        (2 * m + sx) * (2 * self.ly) + 2 * n + sy
    }

    fn x_bonds(&self) -> usize {
        if self.bc.0 == Boundary::Periodic { self.lx } else { self.lx - 1 }
    }

    fn y_bonds(&self) -> usize {
        if self.bc.1 == Boundary::Periodic { self.ly } else { self.ly - 1 }
    }

    /// Adds `blk` on the x-sublattice pair of cells (m1, m2) at fixed y site,
    /// plus its conjugate when the two cells differ (a hop).
    fn add_x(&self, h: &mut Mat<c64>, m1: usize, m2: usize, n: usize, sy: usize, blk: &M2, hop: bool) {
        for a in 0..2 {
            for b in 0..2 {
                let (i, j) = (self.idx(m1, a, n, sy), self.idx(m2, b, n, sy));
                h[(i, j)] += blk[a][b];
                if hop {
                    h[(j, i)] += blk[a][b].conj();
                }
            }
        }
    }

    fn add_y(&self, h: &mut Mat<c64>, m: usize, sx: usize, n1: usize, n2: usize, blk: &M2, hop: bool) {
        for a in 0..2 {
            for b in 0..2 {
                let (i, j) = (self.idx(m, sx, n1, a), self.idx(m, sx, n2, b));
                h[(i, j)] += blk[a][b];
                if hop {
                    h[(j, i)] += blk[a][b].conj();
                }
            }
        }
    }
}

/// One step Hamiltonian of the 2D lattice: x step terms with per-bond
/// shifts, extra x hops carrying a `tau_z` or identity y factor, and half of
/// the y chain.
fn step_2d(
    pl: &Plane,
    terms: &StepTerms,
    bonds: [Option<XBond>; 2],
    field: &BondField,
    extra_hops: &[(M2, bool)],
    p: &ModelParams,
    dy: f64,
) -> Mat<c64> {
    let mut h = Mat::<c64>::zeros(pl.dim(), pl.dim());
    for n in 0..pl.ly {
        for sy in 0..2 {
            let tz = if sy == 0 { 1.0 } else { -1.0 };
            for m in 0..pl.lx {
                if let (Some((j, pat)), Some(b)) = (terms.onsite, bonds[0]) {
                    let blk = m2_scale(&pat, (j + field.x(b, m, n, sy)).into());
                    pl.add_x(&mut h, m, m, n, sy, &blk, false);
                }
            }
            for m in 0..pl.x_bonds() {
                let m2 = (m + 1) % pl.lx;
                if let (Some((j, pat)), Some(b)) = (terms.hop, bonds[1]) {
                    let blk = m2_scale(&pat, (j + field.x(b, m, n, sy)).into());
                    pl.add_x(&mut h, m, m2, n, sy, &blk, true);
                }
                for (pat, with_tz) in extra_hops {
                    let s = if *with_tz { tz } else { 1.0 };
                    pl.add_x(&mut h, m, m2, n, sy, &m2_scale(pat, s.into()), true);
                }
            }
        }
    }
    let tau_y_hop = m2_scale(&SY, (0.5 * dy).into());
    for m in 0..pl.lx {
        for sx in 0..2 {
            for n in 0..pl.ly {
                let blk = ssh_onsite(0.5 * (p.jy0 + field.y_intra(m, n)));
                pl.add_y(&mut h, m, sx, n, n, &blk, false);
            }
            for n in 0..pl.y_bonds() {
                let n2 = (n + 1) % pl.ly;
                let blk = m2_add(
                    &ssh_hop(0.5 * (p.jy1 + field.y_inter(m, n))),
                    &m2_scale(&tau_y_hop, 0.5.into()),
                );
                pl.add_y(&mut h, m, sx, n, n2, &blk, true);
            }
        }
    }
    h
}

fn assemble_2d(
    p: &ModelParams,
    deltas: &Deltas,
    field: &BondField,
    lengths: (usize, usize),
    bc: (Boundary, Boundary),
    frame: Frame,
) -> Result<LatticeOperator> {
    check_chain(lengths.0, bc.0)?;
    check_chain(lengths.1, bc.1)?;
    p.validate()?;
    p.require_kicked()?;
    let pl = Plane { lx: lengths.0, ly: lengths.1, bc };
    let [(l, lb), (r, rb)] = x_step_terms(p);
    let left_extra = [
        (m2_scale(&SZ, (-0.5 * deltas.dx).into()), false),
        (m2_scale(&SX, (0.5 * deltas.d1).into()), true),
    ];
    let right_extra = [(m2_scale(&SZ, c64::new(0.0, -0.5 * deltas.d2)), true)];
    let ha = step_2d(&pl, &l, lb, field, &left_extra, p, deltas.dy);
    let hb = step_2d(&pl, &r, rb, field, &right_extra, p, deltas.dy);
    let u = compose_frame(ha.as_ref(), hb.as_ref(), frame)?;
    let basis = Basis::Plane {
        x: ChainBasis { kind: ChainKind::Ladder, cells: lengths.0 },
        y: ChainBasis { kind: ChainKind::Ssh, cells: lengths.1 },
    };
    LatticeOperator::dense(u, basis, bc.0, bc.1, OperatorKind::Floquet)
}

/// Dense kicked composite with the symmetry-breaking couplings switched on.
/// The y chain enters both steps with half weight, so that `deltas = 0`
/// reproduces `U_x (x) U_y`.
pub fn perturbed_floquet_2d(
    p: &ModelParams,
    deltas: &Deltas,
    lengths: (usize, usize),
    bc: (Boundary, Boundary),
    frame: Frame,
) -> Result<LatticeOperator> {
    if p.protocol != Protocol::KickedV1 {
        return Err(Error::InvalidInput("perturbed model is defined for kicked_v1".into()));
    }
    let field = BondField::clean(lengths.0, lengths.1);
    assemble_2d(p, deltas, &field, lengths, bc, frame)
}

/// Dense kicked composite with every nearest-neighbour amplitude shifted by
/// `lambda * eps`, `eps` uniform in [-1, 1]. Each geometric bond draws one
/// `eps`, shared by the two steps; y bonds share it between the two legs.
pub fn disordered_floquet_2d(
    p: &ModelParams,
    lambda: f64,
    seed: u64,
    lengths: (usize, usize),
    bc: (Boundary, Boundary),
    frame: Frame,
) -> Result<LatticeOperator> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("disorder strength {lambda} must be >= 0")));
    }
    let field = BondField::random(lengths.0, lengths.1, lambda, seed);
    assemble_2d(p, &Deltas::default(), &field, lengths, bc, frame)
}

// ---------------------------------------------------------------- symmetry

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    Chiral,
    Trs,
    Phs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    Ladder,
    Ssh,
    Composite,
}

/// Monomial matrix `M[i, col[i]] = phase[i]`.
struct Monomial {
    col: Vec<usize>,
    phase: Vec<c64>,
}

impl Monomial {
    fn from_m2(m: &M2) -> Monomial {
        let mut col = vec![0; 2];
        let mut phase = vec![c64::new(0.0, 0.0); 2];
        for i in 0..2 {
            for j in 0..2 {
                if m[i][j].norm() > 0.0 {
                    col[i] = j;
                    phase[i] = m[i][j];
                }
            }
        }
        Monomial { col, phase }
    }

    fn kron(&self, o: &Monomial) -> Monomial {
        let n = o.col.len();
        let mut col = Vec::with_capacity(self.col.len() * n);
        let mut phase = Vec::with_capacity(self.col.len() * n);
        for i in 0..self.col.len() {
            for k in 0..n {
                col.push(self.col[i] * n + o.col[k]);
                phase.push(self.phase[i] * o.phase[k]);
            }
        }
        Monomial { col, phase }
    }

    fn repeat(&self, cells: usize) -> Monomial {
        let one = Monomial { col: (0..cells).collect(), phase: vec![c64::new(1.0, 0.0); cells] };
        one.kron(self)
    }

    /// `M A M^dag`, optionally conjugating `A` first.
    fn conjugate(&self, a: MatRef<'_, c64>, star: bool) -> Mat<c64> {
        let n = a.nrows();
        Mat::from_fn(n, n, |i, j| {
            let v = a[(self.col[i], self.col[j])];
            let v = if star { v.conj() } else { v };
            self.phase[i] * v * self.phase[j].conj()
        })
    }
}

fn local_ops(sector: Sector, which: Symmetry) -> Monomial {
    let (x, y) = match which {
        Symmetry::Chiral => (SY, SZ),
        Symmetry::Trs => (SX, ID2),
        Symmetry::Phs => (SZ, SZ),
    };
    match sector {
        Sector::Ladder => Monomial::from_m2(&x),
        Sector::Ssh => Monomial::from_m2(&y),
        Sector::Composite => Monomial::from_m2(&x).kron(&Monomial::from_m2(&y)),
    }
}

fn relation_residual(
    lhs: &Mat<c64>,
    a: MatRef<'_, c64>,
    which: Symmetry,
    kind: OperatorKind,
) -> f64 {
    // Targets: chiral  S H S = -H   | S U S = U^dag
    //          TRS     T H* T = H   | T U* T = U^dag
    //          PHS     C H* C = -H  | C U* C = U
    match (kind, which) {
        (OperatorKind::Hamiltonian, Symmetry::Trs) => max_abs((lhs - a).as_ref()),
        (OperatorKind::Hamiltonian, _) => max_abs((lhs + a).as_ref()),
        (OperatorKind::Floquet, Symmetry::Phs) => max_abs((lhs - a).as_ref()),
        (OperatorKind::Floquet, _) => max_abs((lhs - a.adjoint()).as_ref()),
    }
}

/// Residual of the defining relation of `which` on a real-space operator.
/// The representation is chosen from the basis: `sy`/`tz` chiral,
/// `sx`/`1` time reversal, `sz`/`tz` particle-hole, with products on the
/// ladder x chain plane.
pub fn check_symmetries(op: &LatticeOperator, which: Symmetry) -> Result<f64> {
    let mono = match op.basis() {
        Basis::Chain(c) => {
            let s = if c.kind == ChainKind::Ladder { Sector::Ladder } else { Sector::Ssh };
            local_ops(s, which).repeat(c.cells)
        }
        Basis::Plane { x, y } if x.kind == ChainKind::Ladder && y.kind == ChainKind::Ssh => {
            let mx = local_ops(Sector::Ladder, which).repeat(x.cells);
            let my = local_ops(Sector::Ssh, which).repeat(y.cells);
            mx.kron(&my)
        }
        b => {
            return Err(Error::UnsupportedSymmetry {
                which: format!("{which:?}"),
                basis: b.describe(),
            })
        }
    };
    let a = op.to_dense();
    let lhs = mono.conjugate(a.as_ref(), which != Symmetry::Chiral);
    Ok(relation_residual(&lhs, a.as_ref(), which, op.kind()))
}

/// Bloch-space symmetry residual. Time reversal and particle-hole map
/// `k -> -k`, so the operator is supplied as a function of momentum.
pub fn check_bloch_symmetry(
    build: impl Fn(f64) -> Result<BlochMatrix>,
    k: f64,
    which: Symmetry,
    kind: OperatorKind,
    sector: Sector,
) -> Result<f64> {
    let mono = local_ops(sector, which);
    let here = build(k)?;
    let dim = mono.col.len();
    if here.matrix.nrows() != dim {
        return Err(Error::UnsupportedSymmetry {
            which: format!("{which:?}"),
            basis: format!("{}x{} Bloch matrix for {sector:?}", here.matrix.nrows(), here.matrix.ncols()),
        });
    }
    if which == Symmetry::Chiral {
        let lhs = mono.conjugate(here.matrix.as_ref(), false);
        return Ok(relation_residual(&lhs, here.matrix.as_ref(), which, kind));
    }
    let there = build(-k)?;
    let lhs = mono.conjugate(here.matrix.as_ref(), true);
    Ok(relation_residual(&lhs, there.matrix.as_ref(), which, kind))
}
