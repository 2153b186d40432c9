//! Small dense helpers on top of faer: Pauli algebra, Kronecker products,
//! Hermitian exponentials and an SU(2) fast path for 2x2 Bloch work.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub type M2 = [[c64; 2]; 2];

const ZERO: c64 = c64::new(0.0, 0.0);
const ONE: c64 = c64::new(1.0, 0.0);
const I: c64 = c64::new(0.0, 1.0);

pub const ID2: M2 = [[ONE, ZERO], [ZERO, ONE]];
pub const SX: M2 = [[ZERO, ONE], [ONE, ZERO]];
pub const SY: M2 = [[ZERO, c64::new(0.0, -1.0)], [I, ZERO]];
pub const SZ: M2 = [[ONE, ZERO], [ZERO, c64::new(-1.0, 0.0)]];
/// Lowering pattern `|1><0|`, used for the SSH intercell bond b_n^dag a_{n+1}.
pub const LOWER: M2 = [[ZERO, ZERO], [ONE, ZERO]];

pub fn m2_scale(m: &M2, s: c64) -> M2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

pub fn m2_add(a: &M2, b: &M2) -> M2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

pub fn m2_to_mat(m: &M2) -> Mat<c64> {
    Mat::from_fn(2, 2, |i, j| m[i][j])
}

/// Kronecker product with `a` as the outer (slow) index.
pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    let mut out = Mat::<c64>::zeros(ra * rb, ca * cb);
    for ia in 0..ra {
        for ja in 0..ca {
            let s = a[(ia, ja)];
            if s == ZERO {
                continue;
            }
            for ib in 0..rb {
                for jb in 0..cb {
                    out[(ia * rb + ib, ja * cb + jb)] = s * b[(ib, jb)];
                }
            }
        }
    }
    out
}

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// `max |H - H^dag|`.
pub fn hermiticity_residual(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `max |U^dag U - 1|`.
pub fn unitarity_residual(a: MatRef<'_, c64>) -> f64 {
    let g = a.adjoint() * a;
    let n = g.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let d = if i == j { g[(i, j)] - ONE } else { g[(i, j)] };
            m = m.max(d.norm());
        }
    }
    m
}

/// `exp(-i t H)` for Hermitian `H`, through its eigendecomposition.
pub fn expm_hermitian(h: MatRef<'_, c64>, t: f64) -> Result<Mat<c64>> {
    let n = h.nrows();
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let v = evd.U();
    let mut scaled = v.to_owned();
    for j in 0..n {
        let ph = c64::from_polar(1.0, -t * s[j].re);
        for i in 0..n {
            scaled[(i, j)] *= ph;
        }
    }
    Ok(&scaled * v.adjoint())
}

/// Element of SU(2) written as `w - i (x sx + y sy + z sz)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Su2 {
    pub w: f64,
    pub v: [f64; 3],
}

impl Su2 {
    pub const IDENTITY: Su2 = Su2 { w: 1.0, v: [0.0; 3] };

    /// `exp(-i a.sigma)`.
    pub fn exp(a: [f64; 3]) -> Su2 {
        let r = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        if r == 0.0 {
            return Su2::IDENTITY;
        }
        let s = r.sin() / r;
        Su2 { w: r.cos(), v: [a[0] * s, a[1] * s, a[2] * s] }
    }

    pub fn mul(&self, q: &Su2) -> Su2 {
        let (p0, p) = (self.w, self.v);
        let (q0, qv) = (q.w, q.v);
        let dot = p[0] * qv[0] + p[1] * qv[1] + p[2] * qv[2];
        let cross = [
            p[1] * qv[2] - p[2] * qv[1],
            p[2] * qv[0] - p[0] * qv[2],
            p[0] * qv[1] - p[1] * qv[0],
        ];
        Su2 {
            w: p0 * q0 - dot,
            v: [
                p0 * qv[0] + q0 * p[0] + cross[0],
                p0 * qv[1] + q0 * p[1] + cross[1],
                p0 * qv[2] + q0 * p[2] + cross[2],
            ],
        }
    }

    pub fn adjoint(&self) -> Su2 {
        Su2 { w: self.w, v: [-self.v[0], -self.v[1], -self.v[2]] }
    }

    /// Positive quasienergy: eigenvalues are `exp(-/+ i eps)`.
    pub fn quasienergy(&self) -> f64 {
        self.w.clamp(-1.0, 1.0).acos()
    }

    pub fn to_m2(&self) -> M2 {
        let [x, y, z] = self.v;
        [
            [c64::new(self.w, -z), c64::new(-y, -x)],
            [c64::new(y, -x), c64::new(self.w, z)],
        ]
    }

    pub fn to_mat(&self) -> Mat<c64> {
        m2_to_mat(&self.to_m2())
    }
}
