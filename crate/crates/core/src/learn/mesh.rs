//! Rectangular chart of U(d) built from adjacent two-level rotations.
//!
//! `U = D * T[M-1] * ... * T[0]` with `M = d(d-1)/2`. Rotation `T[i]` mixes
//! rows `(c, c+1)` through
//!
//! ```text
//! [ e^{i phi} cos(theta)   -sin(theta) ]
//! [ e^{i phi} sin(theta)    cos(theta) ]
//! ```
//!
//! and `D = diag(e^{i delta_j})`. The parameter vector is
//! `[theta_0, phi_0, theta_1, phi_1, ..., delta_0, ..., delta_{d-1}]`, i.e.
//! `d^2` reals. Rotation columns follow the order in which [`decompose`]
//! nulls entries: rows `d-1` down to `1`, columns left to right.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods exist only when std is linked
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{identity, CMatrix, C64, I, ZERO};

/// Column `c` of every rotation, in application order.
pub fn rotation_columns(dim: usize) -> Vec<usize> {
    let mut cols = Vec::with_capacity(dim * dim.saturating_sub(1) / 2);
    for r in (1..dim).rev() {
        cols.extend(0..r);
    }
    cols
}

pub fn param_count(dim: usize) -> usize {
    dim * dim
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryParams {
    dim: usize,
    angles: Vec<f64>,
}

impl UnitaryParams {
    pub fn new(dim: usize, angles: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if angles.len() != param_count(dim) {
            return Err(Error::InvalidArgument(format!(
                "expected {} angles for dimension {dim}, got {}",
                param_count(dim),
                angles.len()
            )));
        }
        Ok(Self { dim, angles })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            angles: alloc::vec![0.0; param_count(dim)],
        }
    }

    /// Angles i.i.d. uniform in `[0, 2 pi)`.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let angles = (0..param_count(dim))
            .map(|_| rng.random_range(0.0..core::f64::consts::TAU))
            .collect();
        Self { dim, angles }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn into_angles(self) -> Vec<f64> {
        self.angles
    }

    pub fn to_unitary(&self) -> CMatrix {
        to_unitary(self.dim, &self.angles)
    }

    pub fn from_unitary(u: &CMatrix) -> Self {
        Self {
            dim: u.nrows(),
            angles: decompose(u),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Rotation {
    col: usize,
    cos: f64,
    sin: f64,
    phase: C64,
}

impl Rotation {
    fn new(col: usize, theta: f64, phi: f64) -> Self {
        Self {
            col,
            cos: theta.cos(),
            sin: theta.sin(),
            phase: C64::from_polar(1.0, phi),
        }
    }

    /// `m <- T m` on rows `(c, c+1)`.
    fn apply_left(&self, m: &mut CMatrix) {
        let (c, n) = (self.col, m.ncols());
        for j in 0..n {
            let a = m[(c, j)];
            let b = m[(c + 1, j)];
            m[(c, j)] = self.phase * self.cos * a - self.sin * b;
            m[(c + 1, j)] = self.phase * self.sin * a + self.cos * b;
        }
    }

    /// `m <- T^dagger m` on rows `(c, c+1)`.
    fn apply_left_adjoint(&self, m: &mut CMatrix) {
        let (c, n) = (self.col, m.ncols());
        let pc = self.phase.conj();
        for j in 0..n {
            let a = m[(c, j)];
            let b = m[(c + 1, j)];
            m[(c, j)] = pc * (self.cos * a + self.sin * b);
            m[(c + 1, j)] = -self.sin * a + self.cos * b;
        }
    }

    /// `m <- m T` on columns `(c, c+1)`.
    fn apply_right(&self, m: &mut CMatrix) {
        let (c, n) = (self.col, m.nrows());
        for i in 0..n {
            let a = m[(i, c)];
            let b = m[(i, c + 1)];
            m[(i, c)] = self.phase * (self.cos * a + self.sin * b);
            m[(i, c + 1)] = -self.sin * a + self.cos * b;
        }
    }
}

fn rotations(dim: usize, angles: &[f64]) -> Vec<Rotation> {
    rotation_columns(dim)
        .into_iter()
        .enumerate()
        .map(|(i, c)| Rotation::new(c, angles[2 * i], angles[2 * i + 1]))
        .collect()
}

/// Unitary for a parameter vector of length `dim^2`.
pub fn to_unitary(dim: usize, angles: &[f64]) -> CMatrix {
    assert_eq!(angles.len(), param_count(dim), "parameter length mismatch");
    let rots = rotations(dim, angles);
    let mut u = identity(dim);
    for t in &rots {
        t.apply_left(&mut u);
    }
    let offset = 2 * rots.len();
    for r in 0..dim {
        let d = C64::from_polar(1.0, angles[offset + r]);
        for c in 0..dim {
            u[(r, c)] *= d;
        }
    }
    u
}

/// Parameters reproducing `u` exactly (up to rounding) for any unitary `u`.
pub fn decompose(u: &CMatrix) -> Vec<f64> {
    let dim = u.nrows();
    let mut v = u.clone();
    let mut angles = Vec::with_capacity(param_count(dim));
    for r in (1..dim).rev() {
        for c in 0..r {
            let x = v[(r, c)];
            let y = v[(r, c + 1)];
            let theta = x.norm().atan2(y.norm());
            let phi = if x.norm() > 0.0 && y.norm() > 0.0 {
                x.arg() - y.arg()
            } else if x.norm() > 0.0 {
                x.arg()
            } else {
                0.0
            };
            // v <- v T^dagger nulls v[r, c]
            let t = Rotation::new(c, theta, phi);
            for i in 0..dim {
                let a = v[(i, c)];
                let b = v[(i, c + 1)];
                let pc = t.phase.conj();
                v[(i, c)] = pc * t.cos * a - t.sin * b;
                v[(i, c + 1)] = pc * t.sin * a + t.cos * b;
            }
            angles.push(theta);
            angles.push(phi);
        }
    }
    angles.extend((0..dim).map(|j| v[(j, j)].arg()));
    angles
}

/// Chain rule from `dL = 2 Re sum conj(gbar) .* dU` to the mesh angles.
pub fn pullback(dim: usize, angles: &[f64], gbar: &CMatrix) -> Vec<f64> {
    let rots = rotations(dim, angles);
    let m = rots.len();
    let offset = 2 * m;
    let mut grad = alloc::vec![0.0; param_count(dim)];

    let mut v = identity(dim);
    for t in &rots {
        t.apply_left(&mut v);
    }
    let phases: Vec<C64> = (0..dim).map(|j| C64::from_polar(1.0, angles[offset + j])).collect();

    // dU/d delta_j = i e^{i delta_j} E_jj V
    for j in 0..dim {
        let mut acc = ZERO;
        for b in 0..dim {
            acc += gbar[(j, b)].conj() * v[(j, b)];
        }
        grad[offset + j] = 2.0 * (acc * I * phases[j]).re;
    }
    if m == 0 {
        return grad;
    }

    // a = D^dagger gbar V^dagger T[m-1]; then a <- T[i]^dagger a T[i-1]
    let mut a = CMatrix::from_fn(dim, dim, |r, c| phases[r].conj() * gbar[(r, c)]) * v.adjoint();
    rots[m - 1].apply_right(&mut a);
    for i in (0..m).rev() {
        let t = &rots[i];
        let c = t.col;
        let (ct, st) = (t.cos, t.sin);
        let e = t.phase;
        // derivative blocks of T with respect to theta and phi
        let d_theta = [[-e * st, C64::new(-ct, 0.0)], [e * ct, C64::new(-st, 0.0)]];
        let d_phi = [[I * e * ct, ZERO], [I * e * st, ZERO]];
        let mut gt = 0.0;
        let mut gp = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                let ab = a[(c + p, c + q)].conj();
                gt += (ab * d_theta[p][q]).re;
                gp += (ab * d_phi[p][q]).re;
            }
        }
        grad[2 * i] = 2.0 * gt;
        grad[2 * i + 1] = 2.0 * gp;
        if i > 0 {
            t.apply_left_adjoint(&mut a);
            rots[i - 1].apply_right(&mut a);
        }
    }
    grad
}
