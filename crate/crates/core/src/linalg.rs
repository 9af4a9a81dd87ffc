//! Small dense complex linear-algebra helpers shared by every module.
//!
//! Matrices are `nalgebra` dense matrices. Whenever a multi-party index is
//! flattened, the first party is the most significant digit (row-major
//! Kronecker convention), so `kron(a, b)[(i*nb + j, ..)]` addresses party `a`
//! at `i` and party `b` at `j`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 methods exist only when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type Mat2 = Matrix2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Logarithm base used for every entropy-like quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LogBase {
    /// log2, entropies in bits.
    #[default]
    Bits,
    /// natural log, entropies in nats.
    Nats,
}

impl LogBase {
    /// Natural log of the base; divide a value in nats by this to convert.
    pub fn ln_base(self) -> f64 {
        match self {
            LogBase::Bits => core::f64::consts::LN_2,
            LogBase::Nats => 1.0,
        }
    }

    pub fn log(self, x: f64) -> f64 {
        x.ln() / self.ln_base()
    }
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn mat2_to_dynamic(m: &Mat2) -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| m[(i, j)])
}

/// Largest entry of `|U^dagger U - 1|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let g = u.adjoint() * u;
    max_abs_diff(&g, &identity(u.nrows()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Max-entry distance between `a` and `e^{i phi} b` at the phase that best
/// aligns the two (the Frobenius-optimal phase `arg tr(b^dagger a)`).
pub fn phase_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap: C64 = b.iter().zip(a.iter()).map(|(y, x)| y.conj() * x).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        ONE
    };
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - phase * y).norm())
        .fold(0.0, f64::max)
}

pub fn phase_distance2(a: &Mat2, b: &Mat2) -> f64 {
    phase_distance(&mat2_to_dynamic(a), &mat2_to_dynamic(b))
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending, matching
/// eigenvector columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    // symmetrise first; SymmetricEigen only reads one triangle
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// `exp(-i * scale * H)` for Hermitian `H`, exactly unitary up to rounding.
pub fn expm_hermitian(h: &CMatrix, scale: f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(h);
    let n = h.nrows();
    let mut scaled = vecs.clone();
    for (c, &lambda) in vals.iter().enumerate() {
        let phase = C64::from_polar(1.0, -scale * lambda);
        for r in 0..n {
            scaled[(r, c)] *= phase;
        }
    }
    scaled * vecs.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Shannon entropy of a probability vector; entries `<= 0` contribute zero.
pub fn shannon_entropy(p: &[f64], base: LogBase) -> f64 {
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    h / base.ln_base()
}

/// Von Neumann entropy of `rho / tr(rho)`. Eigenvalues below `1e-14` are
/// treated as zero.
pub fn von_neumann_entropy(rho: &CMatrix, base: LogBase) -> f64 {
    let tr = trace(rho).re;
    if tr <= 0.0 {
        return 0.0;
    }
    let p: Vec<f64> = hermitian_eigenvalues(rho)
        .into_iter()
        .map(|x| x / tr)
        .filter(|&x| x > 1e-14)
        .collect();
    shannon_entropy(&p, base).max(0.0)
}

/// Partial trace of an operator on `dims[0] x dims[1] x ...` keeping the
/// parties listed in `keep` (in their original order).
pub fn partial_trace(rho: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let total: usize = dims.iter().product();
    assert_eq!(rho.nrows(), total, "operator dimension does not match dims");
    let kept_dims: Vec<usize> = keep.iter().map(|&p| dims[p]).collect();
    let kept_total: usize = kept_dims.iter().product();
    let traced: Vec<usize> = (0..dims.len()).filter(|p| !keep.contains(p)).collect();
    let traced_total: usize = traced.iter().map(|&p| dims[p]).product();

    let mut out = CMatrix::zeros(kept_total, kept_total);
    let mut digits = vec![0usize; dims.len()];
    let compose =
        |digits: &[usize]| -> usize { digits.iter().zip(dims.iter()).fold(0usize, |acc, (&d, &n)| acc * n + d) };
    let set_digits = |digits: &mut [usize], parties: &[usize], mut value: usize| {
        for &p in parties.iter().rev() {
            digits[p] = value % dims[p];
            value /= dims[p];
        }
    };
    for a in 0..kept_total {
        for b in 0..kept_total {
            let mut acc = ZERO;
            for t in 0..traced_total {
                set_digits(&mut digits, &traced, t);
                set_digits(&mut digits, keep, a);
                let row = compose(&digits);
                set_digits(&mut digits, keep, b);
                let col = compose(&digits);
                acc += rho[(row, col)];
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..dim {
        let d = r[(c, c)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for row in 0..dim {
            q[(row, c)] *= phase;
        }
    }
    q
}

/// Random density matrix `G G^dagger / tr` with the given rank.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, rank.max(1), |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let rho = &g * g.adjoint();
    let tr = trace(&rho);
    rho / tr
}
