//! Open-boundary matrix product states and their bipartite entanglement.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods exist only when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, LogBase, C64, ZERO};

/// Singular values below this (relative to the state norm) are dropped.
pub const SINGULAR_FLOOR: f64 = 1e-12;

/// One site tensor `A[left][phys][right]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsSite {
    pub left: usize,
    pub phys: usize,
    pub right: usize,
    pub data: Vec<C64>,
}

impl MpsSite {
    pub fn new(left: usize, phys: usize, right: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != left * phys * right {
            return Err(Error::Shape {
                expected: left * phys * right,
                got: data.len(),
            });
        }
        Ok(Self {
            left,
            phys,
            right,
            data,
        })
    }

    #[inline]
    pub fn at(&self, l: usize, p: usize, r: usize) -> C64 {
        self.data[(l * self.phys + p) * self.right + r]
    }

    /// `(left * phys) x right` matrix.
    fn as_left_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.left * self.phys, self.right, |row, col| {
            self.data[row * self.right + col]
        })
    }

    /// `left x (phys * right)` matrix.
    fn as_right_matrix(&self) -> CMatrix {
        let cols = self.phys * self.right;
        CMatrix::from_fn(self.left, cols, |row, col| self.data[row * cols + col])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mps {
    sites: Vec<MpsSite>,
}

impl Mps {
    /// Sites must chain (`right[j] == left[j+1]`) with unit outer bonds.
    pub fn new(sites: Vec<MpsSite>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Empty("an MPS needs at least one site"));
        }
        if sites[0].left != 1 || sites[sites.len() - 1].right != 1 {
            return Err(Error::InvalidArgument("outer bonds must have dimension 1".into()));
        }
        for w in sites.windows(2) {
            if w[0].right != w[1].left {
                return Err(Error::Shape {
                    expected: w[0].right,
                    got: w[1].left,
                });
            }
        }
        Ok(Self { sites })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[MpsSite] {
        &self.sites
    }

    /// Bond dimensions between consecutive sites.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1].iter().map(|s| s.right).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        // transfer-matrix contraction E[a, a'] over the bond
        let mut env = vec![C64::new(1.0, 0.0)];
        let mut dim = 1;
        for s in &self.sites {
            let mut next = vec![ZERO; s.right * s.right];
            for a in 0..dim {
                for ap in 0..dim {
                    let e = env[a * dim + ap];
                    if e == ZERO {
                        continue;
                    }
                    for p in 0..s.phys {
                        for b in 0..s.right {
                            let x = e * s.at(a, p, b);
                            for bp in 0..s.right {
                                next[b * s.right + bp] += x * s.at(ap, p, bp).conj();
                            }
                        }
                    }
                }
            }
            env = next;
            dim = s.right;
        }
        env[0].re
    }

    /// Scale so that the state has unit 2-norm.
    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            let inv = C64::new(1.0 / n, 0.0);
            self.sites[0].data.iter_mut().for_each(|z| *z *= inv);
        }
        self
    }

    /// Full state vector, first site most significant.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut acc = vec![C64::new(1.0, 0.0)];
        let mut bond = 1;
        for s in &self.sites {
            let rows = acc.len() / bond;
            let mut next = vec![ZERO; rows * s.phys * s.right];
            for r in 0..rows {
                for a in 0..bond {
                    let x = acc[r * bond + a];
                    if x == ZERO {
                        continue;
                    }
                    for p in 0..s.phys {
                        for b in 0..s.right {
                            next[(r * s.phys + p) * s.right + b] += x * s.at(a, p, b);
                        }
                    }
                }
            }
            acc = next;
            bond = s.right;
        }
        acc
    }

    /// Normalised Schmidt spectrum `s^2` across the bond after site `cut`.
    pub fn schmidt_spectrum(&self, cut: usize) -> Result<Vec<f64>> {
        if cut + 1 >= self.sites.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "cut {cut} out of range for {} sites",
                self.sites.len()
            )));
        }
        // left-canonical sweep up to the cut
        let mut r = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for s in &self.sites[..=cut] {
            let m = &r * s.as_right_matrix();
            // (r_rows, phys * right) -> (r_rows * phys, right)
            let rows = m.nrows() * s.phys;
            let reshaped = CMatrix::from_fn(rows, s.right, |row, col| {
                let (a, p) = (row / s.phys, row % s.phys);
                m[(a, p * s.right + col)]
            });
            r = reshaped.qr().r();
        }
        // right-canonical sweep down to the cut
        let mut l = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for s in self.sites[cut + 1..].iter().rev() {
            let m = s.as_left_matrix() * &l;
            let cols = m.ncols() * s.phys;
            let reshaped = CMatrix::from_fn(s.left, cols, |row, col| {
                let (p, b) = (col / m.ncols(), col % m.ncols());
                m[(row * s.phys + p, b)]
            });
            // M = L Q  <=>  M^dagger = Q^dagger L^dagger
            l = reshaped.adjoint().qr().r().adjoint();
        }
        let bond = r * l;
        let sv = bond.singular_values();
        let total: f64 = sv.iter().map(|x| x * x).sum();
        if !(total > 0.0) {
            return Ok(Vec::new());
        }
        let norm = total.sqrt();
        let mut spectrum: Vec<f64> = sv
            .iter()
            .map(|x| x / norm)
            .filter(|&x| x >= SINGULAR_FLOOR)
            .map(|x| x * x)
            .collect();
        spectrum.sort_by(|a, b| b.total_cmp(a));
        Ok(spectrum)
    }
}

/// Entanglement entropy across the bond after site `cut` (sites `0..=cut`
/// against the rest).
pub fn bipartite_entropy(mps: &Mps, cut: usize, base: LogBase) -> Result<f64> {
    let spectrum = mps.schmidt_spectrum(cut)?;
    let total: f64 = spectrum.iter().sum();
    let h: f64 = spectrum
        .iter()
        .map(|&p| p / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    Ok((h / base.ln_base()).max(0.0))
}
