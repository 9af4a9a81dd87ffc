//! Open quantum evolution (OQE) model: a fixed system-memory unitary
//! interleaved with system-only gates.
//!
//! Joint amplitudes are indexed `s * chi + m` (system major, memory minor).
//! The initial joint state is `|0_S>|0_M>`, i.e. amplitude index 0. A sequence
//! of `k` gates produces
//!
//! ```text
//! |psi_k> = U (G_k x 1) U ... U (G_1 x 1) U |0 0>
//! ```
//!
//! so `U` is applied `k + 1` times.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods exist only when std is linked
use num_traits::Float;

use crate::clifford::{CliffordGroup, GateSequence};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, mat2_to_dynamic, unitarity_defect, CMatrix, Mat2, C64, ZERO};

/// Unitarity tolerance for models built from user data.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OqeModel {
    chi: usize,
    unitary: CMatrix,
    measurement: Mat2,
}

/// `|0><0|`, the default measured POVM element.
pub fn ground_projector() -> Mat2 {
    Mat2::new(C64::new(1.0, 0.0), ZERO, ZERO, ZERO)
}

impl OqeModel {
    /// Model with the default `|0><0|` measurement.
    pub fn new(chi: usize, unitary: CMatrix) -> Result<Self> {
        Self::with_measurement(chi, unitary, ground_projector())
    }

    pub fn with_measurement(chi: usize, unitary: CMatrix, measurement: Mat2) -> Result<Self> {
        if chi == 0 {
            return Err(Error::InvalidArgument("memory dimension must be >= 1".into()));
        }
        let dim = 2 * chi;
        if unitary.nrows() != dim || unitary.ncols() != dim {
            return Err(Error::Shape {
                expected: dim,
                got: unitary.nrows().max(unitary.ncols()),
            });
        }
        let defect = unitarity_defect(&unitary);
        if !(defect < UNITARY_TOL) {
            return Err(Error::NotUnitary(defect));
        }
        let m = mat2_to_dynamic(&measurement);
        let herm = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let eig = hermitian_eigenvalues(&m);
        if herm > 1e-12 || eig[0] < -1e-12 || eig[1] > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument("measurement must satisfy 0 <= M <= 1".into()));
        }
        Ok(Self {
            chi,
            unitary,
            measurement,
        })
    }

    pub fn chi(&self) -> usize {
        self.chi
    }

    pub fn dim(&self) -> usize {
        2 * self.chi
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn measurement(&self) -> &Mat2 {
        &self.measurement
    }

    pub fn initial_state(&self) -> JointState {
        let mut amplitudes = vec![ZERO; self.dim()];
        amplitudes[0] = C64::new(1.0, 0.0);
        JointState {
            chi: self.chi,
            amplitudes,
        }
    }

    /// Propagate `state` through `U (G_k) U ... (G_1) U`.
    pub fn evolve_from<'a, I>(&self, state: JointState, gates: I) -> Result<JointState>
    where
        I: IntoIterator<Item = &'a Mat2>,
    {
        if state.chi != self.chi || state.amplitudes.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: state.amplitudes.len(),
            });
        }
        let mut psi = state;
        psi.apply_joint(&self.unitary);
        for g in gates {
            psi.apply_system(g);
            psi.apply_joint(&self.unitary);
        }
        Ok(psi)
    }

    pub fn evolve_gates<'a, I>(&self, gates: I) -> JointState
    where
        I: IntoIterator<Item = &'a Mat2>,
    {
        self.evolve_from(self.initial_state(), gates)
            .expect("initial state always matches the model dimension")
    }

    pub fn evolve(&self, group: &CliffordGroup, seq: &GateSequence) -> JointState {
        self.evolve_gates(seq.gates.iter().map(|&g| group.unitary(g)))
    }

    /// `<psi| M x 1 |psi>`.
    pub fn expectation(&self, state: &JointState) -> f64 {
        let chi = self.chi;
        let a = &state.amplitudes;
        let mut acc = ZERO;
        for s in 0..2 {
            for t in 0..2 {
                let m = self.measurement[(s, t)];
                if m == ZERO {
                    continue;
                }
                for mem in 0..chi {
                    acc += a[s * chi + mem].conj() * m * a[t * chi + mem];
                }
            }
        }
        acc.re
    }

    pub fn predict_gates<'a, I>(&self, gates: I) -> f64
    where
        I: IntoIterator<Item = &'a Mat2>,
    {
        self.expectation(&self.evolve_gates(gates))
    }

    /// Predicted outcome of a Clifford sequence.
    pub fn predict(&self, group: &CliffordGroup, seq: &GateSequence) -> f64 {
        self.expectation(&self.evolve(group, seq))
    }

    /// Mean prediction over sequences of one depth.
    pub fn predict_average(&self, group: &CliffordGroup, seqs: &[GateSequence]) -> Result<f64> {
        if seqs.is_empty() {
            return Err(Error::Empty("no sequences to average"));
        }
        let total: f64 = seqs.iter().map(|s| self.predict(group, s)).sum();
        Ok(total / seqs.len() as f64)
    }

    /// Same process in a rotated memory basis: `U -> (1 x V) U (1 x V^dagger)`.
    /// Predictions are unchanged when `V|0> = |0>`.
    pub fn memory_gauge(&self, v: &CMatrix) -> Result<Self> {
        let big = crate::linalg::kron(&crate::linalg::identity(2), v);
        let u = &big * &self.unitary * big.adjoint();
        Self::with_measurement(self.chi, u, self.measurement)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub chi: usize,
    pub amplitudes: Vec<C64>,
}

impl JointState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply_joint(&mut self, u: &CMatrix) {
        let n = self.amplitudes.len();
        let mut out = vec![ZERO; n];
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for c in 0..n {
                acc += u[(r, c)] * self.amplitudes[c];
            }
            *o = acc;
        }
        self.amplitudes = out;
    }

    /// Apply `G x 1_M`.
    pub fn apply_system(&mut self, g: &Mat2) {
        let chi = self.chi;
        for m in 0..chi {
            let a0 = self.amplitudes[m];
            let a1 = self.amplitudes[chi + m];
            self.amplitudes[m] = g[(0, 0)] * a0 + g[(0, 1)] * a1;
            self.amplitudes[chi + m] = g[(1, 0)] * a0 + g[(1, 1)] * a1;
        }
    }

    /// Reduced system density matrix.
    pub fn system_density(&self) -> Mat2 {
        let chi = self.chi;
        let a = &self.amplitudes;
        let mut rho = Mat2::zeros();
        for s in 0..2 {
            for t in 0..2 {
                rho[(s, t)] = (0..chi).map(|m| a[s * chi + m] * a[t * chi + m].conj()).sum();
            }
        }
        rho
    }
}
