//! Multi-time descriptions of an OQE model: the purified process tensor (an
//! MPS), the process tensor (an MPDO) and a brute-force dense oracle.
//!
//! Conventions shared by every tensor in this module:
//!
//! * A process of length `k` has output legs `o_0..o_k` and input legs
//!   `i_0..i_{k-1}`. Slot `j` sits between `o_j` and `i_j`; a gate `g` there
//!   maps `o_j` to `i_j` with amplitude `g[(i, o)]`.
//! * Bulk site `j` (1..=k) consumes `(i_{j-1}, alpha_{j-1})` and produces
//!   `(o_j, alpha_j)` through one application of the model unitary. Its
//!   physical index is `x = 2 * i + o`.
//! * Dense multi-time operators order their legs in time,
//!   `(o_0, i_0, o_1, ..., i_{k-1}, o_k)`, first leg most significant.
//! * A superoperator on one qubit is a 4x4 matrix
//!   `S[(2i + i'), (2o + o')] = g[(i, o)] * conj(g[(i', o')])`.
//!
//! Predicting a depth-`k` gate sequence uses a process of length `k + 1`
//! whose first slot holds the identity.

pub mod dense;
pub mod mpdo;
pub mod mps;
pub mod ppt;

pub use dense::{dense_pt, DENSE_MAX_STEPS};
pub use mpdo::{build_pt, vectorize_pt, FinalAction, InputLeg, MpdoSite, OutputLeg, ProcessTensor, SlotAction};
pub use mps::{bipartite_entropy, Mps, MpsSite, SINGULAR_FLOOR};
pub use ppt::{build_ppt, PurifiedProcessTensor};

use alloc::vec::Vec;

use crate::clifford::{CliffordGroup, GateSequence};
use crate::linalg::{CMatrix, Mat2};

/// Operation applied at one time slot.
#[derive(Debug, Clone, PartialEq)]
pub enum GateOp {
    Unitary(Mat2),
    /// 4x4 superoperator in the module's convention.
    Channel(CMatrix),
}

impl GateOp {
    pub fn superop(&self) -> CMatrix {
        match self {
            GateOp::Unitary(g) => unitary_superop(g),
            GateOp::Channel(s) => s.clone(),
        }
    }
}

pub fn unitary_superop(g: &Mat2) -> CMatrix {
    CMatrix::from_fn(4, 4, |r, c| {
        let (i, ip) = (r / 2, r % 2);
        let (o, op) = (c / 2, c % 2);
        g[(i, o)] * g[(ip, op)].conj()
    })
}

/// Slot gates for predicting `seq`: the identity, then the sequence.
pub fn sequence_gates(group: &CliffordGroup, seq: &GateSequence) -> Vec<Mat2> {
    core::iter::once(Mat2::identity())
        .chain(seq.gates.iter().map(|&g| *group.unitary(g)))
        .collect()
}
