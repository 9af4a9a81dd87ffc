//! Memory and non-Markovianity measures of a learned model's process tensor.
//!
//! Entropies are reported in the requested [`LogBase`] (bits by default).
//! Single-step maps are 4x4 Choi matrices over `(i_{j-1}, o_j)` normalised to
//! trace 2; entropies are always taken of unit-trace copies.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods exist only when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, partial_trace, trace, von_neumann_entropy, CMatrix, LogBase, Mat2, C64};
use crate::oqe::OqeModel;
use crate::pt::{
    bipartite_entropy, build_ppt, build_pt, dense_pt, vectorize_pt, FinalAction, InputLeg, MpdoSite, OutputLeg,
    ProcessTensor, SlotAction, DENSE_MAX_STEPS,
};

/// Default distance kept between the cut and the end of the process when
/// computing the operator-space entanglement.
pub const DEFAULT_BUFFER: usize = 10;

/// Weight of one operator outside the support of the other above which the
/// relative entropy is reported as infinite.
pub const SUPPORT_TOL: f64 = 1e-8;

/// Eigenvalues of the reference operator at or below this count as zero.
const NULL_EIGENVALUE: f64 = 1e-12;

/// Entropy of the process up to output `o_j`: the PPT cut after site `j`.
pub fn memory_complexity(model: &OqeModel, j: usize, base: LogBase) -> Result<f64> {
    memory_complexity_with_length(model, j, j, base)
}

/// As [`memory_complexity`], computed on a purified process of length `k`.
pub fn memory_complexity_with_length(model: &OqeModel, j: usize, k: usize, base: LogBase) -> Result<f64> {
    check_step(j)?;
    if k < j {
        return Err(Error::InvalidArgument(alloc::format!(
            "length {k} shorter than step {j}"
        )));
    }
    let mps = build_ppt(model, k)?.to_mps()?;
    bipartite_entropy(&mps, j, base)
}

/// Operator-space entanglement of the normalised, vectorised process tensor
/// of length `k`, cut after output `o_j`.
pub fn osee_nonmarkovianity(model: &OqeModel, j: usize, k: usize, base: LogBase) -> Result<f64> {
    check_step(j)?;
    if k <= j {
        return Err(Error::InvalidArgument(alloc::format!(
            "process length {k} must exceed the cut step {j}"
        )));
    }
    let mps = vectorize_pt(&build_pt(model, k)?)?;
    bipartite_entropy(&mps, j, base)
}

fn check_step(j: usize) -> Result<()> {
    if j == 0 {
        return Err(Error::InvalidArgument("step index must be >= 1".into()));
    }
    Ok(())
}

fn split(output: OutputLeg, input: InputLeg) -> SlotAction {
    SlotAction::Split { output, input }
}

fn feed_identity() -> InputLeg {
    InputLeg::Feed(Mat2::identity())
}

fn scaled(m: CMatrix, target_trace: f64) -> Result<CMatrix> {
    let tr = trace(&m).re;
    if !(tr.abs() > 0.0) || !tr.is_finite() {
        return Err(Error::NonFinite(alloc::format!("operator trace {tr}")));
    }
    Ok(m * C64::new(target_trace / tr, 0.0))
}

/// Reduced state of `o_0`, unit trace.
pub fn initial_marginal(pt: &ProcessTensor) -> Result<CMatrix> {
    let mut actions = vec![SlotAction::identity(); pt.steps()];
    actions[0] = split(OutputLeg::Open, feed_identity());
    scaled(pt.reduce(&actions, &FinalAction::Trace)?, 1.0)
}

/// Single-step map into `o_j` over `(i_{j-1}, o_j)`: every other output is
/// fed forward through an identity gate, the input after `o_j` receives the
/// identity and the end is traced. Normalised to trace 2.
pub fn step_marginal(pt: &ProcessTensor, j: usize) -> Result<CMatrix> {
    let k = pt.steps();
    if j == 0 || j > k {
        return Err(Error::InvalidArgument(alloc::format!("step {j} outside 1..={k}")));
    }
    let mut actions = vec![SlotAction::identity(); k];
    actions[j - 1] = split(OutputLeg::Trace, InputLeg::Open);
    let last = if j < k {
        actions[j] = split(OutputLeg::Open, feed_identity());
        FinalAction::Trace
    } else {
        FinalAction::Open
    };
    scaled(pt.reduce(&actions, &last)?, 2.0)
}

/// Marginal single-step map `j` of the model's length-`k` process tensor.
pub fn markov_marginal(model: &OqeModel, k: usize, j: usize) -> Result<CMatrix> {
    step_marginal(&build_pt(model, k)?, j)
}

/// Product of the initial marginal and every single-step marginal, as a
/// bond-dimension-1 process tensor with the same trace as the original.
pub fn markov_product(pt: &ProcessTensor) -> Result<ProcessTensor> {
    let mut sites = Vec::with_capacity(pt.steps() + 1);
    sites.push(MpdoSite::from_operator(&initial_marginal(pt)?)?);
    for j in 1..=pt.steps() {
        sites.push(MpdoSite::from_operator(&step_marginal(pt, j)?)?);
    }
    ProcessTensor::from_sites(sites)
}

pub fn markov_process_tensor(model: &OqeModel, k: usize) -> Result<ProcessTensor> {
    markov_product(&build_pt(model, k)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeEntropy {
    /// `S(A || B)`, `+inf` when the support condition fails.
    pub value: f64,
    /// Weight of `A` on the null space of `B`.
    pub support_violation: f64,
}

impl RelativeEntropy {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Quantum relative entropy of the unit-trace copies of two positive
/// operators.
pub fn relative_entropy_dense(a: &CMatrix, b: &CMatrix, base: LogBase) -> Result<RelativeEntropy> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::Shape {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let a = scaled(a.clone(), 1.0)?;
    let b = scaled(b.clone(), 1.0)?;
    let (va, _) = hermitian_eigen(&a);
    let a_log_a: f64 = va.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum();
    let (vb, ub) = hermitian_eigen(&b);
    let mut cross = 0.0;
    let mut violation = 0.0;
    for (c, &lambda) in vb.iter().enumerate() {
        let col = ub.column(c);
        let weight = (col.adjoint() * &a * col)[(0, 0)].re;
        if lambda > NULL_EIGENVALUE {
            cross += weight * lambda.ln();
        } else {
            violation += weight.max(0.0);
        }
    }
    if violation > SUPPORT_TOL {
        return Ok(RelativeEntropy {
            value: f64::INFINITY,
            support_violation: violation,
        });
    }
    let value = ((a_log_a - cross) / base.ln_base()).max(0.0);
    Ok(RelativeEntropy {
        value,
        support_violation: violation,
    })
}

/// Relative entropy between the dense process tensor of length `k` and its
/// Markov product.
pub fn nonmarkovianity_dense(model: &OqeModel, k: usize, base: LogBase) -> Result<RelativeEntropy> {
    if k > DENSE_MAX_STEPS {
        return Err(Error::TooLarge {
            k,
            max: DENSE_MAX_STEPS,
        });
    }
    let full = dense_pt(model, k)?;
    let product = markov_process_tensor(model, k)?.to_dense()?;
    relative_entropy_dense(&full, &product, base)
}

/// `exp(-lambda * N)` with `N` given in `base` units.
pub fn confusion_probability(n: f64, lambda: f64, base: LogBase) -> Result<f64> {
    if !(n >= 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "need N >= 0 and lambda > 0, got N = {n}, lambda = {lambda}"
        )));
    }
    if n == 0.0 {
        return Ok(1.0);
    }
    Ok((-lambda * n * base.ln_base()).exp())
}

/// How the two-time object behind the mutual information is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MiConstruction {
    /// Legs `(i_{y-1}, o_y)` and `(i_{x-1}, o_x)` kept; every other output is
    /// fed forward by identity gates, inputs following a kept output receive
    /// the identity.
    #[default]
    ModifiedTrace,
    /// Identity gates everywhere, `o_{y-1}` and `o_{x-1}` traced and `|0>`
    /// fed after `o_x`. Keeps `i_{y-1}` against `(i_{x-1}, o_x)`.
    GroundInsertion,
}

/// Joint operator for steps `y < x` (unit trace) and the leg dimension of the
/// `y` part.
pub fn two_step_joint(
    pt: &ProcessTensor,
    x: usize,
    y: usize,
    construction: MiConstruction,
) -> Result<(CMatrix, usize)> {
    let k = pt.steps();
    if !(1 <= y && y < x && x <= k) {
        return Err(Error::InvalidArgument(alloc::format!(
            "need 1 <= y < x <= k, got y = {y}, x = {x}, k = {k}"
        )));
    }
    let mut actions = vec![SlotAction::identity(); k];
    actions[y - 1] = split(OutputLeg::Trace, InputLeg::Open);
    actions[x - 1] = split(OutputLeg::Trace, InputLeg::Open);
    let after_x = match construction {
        MiConstruction::ModifiedTrace => {
            if x == y + 1 {
                actions[y] = split(OutputLeg::Open, InputLeg::Open);
            } else {
                actions[y] = split(OutputLeg::Open, feed_identity());
            }
            feed_identity()
        }
        MiConstruction::GroundInsertion => InputLeg::Feed(crate::oqe::ground_projector()),
    };
    let last = if x < k {
        actions[x] = split(OutputLeg::Open, after_x);
        FinalAction::Trace
    } else {
        FinalAction::Open
    };
    let y_dim = match construction {
        MiConstruction::ModifiedTrace => 4,
        MiConstruction::GroundInsertion => 2,
    };
    Ok((scaled(pt.reduce(&actions, &last)?, 1.0)?, y_dim))
}

/// `S(x) + S(y) - S(xy)` of the two-step joint, clipped at zero.
pub fn mutual_information_of(
    pt: &ProcessTensor,
    x: usize,
    y: usize,
    construction: MiConstruction,
    base: LogBase,
) -> Result<f64> {
    let (joint, y_dim) = two_step_joint(pt, x, y, construction)?;
    let dims = [y_dim, joint.nrows() / y_dim];
    let rho_y = partial_trace(&joint, &dims, &[0]);
    let rho_x = partial_trace(&joint, &dims, &[1]);
    let i = von_neumann_entropy(&rho_x, base) + von_neumann_entropy(&rho_y, base) - von_neumann_entropy(&joint, base);
    Ok(i.max(0.0))
}

pub fn mutual_information(
    model: &OqeModel,
    x: usize,
    y: usize,
    k: usize,
    construction: MiConstruction,
    base: LogBase,
) -> Result<f64> {
    mutual_information_of(&build_pt(model, k)?, x, y, construction, base)
}

/// One entry of the mutual-information table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MiEntry {
    pub x: usize,
    pub y: usize,
    /// Length of the process tensor used.
    pub k: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasureRequest {
    pub steps: Vec<usize>,
    /// `(x, y)` pairs.
    pub pairs: Vec<(usize, usize)>,
    /// Process length for the pairs; `None` uses `x` for each pair.
    pub mi_length: Option<usize>,
    pub buffer: usize,
    pub dense_k: Option<usize>,
    pub base: LogBase,
    pub construction: MiConstruction,
}

impl Default for MeasureRequest {
    fn default() -> Self {
        Self {
            steps: vec![40],
            pairs: Vec::new(),
            mi_length: None,
            buffer: DEFAULT_BUFFER,
            dense_k: None,
            base: LogBase::Bits,
            construction: MiConstruction::ModifiedTrace,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasureReport {
    pub model_id: String,
    pub chi: usize,
    pub steps: Vec<usize>,
    pub memory_complexity: Vec<f64>,
    pub osee: Vec<f64>,
    pub mutual_information: Vec<MiEntry>,
    /// `(k, N)`; `None` for `N` when the support condition failed.
    pub dense: Option<(usize, Option<f64>)>,
    pub buffer: usize,
    pub base: LogBase,
    pub construction: MiConstruction,
}

/// Every requested measure for one model.
pub fn measure_report(model: &OqeModel, model_id: &str, req: &MeasureRequest) -> Result<MeasureReport> {
    if req.buffer == 0 {
        return Err(Error::InvalidArgument("buffer must be >= 1".into()));
    }
    let last = req.steps.iter().copied().max().unwrap_or(0);
    let mut memory = Vec::with_capacity(req.steps.len());
    if last > 0 {
        let mps = build_ppt(model, last)?.to_mps()?;
        for &j in &req.steps {
            check_step(j)?;
            memory.push(bipartite_entropy(&mps, j, req.base)?);
        }
    }
    let osee = req
        .steps
        .iter()
        .map(|&j| osee_nonmarkovianity(model, j, j + req.buffer, req.base))
        .collect::<Result<Vec<_>>>()?;
    let mutual_information = req
        .pairs
        .iter()
        .map(|&(x, y)| {
            let k = req.mi_length.unwrap_or(x);
            Ok(MiEntry {
                x,
                y,
                k,
                value: mutual_information(model, x, y, k, req.construction, req.base)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dense = match req.dense_k {
        Some(k) => {
            let r = nonmarkovianity_dense(model, k, req.base)?;
            Some((k, r.is_finite().then_some(r.value)))
        }
        None => None,
    };
    Ok(MeasureReport {
        model_id: model_id.into(),
        chi: model.chi(),
        steps: req.steps.clone(),
        memory_complexity: memory,
        osee,
        mutual_information,
        dense,
        buffer: req.buffer,
        base: req.base,
        construction: req.construction,
    })
}

/// Unit-trace Choi matrix of the unitary `u` over `(input, output)`.
pub fn unitary_choi(u: &Mat2) -> CMatrix {
    CMatrix::from_fn(4, 4, |r, c| {
        u[(r % 2, r / 2)] * u[(c % 2, c / 2)].conj() * C64::new(0.5, 0.0)
    })
}
