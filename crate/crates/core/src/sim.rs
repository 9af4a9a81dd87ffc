//! Exact simulator of a system qubit exchanging excitations with one
//! environment qubit.
//!
//! Units: energies in MHz (cycles per microsecond), times in ns, so a phase
//! accumulates as `2 pi * E * t * 1e-3`. Basis index is `2 * s + e` with
//! `|0>` the `sigma_z = +1` state. `h_s` defaults to zero, i.e. the frame
//! co-rotating with the system drive, so an isolated system only sees its
//! gates.
//!
//! Gates are instantaneous. Each native pulse is followed by free evolution
//! for its nominal duration (the identity native is just a wait), then the
//! idle segment follows. With `fixed_duration` the whole Clifford is applied
//! at once and every step lasts `3 * gate_time + segment_time`, which makes
//! the dynamics an exact two-dimensional-memory OQE model.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods exist only when std is linked
use num_traits::Float;
use rand_distr::{Binomial, Distribution};

use crate::clifford::{CliffordGroup, GateSequence, NativeGate};
use crate::dataset::{DatasetMeta, GeneratorMeta, RbDataset, Record};
use crate::error::{Error, Result};
use crate::exec::{stream_rng, Executor};
use crate::linalg::{expm_hermitian, identity, kron, mat2_to_dynamic, CMatrix, Mat2, C64, ONE, ZERO};
use crate::oqe::OqeModel;

/// `2 pi * 1e-3`: MHz times ns to radians.
const MHZ_NS_TO_RAD: f64 = 2.0 * core::f64::consts::PI * 1e-3;

/// Relaxation times in microseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Decoherence {
    pub t1_s_us: f64,
    pub t2_s_us: f64,
    pub t1_e_us: f64,
    pub t2_e_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TwoQubitModel {
    pub j_mhz: f64,
    pub h_s_mhz: f64,
    pub h_e_mhz: f64,
    pub segment_time_ns: f64,
    pub gate_time_ns: f64,
    pub fixed_duration: bool,
    pub decoherence: Option<Decoherence>,
}

impl Default for TwoQubitModel {
    fn default() -> Self {
        Self {
            j_mhz: 11.3,
            h_s_mhz: 0.0,
            h_e_mhz: -50.0,
            segment_time_ns: 100.0,
            gate_time_ns: 20.0,
            fixed_duration: false,
            decoherence: None,
        }
    }
}

impl TwoQubitModel {
    /// System at zero frequency, environment detuned by `-delta_h`.
    pub fn with_detuning(j_mhz: f64, delta_h_mhz: f64) -> Self {
        Self {
            j_mhz,
            h_s_mhz: 0.0,
            h_e_mhz: -delta_h_mhz,
            ..Self::default()
        }
    }

    pub fn fixed(mut self, fixed_duration: bool) -> Self {
        self.fixed_duration = fixed_duration;
        self
    }

    pub fn delta_h(&self) -> f64 {
        self.h_s_mhz - self.h_e_mhz
    }

    /// Duration of one step in fixed-duration mode.
    pub fn fixed_step_ns(&self) -> f64 {
        3.0 * self.gate_time_ns + self.segment_time_ns
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.j_mhz,
            self.h_s_mhz,
            self.h_e_mhz,
            self.segment_time_ns,
            self.gate_time_ns,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        if self.j_mhz < 0.0 {
            return Err(Error::InvalidArgument("coupling J must be >= 0".into()));
        }
        if !(self.segment_time_ns > 0.0) || !(self.gate_time_ns > 0.0) {
            return Err(Error::InvalidArgument("segment and gate times must be > 0".into()));
        }
        if let Some(d) = self.decoherence {
            for (t1, t2) in [(d.t1_s_us, d.t2_s_us), (d.t1_e_us, d.t2_e_us)] {
                if !(t1 > 0.0) || !(t2 > 0.0) || t2 > 2.0 * t1 {
                    return Err(Error::InvalidArgument(
                        "relaxation times need T1 > 0, T2 > 0 and T2 <= 2 T1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Exact OQE form of fixed-duration dynamics: memory = environment qubit.
    pub fn as_oqe(&self) -> Result<OqeModel> {
        if !self.fixed_duration || self.decoherence.is_some() {
            return Err(Error::InvalidArgument(
                "only fixed-duration, decoherence-free dynamics is an exact OQE model".into(),
            ));
        }
        OqeModel::new(2, step_unitary(self, self.fixed_step_ns())?)
    }
}

/// `2 J^2 / dh`, the dispersive exchange rate.
pub fn gamma_eff(j_mhz: f64, delta_h_mhz: f64) -> Result<f64> {
    if delta_h_mhz == 0.0 {
        return Err(Error::ResonantCoupling);
    }
    Ok(2.0 * j_mhz * j_mhz / delta_h_mhz)
}

/// `J (s+ e- + e+ s-) + h_s Z_s + h_e Z_e` in MHz.
pub fn hamiltonian(model: &TwoQubitModel) -> CMatrix {
    let (hs, he, j) = (model.h_s_mhz, model.h_e_mhz, model.j_mhz);
    let mut h = CMatrix::zeros(4, 4);
    for s in 0..2 {
        for e in 0..2 {
            let zs = if s == 0 { 1.0 } else { -1.0 };
            let ze = if e == 0 { 1.0 } else { -1.0 };
            h[(2 * s + e, 2 * s + e)] = C64::new(hs * zs + he * ze, 0.0);
        }
    }
    h[(1, 2)] = C64::new(j, 0.0);
    h[(2, 1)] = C64::new(j, 0.0);
    h
}

/// `exp(-i 2 pi H t)` for `t` in ns.
pub fn step_unitary(model: &TwoQubitModel, duration_ns: f64) -> Result<CMatrix> {
    if !(duration_ns >= 0.0) {
        return Err(Error::InvalidArgument("duration must be >= 0".into()));
    }
    Ok(expm_hermitian(&hamiltonian(model), MHZ_NS_TO_RAD * duration_ns))
}

/// `Tr[(|0><0| x 1) rho]` on the two-qubit space.
pub fn survival_probability(rho: &CMatrix) -> f64 {
    (rho[(0, 0)] + rho[(1, 1)]).re
}

/// Superoperator of `rho -> K rho K^dagger` on row-major `vec(rho)`.
fn conjugation(k: &CMatrix) -> CMatrix {
    kron(k, &k.map(|z| z.conj()))
}

fn kraus_superop(kraus: &[CMatrix]) -> CMatrix {
    let n = kraus[0].nrows();
    kraus
        .iter()
        .fold(CMatrix::zeros(n * n, n * n), |acc, k| acc + conjugation(k))
}

fn real2(a: f64, b: f64, c: f64, d: f64) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(a, 0.0), C64::new(b, 0.0), C64::new(c, 0.0), C64::new(d, 0.0)],
    )
}

/// Amplitude damping followed by pure dephasing on one qubit over `dt_ns`.
fn single_qubit_noise(t1_us: f64, t2_us: f64, dt_ns: f64) -> CMatrix {
    let dt_us = dt_ns * 1e-3;
    let gamma = 1.0 - (-dt_us / t1_us).exp();
    let damp = kraus_superop(&[
        real2(1.0, 0.0, 0.0, (1.0 - gamma).sqrt()),
        real2(0.0, gamma.sqrt(), 0.0, 0.0),
    ]);
    let phi_rate = (1.0 / t2_us - 0.5 / t1_us).max(0.0);
    let lambda = (-dt_us * phi_rate).exp();
    let dephase = kraus_superop(&[
        real2(1.0, 0.0, 0.0, 1.0) * C64::new(((1.0 + lambda) / 2.0).sqrt(), 0.0),
        real2(1.0, 0.0, 0.0, -1.0) * C64::new(((1.0 - lambda) / 2.0).sqrt(), 0.0),
    ]);
    dephase * damp
}

/// Superoperator of a single-qubit channel on the system (`on_system`) or
/// environment slot of the pair.
fn embed_superop(single: &CMatrix, on_system: bool) -> CMatrix {
    // single acts on (a, a') pairs; the pair superop is indexed by
    // ((s, e), (s', e')) row-major
    let mut out = CMatrix::zeros(16, 16);
    for s in 0..2 {
        for e in 0..2 {
            for sp in 0..2 {
                for ep in 0..2 {
                    let row = (2 * s + e) * 4 + 2 * sp + ep;
                    for t in 0..2 {
                        for f in 0..2 {
                            for tp in 0..2 {
                                for fp in 0..2 {
                                    let col = (2 * t + f) * 4 + 2 * tp + fp;
                                    let v = if on_system {
                                        if e == f && ep == fp {
                                            single[(2 * s + sp, 2 * t + tp)]
                                        } else {
                                            ZERO
                                        }
                                    } else if s == t && sp == tp {
                                        single[(2 * e + ep, 2 * f + fp)]
                                    } else {
                                        ZERO
                                    };
                                    out[(row, col)] = v;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Precomputed per-Clifford step maps for one model.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: TwoQubitModel,
    group: CliffordGroup,
    steps: Steps,
}

#[derive(Debug, Clone)]
enum Steps {
    Unitary(Vec<CMatrix>),
    Channel(Vec<CMatrix>),
}

impl Simulator {
    pub fn new(model: TwoQubitModel) -> Result<Self> {
        model.validate()?;
        let group = CliffordGroup::new();
        let noise = model.decoherence.map(|d| {
            move |dt: f64| -> CMatrix {
                embed_superop(&single_qubit_noise(d.t1_s_us, d.t2_s_us, dt), true)
                    * embed_superop(&single_qubit_noise(d.t1_e_us, d.t2_e_us, dt), false)
            }
        });
        let gate_ops = |index: u8| -> Vec<(Option<Mat2>, f64)> {
            let gate = group.gate(index);
            if model.fixed_duration {
                vec![(Some(gate.unitary), model.fixed_step_ns())]
            } else {
                let mut ops: Vec<(Option<Mat2>, f64)> = gate
                    .natives
                    .iter()
                    .map(|&n| {
                        let pulse = if n == NativeGate::Identity {
                            None
                        } else {
                            Some(n.unitary())
                        };
                        (pulse, model.gate_time_ns)
                    })
                    .collect();
                ops.push((None, model.segment_time_ns));
                ops
            }
        };
        let lift = |g: &Mat2| kron(&mat2_to_dynamic(g), &identity(2));
        let steps = match noise {
            None => Steps::Unitary(
                (0..group.gates().len() as u8)
                    .map(|i| {
                        let mut u = identity(4);
                        for (pulse, dt) in gate_ops(i) {
                            if let Some(g) = pulse {
                                u = lift(&g) * u;
                            }
                            u = step_unitary(&model, dt)? * u;
                        }
                        Ok(u)
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            Some(noise) => Steps::Channel(
                (0..group.gates().len() as u8)
                    .map(|i| {
                        let mut s = identity(16);
                        for (pulse, dt) in gate_ops(i) {
                            if let Some(g) = pulse {
                                s = conjugation(&lift(&g)) * s;
                            }
                            s = noise(dt) * conjugation(&step_unitary(&model, dt)?) * s;
                        }
                        Ok(s)
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Ok(Self { model, group, steps })
    }

    pub fn model(&self) -> &TwoQubitModel {
        &self.model
    }

    pub fn group(&self) -> &CliffordGroup {
        &self.group
    }

    /// Superoperator of one Clifford step (row-major `vec(rho)`).
    pub fn step_superop(&self, gate: u8) -> CMatrix {
        match &self.steps {
            Steps::Unitary(us) => conjugation(&us[gate as usize]),
            Steps::Channel(ss) => ss[gate as usize].clone(),
        }
    }

    /// Final two-qubit density matrix after `seq`, starting from `|00>`.
    pub fn final_state(&self, seq: &GateSequence) -> Result<CMatrix> {
        seq.validate()?;
        let mut start = CMatrix::zeros(4, 4);
        start[(0, 0)] = ONE;
        match &self.steps {
            Steps::Unitary(us) => {
                let mut psi = CMatrix::zeros(4, 1);
                psi[(0, 0)] = ONE;
                for &g in &seq.gates {
                    psi = &us[g as usize] * psi;
                }
                Ok(&psi * psi.adjoint())
            }
            Steps::Channel(ss) => {
                let mut v = CMatrix::from_row_slice(16, 1, start.transpose().as_slice());
                for &g in &seq.gates {
                    v = &ss[g as usize] * v;
                }
                Ok(CMatrix::from_fn(4, 4, |r, c| v[(4 * r + c, 0)]))
            }
        }
    }

    /// Survival probability of the system in `|0>` after `seq`.
    pub fn run_sequence(&self, seq: &GateSequence) -> Result<f64> {
        Ok(survival_probability(&self.final_state(seq)?).clamp(0.0, 1.0))
    }

    /// Exact mean over all `24^(k-1)` RB sequences of each depth, by tracking
    /// the state conditioned on the accumulated Clifford.
    pub fn exact_average_curve(&self, k_values: &[usize]) -> Result<Vec<f64>> {
        if let Some(&k) = k_values.iter().find(|&&k| k < 2) {
            return Err(Error::InvalidDepth {
                depth: k,
                reason: "RB depth must be >= 2",
            });
        }
        let n = self.group.gates().len();
        let supers: Vec<CMatrix> = (0..n as u8).map(|g| self.step_superop(g)).collect();
        let k_max = k_values.iter().copied().max().unwrap_or(0);
        // conditioned, weighted states vec(rho_c) keyed by accumulated element c
        let mut states = vec![CMatrix::zeros(16, 1); n];
        states[0][(0, 0)] = ONE;
        let mut by_depth = vec![0.0; k_max + 1];
        let weight = C64::new(1.0 / n as f64, 0.0);
        for prefix in 1..k_max {
            let mut next = vec![CMatrix::zeros(16, 1); n];
            for (c, rho) in states.iter().enumerate() {
                for (g, s) in supers.iter().enumerate() {
                    let target = self.group.compose(g as u8, c as u8) as usize;
                    next[target] += s * rho * weight;
                }
            }
            states = next;
            let k = prefix + 1;
            by_depth[k] = states
                .iter()
                .enumerate()
                .map(|(c, rho)| {
                    let out = &supers[self.group.inverse(c as u8) as usize] * rho;
                    (out[(0, 0)] + out[(5, 0)]).re
                })
                .sum();
        }
        Ok(k_values.iter().map(|&k| by_depth[k]).collect())
    }
}

/// Outcome of one record, drawn from the stream `(seed, k, index)`.
pub fn generate_record(sim: &Simulator, k: usize, index: usize, shots: Option<u64>, seed: u64) -> Result<Record> {
    let mut rng = stream_rng(seed, &[k as u64, index as u64]);
    let seq = sim.group().sample_rb_sequence(k, &mut rng)?;
    let exact = sim.run_sequence(&seq)?;
    let f = match shots {
        None => exact,
        Some(0) => return Err(Error::InvalidArgument("shots must be >= 1".into())),
        Some(n) => {
            let dist = Binomial::new(n, exact).map_err(|_| Error::NonFinite("binomial success probability".into()))?;
            dist.sample(&mut rng) as f64 / n as f64
        }
    };
    Ok(Record { k, seq, f, split: None })
}

/// `n` independent RB records for each depth, depths ascending.
pub fn generate_dataset<E: Executor>(
    sim: &Simulator,
    k_values: &[usize],
    n: usize,
    shots: Option<u64>,
    seed: u64,
    exec: &E,
) -> Result<RbDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sequence per depth".into()));
    }
    let mut ks = k_values.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::Empty("no depths requested"));
    }
    if ks[0] < 2 {
        return Err(Error::InvalidDepth {
            depth: ks[0],
            reason: "RB depth must be >= 2",
        });
    }
    let jobs: Vec<(usize, usize)> = ks.iter().flat_map(|&k| (0..n).map(move |l| (k, l))).collect();
    let records = exec
        .map(jobs.len(), |i| generate_record(sim, jobs[i].0, jobs[i].1, shots, seed))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let meta = DatasetMeta {
        generator: Some(GeneratorMeta {
            model: *sim.model(),
            k_values: ks,
            n_per_k: n,
            shots,
            seed,
        }),
        split: None,
    };
    Ok(RbDataset::new(meta, records))
}
