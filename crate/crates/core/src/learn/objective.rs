//! Mean-square loss between recorded and predicted RB outcomes, with its
//! exact gradient by reverse accumulation through the gate chain.

use alloc::vec;
use alloc::vec::Vec;

use crate::clifford::CliffordGroup;
use crate::dataset::{RbDataset, Record, Split};
use crate::error::{Error, Result};
use crate::exec::{pairwise_reduce, Executor};
use crate::learn::mesh::{pullback, to_unitary, UnitaryParams};
use crate::linalg::{CMatrix, Mat2, C64, ZERO};
use crate::oqe::ground_projector;

/// Records per work item; fixed so summation order never depends on threads.
const BLOCK: usize = 32;

#[derive(Debug, Clone)]
struct Sample {
    gates: Vec<u8>,
    f: f64,
}

#[derive(Debug, Clone)]
pub struct Objective {
    chi: usize,
    samples: Vec<Sample>,
    gate_table: Vec<[C64; 4]>,
    measurement: [C64; 4],
}

fn flat2(m: &Mat2) -> [C64; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

impl Objective {
    pub fn new(group: &CliffordGroup, records: &[&Record], chi: usize) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("no records in the selected split"));
        }
        if chi == 0 {
            return Err(Error::InvalidArgument("memory dimension must be >= 1".into()));
        }
        for r in records {
            r.seq.validate()?;
        }
        Ok(Self {
            chi,
            samples: records
                .iter()
                .map(|r| Sample {
                    gates: r.seq.gates.clone(),
                    f: r.f,
                })
                .collect(),
            gate_table: group.gates().iter().map(|g| flat2(&g.unitary)).collect(),
            measurement: flat2(&ground_projector()),
        })
    }

    pub fn for_split(group: &CliffordGroup, ds: &RbDataset, split: Split, chi: usize) -> Result<Self> {
        Self::new(group, &ds.split(split), chi)
    }

    pub fn with_measurement(mut self, m: &Mat2) -> Self {
        self.measurement = flat2(m);
        self
    }

    pub fn chi(&self) -> usize {
        self.chi
    }

    pub fn dim(&self) -> usize {
        2 * self.chi
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn check_unitary(&self, u: &CMatrix) -> Result<Vec<C64>> {
        let d = self.dim();
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::Shape {
                expected: d,
                got: u.nrows(),
            });
        }
        // row-major copy for the inner loops
        Ok((0..d * d).map(|i| u[(i / d, i % d)]).collect())
    }

    /// Loss for an explicit unitary.
    pub fn loss_unitary<E: Executor>(&self, u: &CMatrix, exec: &E) -> Result<f64> {
        let u = self.check_unitary(u)?;
        let blocks = self.samples.len().div_ceil(BLOCK);
        let sums = exec.map(blocks, |b| {
            let mut work = Workspace::new(self.dim(), 0);
            self.block_range(b)
                .map(|i| {
                    let r = self.residual(&u, &self.samples[i], &mut work, false);
                    r * r
                })
                .sum::<f64>()
        });
        let total = pairwise_reduce(sums, |a, b| a + b).unwrap_or(0.0);
        finite(total / self.samples.len() as f64)
    }

    /// Loss and `gbar` with `dL = 2 Re sum conj(gbar) .* dU`.
    pub fn loss_and_unitary_gradient<E: Executor>(&self, u: &CMatrix, exec: &E) -> Result<(f64, CMatrix)> {
        let uf = self.check_unitary(u)?;
        let d = self.dim();
        let n = self.samples.len() as f64;
        let blocks = self.samples.len().div_ceil(BLOCK);
        let max_k = self.samples.iter().map(|s| s.gates.len()).max().unwrap_or(0);
        let parts = exec.map(blocks, |b| {
            let mut work = Workspace::new(d, max_k);
            let mut gbar = vec![ZERO; d * d];
            let mut loss = 0.0;
            for i in self.block_range(b) {
                let s = &self.samples[i];
                let r = self.residual(&uf, s, &mut work, true);
                loss += r * r;
                self.backward(&uf, s, 2.0 * r / n, &mut work, &mut gbar);
            }
            (loss, gbar)
        });
        let (loss, gbar) = pairwise_reduce(parts, |(la, mut ga), (lb, gb)| {
            for (x, y) in ga.iter_mut().zip(gb.iter()) {
                *x += y;
            }
            (la + lb, ga)
        })
        .unwrap_or((0.0, vec![ZERO; d * d]));
        let loss = finite(loss / n)?;
        let gbar = CMatrix::from_fn(d, d, |r, c| gbar[r * d + c]);
        if gbar.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("loss gradient".into()));
        }
        Ok((loss, gbar))
    }

    pub fn loss<E: Executor>(&self, params: &UnitaryParams, exec: &E) -> Result<f64> {
        self.check_params(params)?;
        self.loss_unitary(&params.to_unitary(), exec)
    }

    pub fn loss_and_gradient<E: Executor>(&self, params: &UnitaryParams, exec: &E) -> Result<(f64, Vec<f64>)> {
        self.check_params(params)?;
        let d = params.dim();
        let u = to_unitary(d, params.angles());
        let (loss, gbar) = self.loss_and_unitary_gradient(&u, exec)?;
        Ok((loss, pullback(d, params.angles(), &gbar)))
    }

    fn check_params(&self, params: &UnitaryParams) -> Result<()> {
        if params.dim() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: params.dim(),
            });
        }
        Ok(())
    }

    fn block_range(&self, b: usize) -> core::ops::Range<usize> {
        b * BLOCK..((b + 1) * BLOCK).min(self.samples.len())
    }

    /// `f_pred - f`; with `keep` the inputs to every `U` are stored in `work`.
    fn residual(&self, u: &[C64], s: &Sample, work: &mut Workspace, keep: bool) -> f64 {
        let d = self.dim();
        let chi = self.chi;
        let mut psi = core::mem::take(&mut work.psi);
        psi.iter_mut().for_each(|z| *z = ZERO);
        psi[0] = C64::new(1.0, 0.0);
        let steps = s.gates.len() + 1;
        for step in 0..steps {
            if step > 0 {
                apply_system(&self.gate_table[s.gates[step - 1] as usize], &mut psi, chi);
            }
            if keep {
                work.inputs[step * d..(step + 1) * d].copy_from_slice(&psi);
            }
            matvec(u, &psi, &mut work.tmp, d);
            core::mem::swap(&mut psi, &mut work.tmp);
        }
        let m = &self.measurement;
        let mut f_pred = ZERO;
        for mem in 0..chi {
            let a0 = psi[mem];
            let a1 = psi[chi + mem];
            f_pred += a0.conj() * (m[0] * a0 + m[1] * a1) + a1.conj() * (m[2] * a0 + m[3] * a1);
        }
        if keep {
            work.out.copy_from_slice(&psi);
        }
        work.psi = psi;
        f_pred.re - s.f
    }

    fn backward(&self, u: &[C64], s: &Sample, scale: f64, work: &mut Workspace, gbar: &mut [C64]) {
        let d = self.dim();
        let chi = self.chi;
        let m = &self.measurement;
        // lambda = scale * (M x 1) psi
        let lam = &mut work.lam;
        for mem in 0..chi {
            let a0 = work.out[mem];
            let a1 = work.out[chi + mem];
            lam[mem] = (m[0] * a0 + m[1] * a1) * scale;
            lam[chi + mem] = (m[2] * a0 + m[3] * a1) * scale;
        }
        for step in (0..=s.gates.len()).rev() {
            let x = &work.inputs[step * d..(step + 1) * d];
            for r in 0..d {
                let l = lam[r];
                if l == ZERO {
                    continue;
                }
                let row = &mut gbar[r * d..(r + 1) * d];
                for (g, xc) in row.iter_mut().zip(x.iter()) {
                    *g += l * xc.conj();
                }
            }
            // lambda <- U^dagger lambda
            for c in 0..d {
                let mut acc = ZERO;
                for r in 0..d {
                    acc += u[r * d + c].conj() * lam[r];
                }
                work.tmp[c] = acc;
            }
            lam.copy_from_slice(&work.tmp);
            if step > 0 {
                let g = &self.gate_table[s.gates[step - 1] as usize];
                let gd = [g[0].conj(), g[2].conj(), g[1].conj(), g[3].conj()];
                apply_system(&gd, lam, chi);
            }
        }
    }
}

struct Workspace {
    psi: Vec<C64>,
    tmp: Vec<C64>,
    out: Vec<C64>,
    lam: Vec<C64>,
    inputs: Vec<C64>,
}

impl Workspace {
    fn new(d: usize, max_k: usize) -> Self {
        Self {
            psi: vec![ZERO; d],
            tmp: vec![ZERO; d],
            out: vec![ZERO; d],
            lam: vec![ZERO; d],
            inputs: vec![ZERO; d * (max_k + 1)],
        }
    }
}

fn matvec(u: &[C64], x: &[C64], y: &mut [C64], d: usize) {
    for (r, yr) in y.iter_mut().enumerate() {
        let row = &u[r * d..(r + 1) * d];
        *yr = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    }
}

/// `G x 1` on system-major amplitudes.
fn apply_system(g: &[C64; 4], psi: &mut [C64], chi: usize) {
    for m in 0..chi {
        let a0 = psi[m];
        let a1 = psi[chi + m];
        psi[m] = g[0] * a0 + g[1] * a1;
        psi[chi + m] = g[2] * a0 + g[3] * a1;
    }
}

fn finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite("loss".into()))
    }
}

/// Loss of `params` on one split of `ds`.
pub fn loss<E: Executor>(params: &UnitaryParams, ds: &RbDataset, split: Split, exec: &E) -> Result<f64> {
    let group = CliffordGroup::new();
    Objective::for_split(&group, ds, split, params.dim() / 2)?.loss(params, exec)
}

pub fn loss_gradient<E: Executor>(params: &UnitaryParams, ds: &RbDataset, split: Split, exec: &E) -> Result<Vec<f64>> {
    let group = CliffordGroup::new();
    Ok(Objective::for_split(&group, ds, split, params.dim() / 2)?
        .loss_and_gradient(params, exec)?
        .1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::GateSequence;
    use crate::dataset::DatasetMeta;
    use crate::exec::{stream_rng, Serial};
    use crate::linalg::{identity, kron, random_unitary};
    use crate::oqe::OqeModel;
    use crate::sim::TwoQubitModel;
    use rand::Rng;

    fn dataset(group: &CliffordGroup, seed: u64, n: usize, f: impl Fn(&GateSequence) -> f64) -> RbDataset {
        let mut rng = stream_rng(seed, &[]);
        let records = (0..n)
            .map(|_| {
                let k = rng.random_range(2..12);
                let seq = group.sample_rb_sequence(k, &mut rng).unwrap();
                Record {
                    k,
                    f: f(&seq),
                    seq,
                    split: Some(Split::Train),
                }
            })
            .collect();
        RbDataset::new(DatasetMeta::default(), records)
    }

    /// Plain double loop over records using the reference evaluator.
    fn naive_loss(model: &OqeModel, group: &CliffordGroup, ds: &RbDataset) -> f64 {
        let recs = ds.split(Split::Train);
        let mut total = 0.0;
        for r in &recs {
            let mut psi = CMatrix::zeros(model.dim(), 1);
            psi[(0, 0)] = C64::new(1.0, 0.0);
            psi = model.unitary() * psi;
            for &g in &r.seq.gates {
                let big = kron(
                    &crate::linalg::mat2_to_dynamic(group.unitary(g)),
                    &identity(model.chi()),
                );
                psi = model.unitary() * (big * psi);
            }
            let p: f64 = (0..model.chi()).map(|m| psi[(m, 0)].norm_sqr()).sum();
            total += (p - r.f) * (p - r.f);
        }
        total / recs.len() as f64
    }

    #[test]
    fn matches_naive_reimplementation() {
        let group = CliffordGroup::new();
        let sim = crate::sim::Simulator::new(TwoQubitModel::with_detuning(11.3, 565.0)).unwrap();
        let ds = dataset(&group, 3, 70, |s| sim.run_sequence(s).unwrap());
        let mut rng = stream_rng(4, &[]);
        let params = UnitaryParams::random(4, &mut rng);
        let model = OqeModel::new(2, params.to_unitary()).unwrap();
        let obj = Objective::for_split(&group, &ds, Split::Train, 2).unwrap();
        let fast = obj.loss(&params, &Serial).unwrap();
        assert!((fast - naive_loss(&model, &group, &ds)).abs() < 1e-13);
        let (with_grad, _) = obj.loss_and_gradient(&params, &Serial).unwrap();
        assert!((with_grad - fast).abs() < 1e-15);
    }

    #[test]
    fn constant_predictor() {
        let group = CliffordGroup::new();
        let ds = dataset(&group, 1, 10, |_| 0.75);
        let obj = Objective::for_split(&group, &ds, Split::Train, 1).unwrap();
        let l = obj.loss_unitary(&identity(2), &Serial).unwrap();
        assert!((l - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn truth_has_zero_loss_and_gradient() {
        let group = CliffordGroup::new();
        let truth = TwoQubitModel::with_detuning(11.3, 50.0).fixed(true);
        let sim = crate::sim::Simulator::new(truth).unwrap();
        let ds = dataset(&group, 2, 40, |s| sim.run_sequence(s).unwrap());
        let params = UnitaryParams::from_unitary(truth.as_oqe().unwrap().unitary());
        let obj = Objective::for_split(&group, &ds, Split::Train, 2).unwrap();
        let (l, g) = obj.loss_and_gradient(&params, &Serial).unwrap();
        assert!(l < 1e-20);
        assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-8);
    }

    #[test]
    fn duplicated_dataset_has_same_gradient() {
        let group = CliffordGroup::new();
        let ds = dataset(&group, 5, 15, |_| 0.6);
        let mut doubled = ds.clone();
        doubled.records.extend(ds.records.clone());
        let params = UnitaryParams::random(6, &mut stream_rng(6, &[]));
        let a = Objective::for_split(&group, &ds, Split::Train, 3).unwrap();
        let b = Objective::for_split(&group, &doubled, Split::Train, 3).unwrap();
        let (la, ga) = a.loss_and_gradient(&params, &Serial).unwrap();
        let (lb, gb) = b.loss_and_gradient(&params, &Serial).unwrap();
        assert!((la - lb).abs() < 1e-14);
        for (x, y) in ga.iter().zip(gb.iter()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn gauge_invariance_of_loss() {
        let group = CliffordGroup::new();
        let ds = dataset(&group, 8, 20, |_| 0.9);
        let obj = Objective::for_split(&group, &ds, Split::Train, 3).unwrap();
        let mut rng = stream_rng(9, &[]);
        let model = OqeModel::new(3, random_unitary(6, &mut rng)).unwrap();
        let w = random_unitary(2, &mut rng);
        let mut v = identity(3);
        for r in 1..3 {
            for c in 1..3 {
                v[(r, c)] = w[(r - 1, c - 1)];
            }
        }
        let gauged = model.memory_gauge(&v).unwrap();
        let a = obj.loss_unitary(model.unitary(), &Serial).unwrap();
        let b = obj.loss_unitary(gauged.unitary(), &Serial).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let group = CliffordGroup::new();
        for (case, chi) in [1usize, 2, 3].into_iter().enumerate() {
            let mut rng = stream_rng(20, &[case as u64]);
            let target = OqeModel::new(chi, random_unitary(2 * chi, &mut rng)).unwrap();
            let ds = dataset(&group, 30 + case as u64, 12, |s| {
                (target.predict(&group, s) * 0.9 + 0.05).clamp(0.0, 1.0)
            });
            let obj = Objective::for_split(&group, &ds, Split::Train, chi).unwrap();
            let params = UnitaryParams::random(2 * chi, &mut rng);
            let (_, g) = obj.loss_and_gradient(&params, &Serial).unwrap();
            for i in 0..g.len() {
                let shifted = |h: f64| {
                    let mut a = params.angles().to_vec();
                    a[i] += h;
                    obj.loss(&UnitaryParams::new(2 * chi, a).unwrap(), &Serial).unwrap()
                };
                let fd = (shifted(1e-5) - shifted(-1e-5)) / 2e-5;
                if g[i].abs() > 1e-8 {
                    assert!(
                        ((fd - g[i]) / g[i]).abs() < 1e-6,
                        "chi {chi} param {i}: {fd} vs {}",
                        g[i]
                    );
                }
            }
        }
    }

    #[test]
    fn errors() {
        let group = CliffordGroup::new();
        let ds = dataset(&group, 1, 3, |_| 1.0);
        assert!(matches!(
            Objective::for_split(&group, &ds, Split::Val, 2),
            Err(Error::Empty(_))
        ));
        let obj = Objective::for_split(&group, &ds, Split::Train, 2).unwrap();
        assert!(obj.loss(&UnitaryParams::zeros(2), &Serial).is_err());
    }
}
