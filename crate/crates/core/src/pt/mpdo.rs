//! Process tensor as a matrix product density operator, and the contraction
//! engine that feeds gates, states or open legs into its slots.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Mat2, C64, ZERO};
use crate::oqe::OqeModel;
use crate::pt::mps::{Mps, MpsSite};
use crate::pt::ppt::{build_ppt, PurifiedProcessTensor};
use crate::pt::GateOp;

/// `W[a][x][y][b]` with ket physical index `x` and bra index `y`, stored
/// row-major as `((a * phys + x) * phys + y) * right + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MpdoSite {
    pub left: usize,
    pub phys: usize,
    pub right: usize,
    pub data: Vec<C64>,
}

impl MpdoSite {
    pub fn new(left: usize, phys: usize, right: usize, data: Vec<C64>) -> Result<Self> {
        let n = left * phys * phys * right;
        if data.len() != n {
            return Err(Error::Shape {
                expected: n,
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

    /// Site without bonds holding the operator `m` (rows ket, columns bra).
    pub fn from_operator(m: &CMatrix) -> Result<Self> {
        let p = m.nrows();
        if m.ncols() != p {
            return Err(Error::Shape {
                expected: p,
                got: m.ncols(),
            });
        }
        let data = (0..p * p).map(|n| m[(n / p, n % p)]).collect();
        Self::new(1, p, 1, data)
    }

    #[inline]
    pub fn at(&self, a: usize, x: usize, y: usize, b: usize) -> C64 {
        self.data[((a * self.phys + x) * self.phys + y) * self.right + b]
    }

    /// `[left, phys, phys, right]`.
    pub fn shape(&self) -> [usize; 4] {
        [self.left, self.phys, self.phys, self.right]
    }

    /// Doubled physical indices merged into one leg of size `phys^2`.
    pub fn vectorized(&self) -> MpsSite {
        MpsSite::new(self.left, self.phys * self.phys, self.right, self.data.clone()).expect("same element count")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputLeg {
    Open,
    Trace,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputLeg {
    Open,
    /// Feed a fixed operator (ket rows, bra columns) into the input leg.
    Feed(Mat2),
}

/// What happens at one slot between `o_j` and `i_j`.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotAction {
    /// Connect the legs through a 4x4 superoperator.
    Channel(CMatrix),
    /// Cut the connection and treat the two legs separately.
    Split { output: OutputLeg, input: InputLeg },
}

impl SlotAction {
    pub fn identity() -> Self {
        SlotAction::Channel(CMatrix::identity(4, 4))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FinalAction {
    Open,
    Trace,
    /// `tr(M rho)` on the last output.
    Measure(Mat2),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessTensor {
    k: usize,
    sites: Vec<MpdoSite>,
}

/// Process tensor of length `k`; bond dimension `chi^2`, memory traced at the
/// end.
pub fn build_pt(model: &OqeModel, k: usize) -> Result<ProcessTensor> {
    ProcessTensor::from_ppt(&build_ppt(model, k)?)
}

/// Vectorised process tensor normalised to unit 2-norm.
pub fn vectorize_pt(pt: &ProcessTensor) -> Result<Mps> {
    Ok(Mps::new(pt.sites.iter().map(MpdoSite::vectorized).collect())?.normalized())
}

fn double_site(b: &MpsSite, trace_right: bool) -> MpdoSite {
    let (l, p, r) = (b.left, b.phys, b.right);
    let right = if trace_right { 1 } else { r * r };
    let mut data = vec![ZERO; l * l * p * p * right];
    for a in 0..l {
        for ap in 0..l {
            let left = a * l + ap;
            for x in 0..p {
                for y in 0..p {
                    let base = ((left * p + x) * p + y) * right;
                    for bb in 0..r {
                        let ket = b.at(a, x, bb);
                        if ket == ZERO {
                            continue;
                        }
                        if trace_right {
                            data[base] += ket * b.at(ap, y, bb).conj();
                        } else {
                            for bp in 0..r {
                                data[base + bb * r + bp] = ket * b.at(ap, y, bp).conj();
                            }
                        }
                    }
                }
            }
        }
    }
    MpdoSite::new(l * l, p, right, data).expect("consistent shape")
}

impl ProcessTensor {
    pub fn from_ppt(ppt: &PurifiedProcessTensor) -> Result<Self> {
        let k = ppt.steps();
        let mut sites = Vec::with_capacity(k + 1);
        for j in 0..=k {
            sites.push(double_site(&ppt.site(j)?, j == k));
        }
        Ok(Self { k, sites })
    }

    /// Assemble from explicit sites: `o_0` site (phys 2), then `k` bulk sites
    /// (phys 4) with chained bonds and unit outer bonds.
    pub fn from_sites(sites: Vec<MpdoSite>) -> Result<Self> {
        if sites.len() < 2 {
            return Err(Error::InvalidDepth {
                depth: sites.len().saturating_sub(1),
                reason: "a process tensor needs at least one step",
            });
        }
        if sites[0].phys != 2 || sites[1..].iter().any(|s| s.phys != 4) {
            return Err(Error::InvalidArgument("physical legs must be 2 then 4".into()));
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
        Ok(Self {
            k: sites.len() - 1,
            sites,
        })
    }

    pub fn steps(&self) -> usize {
        self.k
    }

    pub fn sites(&self) -> &[MpdoSite] {
        &self.sites
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.k].iter().map(|s| s.right).collect()
    }

    /// Contract every slot with `actions` and the last output with `last`.
    ///
    /// Returns the operator on the open legs in time order (ket rows, bra
    /// columns, first open leg most significant); `1 x 1` when none are open.
    pub fn reduce(&self, actions: &[SlotAction], last: &FinalAction) -> Result<CMatrix> {
        if actions.len() != self.k {
            return Err(Error::Shape {
                expected: self.k,
                got: actions.len(),
            });
        }
        // env[open][x][x'][bond], x the pending leg
        let s0 = &self.sites[0];
        let mut env = Env {
            open: 1,
            open_legs: 0,
            bond: s0.right,
            data: s0.data.clone(),
        };
        for (action, site) in actions.iter().zip(&self.sites[1..]) {
            env = env.apply(action)?;
            env = env.absorb(site);
        }
        env.finish(last)
    }

    /// Probability of the process tensor's outcome `measurement` with `gates`
    /// in the slots.
    pub fn contract(&self, gates: &[GateOp], measurement: &Mat2) -> Result<f64> {
        let actions: Vec<SlotAction> = gates.iter().map(|g| SlotAction::Channel(g.superop())).collect();
        Ok(self.reduce(&actions, &FinalAction::Measure(*measurement))?[(0, 0)].re)
    }

    pub fn contract_unitaries(&self, gates: &[Mat2], measurement: &Mat2) -> Result<f64> {
        let ops: Vec<GateOp> = gates.iter().map(|g| GateOp::Unitary(*g)).collect();
        self.contract(&ops, measurement)
    }

    /// Full operator over `(o_0, i_0, ..., o_k)`.
    pub fn to_dense(&self) -> Result<CMatrix> {
        let actions = vec![
            SlotAction::Split {
                output: OutputLeg::Open,
                input: InputLeg::Open
            };
            self.k
        ];
        self.reduce(&actions, &FinalAction::Open)
    }

    /// Contract `o` with `o'` and `i` with `i'` everywhere.
    pub fn trace(&self) -> Result<f64> {
        let actions = vec![
            SlotAction::Split {
                output: OutputLeg::Trace,
                input: InputLeg::Feed(Mat2::identity())
            };
            self.k
        ];
        Ok(self.reduce(&actions, &FinalAction::Trace)?[(0, 0)].re)
    }
}

struct Env {
    open: usize,
    open_legs: usize,
    bond: usize,
    data: Vec<C64>,
}

impl Env {
    #[inline]
    fn idx(&self, o: usize, x: usize, xp: usize, b: usize) -> usize {
        ((o * 2 + x) * 2 + xp) * self.bond + b
    }

    fn apply(self, action: &SlotAction) -> Result<Env> {
        let bond = self.bond;
        match action {
            SlotAction::Channel(s) => {
                if s.nrows() != 4 || s.ncols() != 4 {
                    return Err(Error::Shape {
                        expected: 4,
                        got: s.nrows().max(s.ncols()),
                    });
                }
                let mut out = vec![ZERO; self.data.len()];
                for o in 0..self.open {
                    for r in 0..4 {
                        for c in 0..4 {
                            let w = s[(r, c)];
                            if w == ZERO {
                                continue;
                            }
                            let src = self.idx(o, c / 2, c % 2, 0);
                            let dst = self.idx(o, r / 2, r % 2, 0);
                            for b in 0..bond {
                                out[dst + b] += w * self.data[src + b];
                            }
                        }
                    }
                }
                Ok(Env { data: out, ..self })
            }
            SlotAction::Split { output, input } => {
                // resolve the pending output into a reduced env [open'][bond]
                let (open, open_legs, reduced) = match output {
                    OutputLeg::Trace => {
                        let mut red = vec![ZERO; self.open * bond];
                        for o in 0..self.open {
                            for x in 0..2 {
                                let src = self.idx(o, x, x, 0);
                                for b in 0..bond {
                                    red[o * bond + b] += self.data[src + b];
                                }
                            }
                        }
                        (self.open, self.open_legs, red)
                    }
                    // layout [open][x][x'][bond] already is [open * 4 + 2x + x'][bond]
                    OutputLeg::Open => (self.open * 4, self.open_legs + 1, self.data),
                };
                match input {
                    InputLeg::Feed(rho) => {
                        let mut out = vec![ZERO; open * 4 * bond];
                        for o in 0..open {
                            for i in 0..2 {
                                for ip in 0..2 {
                                    let w = rho[(i, ip)];
                                    let dst = ((o * 2 + i) * 2 + ip) * bond;
                                    for b in 0..bond {
                                        out[dst + b] = w * reduced[o * bond + b];
                                    }
                                }
                            }
                        }
                        Ok(Env {
                            open,
                            open_legs,
                            bond,
                            data: out,
                        })
                    }
                    InputLeg::Open => {
                        let new_open = open * 4;
                        let mut out = vec![ZERO; new_open * 4 * bond];
                        for o in 0..open {
                            for i in 0..2 {
                                for ip in 0..2 {
                                    let leg = o * 4 + 2 * i + ip;
                                    let dst = ((leg * 2 + i) * 2 + ip) * bond;
                                    out[dst..dst + bond].copy_from_slice(&reduced[o * bond..(o + 1) * bond]);
                                }
                            }
                        }
                        Ok(Env {
                            open: new_open,
                            open_legs: open_legs + 1,
                            bond,
                            data: out,
                        })
                    }
                }
            }
        }
    }

    /// Consume the pending input and bond with a bulk site.
    fn absorb(self, site: &MpdoSite) -> Env {
        let right = site.right;
        let mut out = vec![ZERO; self.open * 4 * right];
        for o in 0..self.open {
            for i in 0..2 {
                for ip in 0..2 {
                    for a in 0..self.bond {
                        let e = self.data[self.idx(o, i, ip, a)];
                        if e == ZERO {
                            continue;
                        }
                        for x in 0..2 {
                            for xp in 0..2 {
                                let w = &site.data[((a * 4 + 2 * i + x) * 4 + 2 * ip + xp) * right..][..right];
                                let dst = ((o * 2 + x) * 2 + xp) * right;
                                for (b, &wv) in w.iter().enumerate() {
                                    out[dst + b] += e * wv;
                                }
                            }
                        }
                    }
                }
            }
        }
        Env {
            open: self.open,
            open_legs: self.open_legs,
            bond: right,
            data: out,
        }
    }

    fn finish(self, last: &FinalAction) -> Result<CMatrix> {
        if self.bond != 1 {
            return Err(Error::Shape {
                expected: 1,
                got: self.bond,
            });
        }
        let (open, legs, vals): (usize, usize, Vec<C64>) = match last {
            FinalAction::Open => (self.open * 4, self.open_legs + 1, self.data),
            FinalAction::Trace => (
                self.open,
                self.open_legs,
                (0..self.open)
                    .map(|o| self.data[self.idx(o, 0, 0, 0)] + self.data[self.idx(o, 1, 1, 0)])
                    .collect(),
            ),
            FinalAction::Measure(m) => (
                self.open,
                self.open_legs,
                (0..self.open)
                    .map(|o| {
                        let mut acc = ZERO;
                        for x in 0..2 {
                            for xp in 0..2 {
                                acc += m[(xp, x)] * self.data[self.idx(o, x, xp, 0)];
                            }
                        }
                        acc
                    })
                    .collect(),
            ),
        };
        debug_assert_eq!(open, 1 << (2 * legs));
        // open index is interleaved (ket_0, bra_0, ket_1, bra_1, ...)
        let dim = 1usize << legs;
        let mut out = CMatrix::zeros(dim, dim);
        for (n, &v) in vals.iter().enumerate() {
            let (mut row, mut col) = (0, 0);
            for leg in 0..legs {
                let pair = (n >> (2 * (legs - 1 - leg))) & 3;
                row = (row << 1) | (pair >> 1);
                col = (col << 1) | (pair & 1);
            }
            out[(row, col)] = v;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::CliffordGroup;
    use crate::linalg::{hermitian_eigenvalues, identity, max_abs_diff, random_unitary, trace, LogBase};
    use crate::pt::mps::bipartite_entropy;
    use crate::pt::{sequence_gates, unitary_superop};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(chi: usize, rng: &mut ChaCha8Rng) -> OqeModel {
        OqeModel::new(chi, random_unitary(2 * chi, rng)).unwrap()
    }

    fn random_gate(rng: &mut ChaCha8Rng) -> Mat2 {
        let u = random_unitary(2, rng);
        Mat2::from_fn(|r, c| u[(r, c)])
    }

    #[test]
    fn bond_dimensions_are_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pt = build_pt(&random_model(3, &mut rng), 4).unwrap();
        assert_eq!(pt.bond_dims(), alloc::vec![9; 4]);
        assert_eq!(pt.sites()[4].right, 1);
        let pt1 = build_pt(&random_model(1, &mut rng), 3).unwrap();
        assert_eq!(pt1.bond_dims(), alloc::vec![1; 3]);
    }

    #[test]
    fn trace_is_two_to_the_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 1..=5 {
            let pt = build_pt(&random_model(2, &mut rng), k).unwrap();
            let tr = pt.trace().unwrap();
            assert!((tr - (1u64 << k) as f64).abs() < 1e-8, "k={k}: {tr}");
        }
    }

    #[test]
    fn identity_gates_preserve_total_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pt = build_pt(&random_model(3, &mut rng), 5).unwrap();
        let gates = alloc::vec![Mat2::identity(); 5];
        let p = pt.contract_unitaries(&gates, &Mat2::identity()).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unitary_and_channel_paths_agree_with_model() {
        let group = CliffordGroup::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..20 {
            let model = random_model(1 + trial % 3, &mut rng);
            let k = rng.random_range(2..=8);
            let seq = group.sample_rb_sequence(k, &mut rng).unwrap();
            let gates = sequence_gates(&group, &seq);
            let pt = build_pt(&model, gates.len()).unwrap();
            let channels: Vec<GateOp> = gates.iter().map(|g| GateOp::Channel(unitary_superop(g))).collect();
            let expected = model.predict(&group, &seq);
            let p = pt.contract(&channels, model.measurement()).unwrap();
            assert!((p - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn depolarizing_channel_gives_mixed_output() {
        // fully depolarising the last slot leaves the measured qubit maximally
        // mixed whatever the memory does
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = OqeModel::new(1, identity(2)).unwrap();
        let pt = build_pt(&model, 2).unwrap();
        let mut dep = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for o in 0..2 {
                dep[(3 * i, 3 * o)] = C64::new(0.5, 0.0);
            }
        }
        let ops = alloc::vec![GateOp::Unitary(random_gate(&mut rng)), GateOp::Channel(dep)];
        let p = pt.contract(&ops, &crate::oqe::ground_projector()).unwrap();
        assert!((p - 0.5).abs() < 1e-14);
    }

    #[test]
    fn wrong_slot_count_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pt = build_pt(&random_model(2, &mut rng), 3).unwrap();
        assert!(pt
            .contract_unitaries(&[Mat2::identity(); 2], &Mat2::identity())
            .is_err());
        assert!(pt
            .reduce(
                &[
                    SlotAction::Channel(CMatrix::identity(3, 3)),
                    SlotAction::identity(),
                    SlotAction::identity()
                ],
                &FinalAction::Trace
            )
            .is_err());
    }

    #[test]
    fn dense_operator_is_hermitian_psd_with_right_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 1..=3 {
            let pt = build_pt(&random_model(2, &mut rng), k).unwrap();
            let d = pt.to_dense().unwrap();
            assert_eq!(d.nrows(), 2 << (2 * k));
            assert!(max_abs_diff(&d, &d.adjoint()) < 1e-12);
            assert!((trace(&d).re - (1u64 << k) as f64).abs() < 1e-10);
            assert!(hermitian_eigenvalues(&d)[0] > -1e-10);
        }
    }

    #[test]
    fn unit_memory_dense_is_product_of_choi_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_unitary(2, &mut rng);
        let model = OqeModel::new(1, u.clone()).unwrap();
        let pt = build_pt(&model, 2).unwrap();
        let d = pt.to_dense().unwrap();
        // Choi over (i, o): |i><i'| x U|i><i'|U^dagger
        let choi = CMatrix::from_fn(4, 4, |r, c| u[(r % 2, r / 2)] * u[(c % 2, c / 2)].conj());
        let rho0 = CMatrix::from_fn(2, 2, |r, c| if r == 0 && c == 0 { C64::new(1.0, 0.0) } else { ZERO });
        let expected = crate::linalg::kron(&crate::linalg::kron(&rho0, &choi), &choi);
        assert!(max_abs_diff(&d, &expected) < 1e-12);
    }

    #[test]
    fn vectorized_unit_memory_has_zero_osee() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pt = build_pt(&random_model(1, &mut rng), 4).unwrap();
        let v = vectorize_pt(&pt).unwrap();
        assert!((v.norm_sqr() - 1.0).abs() < 1e-12);
        for cut in 0..4 {
            assert!(bipartite_entropy(&v, cut, LogBase::Bits).unwrap() < 1e-10);
        }
    }

    #[test]
    fn vectorized_entropy_matches_dense_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let pt = build_pt(&random_model(2, &mut rng), 2).unwrap();
        let d = pt.to_dense().unwrap();
        // vec over (o0 o0') (i0 o1 i0' o1') (i1 o2 i1' o2'); cut after site 1
        let n = d.nrows();
        let mut vecd = vec![ZERO; n * n];
        let digit = |idx: usize, pos: usize| (idx >> (4 - pos)) & 1; // 5 legs, pos 0 first
        for r in 0..n {
            for c in 0..n {
                let site0 = 2 * digit(r, 0) + digit(c, 0);
                let x1 = 2 * digit(r, 1) + digit(r, 2);
                let y1 = 2 * digit(c, 1) + digit(c, 2);
                let x2 = 2 * digit(r, 3) + digit(r, 4);
                let y2 = 2 * digit(c, 3) + digit(c, 4);
                vecd[((site0 * 16 + x1 * 4 + y1) * 16) + x2 * 4 + y2] = d[(r, c)];
            }
        }
        let m = CMatrix::from_fn(64, 16, |r, c| vecd[r * 16 + c]);
        let sv = m.singular_values();
        let tot: f64 = sv.iter().map(|s| s * s).sum();
        let p: Vec<f64> = sv.iter().map(|s| s * s / tot).collect();
        let expected = crate::linalg::shannon_entropy(&p, LogBase::Bits);
        let got = bipartite_entropy(&vectorize_pt(&pt).unwrap(), 1, LogBase::Bits).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn from_sites_validation() {
        let op = CMatrix::identity(2, 2);
        let s0 = MpdoSite::from_operator(&op).unwrap();
        let s1 = MpdoSite::from_operator(&CMatrix::identity(4, 4)).unwrap();
        let pt = ProcessTensor::from_sites(alloc::vec![s0.clone(), s1.clone()]).unwrap();
        assert_eq!(pt.steps(), 1);
        assert!(ProcessTensor::from_sites(alloc::vec![s0.clone()]).is_err());
        assert!(ProcessTensor::from_sites(alloc::vec![s1.clone(), s0]).is_err());
        assert!(MpdoSite::new(1, 2, 1, alloc::vec![ZERO; 3]).is_err());
    }
}
