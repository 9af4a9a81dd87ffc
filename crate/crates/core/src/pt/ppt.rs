//! Purified process tensor: the pure multi-time state of system legs plus a
//! dangling memory leg.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, C64, ZERO};
use crate::oqe::OqeModel;
use crate::pt::mps::{Mps, MpsSite};

#[derive(Debug, Clone, PartialEq)]
pub struct PurifiedProcessTensor {
    k: usize,
    chi: usize,
    /// `[o_0][alpha_0]`.
    initial: Vec<C64>,
    /// `[alpha][2 * i + o][beta]`, shared by every bulk site.
    bulk: Vec<C64>,
    measurement: Mat2,
}

/// Purified process tensor of length `k` (inputs `i_0..i_{k-1}`).
pub fn build_ppt(model: &OqeModel, k: usize) -> Result<PurifiedProcessTensor> {
    if k == 0 {
        return Err(Error::InvalidDepth {
            depth: 0,
            reason: "a process tensor needs at least one step",
        });
    }
    let chi = model.chi();
    let u = model.unitary();
    let psi0 = model.initial_state().amplitudes;
    let mut bulk = vec![ZERO; chi * 4 * chi];
    for a in 0..chi {
        for i in 0..2 {
            for o in 0..2 {
                for b in 0..chi {
                    bulk[(a * 4 + 2 * i + o) * chi + b] = u[(o * chi + b, i * chi + a)];
                }
            }
        }
    }
    Ok(PurifiedProcessTensor {
        k,
        chi,
        initial: psi0,
        bulk,
        measurement: *model.measurement(),
    })
}

impl PurifiedProcessTensor {
    pub fn steps(&self) -> usize {
        self.k
    }

    pub fn chi(&self) -> usize {
        self.chi
    }

    /// Site tensor `j` in `[left][phys][right]` form; `j = 0` is the initial
    /// state, `1..=k` are the bulk sites.
    pub fn site(&self, j: usize) -> Result<MpsSite> {
        match j {
            0 => MpsSite::new(1, 2, self.chi, self.initial.clone()),
            j if j <= self.k => MpsSite::new(self.chi, 4, self.chi, self.bulk.clone()),
            _ => Err(Error::InvalidArgument(alloc::format!(
                "site {j} out of range for {} steps",
                self.k
            ))),
        }
    }

    /// MPS over all legs, with the dangling memory leg as a final site.
    pub fn to_mps(&self) -> Result<Mps> {
        let mut sites = Vec::with_capacity(self.k + 2);
        for j in 0..=self.k {
            sites.push(self.site(j)?);
        }
        let chi = self.chi;
        let mut tail = vec![ZERO; chi * chi];
        for a in 0..chi {
            tail[a * chi + a] = C64::new(1.0, 0.0);
        }
        sites.push(MpsSite::new(chi, chi, 1, tail)?);
        Mps::new(sites)
    }

    /// `<Y|Y>`; equals `2^k` for a unitary model.
    pub fn norm_sqr(&self) -> Result<f64> {
        Ok(self.to_mps()?.norm_sqr())
    }

    /// Probability of the measurement outcome after feeding unitary `gates`
    /// into the `k` slots.
    pub fn contract_unitaries(&self, gates: &[Mat2]) -> Result<f64> {
        self.contract_with_measurement(gates, &self.measurement)
    }

    pub fn contract_with_measurement(&self, gates: &[Mat2], measurement: &Mat2) -> Result<f64> {
        if gates.len() != self.k {
            return Err(Error::Shape {
                expected: self.k,
                got: gates.len(),
            });
        }
        let chi = self.chi;
        // psi[o][alpha]
        let mut psi = self.initial.clone();
        let mut fed = vec![ZERO; 2 * chi];
        for g in gates {
            for i in 0..2 {
                for a in 0..chi {
                    fed[i * chi + a] = g[(i, 0)] * psi[a] + g[(i, 1)] * psi[chi + a];
                }
            }
            psi.iter_mut().for_each(|z| *z = ZERO);
            for i in 0..2 {
                for a in 0..chi {
                    let x = fed[i * chi + a];
                    if x == ZERO {
                        continue;
                    }
                    for o in 0..2 {
                        let row = &self.bulk[(a * 4 + 2 * i + o) * chi..][..chi];
                        for (b, &w) in row.iter().enumerate() {
                            psi[o * chi + b] += x * w;
                        }
                    }
                }
            }
        }
        let mut acc = ZERO;
        for o in 0..2 {
            for op in 0..2 {
                let m = measurement[(op, o)];
                if m == ZERO {
                    continue;
                }
                for b in 0..chi {
                    acc += psi[op * chi + b].conj() * m * psi[o * chi + b];
                }
            }
        }
        Ok(acc.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::CliffordGroup;
    use crate::linalg::{identity, random_unitary, LogBase};
    use crate::pt::mps::bipartite_entropy;
    use crate::pt::sequence_gates;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(chi: usize, rng: &mut ChaCha8Rng) -> OqeModel {
        OqeModel::new(chi, random_unitary(2 * chi, rng)).unwrap()
    }

    #[test]
    fn trivial_model_is_a_product_state() {
        let model = OqeModel::new(1, identity(2)).unwrap();
        let ppt = build_ppt(&model, 1).unwrap();
        let mps = ppt.to_mps().unwrap();
        for cut in 0..mps.len() - 1 {
            assert_eq!(bipartite_entropy(&mps, cut, LogBase::Bits).unwrap(), 0.0);
        }
    }

    #[test]
    fn zero_steps_rejected() {
        let model = OqeModel::new(1, identity(2)).unwrap();
        assert!(build_ppt(&model, 0).is_err());
    }

    #[test]
    fn norm_is_two_to_the_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 1..=6 {
            let model = random_model(1 + k % 3, &mut rng);
            let n = build_ppt(&model, k).unwrap().norm_sqr().unwrap();
            assert!((n - (1u64 << k) as f64).abs() < 1e-8 * n, "k={k} norm={n}");
        }
    }

    #[test]
    fn bulk_sites_are_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ppt = build_ppt(&random_model(2, &mut rng), 4).unwrap();
        let first = ppt.site(1).unwrap();
        for j in 2..=4 {
            assert_eq!(ppt.site(j).unwrap(), first);
        }
        assert!(ppt.site(5).is_err());
        assert_eq!(ppt.to_mps().unwrap().bond_dims(), alloc::vec![2; 5]);
    }

    #[test]
    fn contraction_matches_model_prediction() {
        let group = CliffordGroup::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..30 {
            let model = random_model(1 + trial % 4, &mut rng);
            let k = rng.random_range(1..=10);
            let seq = group.sample_rb_sequence(k.max(2), &mut rng).unwrap();
            let gates = sequence_gates(&group, &seq);
            let ppt = build_ppt(&model, gates.len()).unwrap();
            let p = ppt.contract_unitaries(&gates).unwrap();
            assert!((p - model.predict(&group, &seq)).abs() < 1e-12);
        }
    }

    #[test]
    fn complementary_measurements_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = random_model(3, &mut rng);
        let ppt = build_ppt(&model, 4).unwrap();
        let gates: Vec<Mat2> = (0..4)
            .map(|_| {
                let u = random_unitary(2, &mut rng);
                Mat2::from_fn(|r, c| u[(r, c)])
            })
            .collect();
        let p0 = Mat2::new(C64::new(1.0, 0.0), ZERO, ZERO, ZERO);
        let p1 = Mat2::new(ZERO, ZERO, ZERO, C64::new(1.0, 0.0));
        let total =
            ppt.contract_with_measurement(&gates, &p0).unwrap() + ppt.contract_with_measurement(&gates, &p1).unwrap();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(ppt.contract_unitaries(&gates[..3]).is_err());
    }

    #[test]
    fn memory_entropy_bounded_and_independent_of_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = random_model(3, &mut rng);
        let short = build_ppt(&model, 3).unwrap().to_mps().unwrap();
        let long = build_ppt(&model, 8).unwrap().to_mps().unwrap();
        let s_short = bipartite_entropy(&short, 3, LogBase::Bits).unwrap();
        let s_long = bipartite_entropy(&long, 3, LogBase::Bits).unwrap();
        assert!((s_short - s_long).abs() < 1e-10);
        assert!(s_long <= 3f64.log2() + 1e-9);
    }
}
