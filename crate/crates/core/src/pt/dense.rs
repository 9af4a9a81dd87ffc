//! Brute-force process tensor as an explicit matrix, for small lengths only.

use alloc::vec;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ZERO};
use crate::oqe::OqeModel;

/// Largest length accepted by [`dense_pt`] (a `512 x 512` matrix).
pub const DENSE_MAX_STEPS: usize = 4;

/// Process tensor of length `k` over `(o_0, i_0, ..., o_k)`, computed by
/// building the full purified state vector and tracing out the memory.
pub fn dense_pt(model: &OqeModel, k: usize) -> Result<CMatrix> {
    if k == 0 {
        return Err(Error::InvalidDepth {
            depth: 0,
            reason: "a process tensor needs at least one step",
        });
    }
    if k > DENSE_MAX_STEPS {
        return Err(Error::TooLarge {
            k,
            max: DENSE_MAX_STEPS,
        });
    }
    let chi = model.chi();
    let u = model.unitary();
    // psi[legs][memory]
    let mut psi = model.initial_state().amplitudes;
    let mut legs = 2usize;
    for _ in 0..k {
        let mut next = vec![ZERO; legs * 4 * chi];
        for l in 0..legs {
            for i in 0..2 {
                for o in 0..2 {
                    for b in 0..chi {
                        // sum over the incoming memory index
                        let amp = (0..chi)
                            .map(|a| psi[l * chi + a] * u[(o * chi + b, i * chi + a)])
                            .fold(ZERO, |acc, z| acc + z);
                        next[((l * 2 + i) * 2 + o) * chi + b] = amp;
                    }
                }
            }
        }
        psi = next;
        legs *= 4;
    }
    let m = CMatrix::from_fn(legs, chi, |r, c| psi[r * chi + c]);
    Ok(&m * m.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigenvalues, max_abs_diff, random_unitary, trace};
    use crate::pt::build_pt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn limits() {
        let model = OqeModel::new(1, crate::linalg::identity(2)).unwrap();
        assert!(matches!(dense_pt(&model, 5), Err(Error::TooLarge { k: 5, max: 4 })));
        assert!(dense_pt(&model, 0).is_err());
        assert_eq!(dense_pt(&model, 4).unwrap().nrows(), 512);
    }

    #[test]
    fn matches_mpdo_and_is_a_valid_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..12 {
            let chi = 1 + trial % 3;
            let model = OqeModel::new(chi, random_unitary(2 * chi, &mut rng)).unwrap();
            let k = 1 + trial % 3;
            let d = dense_pt(&model, k).unwrap();
            let mpdo = build_pt(&model, k).unwrap().to_dense().unwrap();
            assert!(max_abs_diff(&d, &mpdo) < 1e-12);
            assert!((trace(&d).re - (1u64 << k) as f64).abs() < 1e-8);
            assert!(hermitian_eigenvalues(&d)[0] > -1e-10);
        }
    }
}
