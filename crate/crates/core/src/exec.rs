//! Execution strategy and deterministic random streams.
//!
//! Work that may run on several threads is expressed as an indexed map whose
//! results come back in index order; reductions then happen in a fixed order
//! on the caller's side, so results never depend on the worker count.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub trait Executor: Sync {
    /// Evaluate `f(0..len)` and return the results in index order.
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Default, Clone, Copy)]
pub struct Serial;

impl Executor for Serial {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).map(f).collect()
    }
}

/// Pairwise (tree) reduction in a fixed order.
pub fn pairwise_reduce<T, F>(mut items: Vec<T>, combine: F) -> Option<T>
where
    F: Fn(T, T) -> T,
{
    if items.is_empty() {
        return None;
    }
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut iter = items.into_iter();
        while let Some(a) = iter.next() {
            match iter.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a base seed with a path of tags into an independent child seed.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// ChaCha8 stream addressed by `(seed, tags...)`.
pub fn stream_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn pairwise_reduce_sums_everything() {
        let v: Vec<u64> = (1..=11).collect();
        assert_eq!(pairwise_reduce(v, |a, b| a + b), Some(66));
        assert_eq!(pairwise_reduce(Vec::<u64>::new(), |a, b| a + b), None);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream_rng(7, &[1, 2]).random();
        let b: u64 = stream_rng(7, &[1, 2]).random();
        let c: u64 = stream_rng(7, &[2, 1]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
