//! Single-qubit Clifford group: enumeration, composition, undo gates and the
//! decomposition of every element into native X/Y rotations.
//!
//! Indexing: index 0 is the identity. The remaining 23 elements are sorted by
//! a canonical key built from the phase-normalised unitary (global phase fixed
//! so the first non-negligible entry in row-major order is real positive),
//! with entries rounded to 1e-9. Every element's stored unitary is the product
//! of its natives, and its natives are the shortest native word that produces
//! it (ties broken by the order of [`NativeGate::ALL`]).

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // inherent f64 methods exist only when std is linked
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{phase_distance2, Mat2, C64, ONE};

pub const GROUP_ORDER: usize = 24;

/// Phase-insensitive equality tolerance for 2x2 unitaries.
pub const PHASE_TOL: f64 = 1e-10;

/// Hardware-native single-qubit rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NativeGate {
    PlusX2,
    MinusX2,
    PlusY2,
    MinusY2,
    PlusX,
    MinusX,
    PlusY,
    MinusY,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    None,
}

impl NativeGate {
    pub const ALL: [NativeGate; 9] = [
        NativeGate::PlusX2,
        NativeGate::MinusX2,
        NativeGate::PlusY2,
        NativeGate::MinusY2,
        NativeGate::PlusX,
        NativeGate::MinusX,
        NativeGate::PlusY,
        NativeGate::MinusY,
        NativeGate::Identity,
    ];

    pub fn label(self) -> &'static str {
        match self {
            NativeGate::PlusX2 => "+X/2",
            NativeGate::MinusX2 => "-X/2",
            NativeGate::PlusY2 => "+Y/2",
            NativeGate::MinusY2 => "-Y/2",
            NativeGate::PlusX => "+X",
            NativeGate::MinusX => "-X",
            NativeGate::PlusY => "+Y",
            NativeGate::MinusY => "-Y",
            NativeGate::Identity => "I",
        }
    }

    /// Rotation axis and angle.
    pub fn rotation(self) -> (Axis, f64) {
        use core::f64::consts::{FRAC_PI_2, PI};
        match self {
            NativeGate::PlusX2 => (Axis::X, FRAC_PI_2),
            NativeGate::MinusX2 => (Axis::X, -FRAC_PI_2),
            NativeGate::PlusY2 => (Axis::Y, FRAC_PI_2),
            NativeGate::MinusY2 => (Axis::Y, -FRAC_PI_2),
            NativeGate::PlusX => (Axis::X, PI),
            NativeGate::MinusX => (Axis::X, -PI),
            NativeGate::PlusY => (Axis::Y, PI),
            NativeGate::MinusY => (Axis::Y, -PI),
            NativeGate::Identity => (Axis::None, 0.0),
        }
    }

    /// `exp(-i theta sigma_a / 2)`.
    pub fn unitary(self) -> Mat2 {
        let (axis, theta) = self.rotation();
        let c = C64::new((theta / 2.0).cos(), 0.0);
        let s = (theta / 2.0).sin();
        match axis {
            Axis::X => Mat2::new(c, C64::new(0.0, -s), C64::new(0.0, -s), c),
            Axis::Y => Mat2::new(c, C64::new(-s, 0.0), C64::new(s, 0.0), c),
            Axis::None => Mat2::identity(),
        }
    }
}

impl fmt::Display for NativeGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone)]
pub struct CliffordGate {
    pub index: u8,
    /// Exact product of `natives`.
    pub unitary: Mat2,
    /// Native rotations in application order (first applied first).
    pub natives: Vec<NativeGate>,
}

/// Multiply natives in application order.
pub fn native_product(natives: &[NativeGate]) -> Mat2 {
    natives.iter().fold(Mat2::identity(), |acc, n| n.unitary() * acc)
}

/// The 24-element group with its multiplication table.
#[derive(Debug, Clone)]
pub struct CliffordGroup {
    gates: Vec<CliffordGate>,
    table: [[u8; GROUP_ORDER]; GROUP_ORDER],
    inverse: [u8; GROUP_ORDER],
}

fn canonical_key(u: &Mat2) -> [i64; 8] {
    let entries = [u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]];
    let pivot = entries.iter().find(|z| z.norm() > 1e-9).copied().unwrap_or(ONE);
    let phase = pivot.conj() / pivot.norm();
    let mut key = [0i64; 8];
    for (i, z) in entries.iter().enumerate() {
        let w = z * phase;
        key[2 * i] = (w.re * 1e9).round() as i64;
        key[2 * i + 1] = (w.im * 1e9).round() as i64;
    }
    key
}

impl CliffordGroup {
    pub fn new() -> Self {
        // Breadth-first over native words of length 1..=3; the first word to
        // reach an element is its shortest (and lexicographically first) one.
        let mut found: Vec<(Mat2, Vec<NativeGate>)> = Vec::new();
        let mut frontier: Vec<Vec<NativeGate>> = alloc::vec![Vec::new()];
        for _ in 0..3 {
            let mut next = Vec::new();
            for word in &frontier {
                for &n in NativeGate::ALL.iter() {
                    let mut w = word.clone();
                    w.push(n);
                    let u = native_product(&w);
                    if !found.iter().any(|(v, _)| phase_distance2(&u, v) < PHASE_TOL) {
                        found.push((u, w.clone()));
                    }
                    next.push(w);
                }
            }
            frontier = next;
        }
        assert_eq!(found.len(), GROUP_ORDER, "native words must reach the whole group");

        let id_pos = found
            .iter()
            .position(|(u, _)| phase_distance2(u, &Mat2::identity()) < PHASE_TOL)
            .expect("identity reachable");
        let identity = found.swap_remove(id_pos);
        found.sort_by_key(|(u, _)| canonical_key(u));
        found.insert(0, identity);

        let gates: Vec<CliffordGate> = found
            .into_iter()
            .enumerate()
            .map(|(i, (unitary, natives))| CliffordGate {
                index: i as u8,
                unitary,
                natives,
            })
            .collect();

        let lookup = |u: &Mat2| -> u8 {
            gates
                .iter()
                .position(|g| phase_distance2(u, &g.unitary) < PHASE_TOL)
                .expect("Clifford group is closed under multiplication") as u8
        };
        let mut table = [[0u8; GROUP_ORDER]; GROUP_ORDER];
        for a in 0..GROUP_ORDER {
            for b in 0..GROUP_ORDER {
                table[a][b] = lookup(&(gates[a].unitary * gates[b].unitary));
            }
        }
        let mut inverse = [0u8; GROUP_ORDER];
        for a in 0..GROUP_ORDER {
            inverse[a] = (0..GROUP_ORDER)
                .find(|&b| table[a][b] == 0)
                .expect("every element has an inverse") as u8;
        }
        Self { gates, table, inverse }
    }

    pub fn gates(&self) -> &[CliffordGate] {
        &self.gates
    }

    pub fn gate(&self, index: u8) -> &CliffordGate {
        &self.gates[index as usize]
    }

    pub fn unitary(&self, index: u8) -> &Mat2 {
        &self.gates[index as usize].unitary
    }

    /// Index of `U_a U_b` (apply `b`, then `a`).
    pub fn compose(&self, a: u8, b: u8) -> u8 {
        self.table[a as usize][b as usize]
    }

    pub fn inverse(&self, a: u8) -> u8 {
        self.inverse[a as usize]
    }

    /// Net element of a sequence applied in order.
    pub fn fold(&self, gates: &[u8]) -> u8 {
        gates.iter().fold(0u8, |acc, &g| self.compose(g, acc))
    }

    /// The gate that returns `prefix` to the identity.
    pub fn undo_gate(&self, prefix: &[u8]) -> u8 {
        self.inverse(self.fold(prefix))
    }

    /// Index of the element equal to `u` up to phase, if any.
    pub fn find(&self, u: &Mat2) -> Option<u8> {
        self.gates
            .iter()
            .position(|g| phase_distance2(u, &g.unitary) < PHASE_TOL)
            .map(|i| i as u8)
    }

    /// `k - 1` uniform Cliffords followed by their undo gate.
    pub fn sample_rb_sequence<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<GateSequence> {
        if k < 2 {
            return Err(Error::InvalidDepth {
                depth: k,
                reason: "an RB sequence needs at least one random gate and the undo gate",
            });
        }
        let mut gates: Vec<u8> = (0..k - 1).map(|_| rng.random_range(0..GROUP_ORDER as u8)).collect();
        gates.push(self.undo_gate(&gates));
        Ok(GateSequence { gates })
    }
}

impl Default for CliffordGroup {
    fn default() -> Self {
        Self::new()
    }
}

/// A list of Clifford indices applied in order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct GateSequence {
    pub gates: Vec<u8>,
}

impl GateSequence {
    pub fn new(gates: Vec<u8>) -> Self {
        Self { gates }
    }

    pub fn depth(&self) -> usize {
        self.gates.len()
    }

    pub fn validate(&self) -> Result<()> {
        match self.gates.iter().find(|&&g| g as usize >= GROUP_ORDER) {
            Some(&g) => Err(Error::InvalidArgument(alloc::format!(
                "Clifford index {g} out of range"
            ))),
            None => Ok(()),
        }
    }

    /// True when the last gate undoes the ones before it.
    pub fn is_rb(&self, group: &CliffordGroup) -> bool {
        match self.gates.split_last() {
            Some((&last, prefix)) if !prefix.is_empty() => group.undo_gate(prefix) == last,
            _ => false,
        }
    }
}

/// Max-entry distance to the nearest element, useful when checking inputs.
pub fn distance_to_group(group: &CliffordGroup, u: &Mat2) -> f64 {
    group
        .gates()
        .iter()
        .map(|g| phase_distance2(u, &g.unitary))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat2_to_dynamic;
    use crate::linalg::{unitarity_defect, ZERO};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn group_has_24_elements_identity_first() {
        let g = CliffordGroup::new();
        assert_eq!(g.gates().len(), 24);
        assert!(phase_distance2(g.unitary(0), &Mat2::identity()) < 1e-15);
        assert_eq!(g.gate(0).natives, alloc::vec![NativeGate::Identity]);
    }

    #[test]
    fn gates_are_unitary_distinct_and_short() {
        let g = CliffordGroup::new();
        for (i, a) in g.gates().iter().enumerate() {
            assert!(unitarity_defect(&mat2_to_dynamic(&a.unitary)) < 1e-12);
            assert!(!a.natives.is_empty() && a.natives.len() <= 3);
            assert!(phase_distance2(&native_product(&a.natives), &a.unitary) < 1e-12);
            for b in g.gates().iter().skip(i + 1) {
                assert!(phase_distance2(&a.unitary, &b.unitary) > 1e-3);
            }
        }
    }

    #[test]
    fn natives_match_rotation_formula() {
        // exp(-i theta sigma/2) = cos(theta/2) I - i sin(theta/2) sigma
        let x = Mat2::new(ZERO, ONE, ONE, ZERO);
        let y = Mat2::new(ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO);
        for n in NativeGate::ALL {
            let (axis, theta) = n.rotation();
            let sigma = match axis {
                Axis::X => x,
                Axis::Y => y,
                Axis::None => Mat2::zeros(),
            };
            let expected =
                Mat2::identity() * C64::new((theta / 2.0).cos(), 0.0) - sigma * C64::new(0.0, (theta / 2.0).sin());
            assert!((n.unitary() - expected).norm() < 1e-15, "{n}");
        }
    }

    #[test]
    fn compose_identity_and_involution() {
        let g = CliffordGroup::new();
        for a in 0..24u8 {
            assert_eq!(g.compose(0, a), a);
            assert_eq!(g.compose(a, 0), a);
        }
        let x = g.find(&NativeGate::PlusX.unitary()).unwrap();
        assert_eq!(g.compose(x, x), 0);
    }

    #[test]
    fn table_matches_brute_force_products() {
        // Independent phase-insensitive matching of all 576 products.
        let g = CliffordGroup::new();
        for a in 0..24u8 {
            for b in 0..24u8 {
                let prod = g.unitary(a) * g.unitary(b);
                let matches: Vec<u8> = (0..24u8)
                    .filter(|&c| phase_distance2(&prod, g.unitary(c)) < 1e-10)
                    .collect();
                assert_eq!(matches, alloc::vec![g.compose(a, b)]);
            }
        }
    }

    #[test]
    fn unique_inverses() {
        let g = CliffordGroup::new();
        for a in 0..24u8 {
            let inv: Vec<u8> = (0..24u8).filter(|&b| g.compose(a, b) == 0).collect();
            assert_eq!(inv.len(), 1);
            assert_eq!(g.compose(g.inverse(a), a), 0);
        }
    }

    #[test]
    fn undo_gate_examples() {
        let g = CliffordGroup::new();
        let x = g.find(&NativeGate::PlusX.unitary()).unwrap();
        assert_eq!(g.undo_gate(&[x]), x);
        let x2 = g.find(&NativeGate::PlusX2.unitary()).unwrap();
        let minus_x = g.find(&NativeGate::MinusX.unitary()).unwrap();
        assert_eq!(minus_x, x);
        assert_eq!(g.undo_gate(&[x2, x2]), minus_x);
    }

    #[test]
    fn random_prefix_undo_restores_identity() {
        let g = CliffordGroup::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let prefix: Vec<u8> = (0..10).map(|_| rng.random_range(0..24u8)).collect();
            let undo = g.undo_gate(&prefix);
            assert_eq!(g.compose(undo, g.fold(&prefix)), 0);
        }
    }

    #[test]
    fn rb_sequences() {
        let g = CliffordGroup::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(matches!(
            g.sample_rb_sequence(1, &mut rng),
            Err(Error::InvalidDepth { depth: 1, .. })
        ));
        let s = g.sample_rb_sequence(2, &mut rng).unwrap();
        assert_eq!(s.gates[1], g.inverse(s.gates[0]));
        assert!(s.is_rb(&g));

        let a = g.sample_rb_sequence(12, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = g.sample_rb_sequence(12, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
        assert!(a.is_rb(&g));
    }

    #[test]
    fn first_slot_is_uniform() {
        let g = CliffordGroup::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let trials = 10_000usize;
        let mut counts = [0usize; 24];
        for _ in 0..trials {
            counts[g.sample_rb_sequence(5, &mut rng).unwrap().gates[0] as usize] += 1;
        }
        let p = 1.0 / 24.0;
        let mean = trials as f64 * p;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sigma + 1.0, "count {c}");
        }
    }
}
