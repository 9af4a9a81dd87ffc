//! RB records and their train / validation / prediction partition.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods exist only when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;

use crate::clifford::{CliffordGroup, GateSequence};
use crate::error::{Error, Result};
use crate::exec::stream_rng;
use crate::sim::TwoQubitModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Val,
    Pred,
}

impl Split {
    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Pred => "pred",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Record {
    pub k: usize,
    pub seq: GateSequence,
    pub f: f64,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub split: Option<Split>,
}

/// How a dataset was produced; enough to regenerate it bit-exactly.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneratorMeta {
    pub model: TwoQubitModel,
    pub k_values: Vec<usize>,
    pub n_per_k: usize,
    pub shots: Option<u64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitMeta {
    pub train_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetMeta {
    #[cfg_attr(feature = "serde", serde(default))]
    pub generator: Option<GeneratorMeta>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub split: Option<SplitMeta>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RbDataset {
    pub meta: DatasetMeta,
    pub records: Vec<Record>,
}

impl RbDataset {
    pub fn new(meta: DatasetMeta, records: Vec<Record>) -> Self {
        Self { meta, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records carrying `split`, in file order.
    pub fn split(&self, split: Split) -> Vec<&Record> {
        self.records.iter().filter(|r| r.split == Some(split)).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.records.iter().filter(|r| r.split == Some(split)).count()
    }

    /// Distinct depths, ascending.
    pub fn k_values(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.records.iter().map(|r| r.k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    /// Check depths, outcome range, gate indices and undo gates.
    pub fn validate(&self, group: &CliffordGroup) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            r.seq.validate()?;
            if r.seq.depth() != r.k {
                return Err(Error::InvalidArgument(format!(
                    "record {i}: k = {} but the sequence has {} gates",
                    r.k,
                    r.seq.depth()
                )));
            }
            if !(0.0..=1.0).contains(&r.f) {
                return Err(Error::InvalidArgument(format!(
                    "record {i}: outcome {} outside [0, 1]",
                    r.f
                )));
            }
            if !r.seq.is_rb(group) {
                return Err(Error::InvalidArgument(format!(
                    "record {i}: last gate is not the undo gate"
                )));
            }
        }
        Ok(())
    }

    /// Append every record of `other` as prediction data.
    pub fn attach_pred(&mut self, other: &RbDataset) {
        self.records.extend(other.records.iter().cloned().map(|mut r| {
            r.split = Some(Split::Pred);
            r
        }));
    }
}

/// Stratified split: for each `k`, `round(fraction * n_k)` records become
/// training data and the rest validation data. Records already marked as
/// prediction data are left alone.
pub fn split_dataset(ds: &RbDataset, train_fraction: f64, seed: u64) -> Result<RbDataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_k: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.records.iter().enumerate() {
        if r.split != Some(Split::Pred) {
            by_k.entry(r.k).or_default().push(i);
        }
    }
    let mut out = ds.clone();
    for (&k, idx) in &by_k {
        let n_train = (train_fraction * idx.len() as f64).round() as usize;
        let mut order = idx.clone();
        order.shuffle(&mut stream_rng(seed, &[k as u64]));
        for (pos, &i) in order.iter().enumerate() {
            out.records[i].split = Some(if pos < n_train { Split::Train } else { Split::Val });
        }
    }
    out.meta.split = Some(SplitMeta { train_fraction, seed });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy(ns: &[(usize, usize)]) -> RbDataset {
        let g = CliffordGroup::new();
        let mut rng = stream_rng(0, &[]);
        let mut records = Vec::new();
        for &(k, n) in ns {
            for _ in 0..n {
                records.push(Record {
                    k,
                    seq: g.sample_rb_sequence(k, &mut rng).unwrap(),
                    f: 1.0,
                    split: None,
                });
            }
        }
        RbDataset::new(DatasetMeta::default(), records)
    }

    #[test]
    fn sixty_percent_of_two_hundred() {
        let ds = split_dataset(&toy(&[(2, 200), (3, 200)]), 0.6, 5).unwrap();
        for k in [2, 3] {
            let train = ds
                .records
                .iter()
                .filter(|r| r.k == k && r.split == Some(Split::Train))
                .count();
            let val = ds
                .records
                .iter()
                .filter(|r| r.k == k && r.split == Some(Split::Val))
                .count();
            assert_eq!((train, val), (120, 80));
        }
    }

    #[test]
    fn half_of_two() {
        let ds = split_dataset(&toy(&[(4, 2)]), 0.5, 1).unwrap();
        assert_eq!(ds.count(Split::Train), 1);
        assert_eq!(ds.count(Split::Val), 1);
    }

    #[test]
    fn partition_and_pred() {
        let mut ds = split_dataset(&toy(&[(2, 7), (5, 3)]), 0.3, 9).unwrap();
        assert!(ds.records.iter().all(|r| r.split.is_some()));
        assert_eq!(ds.count(Split::Train) + ds.count(Split::Val), 10);
        ds.attach_pred(&toy(&[(6, 4)]));
        assert_eq!(ds.count(Split::Pred), 4);
        let resplit = split_dataset(&ds, 0.5, 2).unwrap();
        assert_eq!(resplit.count(Split::Pred), 4);
        assert_eq!(resplit.count(Split::Train) + resplit.count(Split::Val), 10);
    }

    #[test]
    fn fraction_out_of_range() {
        let ds = toy(&[(2, 3)]);
        for bad in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(split_dataset(&ds, bad, 0).is_err());
        }
    }

    #[test]
    fn validation_catches_bad_records() {
        let g = CliffordGroup::new();
        let mut ds = toy(&[(3, 2)]);
        assert!(ds.validate(&g).is_ok());
        ds.records[0].f = 1.5;
        assert!(ds.validate(&g).is_err());
        ds.records[0].f = 0.5;
        ds.records[1].seq = GateSequence::new(vec![1, 2]);
        assert!(ds.validate(&g).is_err());
    }
}
