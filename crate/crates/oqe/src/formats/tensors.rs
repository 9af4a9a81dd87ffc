//! JSON dumps of process tensors: shapes plus row-major `[re, im]` entries.

use std::path::Path;

use oqe_core::linalg::C64;
use oqe_core::pt::{ProcessTensor, PurifiedProcessTensor};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formats::{write_json, Provenance};

pub const TENSOR_FORMAT: &str = "oqe-tensors/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorDump {
    pub format: String,
    /// `"ppt"` or `"mpdo"`.
    pub kind: String,
    pub steps: usize,
    pub chi: usize,
    /// Index order of every tensor, slowest first.
    pub index_order: String,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub tensors: Vec<TensorEntry>,
}

fn pairs(data: &[C64]) -> Vec<[f64; 2]> {
    data.iter().map(|z| [z.re, z.im]).collect()
}

pub fn ppt_dump(ppt: &PurifiedProcessTensor, provenance: Provenance) -> oqe_core::Result<TensorDump> {
    let mut tensors = Vec::new();
    for j in 0..=ppt.steps() {
        let s = ppt.site(j)?;
        tensors.push(TensorEntry {
            name: format!("site{j}"),
            shape: vec![s.left, s.phys, s.right],
            data: pairs(&s.data),
        });
    }
    Ok(TensorDump {
        format: TENSOR_FORMAT.into(),
        kind: "ppt".into(),
        steps: ppt.steps(),
        chi: ppt.chi(),
        index_order: "[left_bond][phys][right_bond]; site0 phys = o0, bulk phys = 2*i + o".into(),
        provenance,
        tensors,
    })
}

pub fn mpdo_dump(pt: &ProcessTensor, chi: usize, provenance: Provenance) -> TensorDump {
    let tensors = pt
        .sites()
        .iter()
        .enumerate()
        .map(|(j, s)| TensorEntry {
            name: format!("site{j}"),
            shape: s.shape().to_vec(),
            data: pairs(&s.data),
        })
        .collect();
    TensorDump {
        format: TENSOR_FORMAT.into(),
        kind: "mpdo".into(),
        steps: pt.steps(),
        chi,
        index_order: "[left_bond][ket_phys][bra_phys][right_bond]; bonds pair (ket, bra) as ket*chi + bra".into(),
        provenance,
        tensors,
    }
}

pub fn write_dump(path: &Path, dump: &TensorDump) -> Result<()> {
    write_json(path, dump)
}
