//! JSON-lines datasets: one header object, then one record per line.
//!
//! ```text
//! {"header":{"format":"oqe-rb-dataset/1","config_hash":"..","seed":0,"records":2,"meta":{..}}}
//! {"k":2,"seq":[5,17],"f":0.9981,"split":"train"}
//! ```

use std::io::{BufRead, BufReader};
use std::path::Path;

use oqe_core::clifford::CliffordGroup;
use oqe_core::dataset::{DatasetMeta, RbDataset, Record};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{write_atomic, Provenance};

pub const DATASET_FORMAT: &str = "oqe-rb-dataset/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub records: usize,
    pub meta: DatasetMeta,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: DatasetHeader,
}

pub fn write_dataset(path: &Path, ds: &RbDataset, provenance: &Provenance) -> Result<()> {
    let invalid = |e: serde_json::Error| Error::Invalid {
        path: path.into(),
        msg: e.to_string(),
    };
    let header = HeaderLine {
        header: DatasetHeader {
            format: DATASET_FORMAT.into(),
            provenance: provenance.clone(),
            records: ds.len(),
            meta: ds.meta.clone(),
        },
    };
    let mut out = serde_json::to_vec(&header).map_err(invalid)?;
    out.push(b'\n');
    for r in &ds.records {
        serde_json::to_writer(&mut out, r).map_err(invalid)?;
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

/// Read a dataset and check every record against the Clifford group. The
/// header line is optional; blank lines are ignored.
pub fn read_dataset(path: &Path) -> Result<(Option<DatasetHeader>, RbDataset)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let parse_err = |msg: String| Error::Parse {
            path: path.into(),
            line: i + 1,
            msg,
        };
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.trim_start().starts_with("{\"header\"") {
            let h: HeaderLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            if h.header.format != DATASET_FORMAT {
                return Err(parse_err(format!("unsupported format {:?}", h.header.format)));
            }
            header = Some(h.header);
            continue;
        }
        let r: Record = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if !(0.0..=1.0).contains(&r.f) {
            return Err(parse_err(format!("outcome {} outside [0, 1]", r.f)));
        }
        records.push(r);
    }
    if let Some(h) = &header {
        if h.records != records.len() {
            return Err(Error::Invalid {
                path: path.into(),
                msg: format!("header announces {} records, file has {}", h.records, records.len()),
            });
        }
    }
    let meta = header.as_ref().map(|h| h.meta.clone()).unwrap_or_default();
    let ds = RbDataset::new(meta, records);
    ds.validate(&CliffordGroup::new()).map_err(|e| Error::Invalid {
        path: path.into(),
        msg: e.to_string(),
    })?;
    Ok((header, ds))
}
