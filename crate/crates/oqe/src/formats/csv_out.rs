//! CSV tables. The first line is a `#` comment carrying the provenance.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::formats::{write_atomic, Provenance};

pub fn write_csv<R: Serialize>(path: &Path, provenance: &Provenance, rows: &[R]) -> Result<()> {
    let invalid = |msg: String| Error::Invalid { path: path.into(), msg };
    let mut out = format!("# config_hash={} seed={}\n", provenance.config_hash, provenance.seed).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in rows {
            w.serialize(r).map_err(|e| invalid(e.to_string()))?;
        }
        w.flush().map_err(|e| invalid(e.to_string()))?;
    }
    write_atomic(path, &out)
}

/// Rows of a CSV written by [`write_csv`], skipping the comment line.
pub fn read_csv<R: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Invalid {
            path: path.into(),
            msg: e.to_string(),
        })?;
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                path: path.into(),
                line: i + 3,
                msg: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq, Serialize, serde::Deserialize)]
    struct Row {
        k: usize,
        f: f64,
        v: Option<f64>,
    }

    #[test]
    fn round_trip_with_header_comment() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let prov = Provenance {
            config_hash: "ab".into(),
            seed: 3,
        };
        let rows = vec![
            Row { k: 2, f: 0.1, v: None },
            Row {
                k: 3,
                f: 1e-20,
                v: Some(2.5),
            },
        ];
        write_csv(&p, &prov, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# config_hash=ab seed=3\nk,f,v\n"));
        assert_eq!(read_csv::<Row>(&p).unwrap(), rows);
    }
}
