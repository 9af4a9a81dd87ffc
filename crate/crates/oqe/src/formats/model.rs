//! Model files: memory dimension plus the system-memory unitary as row-major
//! `[re, im]` pairs.
//!
//! ```text
//! {"format":"oqe-model/1","chi":1,"u":[[1.0,0.0],[0.0,0.0],[0.0,0.0],[1.0,0.0]], ...}
//! ```

use std::path::Path;

use oqe_core::linalg::{CMatrix, C64};
use oqe_core::oqe::OqeModel;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{read_json, write_json, Provenance};

pub const MODEL_FORMAT: &str = "oqe-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub chi: usize,
    pub u: Vec<[f64; 2]>,
    #[serde(flatten)]
    pub provenance: Provenance,
    /// Training loss of the fit that produced the model, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_loss: Option<f64>,
}

impl ModelFile {
    pub fn from_model(model: &OqeModel, provenance: Provenance, train_loss: Option<f64>) -> Self {
        let u = model.unitary();
        let d = model.dim();
        let entries = (0..d * d)
            .map(|n| {
                let z = u[(n / d, n % d)];
                [z.re, z.im]
            })
            .collect();
        Self {
            format: MODEL_FORMAT.into(),
            chi: model.chi(),
            u: entries,
            provenance,
            train_loss,
        }
    }

    /// Checks the entry count against `chi` and unitarity.
    pub fn to_model(&self) -> oqe_core::Result<OqeModel> {
        let d = 2 * self.chi;
        if self.chi == 0 || self.u.len() != d * d {
            return Err(oqe_core::Error::Shape {
                expected: d * d,
                got: self.u.len(),
            });
        }
        let u = CMatrix::from_fn(d, d, |r, c| {
            let [re, im] = self.u[r * d + c];
            C64::new(re, im)
        });
        OqeModel::new(self.chi, u)
    }
}

pub fn write_model(path: &Path, file: &ModelFile) -> Result<()> {
    write_json(path, file)
}

pub fn read_model(path: &Path) -> Result<(ModelFile, OqeModel)> {
    let file: ModelFile = read_json(path)?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Invalid {
            path: path.into(),
            msg: format!("unsupported format {:?}", file.format),
        });
    }
    let model = file.to_model().map_err(|e| Error::Invalid {
        path: path.into(),
        msg: match e {
            oqe_core::Error::Shape { expected, got } => {
                format!("chi = {} needs {expected} unitary entries, file has {got}", file.chi)
            }
            other => other.to_string(),
        },
    })?;
    Ok((file, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use oqe_core::linalg::random_unitary;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn prov() -> Provenance {
        Provenance {
            config_hash: "cafe".into(),
            seed: 1,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), chi in 1usize..5) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let model = OqeModel::new(chi, random_unitary(2 * chi, &mut rng)).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.json");
            write_model(&p, &ModelFile::from_model(&model, prov(), Some(0.5))).unwrap();
            let (file, back) = read_model(&p).unwrap();
            prop_assert_eq!(back, model);
            prop_assert_eq!(file.provenance, prov());
        }
    }

    #[test]
    fn rejects_wrong_sizes_and_non_unitary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let model = OqeModel::new(1, CMatrix::identity(2, 2)).unwrap();
        let mut f = ModelFile::from_model(&model, prov(), None);
        f.chi = 2;
        write_model(&p, &f).unwrap();
        let err = read_model(&p).unwrap_err().to_string();
        assert!(err.contains("chi = 2 needs 16"), "{err}");
        f.chi = 1;
        f.u[0] = [2.0, 0.0];
        write_model(&p, &f).unwrap();
        assert!(matches!(read_model(&p), Err(Error::Invalid { .. })));
    }

    #[test]
    fn layout_is_row_major() {
        let u = CMatrix::from_fn(2, 2, |r, c| {
            if r != c {
                C64::new(0.0, if r == 0 { 1.0 } else { -1.0 })
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let model = OqeModel::new(1, u).unwrap();
        let f = ModelFile::from_model(&model, prov(), None);
        assert_eq!(f.u, vec![[0.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, 0.0]]);
    }
}
