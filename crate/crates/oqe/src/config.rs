//! Experiment configuration: one JSON document for every stage.

use std::path::{Path, PathBuf};

use oqe_core::exec::derive_seed;
use oqe_core::learn::{BfgsOptions, TrainConfig};
use oqe_core::linalg::LogBase;
use oqe_core::nonmarkov::{MeasureRequest, MiConstruction, DEFAULT_BUFFER};
use oqe_core::sim::TwoQubitModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Allowed sequence depths.
pub const MIN_DEPTH: usize = 2;
pub const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Inclusive depth range of the train/validation dataset.
    pub train_k: [usize; 2],
    /// Inclusive depth range of the prediction dataset.
    pub pred_k: [usize; 2],
    pub n_per_k: usize,
    pub train_fraction: f64,
    /// Replace exact outcomes by binomial shot averages.
    pub sample: bool,
    pub shots: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train_k: [2, 40],
            pred_k: [2, 60],
            n_per_k: 200,
            train_fraction: 0.6,
            sample: false,
            shots: 1000,
        }
    }
}

impl DataConfig {
    pub fn shots(&self) -> Option<u64> {
        self.sample.then_some(self.shots)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub chi_max: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub init_candidates: usize,
    pub warmup_depths: Vec<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            chi_max: 6,
            restarts: t.restarts,
            max_iters: t.bfgs.max_iters,
            grad_tol: t.bfgs.grad_tol,
            init_candidates: t.init_candidates,
            warmup_depths: t.warmup_depths,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Steps `j` at which memory complexity and OSEE are evaluated.
    pub steps: Vec<usize>,
    /// `(x, y)` pairs for the mutual information.
    pub pairs: Vec<[usize; 2]>,
    /// Process length for the pairs; `null` uses `x`.
    pub mi_length: Option<usize>,
    pub buffer: usize,
    pub dense_k: Option<usize>,
    pub log_base: LogBase,
    pub construction: MiConstruction,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let mut pairs = Vec::new();
        for x in 2..=40 {
            for gap in [1, 2, 5] {
                if x > gap {
                    pairs.push([x, x - gap]);
                }
            }
        }
        Self {
            steps: (1..=40).collect(),
            pairs,
            mi_length: None,
            buffer: DEFAULT_BUFFER,
            dense_k: None,
            log_base: LogBase::Bits,
            construction: MiConstruction::ModifiedTrace,
        }
    }
}

impl AnalysisConfig {
    pub fn request(&self) -> MeasureRequest {
        MeasureRequest {
            steps: self.steps.clone(),
            pairs: self.pairs.iter().map(|p| (p[0], p[1])).collect(),
            mi_length: self.mi_length,
            buffer: self.buffer,
            dense_k: self.dense_k,
            base: self.log_base,
            construction: self.construction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: TwoQubitModel,
    pub data: DataConfig,
    pub train: TrainSection,
    pub analysis: AnalysisConfig,
    pub seed: u64,
    /// Output directory; not part of the config hash.
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: TwoQubitModel::default(),
            data: DataConfig::default(),
            train: TrainSection::default(),
            analysis: AnalysisConfig::default(),
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

/// Child seeds of the experiment seed, one per random stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub train_data: u64,
    pub pred_data: u64,
    pub split: u64,
    pub training: u64,
}

fn config_err(field: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        msg: msg.into(),
    }
}

fn check_range(field: &str, r: [usize; 2]) -> Result<()> {
    if r[0] > r[1] {
        return Err(config_err(field, format!("empty range [{}, {}]", r[0], r[1])));
    }
    if r[0] < MIN_DEPTH || r[1] > MAX_DEPTH {
        return Err(config_err(
            field,
            format!(
                "depths must lie in [{MIN_DEPTH}, {MAX_DEPTH}], got [{}, {}]",
                r[0], r[1]
            ),
        ));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.into(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| config_err("model", e.to_string()))?;
        check_range("data.train_k", self.data.train_k)?;
        check_range("data.pred_k", self.data.pred_k)?;
        if self.data.n_per_k == 0 {
            return Err(config_err("data.n_per_k", "must be >= 1"));
        }
        if !(self.data.train_fraction > 0.0 && self.data.train_fraction < 1.0) {
            return Err(config_err("data.train_fraction", "must lie strictly between 0 and 1"));
        }
        if self.data.sample && self.data.shots == 0 {
            return Err(config_err("data.shots", "must be >= 1 when sampling"));
        }
        let t = &self.train;
        if t.chi_max == 0 {
            return Err(config_err("train.chi_max", "must be >= 1"));
        }
        if t.restarts == 0 {
            return Err(config_err("train.restarts", "must be >= 1"));
        }
        if t.grad_tol.is_nan() || t.grad_tol < 0.0 {
            return Err(config_err("train.grad_tol", "must be >= 0"));
        }
        if t.init_candidates == 0 {
            return Err(config_err("train.init_candidates", "must be >= 1"));
        }
        let a = &self.analysis;
        if a.buffer == 0 {
            return Err(config_err("analysis.buffer", "must be >= 1"));
        }
        if a.steps.contains(&0) {
            return Err(config_err("analysis.steps", "steps start at 1"));
        }
        for p in &a.pairs {
            let k = a.mi_length.unwrap_or(p[0]);
            if !(1 <= p[1] && p[1] < p[0] && p[0] <= k) {
                return Err(config_err(
                    "analysis.pairs",
                    format!("need 1 <= y < x <= k, got [{}, {}] with k = {k}", p[0], p[1]),
                ));
            }
        }
        if let Some(k) = a.dense_k {
            if k == 0 || k > oqe_core::pt::DENSE_MAX_STEPS {
                return Err(config_err(
                    "analysis.dense_k",
                    format!("must lie in 1..={}", oqe_core::pt::DENSE_MAX_STEPS),
                ));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds {
            train_data: derive_seed(self.seed, &[1]),
            pred_data: derive_seed(self.seed, &[2]),
            split: derive_seed(self.seed, &[3]),
            training: derive_seed(self.seed, &[4]),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            restarts: self.train.restarts,
            seed: self.seeds().training,
            bfgs: BfgsOptions {
                max_iters: self.train.max_iters,
                grad_tol: self.train.grad_tol,
                ..BfgsOptions::default()
            },
            init_candidates: self.train.init_candidates,
            warmup_depths: self.train.warmup_depths.clone(),
        }
    }

    pub fn train_depths(&self) -> Vec<usize> {
        (self.data.train_k[0]..=self.data.train_k[1]).collect()
    }

    pub fn pred_depths(&self) -> Vec<usize> {
        (self.data.pred_k[0]..=self.data.pred_k[1]).collect()
    }
}
