//! The four experiment stages. Each reads its inputs from files and writes
//! its artifacts atomically into an output directory.

use std::path::{Path, PathBuf};

use oqe_core::analysis::{overlay_curve, sweep_rows};
use oqe_core::clifford::CliffordGroup;
use oqe_core::dataset::{split_dataset, DatasetMeta, RbDataset, Record, Split};
use oqe_core::exec::Executor;
use oqe_core::learn::{train, Objective, RestartReport, TrainConfig, TrainReport};
use oqe_core::nonmarkov::{measure_report, mutual_information, MeasureReport, MeasureRequest, MiEntry};
use oqe_core::oqe::OqeModel;
use oqe_core::pt::{build_ppt, build_pt};
use oqe_core::sim::{generate_dataset, Simulator};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::formats::csv_out::write_csv;
use crate::formats::dataset::{read_dataset, write_dataset};
use crate::formats::model::{read_model, write_model, ModelFile};
use crate::formats::tensors::{mpdo_dump, ppt_dump, write_dump};
use crate::formats::{write_json, Provenance};

pub const TRAIN_DATA_FILE: &str = "train.jsonl";
pub const PRED_DATA_FILE: &str = "pred.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";

pub fn model_file(chi: usize) -> String {
    format!("model_chi{chi}.json")
}

pub fn report_file(chi: usize) -> String {
    format!("report_chi{chi}.json")
}

pub fn loss_curve_file(chi: usize) -> String {
    format!("loss_chi{chi}.csv")
}

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerateSummary {
    pub train_path: PathBuf,
    pub pred_path: PathBuf,
    pub train_records: usize,
    pub val_records: usize,
    pub pred_records: usize,
}

/// Simulate the train/validation and prediction datasets.
pub fn generate<E: Executor>(cfg: &ExperimentConfig, out: &Path, exec: &E) -> Result<GenerateSummary> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let sim = Simulator::new(cfg.model)?;
    let shots = cfg.data.shots();
    let raw = generate_dataset(
        &sim,
        &cfg.train_depths(),
        cfg.data.n_per_k,
        shots,
        seeds.train_data,
        exec,
    )?;
    let train_ds = split_dataset(&raw, cfg.data.train_fraction, seeds.split)?;
    let mut pred_ds = generate_dataset(&sim, &cfg.pred_depths(), cfg.data.n_per_k, shots, seeds.pred_data, exec)?;
    for r in &mut pred_ds.records {
        r.split = Some(Split::Pred);
    }
    let prov = provenance(cfg);
    let train_path = out.join(TRAIN_DATA_FILE);
    let pred_path = out.join(PRED_DATA_FILE);
    write_dataset(&train_path, &train_ds, &prov)?;
    write_dataset(&pred_path, &pred_ds, &prov)?;
    Ok(GenerateSummary {
        train_path,
        pred_path,
        train_records: train_ds.count(Split::Train),
        val_records: train_ds.count(Split::Val),
        pred_records: pred_ds.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReportFile {
    pub format: String,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub chi: usize,
    pub best_restart: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub pred_loss: Option<f64>,
    pub train_records: usize,
    pub val_records: usize,
    pub pred_records: usize,
    pub config: TrainConfig,
    /// Mesh angles of the best fit.
    pub params: Vec<f64>,
    pub restarts: Vec<RestartReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub chi: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub pred_loss: Option<f64>,
    pub best_restart: usize,
    pub j_mhz: Option<f64>,
    pub delta_h_mhz: Option<f64>,
    pub gamma_eff_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LossRow {
    restart: usize,
    iteration: usize,
    loss: f64,
}

/// Load the train/validation dataset and, if given, attach the prediction
/// dataset.
pub fn load_training_data(train_path: &Path, pred_path: Option<&Path>) -> Result<RbDataset> {
    let (_, mut ds) = read_dataset(train_path)?;
    if ds.count(Split::Train) == 0 {
        return Err(Error::Invalid {
            path: train_path.into(),
            msg: "no records are marked as training data".into(),
        });
    }
    if let Some(p) = pred_path {
        let (_, pred) = read_dataset(p)?;
        ds.attach_pred(&pred);
    }
    Ok(ds)
}

/// Fit models for `chi = 1..=chi_max` and write one model, one report and
/// one loss curve per `chi`, plus a summary table.
pub fn train_models<E: Executor>(
    cfg: &ExperimentConfig,
    ds: &RbDataset,
    out: &Path,
    exec: &E,
) -> Result<Vec<TrainReport>> {
    cfg.validate()?;
    let prov = provenance(cfg);
    let train_cfg = cfg.train_config();
    let mut reports = Vec::new();
    for chi in 1..=cfg.train.chi_max {
        let report = train(ds, chi, &train_cfg, exec)?;
        let model = ModelFile::from_model(&report.model, prov.clone(), Some(report.train_loss));
        write_model(&out.join(model_file(chi)), &model)?;
        let file = TrainReportFile {
            format: "oqe-train-report/1".into(),
            provenance: prov.clone(),
            chi,
            best_restart: report.best_restart,
            train_loss: report.train_loss,
            val_loss: report.val_loss,
            pred_loss: report.pred_loss,
            train_records: ds.count(Split::Train),
            val_records: ds.count(Split::Val),
            pred_records: ds.count(Split::Pred),
            config: train_cfg.clone(),
            params: report.params.angles().to_vec(),
            restarts: report.restarts.clone(),
        };
        write_json(&out.join(report_file(chi)), &file)?;
        let curve: Vec<LossRow> = report
            .restarts
            .iter()
            .flat_map(|r| {
                r.loss_curve.iter().enumerate().map(move |(i, &loss)| LossRow {
                    restart: r.restart,
                    iteration: i,
                    loss,
                })
            })
            .collect();
        write_csv(&out.join(loss_curve_file(chi)), &prov, &curve)?;
        reports.push(report);
    }
    write_csv(&out.join(SUMMARY_FILE), &prov, &summary_rows(&ds.meta, &reports))?;
    Ok(reports)
}

fn summary_rows(meta: &DatasetMeta, reports: &[TrainReport]) -> Vec<SummaryRow> {
    let sweep = meta.generator.as_ref().map(|g| sweep_rows(&g.model, reports));
    reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let row = sweep.as_ref().map(|s| s[i]);
            SummaryRow {
                chi: r.chi,
                train_loss: r.train_loss,
                val_loss: r.val_loss,
                pred_loss: r.pred_loss,
                best_restart: r.best_restart,
                j_mhz: row.map(|s| s.j_mhz),
                delta_h_mhz: row.map(|s| s.delta_h_mhz),
                gamma_eff_mhz: row.and_then(|s| s.gamma_eff_mhz),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub split: String,
    pub k: usize,
    pub observed: f64,
    pub predicted: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub format: String,
    /// Provenance of the model file.
    #[serde(flatten)]
    pub provenance: Provenance,
    pub chi: usize,
    pub records: usize,
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
    pub pred_loss: Option<f64>,
    pub all_loss: Option<f64>,
}

fn split_label(s: Option<Split>) -> &'static str {
    s.map_or("none", Split::label)
}

/// Observed vs predicted curves and per-split losses of a model on a
/// dataset. Returns the report and the overlay table.
pub fn predict<E: Executor>(
    model_path: &Path,
    data_path: &Path,
    out: &Path,
    exec: &E,
) -> Result<(PredictReport, Vec<OverlayRow>)> {
    let (file, model) = read_model(model_path)?;
    let (_, ds) = read_dataset(data_path)?;
    let group = CliffordGroup::new();
    let mut rows = Vec::new();
    for split in [Some(Split::Train), Some(Split::Val), Some(Split::Pred), None] {
        let records: Vec<&Record> = ds.records.iter().filter(|r| r.split == split).collect();
        for p in overlay_curve(&model, &group, records) {
            rows.push(OverlayRow {
                split: split_label(split).into(),
                k: p.k,
                observed: p.observed,
                predicted: p.predicted,
                stderr: p.stderr,
            });
        }
    }
    let loss_of = |records: Vec<&Record>| -> Result<Option<f64>> {
        if records.is_empty() {
            return Ok(None);
        }
        let obj = Objective::new(&group, &records, model.chi())?;
        Ok(Some(obj.loss_unitary(model.unitary(), exec)?))
    };
    let report = PredictReport {
        format: "oqe-predict-report/1".into(),
        provenance: file.provenance.clone(),
        chi: model.chi(),
        records: ds.len(),
        train_loss: loss_of(ds.split(Split::Train))?,
        val_loss: loss_of(ds.split(Split::Val))?,
        pred_loss: loss_of(ds.split(Split::Pred))?,
        all_loss: loss_of(ds.records.iter().collect())?,
    };
    write_csv(&out.join("predict.csv"), &file.provenance, &rows)?;
    write_json(&out.join("predict.json"), &report)?;
    Ok((report, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    pub format: String,
    /// Hash and seed of the analysis configuration.
    #[serde(flatten)]
    pub provenance: Provenance,
    /// Hash and seed recorded in the model file.
    pub model_provenance: Provenance,
    pub report: MeasureReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MeasureRow {
    j: usize,
    memory_complexity: f64,
    osee: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MiRow {
    x: usize,
    y: usize,
    k: usize,
    mutual_information: f64,
}

/// Measures for one model, with the mutual-information pairs spread over
/// the executor.
pub fn measures<E: Executor>(
    model: &OqeModel,
    model_id: &str,
    req: &MeasureRequest,
    exec: &E,
) -> Result<MeasureReport> {
    let serial = MeasureRequest {
        pairs: Vec::new(),
        ..req.clone()
    };
    let mut report = measure_report(model, model_id, &serial)?;
    let entries = exec.map(req.pairs.len(), |n| {
        let (x, y) = req.pairs[n];
        let k = req.mi_length.unwrap_or(x);
        mutual_information(model, x, y, k, req.construction, req.base).map(|value| MiEntry { x, y, k, value })
    });
    report.mutual_information = entries.into_iter().collect::<oqe_core::Result<Vec<_>>>()?;
    Ok(report)
}

/// Memory and non-Markovianity measures of a model file; optionally dumps
/// the PPT and MPDO of length `dump_steps`.
pub fn analyze<E: Executor>(
    cfg: &ExperimentConfig,
    model_path: &Path,
    out: &Path,
    dump_steps: Option<usize>,
    exec: &E,
) -> Result<MeasureFile> {
    cfg.validate()?;
    let bytes = std::fs::read(model_path).map_err(|e| Error::io(model_path, e))?;
    let model_id = hex::encode(Sha256::digest(&bytes));
    let (file, model) = read_model(model_path)?;
    let prov = provenance(cfg);
    let report = measures(&model, &model_id, &cfg.analysis.request(), exec)?;
    let rows: Vec<MeasureRow> = report
        .steps
        .iter()
        .zip(report.memory_complexity.iter().zip(&report.osee))
        .map(|(&j, (&m, &n))| MeasureRow {
            j,
            memory_complexity: m,
            osee: n,
        })
        .collect();
    let mi: Vec<MiRow> = report
        .mutual_information
        .iter()
        .map(|e| MiRow {
            x: e.x,
            y: e.y,
            k: e.k,
            mutual_information: e.value,
        })
        .collect();
    write_csv(&out.join("measures.csv"), &prov, &rows)?;
    write_csv(&out.join("mutual_information.csv"), &prov, &mi)?;
    if let Some(k) = dump_steps {
        write_dump(&out.join("ppt.json"), &ppt_dump(&build_ppt(&model, k)?, prov.clone())?)?;
        write_dump(
            &out.join("mpdo.json"),
            &mpdo_dump(&build_pt(&model, k)?, model.chi(), prov.clone()),
        )?;
    }
    let measure_file = MeasureFile {
        format: "oqe-measures/1".into(),
        provenance: prov,
        model_provenance: file.provenance,
        report,
    };
    write_json(&out.join("measures.json"), &measure_file)?;
    Ok(measure_file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::RayonExecutor;
    use oqe_core::exec::Serial;

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.model = cfg.model.fixed(true);
        cfg.data.train_k = [2, 5];
        cfg.data.pred_k = [2, 7];
        cfg.data.n_per_k = 4;
        cfg.train.chi_max = 2;
        cfg.train.restarts = 2;
        cfg.train.max_iters = 20;
        cfg.train.init_candidates = 2;
        cfg.analysis.steps = vec![1, 2];
        cfg.analysis.pairs = vec![[3, 2]];
        cfg.analysis.buffer = 3;
        cfg
    }

    #[test]
    fn generate_counts_and_splits() {
        let dir = tempfile::tempdir().unwrap();
        let s = generate(&small_config(), dir.path(), &Serial).unwrap();
        assert_eq!(s.train_records + s.val_records, 16);
        assert_eq!(s.train_records, 4 * 2);
        assert_eq!(s.pred_records, 24);
        let (h, ds) = read_dataset(&s.pred_path).unwrap();
        assert!(ds.records.iter().all(|r| r.split == Some(Split::Pred)));
        assert_eq!(h.unwrap().provenance.config_hash, small_config().hash());
    }

    #[test]
    fn single_point_config_gives_one_record_each() {
        let mut cfg = small_config();
        cfg.data.train_k = [2, 2];
        cfg.data.pred_k = [2, 2];
        cfg.data.n_per_k = 1;
        let dir = tempfile::tempdir().unwrap();
        // a single record per depth cannot be split 0.6/0.4 into both parts
        let s = generate(&cfg, dir.path(), &Serial).unwrap();
        assert_eq!(s.train_records + s.val_records, 1);
        assert_eq!(s.pred_records, 1);
    }

    #[test]
    fn train_predict_analyze_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        let ex = RayonExecutor::new(2).unwrap();
        let s = generate(&cfg, dir.path(), &ex).unwrap();
        let ds = load_training_data(&s.train_path, Some(&s.pred_path)).unwrap();
        let reports = train_models(&cfg, &ds, dir.path(), &ex).unwrap();
        assert_eq!(reports.len(), 2);
        for chi in 1..=2 {
            assert!(dir.path().join(model_file(chi)).exists());
            assert!(dir.path().join(report_file(chi)).exists());
            assert!(dir.path().join(loss_curve_file(chi)).exists());
        }
        let summary: Vec<SummaryRow> = crate::formats::csv_out::read_csv(&dir.path().join(SUMMARY_FILE)).unwrap();
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[0].j_mhz, Some(cfg.model.j_mhz));

        let model_path = dir.path().join(model_file(2));
        let (report, rows) = predict(&model_path, &s.pred_path, dir.path(), &ex).unwrap();
        assert_eq!(rows.len(), 6);
        assert!((report.pred_loss.unwrap() - reports[1].pred_loss.unwrap()).abs() < 1e-15);

        let m = analyze(&cfg, &model_path, dir.path(), Some(2), &ex).unwrap();
        assert_eq!(m.report.memory_complexity.len(), 2);
        assert_eq!(m.report.mutual_information.len(), 1);
        assert!(dir.path().join("ppt.json").exists() && dir.path().join("mpdo.json").exists());
    }

    #[test]
    fn ground_truth_predicts_its_own_data() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        let s = generate(&cfg, dir.path(), &Serial).unwrap();
        let truth = cfg.model.as_oqe().unwrap();
        let model_path = dir.path().join("truth.json");
        write_model(&model_path, &ModelFile::from_model(&truth, provenance(&cfg), None)).unwrap();
        let (report, rows) = predict(&model_path, &s.train_path, dir.path(), &Serial).unwrap();
        assert!(report.all_loss.unwrap() < 1e-26);
        assert!(rows.iter().all(|r| (r.observed - r.predicted).abs() < 1e-12));
    }

    #[test]
    fn empty_dataset_gives_empty_table() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("empty.jsonl");
        std::fs::write(&data, "").unwrap();
        let model_path = dir.path().join("m.json");
        let m = OqeModel::new(1, oqe_core::linalg::identity(2)).unwrap();
        write_model(
            &model_path,
            &ModelFile::from_model(&m, provenance(&small_config()), None),
        )
        .unwrap();
        let (report, rows) = predict(&model_path, &data, dir.path(), &Serial).unwrap();
        assert!(rows.is_empty());
        assert_eq!(report.all_loss, None);
    }
}
