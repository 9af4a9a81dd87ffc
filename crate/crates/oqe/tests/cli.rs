use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use oqe::formats::csv_out::read_csv;
use oqe::formats::model::{read_model, write_model, ModelFile};
use oqe::formats::Provenance;
use oqe_core::linalg::random_unitary;
use oqe_core::oqe::OqeModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

const SMALL: &str = r#"{
  "seed": 3,
  "model": {"fixed_duration": true},
  "data": {"train_k": [2, 6], "pred_k": [2, 8], "n_per_k": 5},
  "train": {"chi_max": 2, "restarts": 2, "max_iters": 15, "init_candidates": 2},
  "analysis": {"steps": [1, 2, 3], "pairs": [[3, 2], [4, 2]], "buffer": 2}
}"#;

fn oqe(args: &[&str], workers: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oqe"))
        .args(args)
        .env("OQE_WORKERS", workers.to_string())
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = oqe(args, 2);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sorted_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn pipeline(cfg: &Path, out: &Path, workers: usize) {
    for cmd in ["generate", "train"] {
        let o = oqe(&[cmd, "--config", s(cfg), "--out", s(out)], workers);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let model = out.join("model_chi2.json");
    let o = oqe(
        &[
            "predict",
            "--model",
            s(&model),
            "--data",
            s(&out.join("pred.jsonl")),
            "--out",
            s(out),
        ],
        workers,
    );
    assert!(o.status.success());
    let o = oqe(
        &[
            "analyze",
            "--config",
            s(cfg),
            "--model",
            s(&model),
            "--out",
            s(out),
            "--dump-pt",
            "2",
        ],
        workers,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn full_pipeline_is_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    pipeline(&cfg, &a, 1);
    pipeline(&cfg, &b, 3);
    let fa = sorted_files(&a);
    let fb = sorted_files(&b);
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    for want in [
        "train.jsonl",
        "pred.jsonl",
        "model_chi1.json",
        "model_chi2.json",
        "report_chi2.json",
        "loss_chi2.csv",
        "summary.csv",
        "predict.csv",
        "predict.json",
        "measures.json",
        "measures.csv",
        "mutual_information.csv",
        "ppt.json",
        "mpdo.json",
    ] {
        assert!(names.contains(&want), "missing {want}");
    }
    assert_eq!(fa, fb);
}

#[test]
fn artifacts_carry_hash_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    pipeline(&cfg, &out, 2);
    let hash = oqe::config::ExperimentConfig::load(&cfg).unwrap().hash();
    for (name, bytes) in sorted_files(&out) {
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains(&hash), "{name} lacks the config hash");
        assert!(text.contains("seed"), "{name} lacks the seed");
    }
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_hash={hash} seed=3\n")));
}

#[test]
fn generate_prints_counts_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    let o = run_ok(&["generate", "--config", s(&cfg), "--out", s(&out)]);
    let first = sorted_files(&out);
    let text = String::from_utf8(o.stdout).unwrap();
    // 5 depths x 5 records, 3 of 5 train per depth; 7 x 5 pred records
    assert!(text.contains("(15 train, 10 val)"), "{text}");
    assert!(text.contains("(35 pred)"), "{text}");
    run_ok(&["generate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(first, sorted_files(&out));
    let o = run_ok(&["generate", "--config", s(&cfg), "--out", s(&out), "--seed", "4"]);
    assert!(o.status.success());
    assert_ne!(first, sorted_files(&out));
}

#[test]
fn chi_max_one_writes_a_single_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    run_ok(&["generate", "--config", s(&cfg), "--out", s(&out)]);
    run_ok(&["train", "--config", s(&cfg), "--out", s(&out), "--chi-max", "1"]);
    let models: Vec<_> = sorted_files(&out)
        .into_iter()
        .filter(|(n, _)| n.starts_with("model_"))
        .collect();
    assert_eq!(models.len(), 1);
    assert_eq!(models[0].0, "model_chi1.json");
}

#[derive(Deserialize)]
struct MeasureRow {
    j: usize,
    memory_complexity: f64,
    osee: f64,
}

#[derive(Deserialize)]
struct MiRow {
    mutual_information: f64,
}

#[test]
fn markovian_model_gives_zero_measures() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = OqeModel::new(1, random_unitary(2, &mut rng)).unwrap();
    let path = dir.path().join("m.json");
    let prov = Provenance {
        config_hash: "0".repeat(64),
        seed: 0,
    };
    write_model(&path, &ModelFile::from_model(&model, prov, None)).unwrap();
    let out = dir.path().join("o");
    run_ok(&[
        "analyze",
        "--model",
        s(&path),
        "--out",
        s(&out),
        "--steps",
        "1,5,40",
        "--pairs",
        "2:1,10:5,40:39",
        "--dense-k",
        "3",
    ]);
    let rows: Vec<MeasureRow> = read_csv(&out.join("measures.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.j).collect::<Vec<_>>(), [1, 5, 40]);
    assert!(rows
        .iter()
        .all(|r| r.memory_complexity.abs() < 1e-10 && r.osee.abs() < 1e-10));
    let mi: Vec<MiRow> = read_csv(&out.join("mutual_information.csv")).unwrap();
    assert_eq!(mi.len(), 3);
    assert!(mi.iter().all(|r| r.mutual_information.abs() < 1e-10));
}

#[test]
fn predict_handles_empty_data_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let model = OqeModel::new(1, oqe_core::linalg::identity(2)).unwrap();
    let path = dir.path().join("m.json");
    let prov = Provenance {
        config_hash: "0".repeat(64),
        seed: 0,
    };
    write_model(&path, &ModelFile::from_model(&model, prov, None)).unwrap();
    let data = dir.path().join("empty.jsonl");
    std::fs::write(&data, "").unwrap();
    let out = dir.path().join("o");
    let o = run_ok(&["predict", "--model", s(&path), "--data", s(&data), "--out", s(&out)]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let table = std::fs::read_to_string(out.join("predict.csv")).unwrap();
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // usage
    assert_eq!(oqe(&["frobnicate"], 1).status.code(), Some(1));
    assert_eq!(oqe(&["generate", "--chi-max", "-2"], 1).status.code(), Some(1));
    assert_eq!(oqe(&["--help"], 1).status.code(), Some(0));
    let bad_range = write_config(d, r#"{"data": {"train_k": [1, 40]}}"#);
    let o = oqe(&["generate", "--config", s(&bad_range), "--out", s(d)], 1);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("data.train_k"));
    let unknown = write_config(d, "{\n\"seed\": 1,\n\"sede\": 2\n}");
    let o = oqe(&["generate", "--config", s(&unknown)], 1);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":3:"));
    let o = oqe(&["analyze", "--model", "x.json", "--pairs", "2:3"], 1);
    assert_eq!(o.status.code(), Some(1));
    // bad worker count
    let o = Command::new(env!("CARGO_BIN_EXE_oqe"))
        .args(["generate", "--out", s(d)])
        .env("OQE_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));

    // data
    let missing = d.join("nope.jsonl");
    let o = oqe(&["train", "--data", s(&missing), "--out", s(d)], 1);
    assert_eq!(o.status.code(), Some(2));
    let garbage = d.join("garbage.jsonl");
    std::fs::write(&garbage, "{\"k\": 2}\n").unwrap();
    assert_eq!(
        oqe(&["train", "--data", s(&garbage), "--out", s(d)], 1).status.code(),
        Some(2)
    );
    let not_unitary = d.join("bad_model.json");
    std::fs::write(
        &not_unitary,
        r#"{"format": "oqe-model/1", "chi": 1, "u": [[2,0],[0,0],[0,0],[1,0]], "config_hash": "x", "seed": 0}"#,
    )
    .unwrap();
    assert_eq!(
        oqe(&["analyze", "--model", s(&not_unitary), "--out", s(d)], 1)
            .status
            .code(),
        Some(2)
    );
    let wrong_size = d.join("short_model.json");
    std::fs::write(
        &wrong_size,
        r#"{"format": "oqe-model/1", "chi": 2, "u": [[1,0],[0,0],[0,0],[1,0]], "config_hash": "x", "seed": 0}"#,
    )
    .unwrap();
    let o = oqe(&["predict", "--model", s(&wrong_size), "--data", s(&garbage)], 1);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("chi = 2"));
}

#[test]
fn trained_model_round_trips_through_its_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("o");
    run_ok(&["generate", "--config", s(&cfg), "--out", s(&out)]);
    run_ok(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--chi-max",
        "2",
        "--restarts",
        "1",
    ]);
    let (file, model) = read_model(&out.join("model_chi2.json")).unwrap();
    assert_eq!(model.chi(), 2);
    assert_eq!(file.provenance.seed, 3);
    assert_eq!(file.u.len(), 16);
}
