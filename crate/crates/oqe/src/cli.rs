//! Command-line driver.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use oqe_core::linalg::LogBase;
use oqe_core::nonmarkov::MiConstruction;

use crate::config::ExperimentConfig;
use crate::error::{exit, Error, Result};
use crate::exec::RayonExecutor;
use crate::pipeline::{self, PRED_DATA_FILE, TRAIN_DATA_FILE};

#[derive(Debug, Parser)]
#[command(
    name = "oqe",
    version,
    about = "Learn open-quantum-evolution models from randomized benchmarking data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides shared by every subcommand; each replaces the matching config
/// field before validation and hashing.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Experiment configuration (JSON). Defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "INT")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "INT")]
    pub chi_max: Option<usize>,
    #[arg(long, value_name = "INT")]
    pub restarts: Option<usize>,
    #[arg(long, value_name = "INT")]
    pub max_iters: Option<usize>,
    /// Steps between the evaluated step and the end of the process for OSEE.
    #[arg(long, value_name = "INT")]
    pub buffer: Option<usize>,
    /// Also compute the dense non-Markovianity at this length.
    #[arg(long, value_name = "INT")]
    pub dense_k: Option<usize>,
    #[arg(long, value_name = "BOOL", action = clap::ArgAction::Set)]
    pub fixed_duration: Option<bool>,
    /// Binomial shots per record; 0 keeps exact outcomes.
    #[arg(long, value_name = "INT")]
    pub shots: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConstructionArg {
    ModifiedTrace,
    GroundInsertion,
}

impl From<ConstructionArg> for MiConstruction {
    fn from(c: ConstructionArg) -> Self {
        match c {
            ConstructionArg::ModifiedTrace => MiConstruction::ModifiedTrace,
            ConstructionArg::GroundInsertion => MiConstruction::GroundInsertion,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaseArg {
    Bits,
    Nats,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the train/validation and prediction datasets.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit models for chi = 1..=chi_max.
    Train {
        #[command(flatten)]
        common: Common,
        /// Train/validation dataset [default: OUT/train.jsonl].
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        /// Prediction dataset [default: OUT/pred.jsonl when present].
        #[arg(long, value_name = "PATH")]
        pred: Option<PathBuf>,
    },
    /// Compare a model's predictions with a dataset.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
    },
    /// Memory and non-Markovianity measures of a model.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Steps to evaluate, e.g. `1,2,10`.
        #[arg(long, value_name = "LIST", value_delimiter = ',')]
        steps: Option<Vec<usize>>,
        /// Mutual-information pairs, e.g. `5:4,10:5`.
        #[arg(long, value_name = "LIST", value_delimiter = ',', value_parser = parse_pair)]
        pairs: Option<Vec<[usize; 2]>>,
        #[arg(long, value_name = "INT")]
        mi_length: Option<usize>,
        #[arg(long, value_enum)]
        construction: Option<ConstructionArg>,
        #[arg(long, value_enum)]
        log_base: Option<BaseArg>,
        /// Write PPT and MPDO tensors of this length.
        #[arg(long, value_name = "INT")]
        dump_pt: Option<usize>,
    },
}

fn parse_pair(s: &str) -> std::result::Result<[usize; 2], String> {
    let (x, y) = s.split_once(':').ok_or_else(|| format!("expected X:Y, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok([p(x)?, p(y)?])
}

impl Common {
    /// Load the config (or defaults) and apply the overrides.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.chi_max {
            cfg.train.chi_max = v;
        }
        if let Some(v) = self.restarts {
            cfg.train.restarts = v;
        }
        if let Some(v) = self.max_iters {
            cfg.train.max_iters = v;
        }
        if let Some(v) = self.buffer {
            cfg.analysis.buffer = v;
        }
        if let Some(v) = self.dense_k {
            cfg.analysis.dense_k = Some(v);
        }
        if let Some(v) = self.fixed_duration {
            cfg.model.fixed_duration = v;
        }
        if let Some(v) = self.shots {
            cfg.data.sample = v > 0;
            if v > 0 {
                cfg.data.shots = v;
            }
        }
        Ok(cfg)
    }
}

fn existing(path: &Path) -> Option<PathBuf> {
    path.exists().then(|| path.to_path_buf())
}

/// Run a parsed command; messages go to stdout.
pub fn run(cli: Cli) -> Result<()> {
    let exec = RayonExecutor::from_env()?;
    match cli.command {
        Command::Generate { common } => {
            let cfg = common.resolve()?;
            cfg.validate()?;
            let s = pipeline::generate(&cfg, &cfg.out, &exec)?;
            println!(
                "wrote {} ({} train, {} val) and {} ({} pred)",
                s.train_path.display(),
                s.train_records,
                s.val_records,
                s.pred_path.display(),
                s.pred_records
            );
        }
        Command::Train { common, data, pred } => {
            let cfg = common.resolve()?;
            cfg.validate()?;
            let data = data.unwrap_or_else(|| cfg.out.join(TRAIN_DATA_FILE));
            let pred = pred.or_else(|| existing(&cfg.out.join(PRED_DATA_FILE)));
            let ds = pipeline::load_training_data(&data, pred.as_deref())?;
            for r in pipeline::train_models(&cfg, &ds, &cfg.out, &exec)? {
                println!(
                    "chi={} train={:.6e} val={} pred={}",
                    r.chi,
                    r.train_loss,
                    fmt_loss(r.val_loss),
                    fmt_loss(r.pred_loss)
                );
            }
        }
        Command::Predict { common, model, data } => {
            let cfg = common.resolve()?;
            let (report, rows) = pipeline::predict(&model, &data, &cfg.out, &exec)?;
            if rows.is_empty() {
                eprintln!("warning: {} holds no records", data.display());
            }
            println!(
                "chi={} records={} loss={}",
                report.chi,
                report.records,
                fmt_loss(report.all_loss)
            );
        }
        Command::Analyze {
            common,
            model,
            steps,
            pairs,
            mi_length,
            construction,
            log_base,
            dump_pt,
        } => {
            let mut cfg = common.resolve()?;
            let a = &mut cfg.analysis;
            if let Some(v) = steps {
                a.steps = v;
            }
            if let Some(v) = pairs {
                a.pairs = v;
            }
            if mi_length.is_some() {
                a.mi_length = mi_length;
            }
            if let Some(c) = construction {
                a.construction = c.into();
            }
            if let Some(b) = log_base {
                a.log_base = match b {
                    BaseArg::Bits => LogBase::Bits,
                    BaseArg::Nats => LogBase::Nats,
                };
            }
            if dump_pt == Some(0) {
                return Err(Error::Usage("--dump-pt needs a length >= 1".into()));
            }
            let m = pipeline::analyze(&cfg, &model, &cfg.out, dump_pt, &exec)?;
            let r = &m.report;
            println!(
                "chi={} steps={} pairs={} -> {}",
                r.chi,
                r.steps.len(),
                r.mutual_information.len(),
                cfg.out.join("measures.json").display()
            );
        }
    }
    Ok(())
}

fn fmt_loss(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6e}"))
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
