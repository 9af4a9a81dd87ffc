//! Restarted BFGS fits of the system-memory unitary, and the sweep over
//! memory dimensions.
//!
//! Each restart screens `init_candidates` random starting points on the
//! shortest training sequences (depth `<= warmup_depths[0]`), keeps the best,
//! and then refits on growing depth limits before the final fit on the whole
//! training split. Short sequences have a much simpler landscape, and the
//! deeper stages start inside the right basin. With `init_candidates = 1`
//! and no warm-up depths this is a plain random-start fit.

use alloc::vec::Vec;

use crate::clifford::CliffordGroup;
use crate::dataset::{RbDataset, Record, Split};
use crate::error::{Error, Result};
use crate::exec::{derive_seed, stream_rng, Executor};
use crate::learn::bfgs::{bfgs_minimize, BfgsOptions, StopReason};
use crate::learn::mesh::UnitaryParams;
use crate::learn::objective::Objective;
use crate::oqe::OqeModel;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub restarts: usize,
    pub seed: u64,
    pub bfgs: BfgsOptions,
    /// Random starting points screened per restart.
    pub init_candidates: usize,
    /// Depth limits of the warm-up stages, ascending.
    pub warmup_depths: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            seed: 0,
            bfgs: BfgsOptions::default(),
            init_candidates: 8,
            warmup_depths: alloc::vec![3, 6, 12, 24],
        }
    }
}

impl TrainConfig {
    /// Single random start per restart, fit directly on the full split.
    pub fn plain(restarts: usize, seed: u64) -> Self {
        Self {
            restarts,
            seed,
            init_candidates: 1,
            warmup_depths: Vec::new(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RestartReport {
    pub restart: usize,
    pub seed: u64,
    pub train_loss: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Loss after every BFGS iteration of the kept candidate, all stages.
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub chi: usize,
    pub seed: u64,
    pub best_restart: usize,
    pub params: UnitaryParams,
    pub model: OqeModel,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub pred_loss: Option<f64>,
    pub restarts: Vec<RestartReport>,
}

struct Stage {
    objective: Objective,
}

fn stages(group: &CliffordGroup, train: &[&Record], chi: usize, depths: &[usize]) -> Result<Vec<Stage>> {
    let mut out = Vec::new();
    let mut last_len = 0;
    for &limit in depths {
        let subset: Vec<&Record> = train.iter().copied().filter(|r| r.k <= limit).collect();
        if subset.is_empty() || subset.len() == last_len || subset.len() == train.len() {
            continue;
        }
        last_len = subset.len();
        out.push(Stage {
            objective: Objective::new(group, &subset, chi)?,
        });
    }
    out.push(Stage {
        objective: Objective::new(group, train, chi)?,
    });
    Ok(out)
}

fn fit<E: Executor>(
    objective: &Objective,
    start: &[f64],
    chi: usize,
    opts: &BfgsOptions,
    exec: &E,
) -> Result<crate::learn::bfgs::BfgsResult> {
    let dim = 2 * chi;
    bfgs_minimize(
        |x| objective.loss_and_gradient(&UnitaryParams::new(dim, x.to_vec())?, exec),
        start,
        opts,
    )
}

fn run_restart<E: Executor>(
    stages: &[Stage],
    chi: usize,
    restart: usize,
    config: &TrainConfig,
    exec: &E,
) -> Result<(UnitaryParams, RestartReport)> {
    let seed = derive_seed(config.seed, &[chi as u64, restart as u64]);
    let candidates = config.init_candidates.max(1);
    let first = &stages[0];
    let mut best: Option<crate::learn::bfgs::BfgsResult> = None;
    for c in 0..candidates {
        let init = UnitaryParams::random(2 * chi, &mut stream_rng(seed, &[c as u64]));
        let res = fit(&first.objective, init.angles(), chi, &config.bfgs, exec)?;
        if best.as_ref().is_none_or(|b| res.f < b.f) {
            best = Some(res);
        }
    }
    let mut res = best.expect("at least one candidate");
    let mut curve = res.trace.clone();
    let mut iterations = res.iterations;
    for stage in &stages[1..] {
        res = fit(&stage.objective, &res.x, chi, &config.bfgs, exec)?;
        curve.extend_from_slice(&res.trace);
        iterations += res.iterations;
    }
    let params = UnitaryParams::new(2 * chi, res.x.clone())?;
    Ok((
        params,
        RestartReport {
            restart,
            seed,
            train_loss: res.f,
            iterations,
            stop: res.stop,
            loss_curve: curve,
        },
    ))
}

/// Fit a memory-dimension-`chi` model to the training split of `ds`.
pub fn train<E: Executor>(ds: &RbDataset, chi: usize, config: &TrainConfig, exec: &E) -> Result<TrainReport> {
    if chi == 0 {
        return Err(Error::InvalidArgument("memory dimension must be >= 1".into()));
    }
    if config.restarts == 0 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }
    let group = CliffordGroup::new();
    let train_records = ds.split(Split::Train);
    if train_records.is_empty() {
        return Err(Error::Empty("dataset has no training records"));
    }
    let stages = stages(&group, &train_records, chi, &config.warmup_depths)?;
    let runs = exec
        .map(config.restarts, |r| run_restart(&stages, chi, r, config, exec))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let (best_restart, _) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.train_loss.total_cmp(&b.1 .1.train_loss))
        .expect("restarts >= 1");
    let params = runs[best_restart].0.clone();
    let model = OqeModel::new(chi, params.to_unitary())?;
    let split_loss = |split: Split| -> Result<Option<f64>> {
        if ds.count(split) == 0 {
            return Ok(None);
        }
        let obj = Objective::for_split(&group, ds, split, chi)?;
        Ok(Some(obj.loss_unitary(model.unitary(), exec)?))
    };
    let val_loss = split_loss(Split::Val)?;
    let pred_loss = split_loss(Split::Pred)?;
    let restarts: Vec<RestartReport> = runs.into_iter().map(|(_, r)| r).collect();
    Ok(TrainReport {
        chi,
        seed: config.seed,
        best_restart,
        train_loss: restarts[best_restart].train_loss,
        params,
        model,
        val_loss,
        pred_loss,
        restarts,
    })
}

/// Independent fits for `chi = 1..=chi_max`.
pub fn chi_ramp<E: Executor>(
    ds: &RbDataset,
    chi_max: usize,
    config: &TrainConfig,
    exec: &E,
) -> Result<Vec<TrainReport>> {
    if chi_max == 0 {
        return Err(Error::InvalidArgument("chi_max must be >= 1".into()));
    }
    (1..=chi_max).map(|chi| train(ds, chi, config, exec)).collect()
}
