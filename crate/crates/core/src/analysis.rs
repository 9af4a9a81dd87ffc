//! RB decay curves, exponential fits and loss tables over coupling sweeps.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods exist only when std is linked
use num_traits::Float;

use nalgebra::{Matrix3, Vector3};

use crate::clifford::CliffordGroup;
use crate::dataset::{RbDataset, Record, Split};
use crate::error::{Error, Result};
use crate::learn::TrainReport;
use crate::oqe::OqeModel;
use crate::sim::{gamma_eff, TwoQubitModel};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    pub k: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero for a single record.
    pub stderr: f64,
    pub n: usize,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn by_depth<'a>(records: impl IntoIterator<Item = &'a Record>) -> BTreeMap<usize, Vec<&'a Record>> {
    let mut groups: BTreeMap<usize, Vec<&Record>> = BTreeMap::new();
    for r in records {
        groups.entry(r.k).or_default().push(r);
    }
    groups
}

/// Mean survival per depth over the records of `split`.
pub fn average_curve(ds: &RbDataset, split: Split) -> Result<Vec<CurvePoint>> {
    let records = ds.split(split);
    if records.is_empty() {
        return Err(Error::Empty("split has no records"));
    }
    Ok(curve_of(records))
}

/// Mean survival per depth over arbitrary records.
pub fn curve_of<'a>(records: impl IntoIterator<Item = &'a Record>) -> Vec<CurvePoint> {
    by_depth(records)
        .into_iter()
        .map(|(k, rs)| {
            let f: Vec<f64> = rs.iter().map(|r| r.f).collect();
            let (mean, stderr) = mean_and_stderr(&f);
            CurvePoint {
                k,
                mean,
                stderr,
                n: f.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OverlayPoint {
    pub k: usize,
    pub observed: f64,
    pub predicted: f64,
    pub stderr: f64,
}

/// Observed and model-predicted mean survival per depth.
pub fn overlay_curve<'a>(
    model: &OqeModel,
    group: &CliffordGroup,
    records: impl IntoIterator<Item = &'a Record>,
) -> Vec<OverlayPoint> {
    by_depth(records)
        .into_iter()
        .map(|(k, rs)| {
            let f: Vec<f64> = rs.iter().map(|r| r.f).collect();
            let (observed, stderr) = mean_and_stderr(&f);
            let predicted = rs.iter().map(|r| model.predict(group, &r.seq)).sum::<f64>() / rs.len() as f64;
            OverlayPoint {
                k,
                observed,
                predicted,
                stderr,
            }
        })
        .collect()
}

/// Least-squares fit of `F_k = a p^k + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayFit {
    pub a: f64,
    pub p: f64,
    pub b: f64,
    pub residual_rms: f64,
    pub r_squared: f64,
    /// The curve was constant; `a = 0, p = 1, b = mean`.
    pub degenerate: bool,
    /// `0 < p <= 1`.
    pub physical: bool,
    pub iterations: usize,
    pub converged: bool,
}

const FIT_STEP_TOL: f64 = 1e-10;
const FIT_MAX_ITERS: usize = 500;

fn residuals(theta: &Vector3<f64>, pts: &[(f64, f64)]) -> Vec<f64> {
    pts.iter()
        .map(|&(k, f)| theta[0] * theta[1].powf(k) + theta[2] - f)
        .collect()
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn initial_guess(pts: &[(f64, f64)]) -> Vector3<f64> {
    let b0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut ratios: Vec<f64> = pts
        .windows(2)
        .filter_map(|w| {
            let (k0, f0) = w[0];
            let (k1, f1) = w[1];
            let (d0, d1) = (f0 - b0, f1 - b0);
            (d0 > 0.0 && d1 > 0.0 && k1 > k0).then(|| (d1 / d0).powf(1.0 / (k1 - k0)))
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let p0 = if ratios.is_empty() {
        0.9
    } else {
        ratios[ratios.len() / 2]
    };
    let (k_first, f_first) = pts[0];
    let a0 = (f_first - b0) / p0.powf(k_first);
    Vector3::new(a0, p0, b0)
}

/// Levenberg-Marquardt fit over `(k, F_k)` points (at least four).
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<DecayFit> {
    if points.len() < 4 {
        return Err(Error::InvalidArgument(alloc::format!(
            "need at least 4 points to fit, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::NonFinite("curve contains non-finite values".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pts.len() as f64;
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean) * (p.1 - mean)).sum();
    let spread = pts.iter().map(|p| (p.1 - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * mean.abs().max(1.0) {
        let r = residuals(&Vector3::new(0.0, 1.0, mean), &pts);
        return Ok(DecayFit {
            a: 0.0,
            p: 1.0,
            b: mean,
            residual_rms: (cost(&r) / n).sqrt(),
            r_squared: 1.0,
            degenerate: true,
            physical: true,
            iterations: 0,
            converged: true,
        });
    }

    let mut theta = initial_guess(&pts);
    let mut r = residuals(&theta, &pts);
    let mut c = cost(&r);
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < FIT_MAX_ITERS {
        iterations += 1;
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (&(k, _), &ri) in pts.iter().zip(&r) {
            let pk = theta[1].powf(k);
            let dp = if k == 0.0 {
                0.0
            } else {
                theta[0] * k * theta[1].powf(k - 1.0)
            };
            let row = Vector3::new(pk, dp, 1.0);
            jtj += row * row.transpose();
            jtr += row * ri;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut damped = jtj;
            for d in 0..3 {
                damped[(d, d)] += mu * jtj[(d, d)].max(1e-30);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                mu *= 10.0;
                continue;
            };
            let trial = theta + step;
            let rt = residuals(&trial, &pts);
            let ct = cost(&rt);
            if ct.is_finite() && ct <= c {
                let small = step.amax() < FIT_STEP_TOL;
                theta = trial;
                r = rt;
                c = ct;
                mu = (mu / 3.0).max(1e-15);
                accepted = true;
                converged = small;
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            // no downhill step at any damping: stationary to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - c / ss_tot } else { 1.0 };
    Ok(DecayFit {
        a: theta[0],
        p: theta[1],
        b: theta[2],
        residual_rms: (c / n).sqrt(),
        r_squared,
        degenerate: false,
        physical: theta[1] > 0.0 && theta[1] <= 1.0,
        iterations,
        converged,
    })
}

/// Fit of the mean curve of a split.
pub fn fit_curve(curve: &[CurvePoint]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.k as f64, p.mean)).collect();
    fit_exponential(&pts)
}

/// One row of a loss-versus-coupling table.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub j_mhz: f64,
    pub delta_h_mhz: f64,
    /// `None` at exact resonance.
    pub gamma_eff_mhz: Option<f64>,
    pub chi: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub pred_loss: Option<f64>,
}

/// Rows for one ground-truth model and its fits at several memory sizes.
pub fn sweep_rows(truth: &TwoQubitModel, reports: &[TrainReport]) -> Vec<SweepRow> {
    let dh = truth.delta_h();
    reports
        .iter()
        .map(|r| SweepRow {
            j_mhz: truth.j_mhz,
            delta_h_mhz: dh,
            gamma_eff_mhz: gamma_eff(truth.j_mhz, dh).ok(),
            chi: r.chi,
            train_loss: r.train_loss,
            val_loss: r.val_loss,
            pred_loss: r.pred_loss,
        })
        .collect()
}

/// Table over a coupling grid, in grid order.
pub fn sweep_report(points: &[(TwoQubitModel, Vec<TrainReport>)]) -> Vec<SweepRow> {
    points.iter().flat_map(|(m, rs)| sweep_rows(m, rs)).collect()
}
