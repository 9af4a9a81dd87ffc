//! BFGS with a strong-Wolfe line search.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent f64 methods exist only when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BfgsOptions {
    pub max_iters: usize,
    /// Stop once the gradient 2-norm drops below this.
    pub grad_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search_evals: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-9,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evals: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective at the start and after every iteration.
    pub trace: Vec<f64>,
    pub stop: StopReason,
}

struct Point {
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
}

struct Counted<F> {
    fg: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>> Counted<F> {
    fn eval(&mut self, x: &DVector<f64>) -> Result<Point> {
        self.evals += 1;
        let (f, g) = (self.fg)(x.as_slice())?;
        if g.len() != x.len() {
            return Err(Error::Shape {
                expected: x.len(),
                got: g.len(),
            });
        }
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "objective or gradient after {} evaluations",
                self.evals
            )));
        }
        Ok(Point {
            x: x.clone(),
            f,
            g: DVector::from_vec(g),
        })
    }
}

/// Minimise `fg(x) -> (f, grad f)` from `x0`.
pub fn bfgs_minimize<F>(fg: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut obj = Counted { fg, evals: 0 };
    let mut cur = obj.eval(&DVector::from_column_slice(x0))?;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut trace = vec![cur.f];
    let mut iterations = 0;
    let stop = loop {
        if cur.g.norm() < opts.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iterations >= opts.max_iters {
            break StopReason::MaxIterations;
        }
        let mut p = -(&h * &cur.g);
        if p.dot(&cur.g) >= 0.0 {
            // lost positive definiteness; restart from steepest descent
            h = DMatrix::identity(n, n);
            p = -cur.g.clone();
        }
        let alpha0 = if iterations == 0 {
            (1.0 / cur.g.amax()).min(1.0)
        } else {
            1.0
        };
        let next = match line_search(&mut obj, &cur, &p, alpha0, opts)? {
            Some(pt) => pt,
            None => break StopReason::LineSearchFailed,
        };
        let s = &next.x - &cur.x;
        let y = &next.g - &cur.g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            h += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        cur = next;
        iterations += 1;
        trace.push(cur.f);
    };
    Ok(BfgsResult {
        grad_norm: cur.g.norm(),
        x: cur.x.as_slice().to_vec(),
        f: cur.f,
        iterations,
        evaluations: obj.evals,
        trace,
        stop,
    })
}

fn wolfe(start: &Point, d0: f64, alpha: f64, pt: &Point, p: &DVector<f64>, opts: &BfgsOptions) -> bool {
    pt.f <= start.f + opts.c1 * alpha * d0 && pt.g.dot(p).abs() <= -opts.c2 * d0
}

/// Strong-Wolfe search along `p`. A secant step on the directional
/// derivative then tries to refine the accepted step; it is kept only if it
/// also satisfies the Wolfe conditions and lowers the objective, which makes
/// the search exact on quadratics.
fn line_search<F>(
    obj: &mut Counted<F>,
    start: &Point,
    p: &DVector<f64>,
    alpha0: f64,
    opts: &BfgsOptions,
) -> Result<Option<Point>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let d0 = start.g.dot(p);
    let Some((alpha, pt)) = wolfe_search(obj, start, p, d0, alpha0, opts)? else {
        return Ok(None);
    };
    let da = pt.g.dot(p);
    if da != d0 {
        let secant = alpha * d0 / (d0 - da);
        if secant.is_finite() && secant > 0.0 && (secant - alpha).abs() > 1e-12 * alpha {
            let trial = obj.eval(&(&start.x + p * secant))?;
            if trial.f < pt.f && wolfe(start, d0, secant, &trial, p, opts) {
                return Ok(Some(trial));
            }
        }
    }
    Ok(Some(pt))
}

fn wolfe_search<F>(
    obj: &mut Counted<F>,
    start: &Point,
    p: &DVector<f64>,
    d0: f64,
    alpha0: f64,
    opts: &BfgsOptions,
) -> Result<Option<(f64, Point)>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let at = |obj: &mut Counted<F>, a: f64| obj.eval(&(&start.x + p * a));
    let mut prev = (0.0, start.f, d0);
    let mut alpha = alpha0;
    for i in 0..opts.max_line_search_evals {
        let pt = at(obj, alpha)?;
        let d = pt.g.dot(p);
        if pt.f > start.f + opts.c1 * alpha * d0 || (i > 0 && pt.f >= prev.1) {
            return zoom(obj, start, p, d0, prev, (alpha, pt.f, d), opts);
        }
        if d.abs() <= -opts.c2 * d0 {
            return Ok(Some((alpha, pt)));
        }
        if d >= 0.0 {
            return zoom(obj, start, p, d0, (alpha, pt.f, d), prev, opts);
        }
        prev = (alpha, pt.f, d);
        alpha *= 2.0;
    }
    Ok(None)
}

/// Cubic interpolation minimiser on `[lo, hi]`, bisection when unsafe.
fn cubic_step(lo: (f64, f64, f64), hi: (f64, f64, f64)) -> f64 {
    let (a, fa, da) = lo;
    let (b, fb, db) = hi;
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let mid = 0.5 * (a + b);
    if !(disc >= 0.0) {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let step = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (right - left);
    if step.is_finite() && step > left + margin && step < right - margin {
        step
    } else {
        mid
    }
}

fn zoom<F>(
    obj: &mut Counted<F>,
    start: &Point,
    p: &DVector<f64>,
    d0: f64,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
    opts: &BfgsOptions,
) -> Result<Option<(f64, Point)>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    for _ in 0..opts.max_line_search_evals {
        if (hi.0 - lo.0).abs() <= 1e-16 * lo.0.abs().max(1.0) {
            break;
        }
        let alpha = cubic_step(lo, hi);
        let pt = obj.eval(&(&start.x + p * alpha))?;
        let d = pt.g.dot(p);
        if pt.f > start.f + opts.c1 * alpha * d0 || pt.f >= lo.1 {
            hi = (alpha, pt.f, d);
        } else {
            if d.abs() <= -opts.c2 * d0 {
                return Ok(Some((alpha, pt)));
            }
            if d * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (alpha, pt.f, d);
        }
    }
    Ok(None)
}
