//! Proximal quasi-Newton minimization of a smooth misfit over
//! `{f >= 0, ||D f||_1 <= tau}`.
//!
//! Each outer iteration builds the model `<g, s> + 1/2 s^T B s` with an
//! L-BFGS matrix `B`, minimizes it over the shifted feasible set with the
//! three-term primal-dual iteration, and backtracks along
//! `alpha -> prox(f + alpha s)` until the misfit decreases enough.

mod lbfgs;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::SmoothObjective;
use crate::proxtv::{pd_three_term, project_l1_ball_in_place, prox_nn_tv, PdConfig, PdState, ProxTvConfig, TvOperator};

pub use lbfgs::{LbfgsState, ShiftedInverse};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProxQnConfig {
    /// Outer iteration cap.
    pub i_max: usize,
    /// Primal-dual iterations per search direction.
    pub inner_t_max: usize,
    /// Backtracking factor in (0, 1).
    pub ls_shrink: f64,
    /// Sufficient-decrease constant.
    pub c_suff: f64,
    /// Smallest step before the linesearch gives up.
    pub alpha_min: f64,
    /// Stop when `||f - prox(f - grad)|| <= grad_tol`.
    pub grad_tol: f64,
    /// Number of curvature pairs kept.
    pub memory: usize,
    pub prox: ProxTvConfig,
}

impl Default for ProxQnConfig {
    fn default() -> Self {
        ProxQnConfig {
            i_max: 500,
            inner_t_max: 200,
            ls_shrink: 0.5,
            c_suff: 1e-4,
            alpha_min: 1e-8,
            grad_tol: 1e-6,
            memory: 10,
            prox: ProxTvConfig::default(),
        }
    }
}

impl ProxQnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return Err(Error::InvalidInput(format!("linesearch shrink must lie in (0, 1), got {}", self.ls_shrink)));
        }
        if !(self.c_suff > 0.0 && self.c_suff < 1.0) {
            return Err(Error::InvalidInput(format!("sufficient-decrease constant must lie in (0, 1), got {}", self.c_suff)));
        }
        if !(self.grad_tol > 0.0 && self.alpha_min > 0.0) || self.inner_t_max == 0 || self.prox.t_max == 0 {
            return Err(Error::InvalidInput("prox-QN tolerances and inner budgets must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the iteration history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub misfit: f64,
    pub alpha: f64,
    pub tv: f64,
    pub min_value: f64,
    pub grad_map_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,misfit,alpha,tv,min_value,grad_map_norm")?;
        for r in &self.rows {
            writeln!(out, "{},{:?},{:?},{:?},{:?},{:?}", r.iter, r.misfit, r.alpha, r.tv, r.min_value, r.grad_map_norm)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    IterationCap,
    LinesearchFailed,
}

#[derive(Debug, Clone)]
pub struct ProxQnResult {
    pub f: Vec<f64>,
    pub misfit: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub trace: Trace,
}

/// Minimizer of the quadratic model from the inner primal-dual solve.
#[derive(Debug, Clone)]
pub struct Direction {
    pub s: Vec<f64>,
    /// Final primal-dual state, reusable as a warm start.
    pub state: PdState,
    pub iterations: usize,
    pub converged: bool,
}

/// Approximate minimizer of `<g, s> + 1/2 s^T B s` subject to
/// `||D (f + s)||_1 <= tau` and `f + s >= 0`.
///
/// Without curvature pairs `B = sigma I` and the minimizer is a projection,
/// computed with [`prox_nn_tv`]. Otherwise the three-term primal-dual
/// iteration runs with `prox_{s h}(y) = (I + s B)^{-1}(y - s g)` and the
/// conjugate indicators of the shifted sets, starting from `warm`.
#[allow(clippy::too_many_arguments)]
pub fn search_direction(
    grad: &[f64],
    lbfgs: &LbfgsState,
    f: &[f64],
    op: &TvOperator,
    tau: f64,
    t_max: usize,
    warm: Option<PdState>,
    prox: &ProxTvConfig,
) -> Result<Direction> {
    let n = f.len();
    if grad.len() != n || n != op.n_cells() {
        return Err(Error::ShapeMismatch {
            what: "search-direction inputs",
            expected: op.n_cells(),
            got: grad.len().min(n),
        });
    }
    if lbfgs.is_empty() {
        let sigma = lbfgs.sigma();
        let target: Vec<f64> = f.iter().zip(grad).map(|(x, g)| x - g / sigma).collect();
        let p = prox_nn_tv(op, &target, tau, 1.0, prox)?;
        let s: Vec<f64> = p.f.iter().zip(f).map(|(a, b)| a - b).collect();
        return Ok(Direction {
            state: PdState {
                x: s.clone(),
                u: vec![0.0; op.n_edges()],
                v: vec![0.0; n],
            },
            s,
            iterations: p.iterations,
            converged: p.converged,
        });
    }

    let step = 0.9 / op.gram_norm().sqrt();
    let inv = lbfgs.shifted_inverse(step)?;
    let df = op.d(f);
    let res_h = |y: &mut [f64]| {
        y.iter_mut().zip(grad).for_each(|(yi, g)| *yi -= step * g);
        inv.apply(y);
    };
    let mut shifted = vec![0.0; op.n_edges()];
    let res_g = |y: &mut [f64]| {
        for ((p, yi), c) in shifted.iter_mut().zip(y.iter()).zip(&df) {
            *p = yi / step + c;
        }
        project_l1_ball_in_place(&mut shifted, tau);
        for ((yi, p), c) in y.iter_mut().zip(&shifted).zip(&df) {
            *yi -= step * (p - c);
        }
    };
    let res_k = |y: &mut [f64]| {
        for (yi, &c) in y.iter_mut().zip(f) {
            let z = *yi / step + c;
            *yi -= step * (z.max(0.0) - c);
        }
    };
    let init = match warm {
        Some(w) if w.x.len() == n && w.u.len() == op.n_edges() && w.v.len() == n => w,
        _ => PdState::zeros(n, op.n_edges()),
    };
    let out = pd_three_term(
        res_h,
        res_g,
        res_k,
        op,
        init,
        &PdConfig {
            step,
            t_max,
            tol: 1e-10,
        },
    )?;
    Ok(Direction {
        s: out.state.x.clone(),
        state: out.state,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Accepted linesearch point.
#[derive(Debug, Clone)]
pub struct LinesearchOutcome<T> {
    pub alpha: f64,
    pub f_next: Vec<f64>,
    pub value: f64,
    /// Whatever the evaluation callback returned besides the value.
    pub extra: T,
    pub trials: usize,
}

/// Backtracking along `alpha -> prox_nn_tv(f + alpha s)` from `alpha = 1`
/// until `value <= value_f - c_suff alpha |<g, s>|`. Returns `None` when
/// `alpha` falls below `alpha_min`.
#[allow(clippy::too_many_arguments)]
pub fn linesearch<T, E>(
    f: &[f64],
    s: &[f64],
    value_f: f64,
    slope: f64,
    op: &TvOperator,
    tau: f64,
    cfg: &ProxQnConfig,
    mut eval: E,
) -> Result<Option<LinesearchOutcome<T>>>
where
    E: FnMut(&[f64]) -> Result<(f64, T)>,
{
    let mut alpha = 1.0;
    let mut trials = 0;
    while alpha >= cfg.alpha_min {
        let trial: Vec<f64> = f.iter().zip(s).map(|(a, b)| a + alpha * b).collect();
        let f_next = prox_nn_tv(op, &trial, tau, 1.0, &cfg.prox)?.f;
        let (value, extra) = eval(&f_next)?;
        trials += 1;
        if value <= value_f - cfg.c_suff * alpha * slope.abs() {
            return Ok(Some(LinesearchOutcome {
                alpha,
                f_next,
                value,
                extra,
                trials,
            }));
        }
        alpha *= cfg.ls_shrink;
    }
    Ok(None)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `||f - prox(f - grad)||`, zero exactly at constrained stationary points.
pub fn gradient_map_norm(op: &TvOperator, f: &[f64], grad: &[f64], tau: f64, prox: &ProxTvConfig) -> Result<f64> {
    let target: Vec<f64> = f.iter().zip(grad).map(|(a, g)| a - g).collect();
    let p = prox_nn_tv(op, &target, tau, 1.0, prox)?;
    Ok(f.iter().zip(&p.f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// Runs the proximal quasi-Newton method from `f0` (projected first if it is
/// infeasible).
pub fn prox_qn_solve<O: SmoothObjective + ?Sized>(
    obj: &mut O,
    op: &TvOperator,
    f0: &[f64],
    tau: f64,
    cfg: &ProxQnConfig,
) -> Result<ProxQnResult> {
    cfg.validate()?;
    if f0.len() != obj.dim() || f0.len() != op.n_cells() {
        return Err(Error::ShapeMismatch {
            what: "initial image",
            expected: obj.dim(),
            got: f0.len(),
        });
    }
    let mut f = prox_nn_tv(op, f0, tau, 1.0, &cfg.prox)?.f;
    let (mut value, mut grad) = obj.value_and_gradient(&f)?;
    let mut lbfgs = LbfgsState::new(cfg.memory);
    let mut warm: Option<PdState> = None;
    let mut trace = Trace::default();
    let row = |iter, misfit, alpha, f: &[f64], gm| TraceRow {
        iter,
        misfit,
        alpha,
        tv: op.tv(f),
        min_value: f.iter().copied().fold(f64::INFINITY, f64::min),
        grad_map_norm: gm,
    };

    let mut stop = StopReason::IterationCap;
    let mut iterations = 0;
    for i in 0..=cfg.i_max {
        let gm = gradient_map_norm(op, &f, &grad, tau, &cfg.prox)?;
        if i == 0 {
            trace.rows.push(row(0, value, 0.0, &f, gm));
        } else if let Some(last) = trace.rows.last_mut() {
            last.grad_map_norm = gm;
        }
        if gm <= cfg.grad_tol {
            stop = StopReason::Converged;
            break;
        }
        if i == cfg.i_max {
            break;
        }

        let mut dir = search_direction(&grad, &lbfgs, &f, op, tau, cfg.inner_t_max, warm.take(), &cfg.prox)?;
        let mut slope = dot(&grad, &dir.s);
        if !(slope < 0.0) && !lbfgs.is_empty() {
            // the inexact inner solve lost descent; fall back to the projected gradient
            lbfgs.reset();
            dir = search_direction(&grad, &lbfgs, &f, op, tau, cfg.inner_t_max, None, &cfg.prox)?;
            slope = dot(&grad, &dir.s);
        }
        let mut accepted = linesearch(&f, &dir.s, value, slope, op, tau, cfg, |x| obj.value_and_gradient(x))?;
        if accepted.is_none() && !lbfgs.is_empty() {
            lbfgs.reset();
            dir = search_direction(&grad, &lbfgs, &f, op, tau, cfg.inner_t_max, None, &cfg.prox)?;
            slope = dot(&grad, &dir.s);
            accepted = linesearch(&f, &dir.s, value, slope, op, tau, cfg, |x| obj.value_and_gradient(x))?;
        }
        let Some(step) = accepted else {
            stop = StopReason::LinesearchFailed;
            break;
        };
        warm = Some(dir.state);
        let s: Vec<f64> = step.f_next.iter().zip(&f).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.extra.iter().zip(&grad).map(|(a, b)| a - b).collect();
        lbfgs.update(s, y);
        f = step.f_next;
        value = step.value;
        grad = step.extra;
        iterations = i + 1;
        trace.rows.push(row(iterations, value, step.alpha, &f, f64::NAN));
    }
    Ok(ProxQnResult {
        f,
        misfit: value,
        iterations,
        stop,
        trace,
    })
}
