//! Anisotropic total variation, the projections it needs, and the primal-dual
//! machinery built on them.

mod pd;
mod polar;

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::Grid;

pub use pd::{pd_three_term, LinearMap, PdConfig, PdOutcome, PdState};
pub use polar::tv_polar;

/// Stacked forward differences `D = [D_y; D_x]` on a grid, without wrap-around.
///
/// Rows `0 .. nx(ny-1)` hold `f[ix, iy+1] - f[ix, iy]` ordered by `(ix, iy)`;
/// the remaining `(nx-1)ny` rows hold `f[ix+1, iy] - f[ix, iy]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvOperator {
    pub nx: usize,
    pub ny: usize,
}

fn norm_cache() -> &'static RwLock<HashMap<(usize, usize), f64>> {
    static CACHE: OnceLock<RwLock<HashMap<(usize, usize), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

impl TvOperator {
    pub fn new(grid: Grid) -> Self {
        TvOperator {
            nx: grid.nx,
            ny: grid.ny,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_edges(&self) -> usize {
        self.nx * (self.ny - 1) + (self.nx - 1) * self.ny
    }

    fn check(&self, what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::ShapeMismatch { what, expected, got })
        }
    }

    /// `out = D f`.
    pub fn apply_d(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        self.check("TV input image", self.n_cells(), f.len())?;
        self.check("TV edge buffer", self.n_edges(), out.len())?;
        self.d_unchecked(f, out);
        Ok(())
    }

    /// `out = D^T w`.
    pub fn apply_dt(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        self.check("TV edge vector", self.n_edges(), w.len())?;
        self.check("TV output image", self.n_cells(), out.len())?;
        self.dt_unchecked(w, out);
        Ok(())
    }

    pub(crate) fn d_unchecked(&self, f: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let mut e = 0;
        for ix in 0..nx {
            let col = &f[ix * ny..(ix + 1) * ny];
            for iy in 0..ny - 1 {
                out[e] = col[iy + 1] - col[iy];
                e += 1;
            }
        }
        for ix in 0..nx - 1 {
            for iy in 0..ny {
                out[e] = f[(ix + 1) * ny + iy] - f[ix * ny + iy];
                e += 1;
            }
        }
    }

    pub(crate) fn dt_unchecked(&self, w: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut e = 0;
        for ix in 0..nx {
            for iy in 0..ny - 1 {
                out[ix * ny + iy + 1] += w[e];
                out[ix * ny + iy] -= w[e];
                e += 1;
            }
        }
        for ix in 0..nx - 1 {
            for iy in 0..ny {
                out[(ix + 1) * ny + iy] += w[e];
                out[ix * ny + iy] -= w[e];
                e += 1;
            }
        }
    }

    pub fn d(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_edges()];
        self.d_unchecked(f, &mut out);
        out
    }

    pub fn dt(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cells()];
        self.dt_unchecked(w, &mut out);
        out
    }

    /// `||D f||_1`.
    pub fn tv(&self, f: &[f64]) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let mut total = 0.0;
        for ix in 0..nx {
            for iy in 0..ny {
                let here = f[ix * ny + iy];
                if iy + 1 < ny {
                    total += (f[ix * ny + iy + 1] - here).abs();
                }
                if ix + 1 < nx {
                    total += (f[(ix + 1) * ny + iy] - here).abs();
                }
            }
        }
        total
    }

    /// Power-iteration estimate of `||D^T D + I||_2`, cached per grid shape.
    pub fn gram_norm(&self) -> f64 {
        let key = (self.nx, self.ny);
        if let Some(&v) = norm_cache().read().expect("norm cache poisoned").get(&key) {
            return v;
        }
        let v = self.power_iteration(500);
        norm_cache().write().expect("norm cache poisoned").insert(key, v);
        v
    }

    fn power_iteration(&self, iters: usize) -> f64 {
        let n = self.n_cells();
        // checkerboard start has a large component on the top eigenvector
        let mut x: Vec<f64> = (0..n)
            .map(|i| {
                let (ix, iy) = (i / self.ny, i % self.ny);
                if (ix + iy) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let mut lambda = 0.0;
        let mut edges = vec![0.0; self.n_edges()];
        let mut y = vec![0.0; n];
        for _ in 0..iters {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
            self.d_unchecked(&x, &mut edges);
            self.dt_unchecked(&edges, &mut y);
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi += xi;
            }
            let next: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
            std::mem::swap(&mut x, &mut y);
            if (next - lambda).abs() <= 1e-13 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        // Rayleigh quotients approach from below; a small margin keeps the
        // derived step sizes strictly inside the stability bound
        lambda * (1.0 + 1e-6)
    }
}

/// Euclidean projection onto `{x : ||x||_1 <= tau}` by sorting magnitudes.
pub fn project_l1_ball(w: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!("l1 radius must be nonnegative, got {tau}")));
    }
    let mut out = w.to_vec();
    project_l1_ball_in_place(&mut out, tau);
    Ok(out)
}

pub(crate) fn project_l1_ball_in_place(w: &mut [f64], tau: f64) {
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    if l1 <= tau {
        return;
    }
    if tau == 0.0 {
        w.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let theta = l1_threshold(w, tau);
    for v in w.iter_mut() {
        *v = v.signum() * (v.abs() - theta).max(0.0);
    }
}

/// Soft threshold `theta` with `sum max(|w_i| - theta, 0) = tau`.
fn l1_threshold(w: &[f64], tau: f64) -> f64 {
    let mut mags: Vec<f64> = w.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &m) in mags.iter().enumerate() {
        cumulative += m;
        let candidate = (cumulative - tau) / (i + 1) as f64;
        if candidate < m {
            theta = candidate;
        } else {
            break;
        }
    }
    theta.max(0.0)
}

/// Componentwise `max(w, 0)`.
pub fn project_nonneg(w: &[f64]) -> Vec<f64> {
    w.iter().map(|&v| v.max(0.0)).collect()
}

/// Settings for [`prox_nn_tv`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxTvConfig {
    pub t_max: usize,
    /// Threshold on the relative change of `f` per iteration.
    pub tol: f64,
    /// Primal-dual step; `None` picks `0.9 / sqrt(||D^T D + I||)`.
    pub step: Option<f64>,
}

impl Default for ProxTvConfig {
    fn default() -> Self {
        ProxTvConfig {
            t_max: 2000,
            tol: 1e-8,
            step: None,
        }
    }
}

/// Result of [`prox_nn_tv`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProxTvOutcome {
    pub f: Vec<f64>,
    pub iterations: usize,
    /// Relative change of `f` at the last iteration.
    pub residual: f64,
    pub converged: bool,
}

/// Projection of `w` onto `{f >= 0, ||D f||_1 <= tau}`.
///
/// Runs the primal-dual iteration on `1/(2 gamma) ||f - w||^2` with the two
/// indicator functions handled through their conjugates (Moreau identity):
///
/// ```text
/// f+ = (gamma (f - a (D^T u + v)) + a w) / (a + gamma)
/// u  = x - a P_l1(x / a),   x = u + a D(2 f+ - f)
/// v  = x - a P_>=0(x / a),  x = v + a (2 f+ - f)
/// ```
///
/// The returned image is made exactly feasible: negatives are clipped, then
/// any TV excess is removed by shrinking toward the mean.
pub fn prox_nn_tv(
    op: &TvOperator,
    w: &[f64],
    tau: f64,
    gamma: f64,
    cfg: &ProxTvConfig,
) -> Result<ProxTvOutcome> {
    let n = op.n_cells();
    op.check("prox input", n, w.len())?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("TV budget must be nonnegative, got {tau}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("prox scale must be positive, got {gamma}")));
    }
    let bound = 1.0 / op.gram_norm().sqrt();
    let alpha = match cfg.step {
        Some(a) if a > 0.0 && a < bound => a,
        Some(a) => {
            return Err(Error::InvalidInput(format!(
                "primal-dual step {a} outside (0, {bound})"
            )))
        }
        None => 0.9 * bound,
    };

    if w.iter().all(|&x| x >= 0.0) && op.tv(w) <= tau {
        return Ok(ProxTvOutcome {
            f: w.to_vec(),
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    if tau == 0.0 {
        let mean = w.iter().sum::<f64>() / n as f64;
        return Ok(ProxTvOutcome {
            f: vec![mean.max(0.0); n],
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }

    let out = nn_tv_iterations(op, w, tau, gamma, alpha, cfg.t_max, cfg.tol);
    let mut f = out.f;
    polish_feasible(op, &mut f, tau);
    Ok(ProxTvOutcome { f, ..out })
}

/// The bare primal-dual iterations behind [`prox_nn_tv`], without the early
/// exits and the final feasibility polish.
pub(crate) fn nn_tv_iterations(
    op: &TvOperator,
    w: &[f64],
    tau: f64,
    gamma: f64,
    alpha: f64,
    t_max: usize,
    tol: f64,
) -> ProxTvOutcome {
    let n = op.n_cells();
    let m = op.n_edges();
    let mut f = w.to_vec();
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut f_new = vec![0.0; n];
    let mut bar = vec![0.0; n];
    let mut dtu = vec![0.0; n];
    let mut dbar = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    for t in 0..t_max {
        op.dt_unchecked(&u, &mut dtu);
        for i in 0..n {
            let hat = f[i] - alpha * (dtu[i] + v[i]);
            f_new[i] = (gamma * hat + alpha * w[i]) / (alpha + gamma);
            bar[i] = 2.0 * f_new[i] - f[i];
        }
        op.d_unchecked(&bar, &mut dbar);
        for e in 0..m {
            scratch[e] = (u[e] + alpha * dbar[e]) / alpha;
        }
        let x_over = scratch.clone();
        project_l1_ball_in_place(&mut scratch, tau);
        for e in 0..m {
            u[e] = alpha * (x_over[e] - scratch[e]);
        }
        for i in 0..n {
            v[i] = (v[i] + alpha * bar[i]).min(0.0);
        }

        let diff: f64 = f_new.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum();
        let size: f64 = f_new.iter().map(|a| a * a).sum();
        residual = diff.sqrt() / size.sqrt().max(1e-300);
        std::mem::swap(&mut f, &mut f_new);
        iterations = t + 1;
        if residual < tol {
            let neg = f.iter().fold(0.0f64, |acc, &x| acc.max(-x));
            let excess = (op.tv(&f) - tau).max(0.0);
            if neg <= 1e-8 * (1.0 + tau) && excess <= 1e-6 * tau.max(1e-12) {
                converged = true;
                break;
            }
        }
    }

    ProxTvOutcome {
        f,
        iterations,
        residual,
        converged,
    }
}

/// Clips negatives (never raises TV) and, if TV still exceeds `tau`,
/// contracts the image toward its mean (TV scales linearly, the mean stays
/// nonnegative, and so do the contracted values).
fn polish_feasible(op: &TvOperator, f: &mut [f64], tau: f64) {
    f.iter_mut().for_each(|x| *x = x.max(0.0));
    let tv = op.tv(f);
    if tv > tau {
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        let s = tau / tv;
        f.iter_mut().for_each(|x| *x = mean + s * (*x - mean));
    }
}
