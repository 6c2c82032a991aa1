use serde::{Deserialize, Serialize};

use super::TvOperator;
use crate::error::{Error, Result};

/// Real linear map with its transpose.
pub trait LinearMap {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    fn apply_t(&self, y: &[f64], out: &mut [f64]);
}

impl LinearMap for TvOperator {
    fn dim_in(&self) -> usize {
        self.n_cells()
    }

    fn dim_out(&self) -> usize {
        self.n_edges()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.d_unchecked(x, out);
    }

    fn apply_t(&self, y: &[f64], out: &mut [f64]) {
        self.dt_unchecked(y, out);
    }
}

/// Primal iterate `x` and the two dual iterates (`u` paired with `L`, `v`
/// with the identity).
#[derive(Debug, Clone, PartialEq)]
pub struct PdState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl PdState {
    pub fn zeros(n: usize, m: usize) -> Self {
        PdState {
            x: vec![0.0; n],
            u: vec![0.0; m],
            v: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdConfig {
    pub step: f64,
    pub t_max: usize,
    /// Stop once the relative change of the stacked iterate `(x, u, v)` drops
    /// below this.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdOutcome {
    pub state: PdState,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Three-sequence primal-dual iteration for `min h(x) + g(Lx) + k(x)`:
///
/// ```text
/// x+ = res_h(x - s (L^T u + v))
/// u+ = res_gstar(u + s L (2 x+ - x))
/// v+ = res_kstar(v + s (2 x+ - x))
/// ```
///
/// Each resolvent works in place and has the step `s` built in. Stability
/// needs `s^2 ||L^T L + I|| < 1`.
pub fn pd_three_term<H, G, K, L>(
    mut res_h: H,
    mut res_gstar: G,
    mut res_kstar: K,
    l: &L,
    init: PdState,
    cfg: &PdConfig,
) -> Result<PdOutcome>
where
    H: FnMut(&mut [f64]),
    G: FnMut(&mut [f64]),
    K: FnMut(&mut [f64]),
    L: LinearMap + ?Sized,
{
    let (n, m) = (l.dim_in(), l.dim_out());
    let PdState { mut x, mut u, mut v } = init;
    for (what, expected, got) in [("primal iterate", n, x.len()), ("dual iterate", m, u.len()), ("dual iterate", n, v.len())] {
        if expected != got {
            return Err(Error::ShapeMismatch { what, expected, got });
        }
    }
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(Error::InvalidInput(format!("primal-dual step must be positive, got {}", cfg.step)));
    }
    let s = cfg.step;
    let mut ltu = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut bar = vec![0.0; n];
    let mut lbar = vec![0.0; m];
    let mut u_old = vec![0.0; m];
    let mut v_old = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    for t in 0..cfg.t_max {
        l.apply_t(&u, &mut ltu);
        for i in 0..n {
            x_new[i] = x[i] - s * (ltu[i] + v[i]);
        }
        res_h(&mut x_new);
        for i in 0..n {
            bar[i] = 2.0 * x_new[i] - x[i];
        }
        l.apply(&bar, &mut lbar);
        u_old.copy_from_slice(&u);
        v_old.copy_from_slice(&v);
        for e in 0..m {
            u[e] += s * lbar[e];
        }
        res_gstar(&mut u);
        for i in 0..n {
            v[i] += s * bar[i];
        }
        res_kstar(&mut v);

        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
        let norm = |a: &[f64]| a.iter().map(|p| p * p).sum::<f64>();
        let diff = sq(&x_new, &x) + sq(&u, &u_old) + sq(&v, &v_old);
        let size = norm(&x_new) + norm(&u) + norm(&v);
        std::mem::swap(&mut x, &mut x_new);
        iterations = t + 1;
        if !(size.is_finite() && size < 1e300) || u.iter().chain(&v).any(|z| !z.is_finite()) {
            return Err(Error::Diverged("three-term primal-dual iteration"));
        }
        residual = if size > 0.0 { (diff / size).sqrt() } else { diff.sqrt() };
        if residual < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(PdOutcome {
        state: PdState { x, u, v },
        iterations,
        residual,
        converged,
    })
}
