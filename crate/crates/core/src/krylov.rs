//! Matrix-free Krylov solvers: restarted GMRES for complex non-Hermitian
//! systems and conjugate gradients for real symmetric positive semidefinite ones.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Restarted GMRES settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmresConfig {
    /// Relative residual target `||b - Ax|| <= tol * ||b||`.
    pub tol: f64,
    /// Krylov dimension before restart.
    pub restart: usize,
    /// Total iteration cap across restarts.
    pub max_iter: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            tol: 1e-8,
            restart: 50,
            max_iter: 1000,
        }
    }
}

impl GmresConfig {
    pub fn with_tol(tol: f64) -> Self {
        GmresConfig {
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidInput(format!(
                "GMRES tolerance must lie in (0, 1), got {}",
                self.tol
            )));
        }
        if self.restart == 0 || self.max_iter == 0 {
            return Err(Error::InvalidInput(
                "GMRES restart and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

#[inline]
fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    // <a, b> = a^H b
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `A x = b` in place, starting from the incoming `x`.
///
/// `apply(v, out)` must write `A v` into `out`. Fails with
/// [`Error::NotConverged`] carrying the achieved residual when the iteration
/// cap is reached.
pub fn gmres<F>(apply: F, b: &[Complex64], x: &mut [Complex64], cfg: &GmresConfig) -> Result<GmresStats>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let n = b.len();
    if x.len() != n {
        return Err(Error::ShapeMismatch {
            what: "GMRES initial guess",
            expected: n,
            got: x.len(),
        });
    }
    let b_norm = cnorm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        return Ok(GmresStats {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let target = cfg.tol * b_norm;
    let m = cfg.restart.min(n).max(1);
    let zero = Complex64::new(0.0, 0.0);

    let mut r = vec![zero; n];
    let mut w = vec![zero; n];
    let mut basis: Vec<Vec<Complex64>> = (0..=m).map(|_| vec![zero; n]).collect();
    let mut hess = vec![vec![zero; m]; m + 1];
    let mut cs = vec![0.0f64; m];
    let mut sn = vec![zero; m];
    let mut g = vec![zero; m + 1];
    let mut total = 0usize;

    loop {
        apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = cnorm(&r);
        if beta <= target {
            return Ok(GmresStats {
                iterations: total,
                rel_residual: beta / b_norm,
            });
        }
        if total >= cfg.max_iter {
            return Err(Error::NotConverged {
                solver: "GMRES",
                iterations: total,
                residual: beta / b_norm,
            });
        }
        for (v, ri) in basis[0].iter_mut().zip(&r) {
            *v = ri / beta;
        }
        g.iter_mut().for_each(|v| *v = zero);
        g[0] = Complex64::new(beta, 0.0);

        let mut steps = 0;
        for j in 0..m {
            apply(&basis[j], &mut w);
            // modified Gram-Schmidt
            for i in 0..=j {
                let h = cdot(&basis[i], &w);
                hess[i][j] = h;
                for (wk, vk) in w.iter_mut().zip(&basis[i]) {
                    *wk -= h * vk;
                }
            }
            let h_next = cnorm(&w);
            hess[j + 1][j] = Complex64::new(h_next, 0.0);
            if h_next > 0.0 {
                for (v, wk) in basis[j + 1].iter_mut().zip(&w) {
                    *v = wk / h_next;
                }
            }
            // apply previous rotations to the new column
            for i in 0..j {
                let a = hess[i][j];
                let bb = hess[i + 1][j];
                hess[i][j] = cs[i] * a + sn[i] * bb;
                hess[i + 1][j] = -sn[i].conj() * a + cs[i] * bb;
            }
            // new rotation zeroing hess[j+1][j]
            let a = hess[j][j];
            let bb = hess[j + 1][j];
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if denom == 0.0 {
                cs[j] = 1.0;
                sn[j] = zero;
            } else if a.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = (bb / bb.norm()).conj();
            } else {
                let phase = a / a.norm();
                cs[j] = a.norm() / denom;
                sn[j] = phase * bb.conj() / denom;
            }
            hess[j][j] = cs[j] * a + sn[j] * bb;
            hess[j + 1][j] = zero;
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] *= cs[j];

            steps = j + 1;
            total += 1;
            if g[j + 1].norm() <= target || total >= cfg.max_iter || h_next == 0.0 {
                break;
            }
        }

        // back substitution for the least-squares coefficients
        let mut y = vec![zero; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for k in i + 1..steps {
                acc -= hess[i][k] * y[k];
            }
            y[i] = acc / hess[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[k]) {
                *xi += yk * vi;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Conjugate gradients for a real symmetric positive semidefinite operator on
/// a consistent right-hand side. `project` is applied to every residual and
/// search direction to keep the iteration inside the operator's range.
pub fn conjugate_gradient<F, P>(
    apply: F,
    project: P,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgStats>
where
    F: Fn(&[f64], &mut [f64]),
    P: Fn(&mut [f64]),
{
    let n = b.len();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    project(&mut r);
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for it in 0..max_iter {
        if rr.sqrt() <= tol * b_norm {
            return Ok(CgStats {
                iterations: it,
                rel_residual: rr.sqrt() / b_norm,
            });
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut r);
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        project(&mut p);
    }
    let rel = rr.sqrt() / b_norm;
    if rel <= tol {
        Ok(CgStats {
            iterations: max_iter,
            rel_residual: rel,
        })
    } else {
        Err(Error::NotConverged {
            solver: "conjugate gradient",
            iterations: max_iter,
            residual: rel,
        })
    }
}
