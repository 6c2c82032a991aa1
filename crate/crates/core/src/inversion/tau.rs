use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{DataMatrix, ScatteredData, Wavefield, WavefieldSet};
use crate::greens::ForwardModel;
use crate::objective::{ResidualSet, SmoothObjective};
use crate::proxtv::{tv_polar, TvOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// TV budget bookkeeping for the continuation workflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvConstraintState {
    pub tau: f64,
    /// Noise bound for the current stage's batch.
    pub sigma: f64,
    pub stage: usize,
}

impl TvConstraintState {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidInput(format!("TV budget must be finite and nonnegative, got {tau}")));
        }
        Ok(TvConstraintState { tau, sigma: 0.0, stage: 0 })
    }
}

/// Result of one Newton step on the value function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauUpdate {
    pub tau: f64,
    pub residual_norm: f64,
    pub sigma: f64,
    /// Polar gauge of the back-projected residual (the denominator).
    pub polar: f64,
}

/// `sum_j sum_t Re(w(u_jt) * (H_j^H r_jt))` with `w` the identity, or complex
/// conjugation when `conjugate` is set.
pub fn polar_argument(model: &ForwardModel, residuals: &ResidualSet, fields: &WavefieldSet, conjugate: bool) -> Result<Vec<f64>> {
    if residuals.freq_indices != fields.freq_indices {
        return Err(Error::InvalidInput("residuals and wavefields cover different frequencies".into()));
    }
    let n = model.grid.len();
    let mut z = vec![0.0; n];
    let mut back = vec![ZERO; n];
    for ((&j, r), u) in residuals.freq_indices.iter().zip(&residuals.residuals).zip(&fields.fields) {
        let ops = model
            .ops
            .get(j)
            .ok_or_else(|| Error::InvalidInput(format!("frequency index {j} out of range")))?;
        if u.n_cells != n || u.n_tx != ops.n_tx || r.n_tx != ops.n_tx || r.n_rx != ops.n_rx {
            return Err(Error::ShapeMismatch {
                what: "residual or wavefield",
                expected: n * ops.n_tx,
                got: u.n_cells * u.n_tx,
            });
        }
        for t in 0..ops.n_tx {
            ops.apply_hh(r.column(t), &mut back);
            for ((zi, b), ui) in z.iter_mut().zip(&back).zip(u.column(t)) {
                let w = if conjugate { ui.conj() } else { *ui };
                *zi += (w * b).re;
            }
        }
    }
    Ok(z)
}

/// Newton step `tau + ||r|| (||r|| - sigma) / polar(z)` toward
/// `||r(tau)|| = sigma`, floored at zero. `residuals` and `fields` must be
/// evaluated at the current iterate.
pub fn tau_update(
    state: &TvConstraintState,
    residuals: &ResidualSet,
    fields: &WavefieldSet,
    model: &ForwardModel,
    sigma_next: f64,
    conjugate: bool,
) -> Result<TauUpdate> {
    if !(sigma_next >= 0.0 && sigma_next.is_finite()) {
        return Err(Error::InvalidInput(format!("noise bound must be nonnegative, got {sigma_next}")));
    }
    let rn = residuals.norm();
    if rn == 0.0 {
        return Ok(TauUpdate {
            tau: state.tau,
            residual_norm: 0.0,
            sigma: sigma_next,
            polar: 0.0,
        });
    }
    let z = polar_argument(model, residuals, fields, conjugate)?;
    let op = TvOperator::new(model.grid);
    let scale = z.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let polar = tv_polar(&op, &z, 1e-12)?;
    if !(polar > 1e-14 * scale) {
        return Err(Error::Degenerate("back-projected residual has zero TV polar".into()));
    }
    let tau = (state.tau + rn * (rn - sigma_next) / polar).max(0.0);
    Ok(TauUpdate {
        tau,
        residual_norm: rn,
        sigma: sigma_next,
        polar,
    })
}

/// `1/2 sum_j ||Y_j - H_j diag(U_j) f||^2` with frozen total fields,
/// normalized like [`crate::objective::BatchMisfit`].
pub struct LinearizedMisfit<'a> {
    model: &'a ForwardModel,
    data: Vec<&'a DataMatrix>,
    batch: Vec<usize>,
    fields: Vec<Wavefield>,
    scale: f64,
}

impl<'a> LinearizedMisfit<'a> {
    pub fn new(model: &'a ForwardModel, data: &'a ScatteredData, fields: WavefieldSet) -> Result<Self> {
        let batch = fields.freq_indices.clone();
        if batch.is_empty() {
            return Err(Error::InvalidInput("frequency batch is empty".into()));
        }
        let mut mats = Vec::with_capacity(batch.len());
        for &j in &batch {
            if j >= model.n_freq() || j >= data.n_freq() {
                return Err(Error::InvalidInput(format!("frequency index {j} out of range")));
            }
            mats.push(&data.matrices[j]);
        }
        let energy = data.batch_norm_sqr(&batch);
        if energy == 0.0 {
            return Err(Error::Degenerate("data in the batch are identically zero".into()));
        }
        Ok(LinearizedMisfit {
            model,
            data: mats,
            batch,
            fields: fields.fields,
            scale: 1.0 / energy,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Unscaled residuals `Y_j - H_j diag(U_j) f`.
    pub fn residuals(&self, f: &[f64]) -> Result<ResidualSet> {
        let n = self.model.grid.len();
        if f.len() != n {
            return Err(Error::ShapeMismatch {
                what: "contrast vector",
                expected: n,
                got: f.len(),
            });
        }
        let mut out = Vec::with_capacity(self.batch.len());
        let mut src = vec![ZERO; n];
        for ((&j, y), u) in self.batch.iter().zip(&self.data).zip(&self.fields) {
            let ops = &self.model.ops[j];
            let mut r = DataMatrix::zeros(ops.n_rx, ops.n_tx);
            for t in 0..ops.n_tx {
                for ((s, ui), &fi) in src.iter_mut().zip(u.column(t)).zip(f) {
                    *s = ui * fi;
                }
                let col = &mut r.values[t * ops.n_rx..(t + 1) * ops.n_rx];
                ops.apply_h(&src, col);
                for (c, yv) in col.iter_mut().zip(y.column(t)) {
                    *c = yv - *c;
                }
            }
            out.push(r);
        }
        Ok(ResidualSet {
            freq_indices: self.batch.clone(),
            residuals: out,
        })
    }

    pub fn fields(&self) -> WavefieldSet {
        WavefieldSet {
            freq_indices: self.batch.clone(),
            fields: self.fields.clone(),
        }
    }
}

impl SmoothObjective for LinearizedMisfit<'_> {
    fn dim(&self) -> usize {
        self.model.grid.len()
    }

    fn value(&mut self, f: &[f64]) -> Result<f64> {
        Ok(0.5 * self.scale * self.residuals(f)?.norm_sqr())
    }

    fn value_and_gradient(&mut self, f: &[f64]) -> Result<(f64, Vec<f64>)> {
        let res = self.residuals(f)?;
        let z = polar_argument(self.model, &res, &self.fields(), true)?;
        let grad = z.iter().map(|v| -self.scale * v).collect();
        Ok((0.5 * self.scale * res.norm_sqr(), grad))
    }
}
