//! Reduced data misfit and its adjoint-state gradient.
//!
//! For one frequency and transmitter, with `u` solving `(I - G diag f) u = v`
//! and residual `r = y - H diag(f) u`, the misfit `1/2 ||r||^2` has gradient
//!
//! ```text
//! grad = -Re[ conj(u) . (H^H r + G^H lambda) ],
//! (I - diag(f) G^H) lambda = diag(f) H^H r.
//! ```
//!
//! The adjoint operator is the conjugate transpose of `I - G diag f`, which
//! puts `diag(f)` on the left of `G^H`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{solve_total_field, synthesize_data, DataMatrix, ScatteredData, Wavefield, WavefieldSet};
use crate::greens::{ForwardModel, GreenOperators};
use crate::krylov::{gmres, GmresConfig};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Data residuals `r_j = Y_j - H_j diag(f) U_j` for a batch of frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub freq_indices: Vec<usize>,
    pub residuals: Vec<DataMatrix>,
}

impl ResidualSet {
    /// `||r||^2 = sum_j ||r_j||_F^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.residuals.iter().map(DataMatrix::norm_sqr).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

fn check_batch(model: &ForwardModel, data: &ScatteredData, f: &[f64], batch: &[usize]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("frequency batch is empty".into()));
    }
    if let Some(&j) = batch.iter().find(|&&j| j >= model.n_freq() || j >= data.n_freq()) {
        return Err(Error::InvalidInput(format!("frequency index {j} out of range")));
    }
    if f.len() != model.grid.len() {
        return Err(Error::ShapeMismatch {
            what: "contrast vector",
            expected: model.grid.len(),
            got: f.len(),
        });
    }
    Ok(())
}

fn residual(y: &DataMatrix, pred: &DataMatrix) -> DataMatrix {
    DataMatrix {
        n_rx: y.n_rx,
        n_tx: y.n_tx,
        values: y.values.iter().zip(&pred.values).map(|(a, b)| a - b).collect(),
    }
}

/// `sum_{j in batch} 1/2 ||Y_j - H_j diag(f) U_j||_F^2`, with the residuals and
/// total fields it was computed from.
pub fn misfit(
    model: &ForwardModel,
    data: &ScatteredData,
    f: &[f64],
    batch: &[usize],
    cfg: &GmresConfig,
) -> Result<(f64, ResidualSet, WavefieldSet)> {
    check_batch(model, data, f, batch)?;
    let mut residuals = Vec::with_capacity(batch.len());
    let mut fields = Vec::with_capacity(batch.len());
    for &j in batch {
        let ops = &model.ops[j];
        let u = solve_total_field(ops, f, cfg, None)?;
        let pred = synthesize_data(ops, f, &u)?;
        residuals.push(residual(&data.matrices[j], &pred));
        fields.push(u);
    }
    let set = ResidualSet {
        freq_indices: batch.to_vec(),
        residuals,
    };
    Ok((
        0.5 * set.norm_sqr(),
        set,
        WavefieldSet {
            freq_indices: batch.to_vec(),
            fields,
        },
    ))
}

/// Gradient of [`misfit`] with respect to real `f`.
pub fn gradient(
    model: &ForwardModel,
    data: &ScatteredData,
    f: &[f64],
    batch: &[usize],
    cfg: &GmresConfig,
) -> Result<Vec<f64>> {
    let (_, residuals, fields) = misfit(model, data, f, batch, cfg)?;
    let mut grad = vec![0.0; f.len()];
    for (k, &j) in batch.iter().enumerate() {
        let (g, _) = frequency_gradient(&model.ops[j], f, &fields.fields[k], &residuals.residuals[k], cfg, None)?;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok(grad)
}

/// One frequency's gradient contribution; also returns the adjoint fields so
/// the caller can warm-start the next solve.
pub(crate) fn frequency_gradient(
    ops: &GreenOperators,
    f: &[f64],
    u: &Wavefield,
    r: &DataMatrix,
    cfg: &GmresConfig,
    guess: Option<&[Complex64]>,
) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let n = ops.n_cells();
    let adjoint_apply = |x: &[Complex64], out: &mut [Complex64]| {
        ops.apply_gh(x, out);
        for ((o, z), &c) in out.iter_mut().zip(x).zip(f) {
            *o = z - *o * c;
        }
    };
    let per_tx = (0..ops.n_tx)
        .into_par_iter()
        .map(|t| {
            let mut back = vec![ZERO; n];
            ops.apply_hh(r.column(t), &mut back);
            let rhs: Vec<Complex64> = back.iter().zip(f).map(|(b, &c)| b * c).collect();
            let mut lambda = match guess {
                Some(g) => g[t * n..(t + 1) * n].to_vec(),
                None => rhs.clone(),
            };
            gmres(adjoint_apply, &rhs, &mut lambda, cfg)?;
            let mut gh_lambda = vec![ZERO; n];
            ops.apply_gh(&lambda, &mut gh_lambda);
            let g: Vec<f64> = (0..n)
                .map(|m| -(u.column(t)[m].conj() * (back[m] + gh_lambda[m])).re)
                .collect();
            Ok((g, lambda))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grad = vec![0.0; n];
    let mut adjoint = Vec::with_capacity(n * ops.n_tx);
    for (g, lambda) in per_tx {
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        adjoint.extend_from_slice(&lambda);
    }
    Ok((grad, adjoint))
}

/// A differentiable function of the real image, as seen by the optimizers.
pub trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value(&mut self, f: &[f64]) -> Result<f64>;
    fn value_and_gradient(&mut self, f: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Misfit over a frequency batch divided by `sum_{j in batch} ||Y_j||^2`,
/// so that `f = 0` scores `1/2` whatever the data scale.
///
/// The data energy varies by orders of magnitude across the band, and the
/// normalization keeps absolute stopping tolerances meaningful. Forward and
/// adjoint solves are warm-started from the previous evaluation.
pub struct BatchMisfit<'a> {
    model: &'a ForwardModel,
    data: &'a ScatteredData,
    batch: Vec<usize>,
    gmres: GmresConfig,
    scale: f64,
    fields: Vec<Option<Wavefield>>,
    adjoints: Vec<Option<Vec<Complex64>>>,
    /// Number of forward evaluations so far.
    pub evaluations: usize,
}

impl<'a> BatchMisfit<'a> {
    pub fn new(model: &'a ForwardModel, data: &'a ScatteredData, batch: Vec<usize>, gmres: GmresConfig) -> Result<Self> {
        check_batch(model, data, &vec![0.0; model.grid.len()], &batch)?;
        gmres.validate()?;
        let energy = data.batch_norm_sqr(&batch);
        if energy == 0.0 {
            return Err(Error::Degenerate("data in the batch are identically zero".into()));
        }
        let len = batch.len();
        Ok(BatchMisfit {
            model,
            data,
            batch,
            gmres,
            scale: 1.0 / energy,
            fields: vec![None; len],
            adjoints: vec![None; len],
            evaluations: 0,
        })
    }

    pub fn batch(&self) -> &[usize] {
        &self.batch
    }

    /// Factor applied to the raw misfit.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Raw residuals and fields at `f`, refreshing the warm-start cache.
    pub fn residuals(&mut self, f: &[f64]) -> Result<(ResidualSet, WavefieldSet)> {
        check_batch(self.model, self.data, f, &self.batch)?;
        self.evaluations += 1;
        let mut residuals = Vec::with_capacity(self.batch.len());
        let mut fields = Vec::with_capacity(self.batch.len());
        for (k, &j) in self.batch.iter().enumerate() {
            let ops = &self.model.ops[j];
            let u = solve_total_field(ops, f, &self.gmres, self.fields[k].as_ref())?;
            let pred = synthesize_data(ops, f, &u)?;
            residuals.push(residual(&self.data.matrices[j], &pred));
            self.fields[k] = Some(u.clone());
            fields.push(u);
        }
        Ok((
            ResidualSet {
                freq_indices: self.batch.clone(),
                residuals,
            },
            WavefieldSet {
                freq_indices: self.batch.clone(),
                fields,
            },
        ))
    }
}

impl SmoothObjective for BatchMisfit<'_> {
    fn dim(&self) -> usize {
        self.model.grid.len()
    }

    fn value(&mut self, f: &[f64]) -> Result<f64> {
        let (res, _) = self.residuals(f)?;
        Ok(0.5 * self.scale * res.norm_sqr())
    }

    fn value_and_gradient(&mut self, f: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (res, fields) = self.residuals(f)?;
        let mut grad = vec![0.0; f.len()];
        for (k, &j) in self.batch.iter().enumerate() {
            let (g, lambda) = frequency_gradient(
                &self.model.ops[j],
                f,
                &fields.fields[k],
                &res.residuals[k],
                &self.gmres,
                self.adjoints[k].as_deref(),
            )?;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b * self.scale);
            self.adjoints[k] = Some(lambda);
        }
        Ok((0.5 * self.scale * res.norm_sqr(), grad))
    }
}
