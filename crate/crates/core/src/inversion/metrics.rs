use crate::error::{Error, Result};
use crate::forward::ScatteredData;
use crate::greens::ForwardModel;
use crate::krylov::GmresConfig;
use crate::objective::misfit;

/// Reported in place of an infinite SNR.
pub const SNR_CAP_DB: f64 = 300.0;

/// Data residual in percent: `100 sum_j F_j(f) / sum_j ||Y_j||^2` over every
/// frequency of the model.
pub fn metric_dr(f: &[f64], data: &ScatteredData, model: &ForwardModel, cfg: &GmresConfig) -> Result<f64> {
    data.check_compatible(model)?;
    let batch: Vec<usize> = (0..model.n_freq()).collect();
    let energy = data.batch_norm_sqr(&batch);
    if energy == 0.0 {
        return Err(Error::Degenerate("data are identically zero".into()));
    }
    let (value, _, _) = misfit(model, data, f, &batch, cfg)?;
    Ok(100.0 * value / energy)
}

/// Model SNR `-20 log10(||f - f_true|| / ||f_true||)` in dB, capped at
/// [`SNR_CAP_DB`].
pub fn metric_snr(f: &[f64], f_true: &[f64]) -> Result<f64> {
    if f.len() != f_true.len() {
        return Err(Error::ShapeMismatch {
            what: "reconstruction vs reference",
            expected: f_true.len(),
            got: f.len(),
        });
    }
    let reference: f64 = f_true.iter().map(|v| v * v).sum::<f64>().sqrt();
    if reference == 0.0 {
        return Err(Error::InvalidInput("reference image is identically zero".into()));
    }
    let err: f64 = f.iter().zip(f_true).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((-20.0 * (err / reference).log10()).min(SNR_CAP_DB))
}
