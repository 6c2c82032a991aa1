use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{simulate, ScatteredData};
use crate::greens::ForwardModel;
use crate::krylov::GmresConfig;
use crate::objective::misfit;
use crate::scene::{cylinder_scene_on, default_acquisition, FrequencySchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandscapeConfig {
    /// Cells per side of the cylinder grid.
    pub n: usize,
    pub c_true: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// Number of sweep points, ends included.
    pub c_steps: usize,
    pub freqs_mhz: Vec<f64>,
    /// Width of the sliding fixed-size batches.
    pub batch_size: usize,
    pub gmres: GmresConfig,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        LandscapeConfig {
            n: 16,
            c_true: 10.0,
            c_min: 0.0,
            c_max: 20.0,
            c_steps: 81,
            freqs_mhz: vec![10.0, 50.0, 100.0, 200.0, 300.0, 400.0],
            batch_size: 2,
            gmres: GmresConfig {
                restart: 200,
                max_iter: 4000,
                ..GmresConfig::default()
            },
        }
    }
}

impl LandscapeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c_steps < 3 || !(self.c_max > self.c_min) || self.c_min < 0.0 {
            return Err(Error::InvalidInput("sweep needs c_min >= 0, c_max > c_min and at least 3 points".into()));
        }
        if self.batch_size == 0 || self.batch_size > self.freqs_mhz.len() {
            return Err(Error::InvalidInput(format!(
                "batch size {} does not fit {} frequencies",
                self.batch_size,
                self.freqs_mhz.len()
            )));
        }
        if !(self.c_true >= 0.0) {
            return Err(Error::InvalidInput("true contrast must be nonnegative".into()));
        }
        self.gmres.validate()
    }

    pub fn sweep(&self) -> Vec<f64> {
        let h = (self.c_max - self.c_min) / (self.c_steps - 1) as f64;
        (0..self.c_steps).map(|i| self.c_min + h * i as f64).collect()
    }
}

/// Misfit curves over the cylinder contrast, each normalized by the data
/// energy of the frequencies it sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub c: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    /// `[j][i]`: frequency `j` alone.
    pub per_frequency: Vec<Vec<f64>>,
    /// `[s][i]`: frequencies `s..s + batch_size`.
    pub fixed_batch: Vec<Vec<f64>>,
    pub batch_size: usize,
    /// `[j][i]`: frequencies `0..=j`.
    pub incremental: Vec<Vec<f64>>,
}

pub fn landscape(cfg: &LandscapeConfig) -> Result<Landscape> {
    cfg.validate()?;
    let truth = cylinder_scene_on(cfg.n, cfg.c_true)?;
    let shape = cylinder_scene_on(cfg.n, 1.0)?.values;
    let sched = FrequencySchedule::from_mhz(&cfg.freqs_mhz)?;
    let model = ForwardModel::with_unit_sources(truth.grid, default_acquisition(), sched)?;
    let (data, _) = simulate(&model, &truth, &cfg.gmres)?;
    let nf = model.n_freq();
    let energy: Vec<f64> = data.matrices.iter().map(|m| m.norm_sqr()).collect();
    if energy.iter().any(|&e| e == 0.0) {
        return Err(Error::Degenerate("a frequency carries no scattered energy".into()));
    }
    let c = cfg.sweep();
    // raw[i][j] = F_j(c_i)
    let raw: Vec<Vec<f64>> = c
        .par_iter()
        .map(|&ci| per_frequency_misfit(&model, &data, &shape, ci, &cfg.gmres))
        .collect::<Result<_>>()?;
    let curve = |js: &[usize]| -> Vec<f64> {
        let e: f64 = js.iter().map(|&j| energy[j]).sum();
        raw.iter().map(|row| js.iter().map(|&j| row[j]).sum::<f64>() / e).collect()
    };
    Ok(Landscape {
        freqs_hz: data.freqs_hz.clone(),
        per_frequency: (0..nf).map(|j| curve(&[j])).collect(),
        fixed_batch: (0..=nf - cfg.batch_size)
            .map(|s| curve(&(s..s + cfg.batch_size).collect::<Vec<_>>()))
            .collect(),
        batch_size: cfg.batch_size,
        incremental: (0..nf).map(|j| curve(&(0..=j).collect::<Vec<_>>())).collect(),
        c,
    })
}

fn per_frequency_misfit(model: &ForwardModel, data: &ScatteredData, shape: &[f64], c: f64, gmres: &GmresConfig) -> Result<Vec<f64>> {
    let f: Vec<f64> = shape.iter().map(|s| c * s).collect();
    (0..model.n_freq())
        .map(|j| misfit(model, data, &f, &[j], gmres).map(|m| m.0))
        .collect()
}

impl Landscape {
    /// Long format: `curve,index,c,value` with `curve` one of
    /// `frequency`, `batch` or `incremental` and `index` the frequency,
    /// first batch member, or last included frequency.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "curve,index,freq_hz,c,value")?;
        let mut block = |name: &str, curves: &[Vec<f64>], freq: &dyn Fn(usize) -> f64| -> std::io::Result<()> {
            for (k, curve) in curves.iter().enumerate() {
                for (c, v) in self.c.iter().zip(curve) {
                    writeln!(out, "{name},{k},{:?},{c:?},{v:?}", freq(k))?;
                }
            }
            Ok(())
        };
        block("frequency", &self.per_frequency, &|k| self.freqs_hz[k])?;
        block("batch", &self.fixed_batch, &|k| self.freqs_hz[k + self.batch_size - 1])?;
        block("incremental", &self.incremental, &|k| self.freqs_hz[k])
    }
}

/// Interior local minima of a sampled curve; a flat run counts once when
/// both of its neighbours are higher.
pub fn count_local_minima(curve: &[f64]) -> usize {
    let mut count = 0;
    let mut i = 1;
    while i + 1 < curve.len() {
        if curve[i] < curve[i - 1] {
            let mut k = i;
            while k + 1 < curve.len() && curve[k + 1] == curve[i] {
                k += 1;
            }
            if k + 1 < curve.len() && curve[k + 1] > curve[i] {
                count += 1;
            }
            i = k + 1;
        } else {
            i += 1;
        }
    }
    count
}

/// Position of the smallest sample.
pub fn argmin(curve: &[f64]) -> Option<usize> {
    curve
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}
