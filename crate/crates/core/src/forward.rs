//! Total-field solves, synthetic data and measurement noise.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{ForwardModel, GreenOperators};
use crate::krylov::{gmres, GmresConfig};
use crate::scene::ContrastImage;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Total fields at one frequency: one contiguous column of length `N` per
/// transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefield {
    pub n_cells: usize,
    pub n_tx: usize,
    pub values: Vec<Complex64>,
    /// GMRES iterations spent per transmitter.
    pub iterations: Vec<usize>,
}

impl Wavefield {
    pub fn column(&self, t: usize) -> &[Complex64] {
        &self.values[t * self.n_cells..(t + 1) * self.n_cells]
    }
}

/// Total fields for a set of frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefieldSet {
    /// Schedule index of each entry of `fields`.
    pub freq_indices: Vec<usize>,
    pub fields: Vec<Wavefield>,
}

/// `n_rx x n_tx` complex data at one frequency, one column per transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub n_rx: usize,
    pub n_tx: usize,
    pub values: Vec<Complex64>,
}

impl DataMatrix {
    pub fn zeros(n_rx: usize, n_tx: usize) -> Self {
        DataMatrix {
            n_rx,
            n_tx,
            values: vec![ZERO; n_rx * n_tx],
        }
    }

    #[inline]
    pub fn get(&self, rx: usize, tx: usize) -> Complex64 {
        self.values[tx * self.n_rx + rx]
    }

    pub fn column(&self, t: usize) -> &[Complex64] {
        &self.values[t * self.n_rx..(t + 1) * self.n_rx]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// How noise was added to a data set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseInfo {
    /// `||noise|| / ||clean data||` over the full tensor.
    pub rel_energy: f64,
    pub seed: u64,
}

/// Multi-frequency measurements `Y_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteredData {
    pub freqs_hz: Vec<f64>,
    pub n_tx: usize,
    pub n_rx: usize,
    pub matrices: Vec<DataMatrix>,
    pub noise: Option<NoiseInfo>,
}

impl ScatteredData {
    pub fn new(freqs_hz: Vec<f64>, matrices: Vec<DataMatrix>) -> Result<Self> {
        if freqs_hz.len() != matrices.len() || matrices.is_empty() {
            return Err(Error::ShapeMismatch {
                what: "data matrices per frequency",
                expected: freqs_hz.len(),
                got: matrices.len(),
            });
        }
        let (n_rx, n_tx) = (matrices[0].n_rx, matrices[0].n_tx);
        for m in &matrices {
            if m.n_rx != n_rx || m.n_tx != n_tx || m.values.len() != n_rx * n_tx {
                return Err(Error::ShapeMismatch {
                    what: "data matrix entries",
                    expected: n_rx * n_tx,
                    got: m.values.len(),
                });
            }
            if m.values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::InvalidInput("data contain non-finite values".into()));
            }
        }
        Ok(ScatteredData {
            freqs_hz,
            n_tx,
            n_rx,
            matrices,
            noise: None,
        })
    }

    pub fn n_freq(&self) -> usize {
        self.matrices.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.matrices.iter().map(DataMatrix::norm_sqr).sum()
    }

    /// `sum_{j in batch} ||Y_j||_F^2`.
    pub fn batch_norm_sqr(&self, batch: &[usize]) -> f64 {
        batch.iter().map(|&j| self.matrices[j].norm_sqr()).sum()
    }

    /// Checks that the data were taken with the model's frequencies and sensors.
    pub fn check_compatible(&self, model: &ForwardModel) -> Result<()> {
        if self.n_freq() != model.n_freq() {
            return Err(Error::ShapeMismatch {
                what: "frequencies in data vs model",
                expected: model.n_freq(),
                got: self.n_freq(),
            });
        }
        for (a, b) in self.freqs_hz.iter().zip(model.schedule.freqs_hz()) {
            if (a - b).abs() > 1e-9 * b {
                return Err(Error::InvalidInput(format!(
                    "data frequency {a} Hz does not match model frequency {b} Hz"
                )));
            }
        }
        if self.n_tx != model.acquisition.n_tx() || self.n_rx != model.acquisition.n_rx() {
            return Err(Error::InvalidInput(format!(
                "data hold {} x {} sensors, model has {} x {}",
                self.n_tx,
                self.n_rx,
                model.acquisition.n_tx(),
                model.acquisition.n_rx()
            )));
        }
        Ok(())
    }
}

fn check_contrast(ops: &GreenOperators, f: &[f64]) -> Result<()> {
    if f.len() != ops.n_cells() {
        return Err(Error::ShapeMismatch {
            what: "contrast vector",
            expected: ops.n_cells(),
            got: f.len(),
        });
    }
    Ok(())
}

/// Solves `(I - G diag(f)) u_t = v_t` for every transmitter.
///
/// GMRES starts from `guess` when given (e.g. the fields of a nearby
/// contrast), otherwise from the incident field, so `f = 0` costs nothing.
pub fn solve_total_field(
    ops: &GreenOperators,
    f: &[f64],
    cfg: &GmresConfig,
    guess: Option<&Wavefield>,
) -> Result<Wavefield> {
    check_contrast(ops, f)?;
    cfg.validate()?;
    let n = ops.n_cells();
    if let Some(g) = guess {
        if g.n_cells != n || g.n_tx != ops.n_tx {
            return Err(Error::ShapeMismatch {
                what: "initial wavefield",
                expected: n * ops.n_tx,
                got: g.values.len(),
            });
        }
    }
    let apply = |x: &[Complex64], out: &mut [Complex64]| {
        let scaled: Vec<Complex64> = x.iter().zip(f).map(|(z, &c)| z * c).collect();
        ops.apply_g(&scaled, out);
        for (o, z) in out.iter_mut().zip(x) {
            *o = z - *o;
        }
    };
    let columns = (0..ops.n_tx)
        .into_par_iter()
        .map(|t| {
            let v = ops.incident(t);
            let mut x = match guess {
                Some(g) => g.column(t).to_vec(),
                None => v.to_vec(),
            };
            let stats = gmres(apply, v, &mut x, cfg)?;
            Ok((x, stats.iterations))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(n * ops.n_tx);
    let mut iterations = Vec::with_capacity(ops.n_tx);
    for (col, it) in columns {
        values.extend_from_slice(&col);
        iterations.push(it);
    }
    Ok(Wavefield {
        n_cells: n,
        n_tx: ops.n_tx,
        values,
        iterations,
    })
}

/// `Y = H diag(f) U`.
pub fn synthesize_data(ops: &GreenOperators, f: &[f64], u: &Wavefield) -> Result<DataMatrix> {
    check_contrast(ops, f)?;
    if u.n_cells != ops.n_cells() || u.n_tx != ops.n_tx {
        return Err(Error::ShapeMismatch {
            what: "wavefield",
            expected: ops.n_cells() * ops.n_tx,
            got: u.values.len(),
        });
    }
    Ok(apply_data_map(ops, f, |t| u.column(t)))
}

/// Born approximation `Y = H diag(f) V`.
pub fn born_data(ops: &GreenOperators, f: &[f64]) -> Result<DataMatrix> {
    check_contrast(ops, f)?;
    Ok(apply_data_map(ops, f, |t| ops.incident(t)))
}

fn apply_data_map<'a>(ops: &'a GreenOperators, f: &[f64], field: impl Fn(usize) -> &'a [Complex64]) -> DataMatrix {
    let mut out = DataMatrix::zeros(ops.n_rx, ops.n_tx);
    let mut weighted = vec![ZERO; ops.n_cells()];
    for t in 0..ops.n_tx {
        for ((w, u), &c) in weighted.iter_mut().zip(field(t)).zip(f) {
            *w = u * c;
        }
        ops.apply_h(&weighted, &mut out.values[t * ops.n_rx..(t + 1) * ops.n_rx]);
    }
    out
}

/// Solves the forward problem at every frequency of `model` and returns the
/// data together with the total fields.
pub fn simulate(model: &ForwardModel, f: &ContrastImage, cfg: &GmresConfig) -> Result<(ScatteredData, WavefieldSet)> {
    if f.grid != model.grid {
        return Err(Error::InvalidInput("contrast grid differs from the model grid".into()));
    }
    let mut matrices = Vec::with_capacity(model.n_freq());
    let mut fields = Vec::with_capacity(model.n_freq());
    for ops in &model.ops {
        let u = solve_total_field(ops, &f.values, cfg, None)?;
        matrices.push(synthesize_data(ops, &f.values, &u)?);
        fields.push(u);
    }
    let data = ScatteredData::new(model.schedule.freqs_hz().to_vec(), matrices)?;
    Ok((
        data,
        WavefieldSet {
            freq_indices: (0..model.n_freq()).collect(),
            fields,
        },
    ))
}

/// Born data at every frequency of `model`.
pub fn simulate_born(model: &ForwardModel, f: &ContrastImage) -> Result<ScatteredData> {
    let matrices = model
        .ops
        .iter()
        .map(|ops| born_data(ops, &f.values))
        .collect::<Result<Vec<_>>>()?;
    ScatteredData::new(model.schedule.freqs_hz().to_vec(), matrices)
}

/// Adds circular complex white Gaussian noise with `||noise|| = rel_energy ||Y||`
/// exactly, over all frequencies, transmitters and receivers together.
///
/// Samples are drawn in `(frequency, transmitter, receiver)` order from a
/// ChaCha20 stream seeded with `seed`, so the result is reproducible.
pub fn add_noise(data: &ScatteredData, rel_energy: f64, seed: u64) -> Result<ScatteredData> {
    if !(rel_energy >= 0.0 && rel_energy.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "relative noise energy must be nonnegative, got {rel_energy}"
        )));
    }
    let mut out = data.clone();
    out.noise = Some(NoiseInfo { rel_energy, seed });
    if rel_energy == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut noise: Vec<Vec<Complex64>> = Vec::with_capacity(data.n_freq());
    for m in &data.matrices {
        let mut draws = vec![ZERO; m.values.len()];
        for t in 0..m.n_tx {
            for r in 0..m.n_rx {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                draws[t * m.n_rx + r] = Complex64::new(re, im);
            }
        }
        noise.push(draws);
    }
    let drawn: f64 = noise.iter().flatten().map(|z| z.norm_sqr()).sum();
    let scale = rel_energy * data.norm_sqr().sqrt() / drawn.sqrt();
    for (m, n) in out.matrices.iter_mut().zip(&noise) {
        for (y, z) in m.values.iter_mut().zip(n) {
            *y += z * scale;
        }
    }
    Ok(out)
}
