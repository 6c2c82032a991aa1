use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{solve_total_field, synthesize_data};
use crate::greens::ForwardModel;
use crate::krylov::{conjugate_gradient, GmresConfig};
use crate::scene::{AcquisitionGeometry, ContrastImage, FrequencySchedule, Phantom};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub phantom: Phantom,
    pub n: usize,
    pub fmax: f64,
    pub freqs_mhz: Vec<f64>,
    /// Ridge weight relative to the largest eigenvalue of the normal operator.
    pub ridge: f64,
    pub cg_max_iter: usize,
    pub cg_tol: f64,
    pub gmres: GmresConfig,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            phantom: Phantom::SheppLogan,
            n: 32,
            fmax: 0.1,
            freqs_mhz: vec![2000.0, 3000.0, 5000.0],
            ridge: 1e-6,
            cg_max_iter: 500,
            cg_tol: 1e-8,
            gmres: GmresConfig::default(),
        }
    }
}

/// One transmitter at `(-0.6, 0)`; five receivers on `x = -0.6`
/// (reflection) or `x = 0.6` (transmission), `y` evenly spaced on
/// `[-0.5, 0.5]`.
pub fn side_geometry(transmission: bool) -> AcquisitionGeometry {
    let x_rx = if transmission { 0.6 } else { -0.6 };
    let rx = (0..5).map(|i| [x_rx, -0.5 + 0.25 * i as f64]).collect();
    AcquisitionGeometry::new(vec![[-0.6, 0.0]], rx).expect("fixed geometry is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeResult {
    pub reconstruction: ContrastImage,
    /// `|DFT|`, shifted so zero frequency sits at `(n/2, n/2)`; `[ky][kx]`.
    pub magnitude: Vec<Vec<f64>>,
    pub low_band_fraction: f64,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumDemo {
    pub truth: ContrastImage,
    pub transmission: ModeResult,
    pub reflection: ModeResult,
}

pub fn spectrum_demo(cfg: &SpectrumConfig) -> Result<SpectrumDemo> {
    if !(cfg.ridge > 0.0) || cfg.cg_max_iter == 0 || !(cfg.cg_tol > 0.0) {
        return Err(Error::InvalidInput("ridge, CG tolerance and CG budget must be positive".into()));
    }
    let truth = cfg.phantom.build(cfg.n, cfg.fmax)?;
    let sched = FrequencySchedule::from_mhz(&cfg.freqs_mhz)?;
    let mut modes = [true, false].into_iter().map(|transmission| {
        let model = ForwardModel::with_unit_sources(truth.grid, side_geometry(transmission), sched.clone())?;
        let (f, iters) = linear_reconstruction(&model, &truth.values, cfg)?;
        let img = ContrastImage::new(truth.grid, f)?;
        Ok(ModeResult {
            magnitude: shifted_magnitude(&img),
            low_band_fraction: low_band_fraction(&img),
            reconstruction: img,
            cg_iterations: iters,
        })
    });
    let transmission = modes.next().expect("two modes")?;
    let reflection = modes.next().expect("two modes")?;
    Ok(SpectrumDemo {
        truth,
        transmission,
        reflection,
    })
}

/// Ridge-regularized least squares for `f` with the true total fields
/// frozen: `(Re A^H A + eps I) f = Re A^H y`, solved by CG and stopped
/// early at the iteration budget.
fn linear_reconstruction(model: &ForwardModel, f_true: &[f64], cfg: &SpectrumConfig) -> Result<(Vec<f64>, usize)> {
    let n = f_true.len();
    let mut fields = Vec::new();
    let mut data = Vec::new();
    for ops in &model.ops {
        let u = solve_total_field(ops, f_true, &cfg.gmres, None)?;
        data.push(synthesize_data(ops, f_true, &u)?);
        fields.push(u);
    }
    let normal = |x: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut src = vec![ZERO; n];
        let mut back = vec![ZERO; n];
        for (ops, u) in model.ops.iter().zip(&fields) {
            let mut rec = vec![ZERO; ops.n_rx];
            for t in 0..ops.n_tx {
                for ((s, ui), &xi) in src.iter_mut().zip(u.column(t)).zip(x) {
                    *s = ui * xi;
                }
                ops.apply_h(&src, &mut rec);
                ops.apply_hh(&rec, &mut back);
                for ((o, b), ui) in out.iter_mut().zip(&back).zip(u.column(t)) {
                    *o += (ui.conj() * b).re;
                }
            }
        }
    };
    let mut rhs = vec![0.0; n];
    let mut back = vec![ZERO; n];
    for ((ops, u), y) in model.ops.iter().zip(&fields).zip(&data) {
        for t in 0..ops.n_tx {
            ops.apply_hh(y.column(t), &mut back);
            for ((o, b), ui) in rhs.iter_mut().zip(&back).zip(u.column(t)) {
                *o += (ui.conj() * b).re;
            }
        }
    }
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok((vec![0.0; n], 0));
    }
    let lambda_max = power_iteration(&normal, n);
    let eps = cfg.ridge * lambda_max;
    let regularized = |x: &[f64], out: &mut [f64]| {
        normal(x, out);
        out.iter_mut().zip(x).for_each(|(o, v)| *o += eps * v);
    };
    let mut f = vec![0.0; n];
    let iters = match conjugate_gradient(regularized, |_| {}, &rhs, &mut f, cfg.cg_tol, cfg.cg_max_iter) {
        Ok(stats) => stats.iterations,
        Err(Error::NotConverged { iterations, .. }) => iterations,
        Err(e) => return Err(e),
    };
    Ok((f, iters))
}

fn power_iteration(apply: &impl Fn(&[f64], &mut [f64]), n: usize) -> f64 {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        apply(&v, &mut w);
        let next: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        std::mem::swap(&mut v, &mut w);
        if (next - lambda).abs() <= 1e-6 * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// 2-D DFT of the image as a `[ky][kx]` array (unshifted).
fn dft2(img: &ContrastImage) -> Vec<Vec<Complex64>> {
    let g = img.grid;
    let mut planner = FftPlanner::new();
    let fx = planner.plan_fft_forward(g.nx);
    let fy = planner.plan_fft_forward(g.ny);
    let mut rows: Vec<Vec<Complex64>> = (0..g.ny)
        .map(|iy| (0..g.nx).map(|ix| Complex64::new(img.get(ix, iy), 0.0)).collect())
        .collect();
    for r in rows.iter_mut() {
        fx.process(r);
    }
    let mut col = vec![ZERO; g.ny];
    for kx in 0..g.nx {
        for (c, r) in col.iter_mut().zip(&rows) {
            *c = r[kx];
        }
        fy.process(&mut col);
        for (c, r) in col.iter().zip(rows.iter_mut()) {
            r[kx] = *c;
        }
    }
    rows
}

fn signed_freq(k: usize, n: usize) -> f64 {
    let k = k as f64;
    let n = n as f64;
    if k >= n / 2.0 {
        (k - n) / n
    } else {
        k / n
    }
}

pub fn shifted_magnitude(img: &ContrastImage) -> Vec<Vec<f64>> {
    let g = img.grid;
    let spec = dft2(img);
    (0..g.ny)
        .map(|sy| {
            let ky = (sy + g.ny - g.ny / 2) % g.ny;
            (0..g.nx)
                .map(|sx| spec[ky][(sx + g.nx - g.nx / 2) % g.nx].norm())
                .collect()
        })
        .collect()
}

/// Share of spectral energy at `|xi| < 1/8` cycles per cell (a quarter of
/// Nyquist); zero for a zero image.
pub fn low_band_fraction(img: &ContrastImage) -> f64 {
    let g = img.grid;
    let spec = dft2(img);
    let (mut low, mut total) = (0.0, 0.0);
    for (ky, row) in spec.iter().enumerate() {
        for (kx, v) in row.iter().enumerate() {
            let e = v.norm_sqr();
            total += e;
            if signed_freq(kx, g.nx).hypot(signed_freq(ky, g.ny)) < 0.125 {
                low += e;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        low / total
    }
}

pub fn write_magnitude_csv<W: Write>(mag: &[Vec<f64>], mut out: W) -> std::io::Result<()> {
    for row in mag {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Grid;

    #[test]
    fn constant_image_is_all_low_band() {
        let img = ContrastImage::new(Grid::unit_square(8).unwrap(), vec![2.0; 64]).unwrap();
        assert!((low_band_fraction(&img) - 1.0).abs() < 1e-12);
        let mag = shifted_magnitude(&img);
        assert!((mag[4][4] - 128.0).abs() < 1e-9);
        assert!(mag.iter().flatten().filter(|v| **v > 1e-9).count() == 1);
    }

    #[test]
    fn checkerboard_is_all_high_band() {
        let g = Grid::unit_square(8).unwrap();
        let img = ContrastImage::from_fn(g, |x, y| {
            let (ix, iy) = (((x + 0.5) * 8.0) as i64, ((y + 0.5) * 8.0) as i64);
            if (ix + iy) % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        });
        assert!(low_band_fraction(&img) < 1e-12);
    }

    #[test]
    fn zero_object_gives_zero_spectra() {
        let cfg = SpectrumConfig {
            n: 8,
            fmax: 0.0,
            ..Default::default()
        };
        let demo = spectrum_demo(&cfg).unwrap();
        for m in [&demo.transmission, &demo.reflection] {
            assert!(m.magnitude.iter().flatten().all(|&v| v == 0.0));
            assert_eq!(m.low_band_fraction, 0.0);
        }
    }

    #[test]
    fn geometries_face_the_object() {
        let t = side_geometry(true);
        let r = side_geometry(false);
        assert!(t.rx.iter().all(|p| p[0] == 0.6));
        assert!(r.rx.iter().all(|p| p[0] == -0.6));
        assert_eq!(t.tx, r.tx);
    }
}
