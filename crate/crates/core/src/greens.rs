//! 2-D free-space Green kernel and the discretized scattering operators.
//!
//! For one frequency the discrete Lippmann-Schwinger model reads
//! `u = v + G diag(f) u`, `y = H diag(f) u`, with
//!
//! * `G[m, n] = k^2 g(|r_m - r_n|) dx dy` off the diagonal and
//!   `k^2 * self_cell_coefficient` on it,
//! * `H[l, n] = g(|x_l - r_n|) dx dy` (no `k^2`),
//! * `v_t[m] = k^2 g(|r_m - s_t|) q_t` for a point transmitter at `s_t`.
//!
//! `G` only depends on the cell displacement, so it is a two-level Toeplitz
//! matrix and is applied through a zero-padded circulant FFT.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scene::{AcquisitionGeometry, FrequencySchedule, Grid};
use crate::special::{bessel_j0, bessel_j1, bessel_y0, y1_regular};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `g(rho) = -(i/4) H0^(2)(k rho)`.
pub fn green_kernel_2d(k: f64, rho: f64) -> Result<Complex64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidInput(format!("wavenumber must be positive, got {k}")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "Green kernel needs a positive distance (use the self-cell coefficient at 0), got {rho}"
        )));
    }
    Ok(kernel(k * rho))
}

#[inline]
fn kernel(z: f64) -> Complex64 {
    // -(i/4)(J0 - i Y0) = -Y0/4 - i J0/4
    Complex64::new(-0.25 * bessel_y0(z), -0.25 * bessel_j0(z))
}

/// Integral of `g` over the disk of radius `a = sqrt(dx dy / pi)` centered at
/// the observation point: `-(i pi a / 2k) H1^(2)(ka) - 1/k^2`.
///
/// The `-1/k^2` cancels the pole of `Y1`, so the real part is evaluated as
/// `-(pi a / 2k) (Y1(ka) + 2/(pi ka))`.
pub fn self_cell_coefficient(k: f64, dx: f64, dy: f64) -> Result<Complex64> {
    if !(k > 0.0 && dx > 0.0 && dy > 0.0 && k.is_finite() && dx.is_finite() && dy.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "self-cell coefficient needs positive k, dx, dy (got {k}, {dx}, {dy})"
        )));
    }
    let a = (dx * dy / std::f64::consts::PI).sqrt();
    let scale = std::f64::consts::PI * a / (2.0 * k);
    let ka = k * a;
    Ok(Complex64::new(-scale * y1_regular(ka), -scale * bessel_j1(ka)))
}

/// Complex amplitude of every transmitter (flat in frequency).
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub amplitudes: Vec<Complex64>,
}

impl SourceSpec {
    pub fn uniform(n_tx: usize, q: Complex64) -> Self {
        SourceSpec {
            amplitudes: vec![q; n_tx],
        }
    }

    /// Unit amplitude for every transmitter.
    pub fn unit(n_tx: usize) -> Self {
        Self::uniform(n_tx, Complex64::new(1.0, 0.0))
    }

    fn validate(&self, n_tx: usize) -> Result<()> {
        if self.amplitudes.len() != n_tx {
            return Err(Error::ShapeMismatch {
                what: "source amplitudes",
                expected: n_tx,
                got: self.amplitudes.len(),
            });
        }
        if self.amplitudes.iter().any(|q| !(q.re.is_finite() && q.im.is_finite())) {
            return Err(Error::InvalidInput("source amplitudes must be finite".into()));
        }
        Ok(())
    }
}

/// Zero-padded 2-D circulant embedding of the domain operator.
struct Convolution {
    px: usize,
    py: usize,
    /// FFT of the embedded kernel, row-major `px x py`.
    spectrum: Vec<Complex64>,
    fwd_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl Convolution {
    fn new(grid: &Grid, entry: impl Fn(isize, isize) -> Complex64) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let (px, py) = (2 * nx, 2 * ny);
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(px);
        let fwd_y = planner.plan_fft_forward(py);
        let inv_x = planner.plan_fft_inverse(px);
        let inv_y = planner.plan_fft_inverse(py);
        let wrap = |p: usize, n: usize| -> Option<isize> {
            if p < n {
                Some(p as isize)
            } else if p > n {
                Some(p as isize - 2 * n as isize)
            } else {
                None
            }
        };
        let mut spectrum = vec![ZERO; px * py];
        for ix in 0..px {
            for iy in 0..py {
                if let (Some(sx), Some(sy)) = (wrap(ix, nx), wrap(iy, ny)) {
                    spectrum[ix * py + iy] = entry(sx, sy);
                }
            }
        }
        let mut conv = Convolution {
            px,
            py,
            spectrum: Vec::new(),
            fwd_x,
            fwd_y,
            inv_x,
            inv_y,
        };
        conv.transform(&mut spectrum, false);
        conv.spectrum = spectrum;
        conv
    }

    /// In-place 2-D FFT of a row-major `px x py` buffer.
    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let (px, py) = (self.px, self.py);
        let (fx, fy) = if inverse {
            (&self.inv_x, &self.inv_y)
        } else {
            (&self.fwd_x, &self.fwd_y)
        };
        fy.process(buf);
        let mut column = vec![ZERO; px];
        for iy in 0..py {
            for ix in 0..px {
                column[ix] = buf[ix * py + iy];
            }
            fx.process(&mut column);
            for ix in 0..px {
                buf[ix * py + iy] = column[ix];
            }
        }
    }

    fn apply(&self, grid: &Grid, x: &[Complex64], out: &mut [Complex64]) {
        let (nx, ny, py) = (grid.nx, grid.ny, self.py);
        let mut buf = vec![ZERO; self.px * py];
        for ix in 0..nx {
            buf[ix * py..ix * py + ny].copy_from_slice(&x[ix * ny..(ix + 1) * ny]);
        }
        self.transform(&mut buf, false);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.transform(&mut buf, true);
        let norm = 1.0 / (self.px * py) as f64;
        for ix in 0..nx {
            for iy in 0..ny {
                out[ix * ny + iy] = buf[ix * py + iy] * norm;
            }
        }
    }
}

/// Scattering operators at one frequency.
pub struct GreenOperators {
    /// Index of the frequency in its schedule.
    pub freq_index: usize,
    pub freq_hz: f64,
    pub k: f64,
    pub grid: Grid,
    pub n_tx: usize,
    pub n_rx: usize,
    /// `G` entry for cell displacement `(0, 0)`.
    pub diagonal: Complex64,
    /// Receiver matrix, row-major `n_rx x N`.
    pub h: Vec<Complex64>,
    /// Incident fields, one contiguous column of length `N` per transmitter.
    pub v: Vec<Complex64>,
    conv: Convolution,
}

impl std::fmt::Debug for GreenOperators {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenOperators")
            .field("freq_index", &self.freq_index)
            .field("freq_hz", &self.freq_hz)
            .field("grid", &self.grid)
            .field("n_tx", &self.n_tx)
            .field("n_rx", &self.n_rx)
            .finish_non_exhaustive()
    }
}

/// Builds `G`, `H` and `V` for frequency `j` of `sched`.
pub fn build_green_operators(
    grid: &Grid,
    acq: &AcquisitionGeometry,
    sched: &FrequencySchedule,
    j: usize,
    src: &SourceSpec,
) -> Result<GreenOperators> {
    if j >= sched.len() {
        return Err(Error::InvalidInput(format!(
            "frequency index {j} out of range for {} frequencies",
            sched.len()
        )));
    }
    acq.check_outside(grid)?;
    src.validate(acq.n_tx())?;
    let k = sched.wavenumber(j);
    let k2 = k * k;
    let area = grid.cell_area();
    let diagonal = k2 * self_cell_coefficient(k, grid.dx, grid.dy)?;
    let (dx, dy) = (grid.dx, grid.dy);
    let conv = Convolution::new(grid, |sx, sy| {
        if sx == 0 && sy == 0 {
            diagonal
        } else {
            let rho = ((sx as f64 * dx).powi(2) + (sy as f64 * dy).powi(2)).sqrt();
            k2 * area * kernel(k * rho)
        }
    });
    let n = grid.len();
    let centers: Vec<[f64; 2]> = grid.centers().collect();
    let dist = |p: &[f64; 2], c: &[f64; 2]| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();

    let mut h = vec![ZERO; acq.n_rx() * n];
    for (l, p) in acq.rx.iter().enumerate() {
        for (m, c) in centers.iter().enumerate() {
            h[l * n + m] = area * kernel(k * dist(p, c));
        }
    }
    let mut v = vec![ZERO; acq.n_tx() * n];
    for (t, p) in acq.tx.iter().enumerate() {
        let q = src.amplitudes[t];
        for (m, c) in centers.iter().enumerate() {
            v[t * n + m] = k2 * kernel(k * dist(p, c)) * q;
        }
    }
    Ok(GreenOperators {
        freq_index: j,
        freq_hz: sched.freq_hz(j),
        k,
        grid: *grid,
        n_tx: acq.n_tx(),
        n_rx: acq.n_rx(),
        diagonal,
        h,
        v,
        conv,
    })
}

impl GreenOperators {
    pub fn n_cells(&self) -> usize {
        self.grid.len()
    }

    /// Incident field of transmitter `t`.
    pub fn incident(&self, t: usize) -> &[Complex64] {
        let n = self.n_cells();
        &self.v[t * n..(t + 1) * n]
    }

    /// `out = G x`.
    pub fn apply_g(&self, x: &[Complex64], out: &mut [Complex64]) {
        self.conv.apply(&self.grid, x, out);
    }

    /// `out = G^H x`. `G` is complex symmetric, so `G^H x = conj(G conj(x))`.
    pub fn apply_gh(&self, x: &[Complex64], out: &mut [Complex64]) {
        let xc: Vec<Complex64> = x.iter().map(|z| z.conj()).collect();
        self.conv.apply(&self.grid, &xc, out);
        out.iter_mut().for_each(|z| *z = z.conj());
    }

    /// `out = H x` (length `n_rx`).
    pub fn apply_h(&self, x: &[Complex64], out: &mut [Complex64]) {
        let n = self.n_cells();
        for (l, o) in out.iter_mut().enumerate() {
            *o = self.h[l * n..(l + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `out = H^H r` (length `N`).
    pub fn apply_hh(&self, r: &[Complex64], out: &mut [Complex64]) {
        let n = self.n_cells();
        out.iter_mut().for_each(|z| *z = ZERO);
        for (l, rl) in r.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(&self.h[l * n..(l + 1) * n]) {
                *o += a.conj() * rl;
            }
        }
    }

    /// Explicit `N x N` matrix of `G`, row-major. Quadratic memory; meant for
    /// small grids and cross-checks.
    pub fn dense_g(&self) -> Vec<Complex64> {
        let n = self.n_cells();
        let g = self.grid;
        let k2 = self.k * self.k;
        let area = g.cell_area();
        let mut out = vec![ZERO; n * n];
        for m in 0..n {
            let (mx, my) = g.coords(m);
            for p in 0..n {
                let (px, py) = g.coords(p);
                out[m * n + p] = if m == p {
                    self.diagonal
                } else {
                    let ddx = (mx as f64 - px as f64) * g.dx;
                    let ddy = (my as f64 - py as f64) * g.dy;
                    k2 * area * kernel(self.k * (ddx * ddx + ddy * ddy).sqrt())
                };
            }
        }
        out
    }
}

/// Operators for every frequency of a schedule on one grid and acquisition.
#[derive(Debug)]
pub struct ForwardModel {
    pub grid: Grid,
    pub acquisition: AcquisitionGeometry,
    pub schedule: FrequencySchedule,
    pub ops: Vec<GreenOperators>,
}

impl ForwardModel {
    pub fn new(
        grid: Grid,
        acquisition: AcquisitionGeometry,
        schedule: FrequencySchedule,
        src: &SourceSpec,
    ) -> Result<Self> {
        let ops = (0..schedule.len())
            .into_par_iter()
            .map(|j| build_green_operators(&grid, &acquisition, &schedule, j, src))
            .collect::<Result<Vec<_>>>()?;
        Ok(ForwardModel {
            grid,
            acquisition,
            schedule,
            ops,
        })
    }

    /// Unit point sources at every transmitter.
    pub fn with_unit_sources(
        grid: Grid,
        acquisition: AcquisitionGeometry,
        schedule: FrequencySchedule,
    ) -> Result<Self> {
        let src = SourceSpec::unit(acquisition.n_tx());
        Self::new(grid, acquisition, schedule, &src)
    }

    pub fn n_freq(&self) -> usize {
        self.ops.len()
    }
}
