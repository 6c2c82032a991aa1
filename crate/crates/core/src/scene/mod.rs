//! Grids, acquisition geometry, frequency schedules and synthetic phantoms.

pub mod phantom_defs;
mod phantoms;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use phantoms::{
    cylinder_scene, cylinder_scene_on, layered_phantom, pipes_phantom, resample_nearest,
    shepp_logan_phantom, Phantom,
};

/// Vacuum speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Half-width of the square object domain `[-0.5, 0.5]^2` in metres.
pub const DOMAIN_HALF_WIDTH: f64 = 0.5;

/// Regular cell-centered grid.
///
/// Cells are enumerated column-major with `y` fastest: the flat index of cell
/// `(ix, iy)` is `ix * ny + iy`. Every module uses this order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// x coordinate of the center of cell column 0.
    pub x0: f64,
    /// y coordinate of the center of cell row 0.
    pub y0: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, x0: f64, y0: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2x2 cells, got {nx}x{ny}"
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "cell sizes must be positive, got dx={dx}, dy={dy}"
            )));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::InvalidInput("grid origin must be finite".into()));
        }
        Ok(Grid { nx, ny, dx, dy, x0, y0 })
    }

    /// `n x n` grid over the 1 m x 1 m object domain.
    pub fn unit_square(n: usize) -> Result<Self> {
        let h = 2.0 * DOMAIN_HALF_WIDTH / n as f64;
        Grid::new(n, n, h, h, -DOMAIN_HALF_WIDTH + 0.5 * h, -DOMAIN_HALF_WIDTH + 0.5 * h)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        ix * self.ny + iy
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.ny, idx % self.ny)
    }

    #[inline]
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let (ix, iy) = self.coords(idx);
        [self.x0 + ix as f64 * self.dx, self.y0 + iy as f64 * self.dy]
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Bounding box `(xmin, xmax, ymin, ymax)` of the cells (not the centers).
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        (
            self.x0 - 0.5 * self.dx,
            self.x0 + (self.nx as f64 - 0.5) * self.dx,
            self.y0 - 0.5 * self.dy,
            self.y0 + (self.ny as f64 - 0.5) * self.dy,
        )
    }

    pub fn centers(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(move |i| self.center(i))
    }
}

/// Transmitter and receiver positions in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionGeometry {
    pub tx: Vec<[f64; 2]>,
    pub rx: Vec<[f64; 2]>,
}

impl AcquisitionGeometry {
    pub fn new(tx: Vec<[f64; 2]>, rx: Vec<[f64; 2]>) -> Result<Self> {
        if tx.is_empty() || rx.is_empty() {
            return Err(Error::InvalidInput(
                "acquisition needs at least one transmitter and one receiver".into(),
            ));
        }
        if tx.iter().chain(rx.iter()).any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidInput("non-finite sensor position".into()));
        }
        Ok(AcquisitionGeometry { tx, rx })
    }

    pub fn n_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx.len()
    }

    /// Checks that no sensor lies inside (or on the edge of) the grid's bounding box.
    pub fn check_outside(&self, grid: &Grid) -> Result<()> {
        let (x0, x1, y0, y1) = grid.bounding_box();
        for p in self.tx.iter().chain(self.rx.iter()) {
            if p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1 {
                return Err(Error::InvalidInput(format!(
                    "sensor at ({}, {}) lies inside the object grid",
                    p[0], p[1]
                )));
            }
        }
        Ok(())
    }
}

/// Five collocated transmitter/receiver pairs on `y = -0.6 m`, equispaced on
/// `x in [-0.5, 0.5] m`.
pub fn default_acquisition() -> AcquisitionGeometry {
    let positions: Vec<[f64; 2]> = (0..5).map(|i| [-0.5 + 0.25 * i as f64, -0.6]).collect();
    AcquisitionGeometry {
        tx: positions.clone(),
        rx: positions,
    }
}

/// Strictly increasing list of frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySchedule {
    freqs_hz: Vec<f64>,
}

impl FrequencySchedule {
    pub fn new(freqs_hz: Vec<f64>) -> Result<Self> {
        if freqs_hz.is_empty() {
            return Err(Error::InvalidInput("empty frequency schedule".into()));
        }
        if freqs_hz.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
            return Err(Error::InvalidInput("frequencies must be positive".into()));
        }
        if freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(FrequencySchedule { freqs_hz })
    }

    pub fn from_mhz(mhz: &[f64]) -> Result<Self> {
        Self::new(mhz.iter().map(|m| m * 1e6).collect())
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn freq_hz(&self, j: usize) -> f64 {
        self.freqs_hz[j]
    }

    /// `k = 2 pi nu / c`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.freqs_hz[j] / SPEED_OF_LIGHT
    }

    /// `count` entries at evenly spaced indices, always keeping the first and last.
    pub fn subsample(&self, count: usize) -> Result<Self> {
        let n = self.len();
        if count == 0 || count > n {
            return Err(Error::InvalidInput(format!(
                "cannot pick {count} of {n} frequencies"
            )));
        }
        if count == 1 {
            return Self::new(vec![self.freqs_hz[0]]);
        }
        let picked = (0..count)
            .map(|i| {
                let pos = (i as f64 * (n - 1) as f64 / (count - 1) as f64).round() as usize;
                self.freqs_hz[pos]
            })
            .collect();
        Self::new(picked)
    }

    /// Keeps the entries at `indices` (ascending).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidInput(format!("frequency index {bad} out of range")));
        }
        Self::new(indices.iter().map(|&i| self.freqs_hz[i]).collect())
    }
}

/// The three acquisition bands merged into one ascending schedule:
/// `{10 + 5j}` MHz (j < 18), `{100 + 50j}` MHz (j < 18) and `{1000 + 100j}` MHz (j < 11).
pub fn frequency_bands() -> FrequencySchedule {
    let mut mhz: Vec<f64> = (0..18)
        .map(|j| 10.0 + 5.0 * j as f64)
        .chain((0..18).map(|j| 100.0 + 50.0 * j as f64))
        .chain((0..11).map(|j| 1000.0 + 100.0 * j as f64))
        .collect();
    mhz.sort_by(|a, b| a.total_cmp(b));
    mhz.dedup();
    FrequencySchedule::from_mhz(&mhz).expect("band definition is valid")
}

/// Real contrast map on a grid, flat in the grid's cell order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastImage {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ContrastImage {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                what: "contrast image",
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("contrast values must be finite".into()));
        }
        Ok(ContrastImage { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        ContrastImage {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = grid.centers().map(|[x, y]| f(x, y)).collect();
        ContrastImage { grid, values }
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.index(ix, iy)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ContrastImage {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Distinct values, ascending, compared exactly.
    pub fn value_set(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}
