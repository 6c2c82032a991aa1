use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::phantom_defs::{self as defs, Ellipse};
use super::{ContrastImage, Grid};
use crate::error::{Error, Result};

/// The named synthetic scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phantom {
    SheppLogan,
    Layered,
    Pipes,
    Cylinder,
}

impl Phantom {
    pub fn build(self, n: usize, fmax: f64) -> Result<ContrastImage> {
        match self {
            Phantom::SheppLogan => shepp_logan_phantom(n, fmax),
            Phantom::Layered => layered_phantom(n, fmax),
            Phantom::Pipes => pipes_phantom(n, fmax),
            Phantom::Cylinder => cylinder_scene_on(n, fmax),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phantom::SheppLogan => "shepp-logan",
            Phantom::Layered => "layered",
            Phantom::Pipes => "pipes",
            Phantom::Cylinder => "cylinder",
        }
    }
}

impl FromStr for Phantom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shepp-logan" => Ok(Phantom::SheppLogan),
            "layered" => Ok(Phantom::Layered),
            "pipes" => Ok(Phantom::Pipes),
            "cylinder" => Ok(Phantom::Cylinder),
            other => Err(Error::InvalidInput(format!("unknown phantom '{other}'"))),
        }
    }
}

fn check_args(n: usize, fmax: f64, min_n: usize) -> Result<Grid> {
    if n < min_n {
        return Err(Error::InvalidInput(format!(
            "phantom needs at least {min_n} cells per side, got {n}"
        )));
    }
    if !(fmax >= 0.0 && fmax.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "maximum contrast must be nonnegative, got {fmax}"
        )));
    }
    Grid::unit_square(n)
}

fn inside_ellipse(e: &Ellipse, x: f64, y: f64) -> bool {
    let (s, c) = e.angle_deg.to_radians().sin_cos();
    let dx = x - e.center_x;
    let dy = y - e.center_y;
    let u = c * dx + s * dy;
    let v = -s * dx + c * dy;
    (u / e.semi_x).powi(2) + (v / e.semi_y).powi(2) <= 1.0
}

fn layer_value(tops: &[f64], values: &[f64], y: f64) -> f64 {
    tops.iter()
        .zip(values)
        .find(|(&top, _)| y < top)
        .map(|(_, &v)| v)
        .unwrap_or(*values.last().expect("layer table is non-empty"))
}

/// Shepp-Logan head phantom with values `{0, 0.2, 0.3, 1} * fmax`.
pub fn shepp_logan_phantom(n: usize, fmax: f64) -> Result<ContrastImage> {
    let grid = check_args(n, fmax, 8)?;
    let img = ContrastImage::from_fn(grid, |x, y| {
        let mut value = 0.0;
        for e in &defs::SHEPP_LOGAN {
            if inside_ellipse(e, x, y) {
                value = e.value;
            }
        }
        value
    });
    Ok(img.scaled(fmax / defs::SHEPP_LOGAN_MAX))
}

/// Underground scene: horizontal layers (0.1 to 0.5) with a contrast-1 rhombus
/// holding a square void.
pub fn layered_phantom(n: usize, fmax: f64) -> Result<ContrastImage> {
    let grid = check_args(n, fmax, 8)?;
    let (cx, cy) = defs::RHOMBUS_CENTER;
    let (hx, hy) = defs::RHOMBUS_HALF_DIAGONALS;
    let img = ContrastImage::from_fn(grid, |x, y| {
        let (dx, dy) = ((x - cx).abs(), (y - cy).abs());
        if dx <= defs::HOLE_HALF_WIDTH && dy <= defs::HOLE_HALF_WIDTH {
            defs::HOLE_VALUE
        } else if dx / hx + dy / hy <= 1.0 {
            defs::RHOMBUS_VALUE
        } else {
            layer_value(&defs::LAYER_TOPS, &defs::LAYER_VALUES, y)
        }
    });
    Ok(img.scaled(fmax / defs::LAYERED_MAX))
}

/// Three-layer background crossed by two annular pipes, the large one filled
/// with contrast 1, the small one empty.
pub fn pipes_phantom(n: usize, fmax: f64) -> Result<ContrastImage> {
    let grid = check_args(n, fmax, 8)?;
    let img = ContrastImage::from_fn(grid, |x, y| {
        for pipe in &defs::PIPES {
            let r = ((x - pipe.center.0).powi(2) + (y - pipe.center.1).powi(2)).sqrt();
            let outer = 0.5 * pipe.outer_diameter;
            if r <= outer - pipe.wall_thickness {
                return pipe.interior_value;
            }
            if r <= outer {
                return pipe.wall_value;
            }
        }
        layer_value(&defs::PIPE_LAYER_TOPS, &defs::PIPE_LAYER_VALUES, y)
    });
    Ok(img.scaled(fmax / defs::PIPES_MAX))
}

/// Centered disk of radius 0.2 m and contrast `c` on the default 16x16 grid.
pub fn cylinder_scene(c: f64) -> Result<ContrastImage> {
    cylinder_scene_on(defs::CYLINDER_GRID, c)
}

/// Centered disk of radius 0.2 m and contrast `c` on an `n x n` grid.
pub fn cylinder_scene_on(n: usize, c: f64) -> Result<ContrastImage> {
    let grid = check_args(n, c, 2)?;
    let r2 = defs::CYLINDER_RADIUS * defs::CYLINDER_RADIUS;
    Ok(ContrastImage::from_fn(grid, |x, y| {
        if x * x + y * y <= r2 {
            c
        } else {
            0.0
        }
    }))
}

/// Nearest-neighbour resampling of a square image onto an `n_new x n_new` grid
/// over the same domain.
pub fn resample_nearest(img: &ContrastImage, n_new: usize) -> Result<ContrastImage> {
    if n_new < 2 {
        return Err(Error::InvalidInput(format!(
            "resample target must be at least 2, got {n_new}"
        )));
    }
    let g = img.grid;
    let (x_lo, x_hi, y_lo, y_hi) = g.bounding_box();
    let dx_new = (x_hi - x_lo) / n_new as f64;
    let dy_new = (y_hi - y_lo) / n_new as f64;
    let grid = Grid::new(
        n_new,
        n_new,
        dx_new,
        dy_new,
        x_lo + 0.5 * dx_new,
        y_lo + 0.5 * dy_new,
    )?;
    // source cell containing the new center, in exact rational arithmetic:
    // floor((i + 1/2) * n_old / n_new)
    let src = |i: usize, n_old: usize| ((2 * i + 1) * n_old / (2 * n_new)).min(n_old - 1);
    let mut values = Vec::with_capacity(grid.len());
    for ix in 0..n_new {
        for iy in 0..n_new {
            values.push(img.get(src(ix, g.nx), src(iy, g.ny)));
        }
    }
    ContrastImage::new(grid, values)
}
