//! Frozen phantom geometry.
//!
//! Only the contrast levels and the pipe diameters are fixed by the
//! experiment description; every other dimension below is a choice made once
//! here so that all phantoms are deterministic. Coordinates are metres on the
//! `[-0.5, 0.5]^2` object domain; transmitters sit below it at `y = -0.6`, so
//! "depth" grows with `y`.

/// Ellipse painted onto the Shepp-Logan variant. Later entries overwrite
/// earlier ones (painter's order), so the image only ever holds the listed
/// values.
#[derive(Debug, Clone, Copy)]
pub struct Ellipse {
    pub value: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub center_x: f64,
    pub center_y: f64,
    /// Rotation in degrees, counter-clockwise.
    pub angle_deg: f64,
}

const fn ellipse(value: f64, semi_x: f64, semi_y: f64, cx: f64, cy: f64, angle_deg: f64) -> Ellipse {
    // the classic parameters live on [-1, 1]^2; halve them for the 1 m domain
    Ellipse {
        value,
        semi_x: 0.5 * semi_x,
        semi_y: 0.5 * semi_y,
        center_x: 0.5 * cx,
        center_y: 0.5 * cy,
        angle_deg,
    }
}

/// Shepp-Logan variant with the value set {0, 0.2, 0.3, 1}. The skull is
/// thicker than the classic 0.69/0.6624 pair so that it survives cell-center
/// sampling down to 8x8.
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    ellipse(1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    ellipse(0.2, 0.55, 0.78, 0.0, -0.0184, 0.0),
    ellipse(0.0, 0.11, 0.31, 0.22, 0.0, -18.0),
    ellipse(0.0, 0.16, 0.41, -0.22, 0.0, 18.0),
    ellipse(0.3, 0.21, 0.25, 0.0, 0.35, 0.0),
    ellipse(0.3, 0.046, 0.046, 0.0, 0.1, 0.0),
    ellipse(0.3, 0.046, 0.046, 0.0, -0.1, 0.0),
    ellipse(0.3, 0.046, 0.023, -0.08, -0.605, 0.0),
    ellipse(0.3, 0.023, 0.023, 0.0, -0.606, 0.0),
    ellipse(0.3, 0.023, 0.046, 0.06, -0.605, 0.0),
];

pub const SHEPP_LOGAN_MAX: f64 = 1.0;

/// Layered scene: horizontal bands (upper `y` edges) from the sensor side up.
pub const LAYER_TOPS: [f64; 5] = [-0.3, -0.1, 0.1, 0.3, f64::INFINITY];
pub const LAYER_VALUES: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

/// Rhombus `|x - cx|/hx + |y - cy|/hy <= 1`.
pub const RHOMBUS_CENTER: (f64, f64) = (0.0, 0.05);
pub const RHOMBUS_HALF_DIAGONALS: (f64, f64) = (0.3, 0.25);
pub const RHOMBUS_VALUE: f64 = 1.0;

/// Axis-aligned square hole inside the rhombus.
pub const HOLE_HALF_WIDTH: f64 = 0.08;
pub const HOLE_VALUE: f64 = 0.0;

pub const LAYERED_MAX: f64 = 1.0;

/// Three-layer background for the pipes scene.
pub const PIPE_LAYER_TOPS: [f64; 3] = [-0.2, 0.2, f64::INFINITY];
pub const PIPE_LAYER_VALUES: [f64; 3] = [0.05, 0.1235, 0.5];

/// Annular pipe: outer diameter, wall thickness, wall and interior contrast.
#[derive(Debug, Clone, Copy)]
pub struct Pipe {
    pub center: (f64, f64),
    pub outer_diameter: f64,
    pub wall_thickness: f64,
    pub wall_value: f64,
    pub interior_value: f64,
}

/// Wall thicknesses read as 0.06 m and 0.05 m, the only reading compatible
/// with the 0.4 m and 0.24 m outer diameters.
pub const PIPES: [Pipe; 2] = [
    Pipe {
        center: (-0.2, 0.0),
        outer_diameter: 0.4,
        wall_thickness: 0.06,
        wall_value: 0.8,
        interior_value: 1.0,
    },
    Pipe {
        center: (0.25, 0.05),
        outer_diameter: 0.24,
        wall_thickness: 0.05,
        wall_value: 0.8,
        interior_value: 0.0,
    },
];

pub const PIPES_MAX: f64 = 1.0;

/// Cylinder scene: a centered disk.
pub const CYLINDER_RADIUS: f64 = 0.2;
pub const CYLINDER_GRID: usize = 16;
