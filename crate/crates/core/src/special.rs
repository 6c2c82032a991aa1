//! Bessel functions of orders 0 and 1 and the Hankel functions built from
//! them. `J` and `Y` come from `libm`; only the pole-free `Y1` needs its own
//! series.

use std::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Below this `y1_regular` sums its series; above it the pole is subtracted
/// from `Y1` directly, where `2/(pi x)` is too small to cancel digits.
const REGULAR_CROSSOVER: f64 = 1.0;
const MAX_TERMS: usize = 200;

/// Bessel function of the first kind, order 0.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Bessel function of the first kind, order 1.
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// Bessel function of the second kind, order 0. Defined for `x > 0`.
pub fn bessel_y0(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    libm::y0(x)
}

/// Bessel function of the second kind, order 1. Defined for `x > 0`.
pub fn bessel_y1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    libm::y1(x)
}

/// `Y1(x) + 2/(pi x)`: the order-1 Neumann function with its pole removed.
///
/// Evaluated without cancellation for small `x`, which the self-cell integral
/// of the 2-D Green kernel relies on.
pub fn y1_regular(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < REGULAR_CROSSOVER {
        y1_regular_series(x)
    } else {
        libm::y1(x) + FRAC_2_PI / x
    }
}

/// Zero-order Hankel function of the second kind, `J0(z) - i Y0(z)`.
pub fn hankel_h0_2(z: f64) -> Result<Complex64> {
    check_positive(z)?;
    Ok(Complex64::new(bessel_j0(z), -bessel_y0(z)))
}

/// Zero-order Hankel function of the first kind, `J0(z) + i Y0(z)`.
pub fn hankel_h0_1(z: f64) -> Result<Complex64> {
    check_positive(z)?;
    Ok(Complex64::new(bessel_j0(z), bessel_y0(z)))
}

/// First-order Hankel function of the second kind, `J1(z) - i Y1(z)`.
pub fn hankel_h1_2(z: f64) -> Result<Complex64> {
    check_positive(z)?;
    Ok(Complex64::new(bessel_j1(z), -bessel_y1(z)))
}

fn check_positive(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "Hankel function argument must be positive and finite, got {z}"
        )))
    }
}

fn y1_regular_series(x: f64) -> f64 {
    // Y1 + 2/(pi x) = (2/pi) ln(x/2) J1
    //     - (1/pi)(x/2) sum_{k>=0} (-1)^k [psi(k+1) + psi(k+2)] (x^2/4)^k / (k! (k+1)!)
    // with psi(n) = -gamma + H_{n-1}.
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut h_k = 0.0; // H_k
    let mut sum = 0.0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        if k > 0 {
            term *= -q / (kf * (kf + 1.0));
            h_k += 1.0 / kf;
        }
        let h_k1 = h_k + 1.0 / (kf + 1.0);
        let psi_sum = -2.0 * EULER_GAMMA + h_k + h_k1;
        let contrib = term * psi_sum;
        sum += contrib;
        if k > 2 && contrib.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    FRAC_2_PI * (0.5 * x).ln() * libm::j1(x) - 0.5 * x * sum / PI
}
