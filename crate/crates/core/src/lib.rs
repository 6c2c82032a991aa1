//! Frequency-domain reflection tomography.
//!
//! The forward model is the discrete 2-D Lippmann-Schwinger equation on a
//! regular grid; the inverse problem is a nonnegativity- and TV-constrained
//! least-squares fit of multi-frequency scattered data, solved frequency by
//! frequency with a proximal quasi-Newton method.

pub mod demos;
pub mod error;
pub mod forward;
pub mod greens;
pub mod inversion;
pub mod io;
pub mod krylov;
pub mod objective;
pub mod proxqn;
pub mod proxtv;
pub mod scene;
pub mod special;

pub use error::{Error, Result};
pub use greens::{build_green_operators, ForwardModel, GreenOperators, SourceSpec};
pub use scene::{
    default_acquisition, frequency_bands, AcquisitionGeometry, ContrastImage, FrequencySchedule, Grid, Phantom,
};
