//! The two illustrative experiments: misfit landscapes over the contrast of
//! a cylinder, and the spatial spectra recoverable in transmission versus
//! reflection.

mod landscape;
mod spectrum;

pub use landscape::{argmin, count_local_minima, landscape, Landscape, LandscapeConfig};
pub use spectrum::{
    low_band_fraction, shifted_magnitude, side_geometry, spectrum_demo, write_magnitude_csv, ModeResult,
    SpectrumConfig, SpectrumDemo,
};
