//! Shared fixtures for the benchmarks in `benches/`.

use refltomo::forward::{simulate, ScatteredData};
use refltomo::krylov::GmresConfig;
use refltomo::scene::layered_phantom;
use refltomo::{default_acquisition, ContrastImage, ForwardModel, FrequencySchedule};

pub struct Problem {
    pub truth: ContrastImage,
    pub model: ForwardModel,
    pub data: ScatteredData,
}

/// Layered scene on an `n x n` grid with noiseless data at `mhz`.
pub fn layered_problem(n: usize, mhz: &[f64]) -> Problem {
    let truth = layered_phantom(n, 1.0).expect("valid scene");
    let sched = FrequencySchedule::from_mhz(mhz).expect("valid schedule");
    let model = ForwardModel::with_unit_sources(truth.grid, default_acquisition(), sched).expect("valid model");
    let gmres = GmresConfig {
        restart: 256,
        max_iter: 2000,
        ..Default::default()
    };
    let (data, _) = simulate(&model, &truth, &gmres).expect("forward solve converges");
    Problem { truth, model, data }
}
