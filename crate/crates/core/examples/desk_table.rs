//! Desk-scale comparison of the four workflows on the layered scene.
//!
//! `cargo run --release -p refltomo-core --example desk_table -- [n] [n_freq] [fmax] [i_max]`

use std::time::Instant;

use refltomo::forward::simulate;
use refltomo::inversion::{invert, InversionConfig, Method};
use refltomo::krylov::GmresConfig;
use refltomo::proxqn::ProxQnConfig;
use refltomo::proxtv::TvOperator;
use refltomo::scene::layered_phantom;
use refltomo::{default_acquisition, frequency_bands, ForwardModel};

fn main() -> refltomo::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let n = arg(0, 16.0) as usize;
    let n_freq = arg(1, 12.0) as usize;
    let fmax = arg(2, 1.0);
    let i_max = arg(3, 500.0) as usize;

    let truth = layered_phantom(n, fmax)?;
    let sched = frequency_bands().subsample(n_freq)?;
    let model = ForwardModel::with_unit_sources(truth.grid, default_acquisition(), sched)?;
    // restart 50 stalls near 2 GHz on a 16x16 grid (about 2.4 cells per wavelength)
    let gmres = GmresConfig {
        restart: 256,
        max_iter: 2000,
        ..Default::default()
    };
    let (data, _) = simulate(&model, &truth, &gmres)?;
    let tau = TvOperator::new(truth.grid).tv(&truth.values);
    let cfg = InversionConfig {
        qn: ProxQnConfig { i_max, ..Default::default() },
        cisor_i_max: 10 * i_max,
        rl_i_max: i_max,
        gmres,
        ..Default::default()
    };
    println!("n={n} freqs={n_freq} fmax={fmax} tau={tau:.3}");
    for method in [Method::SfTau, Method::Cisor, Method::Rl, Method::SfSigma] {
        let t = Instant::now();
        let budget = if method == Method::SfSigma { 0.0 } else { tau };
        let mut rep = invert(method, &model, &data, budget, &cfg)?;
        let snr = rep.attach_truth(&truth.values)?;
        let iters: Vec<usize> = rep.stages.iter().map(|s| s.iterations).collect();
        println!(
            "{:9} SNR {:7.2} dB  DR {:9.4}  tau {:8.3}  {:6.1} s  iters {:?}",
            method.name(),
            snr,
            rep.dr,
            rep.tau_final,
            t.elapsed().as_secs_f64(),
            iters
        );
    }
    Ok(())
}
