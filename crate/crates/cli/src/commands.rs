use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use refltomo::demos::{argmin, count_local_minima, landscape, spectrum_demo, write_magnitude_csv};
use refltomo::forward::{add_noise, simulate, ScatteredData};
use refltomo::inversion::{invert as run_inversion, metric_dr, metric_snr, InversionReport, Method};
use refltomo::io::{data_bytes, data_csv_string, image_csv_string, image_pgm_bytes, read_data, read_image_csv};
use refltomo::proxtv::TvOperator;
use refltomo::{ContrastImage, ForwardModel};

use crate::error::CliError;
use crate::manifest::{sha256_file, sha256_hex, Manifest, OutputDir};
use crate::Context;

fn output_dir(ctx: &Context, command: &str) -> OutputDir {
    OutputDir::new(
        &ctx.out,
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: sha256_hex(ctx.cfg_text.as_bytes()),
            seed: ctx.cfg.noise.seed,
            gmres_tol: ctx.cfg.solver.gmres_tol,
            threads: ctx.threads,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            volatile: Vec::new(),
        },
    )
}

fn write_image(out: &mut OutputDir, stem: &str, img: &ContrastImage) -> Result<(), CliError> {
    out.write(&format!("{stem}.csv"), image_csv_string(img).as_bytes())?;
    let (pgm, scaling) = image_pgm_bytes(img);
    out.write(&format!("{stem}.pgm"), &pgm)?;
    out.write_json(&format!("{stem}.pgm.json"), &scaling)
}

fn inversion_model(ctx: &Context) -> Result<ForwardModel, CliError> {
    let grid = ctx.cfg.truth()?.grid;
    Ok(ForwardModel::with_unit_sources(grid, ctx.cfg.acquisition()?, ctx.cfg.schedule()?)?)
}

pub fn synthesize(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let truth = cfg.truth()?;
    let synth = cfg.synthesis_truth()?;
    let model = ForwardModel::with_unit_sources(synth.grid, cfg.acquisition()?, cfg.schedule()?)?;
    eprintln!(
        "synthesizing {} frequencies on a {}x{} grid",
        model.n_freq(),
        synth.grid.nx,
        synth.grid.ny
    );
    let (clean, _) = simulate(&model, &synth, &cfg.gmres())?;
    let data = add_noise(&clean, cfg.noise.rel, cfg.noise.seed)?;

    let mut out = output_dir(ctx, "synthesize");
    out.write("data.bin", &data_bytes(&data))?;
    out.write("data.csv", data_csv_string(&data).as_bytes())?;
    if let Some(noise) = &data.noise {
        out.write_json("data.noise.json", noise)?;
    }
    write_image(&mut out, "truth", &truth)?;
    if synth.grid != truth.grid {
        write_image(&mut out, "truth_synthesis", &synth)?;
    }
    out.finish()?;
    println!(
        "wrote {} x {} x {} data to {}",
        data.n_freq(),
        data.n_tx,
        data.n_rx,
        ctx.out.display()
    );
    Ok(())
}

fn load_data(path: &Path, model: &ForwardModel) -> Result<ScatteredData, CliError> {
    let data = read_data(path)?;
    data.check_compatible(model)?;
    Ok(data)
}

/// Explicit `--truth`, else `<out>/truth.csv` when present.
fn load_truth(ctx: &Context, truth: Option<PathBuf>) -> Result<Option<(PathBuf, ContrastImage)>, CliError> {
    let path = match truth {
        Some(p) => p,
        None => {
            let p = ctx.out.join("truth.csv");
            if !p.exists() {
                return Ok(None);
            }
            p
        }
    };
    let img = read_image_csv(&path)?;
    Ok(Some((path, img)))
}

fn check_grid(img: &ContrastImage, model: &ForwardModel, what: &str) -> Result<(), CliError> {
    if img.grid != model.grid {
        return Err(CliError::Config(format!(
            "{what} is {}x{} but the inversion grid is {}x{}",
            img.grid.nx, img.grid.ny, model.grid.nx, model.grid.ny
        )));
    }
    Ok(())
}

pub fn invert(ctx: &Context, data: Option<PathBuf>, truth: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let model = inversion_model(ctx)?;
    let data_path = data.unwrap_or_else(|| ctx.out.join("data.bin"));
    let data = load_data(&data_path, &model)?;
    let truth = load_truth(ctx, truth)?;
    if let Some((_, img)) = &truth {
        check_grid(img, &model, "reference image")?;
    }

    let method = cfg.inversion.method;
    let budget = match method {
        Method::SfSigma => cfg
            .inversion
            .noise_rel
            .or(data.noise.as_ref().map(|n| n.rel_energy))
            .unwrap_or(cfg.noise.rel),
        _ => match cfg.inversion.tau {
            Some(t) => t,
            None => TvOperator::new(model.grid).tv(&cfg.truth()?.values),
        },
    };
    eprintln!("running {} over {} frequencies (budget {budget})", method.name(), model.n_freq());
    let mut report = run_inversion(method, &model, &data, budget, &cfg.inversion_config())?;
    if let Some((_, img)) = &truth {
        report.attach_truth(&img.values)?;
    }

    let mut out = output_dir(ctx, "invert");
    out.add_input("data", sha256_file(&data_path)?);
    if let Some((p, _)) = &truth {
        out.add_input("truth", sha256_file(p)?);
    }
    for st in &report.stages {
        let img = ContrastImage::new(model.grid, st.image.clone())?;
        write_image(&mut out, &format!("stages/stage_{:02}", st.stage), &img)?;
        let mut trace = Vec::new();
        st.trace
            .write_csv(&mut trace)
            .map_err(|e| CliError::io(&out.path("stages"), e))?;
        out.write(&format!("stages/trace_{:02}.csv", st.stage), &trace)?;
    }
    write_image(&mut out, "image", &report.image)?;
    let mut text = serde_json::to_string_pretty(&ReportFile {
        tau_schedule: report.tau_schedule(),
        report: &report,
    })
    .map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    out.write_volatile("report.json", text.as_bytes())?;
    out.finish()?;

    let snr = report.snr_db.map(|s| format!("{s:.2} dB")).unwrap_or_else(|| "n/a".into());
    println!(
        "{}: DR {:.4}%  SNR {snr}  tau {:.4}  {:.1} s",
        method.name(),
        report.dr,
        report.tau_final,
        report.wall_seconds
    );
    Ok(())
}

#[derive(Serialize)]
struct ReportFile<'a> {
    #[serde(flatten)]
    report: &'a InversionReport,
    tau_schedule: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct LandscapeSummary {
    freqs_hz: Vec<f64>,
    per_frequency_minima: Vec<usize>,
    per_frequency_argmin_c: Vec<f64>,
    incremental_minima: Vec<usize>,
    incremental_argmin_c: Vec<f64>,
}

pub fn demo_landscape(ctx: &Context) -> Result<(), CliError> {
    let l = landscape(&ctx.cfg.landscape)?;
    let at = |curves: &[Vec<f64>]| -> Vec<f64> {
        curves.iter().map(|c| argmin(c).map_or(f64::NAN, |i| l.c[i])).collect()
    };
    let summary = LandscapeSummary {
        freqs_hz: l.freqs_hz.clone(),
        per_frequency_minima: l.per_frequency.iter().map(|c| count_local_minima(c)).collect(),
        per_frequency_argmin_c: at(&l.per_frequency),
        incremental_minima: l.incremental.iter().map(|c| count_local_minima(c)).collect(),
        incremental_argmin_c: at(&l.incremental),
    };
    let mut csv = Vec::new();
    l.write_csv(&mut csv).map_err(|e| CliError::io(&ctx.out, e))?;
    let mut out = output_dir(ctx, "demo-landscape");
    out.write("landscape.csv", &csv)?;
    out.write_json("landscape_summary.json", &summary)?;
    out.finish()?;
    for (j, f) in summary.freqs_hz.iter().enumerate() {
        println!(
            "{:>6.0} MHz: {} local minima alone, {} up to here",
            f / 1e6,
            summary.per_frequency_minima[j],
            summary.incremental_minima[j]
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SpectrumSummary {
    transmission_low_band_fraction: f64,
    reflection_low_band_fraction: f64,
    transmission_cg_iterations: usize,
    reflection_cg_iterations: usize,
}

pub fn demo_spectrum(ctx: &Context) -> Result<(), CliError> {
    let demo = spectrum_demo(&ctx.cfg.spectrum)?;
    let mut out = output_dir(ctx, "demo-spectrum");
    write_image(&mut out, "spectrum_truth", &demo.truth)?;
    for (name, m) in [("transmission", &demo.transmission), ("reflection", &demo.reflection)] {
        let mut csv = Vec::new();
        write_magnitude_csv(&m.magnitude, &mut csv).map_err(|e| CliError::io(&ctx.out, e))?;
        out.write(&format!("spectrum_{name}.csv"), &csv)?;
        write_image(&mut out, &format!("recon_{name}"), &m.reconstruction)?;
    }
    let summary = SpectrumSummary {
        transmission_low_band_fraction: demo.transmission.low_band_fraction,
        reflection_low_band_fraction: demo.reflection.low_band_fraction,
        transmission_cg_iterations: demo.transmission.cg_iterations,
        reflection_cg_iterations: demo.reflection.cg_iterations,
    };
    out.write_json("spectrum_summary.json", &summary)?;
    out.finish()?;
    println!(
        "low-band energy fraction: transmission {:.3}, reflection {:.3}",
        summary.transmission_low_band_fraction, summary.reflection_low_band_fraction
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct Metrics {
    dr: f64,
    snr_db: Option<f64>,
}

pub fn metrics(ctx: &Context, image: Option<PathBuf>, data: Option<PathBuf>, truth: Option<PathBuf>) -> Result<(), CliError> {
    let model = inversion_model(ctx)?;
    let image_path = image.unwrap_or_else(|| ctx.out.join("image.csv"));
    let img = read_image_csv(&image_path)?;
    check_grid(&img, &model, "image")?;
    let data_path = data.unwrap_or_else(|| ctx.out.join("data.bin"));
    let data = load_data(&data_path, &model)?;
    let truth = load_truth(ctx, truth)?;
    let snr_db = match &truth {
        Some((_, t)) => {
            check_grid(t, &model, "reference image")?;
            Some(metric_snr(&img.values, &t.values)?)
        }
        None => None,
    };
    let m = Metrics {
        dr: metric_dr(&img.values, &data, &model, &ctx.cfg.gmres())?,
        snr_db,
    };
    let mut out = output_dir(ctx, "metrics");
    out.add_input("image", sha256_file(&image_path)?);
    out.add_input("data", sha256_file(&data_path)?);
    if let Some((p, _)) = &truth {
        out.add_input("truth", sha256_file(p)?);
    }
    out.write_json("metrics.json", &m)?;
    out.finish()?;
    println!("{}", serde_json::to_string(&m).map_err(|e| CliError::Config(e.to_string()))?);
    Ok(())
}
