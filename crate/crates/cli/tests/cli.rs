use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use refltomo::io::read_data;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_refltomo"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path, command: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("manifest-{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

const SMALL: &str = "[scene]\nn = 8\nfmax = 0.5\n[frequencies]\nmhz = [100.0, 200.0]\n\
                     [noise]\nrel = 0.1\nseed = 7\n[inversion]\ni_max = 5\nrl_i_max = 5\n";

#[test]
fn default_synthesis_covers_the_full_schedule() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(&["synthesize", "--out", "o"], dir.path()));
    let data = read_data(&dir.path().join("o/data.bin")).unwrap();
    assert_eq!((data.n_freq(), data.n_tx, data.n_rx), (47, 5, 5));
    assert_eq!(data.matrices.iter().map(|m| m.values.len()).sum::<usize>(), 47 * 25);
    assert!(data.norm_sqr() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("o/data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 47 * 25);
    let truth = std::fs::read_to_string(dir.path().join("o/truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 32);
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    for out in ["a", "b"] {
        ok(&run(&["synthesize", "--config", cfg, "--out", out], dir.path()));
        ok(&run(&["invert", "--config", cfg, "--out", out], dir.path()));
    }
    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n != "stages" && n != "report.json")
        .collect();
    names.sort();
    assert!(names.len() >= 10);
    for name in &names {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name:?} differs between identical runs");
    }
    let strip = |out: &str| {
        let text = std::fs::read_to_string(dir.path().join(out).join("report.json")).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v.as_object_mut().unwrap().remove("wall_seconds");
        for st in v["stages"].as_array_mut().unwrap() {
            st.as_object_mut().unwrap().remove("seconds");
        }
        v
    };
    assert_eq!(strip("a"), strip("b"));
    assert_eq!(manifest(&dir.path().join("a"), "invert")["volatile"][0], "report.json");

    ok(&run(&["synthesize", "--config", cfg, "--out", "c", "--seed", "8"], dir.path()));
    let a = std::fs::read(dir.path().join("a/data.bin")).unwrap();
    let c = std::fs::read(dir.path().join("c/data.bin")).unwrap();
    assert_ne!(a, c);
    assert_eq!(manifest(&dir.path().join("c"), "synthesize")["seed"], 8);
}

#[test]
fn finer_synthesis_grid_stays_close() {
    let dir = tempfile::tempdir().unwrap();
    let base = "[frequencies]\nmhz = [100.0, 500.0, 1000.0]\n[scene]\nn = 32\n";
    let coarse = write_config(dir.path(), base);
    ok(&run(&["synthesize", "--config", coarse.to_str().unwrap(), "--out", "coarse"], dir.path()));
    let fine = dir.path().join("fine.toml");
    std::fs::write(&fine, format!("{base}synthesis_n = 48\n")).unwrap();
    ok(&run(&["synthesize", "--config", fine.to_str().unwrap(), "--out", "fine"], dir.path()));
    assert!(dir.path().join("fine/truth_synthesis.csv").exists());

    let a = read_data(&dir.path().join("coarse/data.bin")).unwrap();
    let b = read_data(&dir.path().join("fine/data.bin")).unwrap();
    let mut diff = 0.0;
    for (ma, mb) in a.matrices.iter().zip(&b.matrices) {
        diff += ma.values.iter().zip(&mb.values).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>();
    }
    let rel = (diff / a.norm_sqr()).sqrt();
    assert!(rel > 0.0 && rel < 0.2, "relative difference {rel}");
}

#[test]
fn methods_read_the_same_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    ok(&run(&["synthesize", "--config", cfg, "--out", "d"], dir.path()));
    let mut sums = Vec::new();
    for method in ["rl", "sf-tau"] {
        let text = format!("{SMALL}method = \"{method}\"\n");
        let p = dir.path().join(format!("{method}.toml"));
        std::fs::write(&p, text).unwrap();
        let out = format!("{method}-out");
        ok(&run(
            &["invert", "--config", p.to_str().unwrap(), "--out", &out, "--data", "d/data.bin", "--truth", "d/truth.csv"],
            dir.path(),
        ));
        let m = manifest(&dir.path().join(&out), "invert");
        sums.push(m["inputs"]["data"].as_str().unwrap().to_string());
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(&out).join("report.json")).unwrap()).unwrap();
        assert_eq!(report["method"], method);
        assert!(report["snr_db"].is_number());
        assert_eq!(report["tau_schedule"].as_array().unwrap().len(), report["stages"].as_array().unwrap().len());
        assert!(report["wall_seconds"].is_number());
        assert!(dir.path().join(&out).join("stages/stage_01.pgm").exists());
    }
    assert_eq!(sums[0], sums[1]);
    assert_eq!(sums[0].len(), 64);
}

#[test]
fn metrics_matches_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    ok(&run(&["synthesize", "--config", cfg, "--out", "o"], dir.path()));
    ok(&run(&["invert", "--config", cfg, "--out", "o"], dir.path()));
    let out = run(&["metrics", "--config", cfg, "--out", "o"], dir.path());
    ok(&out);
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    let (a, b) = (m["dr"].as_f64().unwrap(), report["dr"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
    assert_eq!(m["snr_db"], report["snr_db"]);
}

#[test]
fn missing_data_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["invert", "--out", "o", "--data", "absent/data.bin"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("absent/data.bin"), "{err}");
}

#[test]
fn bad_configuration_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[scene]\nsize = 3\n");
    let out = run(&["synthesize", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["synthesize", "--tol", "2.0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let cfg = write_config(dir.path(), "[scene]\nn = 16\n[frequencies]\nmhz = [100.0]\n");
    let out = run(&["synthesize", "--config", cfg.to_str().unwrap(), "--out", "o", "--threads", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn demos_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[landscape]\nn = 8\nc_min = 6.0\nc_max = 14.0\nc_steps = 9\nfreqs_mhz = [10.0, 50.0]\n\
         [spectrum]\nn = 8\nfreqs_mhz = [2000.0]\n",
    );
    let cfg = cfg.to_str().unwrap();
    ok(&run(&["demo-landscape", "--config", cfg, "--out", "o"], dir.path()));
    let s: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/landscape_summary.json")).unwrap()).unwrap();
    assert_eq!(s["incremental_argmin_c"][1], 10.0);
    ok(&run(&["demo-spectrum", "--config", cfg, "--out", "o"], dir.path()));
    for f in ["spectrum_transmission.csv", "spectrum_reflection.csv", "recon_reflection.pgm", "manifest-demo-spectrum.json"] {
        assert!(dir.path().join("o").join(f).exists(), "{f}");
    }
}

#[test]
fn stalled_solver_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[scene]\nn = 16\n[frequencies]\nmhz = [2000.0]\n[solver]\ngmres_restart = 2\ngmres_max_iter = 2\n",
    );
    let out = run(&["synthesize", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("o/manifest-synthesize.json").exists());
}
