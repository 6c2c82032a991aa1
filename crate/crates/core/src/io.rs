//! File formats for images and measurement data.
//!
//! * Image CSV: one line per grid row, top line at the largest `y`, values
//!   left to right in increasing `x`.
//! * Image PGM: binary 16-bit `P5`, linear min-max scaling; the scaling goes
//!   in a JSON sidecar.
//! * Data CSV: header `freq_hz,tx,rx,re,im`, rows ordered by frequency, then
//!   transmitter, then receiver.
//! * Data binary (little-endian):
//!
//! ```text
//! b"RTSD"  u32 version (1)  u32 n_freq  u32 n_tx  u32 n_rx
//! f64 freq_hz[n_freq]
//! (f64 re, f64 im) for each (freq, tx, rx), rx fastest
//! ```
//!
//! Noise metadata, when present, sits next to the data as `<stem>.noise.json`.
//! Every writer goes through a temporary file and a rename.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{DataMatrix, NoiseInfo, ScatteredData};
use crate::scene::{ContrastImage, Grid};

const MAGIC: &[u8; 4] = b"RTSD";
const VERSION: u32 = 1;

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e.to_string()))
}

pub fn image_csv_string(img: &ContrastImage) -> String {
    let g = img.grid;
    let mut s = String::with_capacity(g.len() * 22);
    for iy in (0..g.ny).rev() {
        for ix in 0..g.nx {
            if ix > 0 {
                s.push(',');
            }
            let _ = write!(s, "{:?}", img.get(ix, iy));
        }
        s.push('\n');
    }
    s
}

pub fn write_image_csv(path: &Path, img: &ContrastImage) -> Result<()> {
    write_atomic(path, image_csv_string(img).as_bytes())
}

/// Reads an image CSV onto the 1 m x 1 m domain centered at the origin.
pub fn read_image_csv(path: &Path) -> Result<ContrastImage> {
    let text = read_text(path)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))
        })
        .collect::<Result<_>>()?;
    let ny = rows.len();
    let nx = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nx) {
        return Err(Error::format(path, "rows have different lengths"));
    }
    if nx < 2 || ny < 2 {
        return Err(Error::format(path, format!("image must be at least 2x2, got {nx}x{ny}")));
    }
    let (dx, dy) = (1.0 / nx as f64, 1.0 / ny as f64);
    let grid = Grid::new(nx, ny, dx, dy, -0.5 + dx / 2.0, -0.5 + dy / 2.0)?;
    let mut values = vec![0.0; grid.len()];
    for (line, row) in rows.iter().enumerate() {
        let iy = ny - 1 - line;
        for (ix, &v) in row.iter().enumerate() {
            values[grid.index(ix, iy)] = v;
        }
    }
    ContrastImage::new(grid, values).map_err(|e| Error::format(path, e.to_string()))
}

/// Linear scaling used for a PGM export: `level = round(65535 (v - min) / (max - min))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgmScaling {
    pub min: f64,
    pub max: f64,
    pub width: usize,
    pub height: usize,
}

pub fn image_pgm_bytes(img: &ContrastImage) -> (Vec<u8>, PgmScaling) {
    let g = img.grid;
    let (min, max) = (img.min(), img.max());
    let span = max - min;
    let mut out = format!("P5\n{} {}\n65535\n", g.nx, g.ny).into_bytes();
    for iy in (0..g.ny).rev() {
        for ix in 0..g.nx {
            let level = if span > 0.0 {
                (65535.0 * (img.get(ix, iy) - min) / span).round() as u16
            } else {
                0
            };
            // PGM stores 16-bit samples most significant byte first
            out.extend_from_slice(&level.to_be_bytes());
        }
    }
    (
        out,
        PgmScaling {
            min,
            max,
            width: g.nx,
            height: g.ny,
        },
    )
}

/// Writes `path` and the scaling sidecar `path` + `.json`.
pub fn write_image_pgm(path: &Path, img: &ContrastImage) -> Result<()> {
    let (bytes, scaling) = image_pgm_bytes(img);
    write_atomic(path, &bytes)?;
    write_json(&sidecar(path, ".json"), &scaling)
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn data_csv_string(data: &ScatteredData) -> String {
    let mut s = String::from("freq_hz,tx,rx,re,im\n");
    for (freq, m) in data.freqs_hz.iter().zip(&data.matrices) {
        for t in 0..m.n_tx {
            for r in 0..m.n_rx {
                let v = m.get(r, t);
                let _ = writeln!(s, "{freq:?},{t},{r},{:?},{:?}", v.re, v.im);
            }
        }
    }
    s
}

pub fn data_bytes(data: &ScatteredData) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * data.n_freq() * (1 + 2 * data.n_tx * data.n_rx));
    out.extend_from_slice(MAGIC);
    for v in [VERSION, data.n_freq() as u32, data.n_tx as u32, data.n_rx as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for f in &data.freqs_hz {
        out.extend_from_slice(&f.to_le_bytes());
    }
    for m in &data.matrices {
        for t in 0..m.n_tx {
            for r in 0..m.n_rx {
                let v = m.get(r, t);
                out.extend_from_slice(&v.re.to_le_bytes());
                out.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    out
}

fn noise_path(path: &Path) -> PathBuf {
    path.with_extension("noise.json")
}

/// Writes the data as CSV or binary depending on the extension (`.csv`,
/// anything else binary), plus the noise sidecar when the data carry noise.
pub fn write_data(path: &Path, data: &ScatteredData) -> Result<()> {
    if is_csv(path) {
        write_atomic(path, data_csv_string(data).as_bytes())?;
    } else {
        write_atomic(path, &data_bytes(data))?;
    }
    if let Some(noise) = &data.noise {
        write_json(&noise_path(path), noise)?;
    }
    Ok(())
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads data written by [`write_data`], including the noise sidecar if present.
pub fn read_data(path: &Path) -> Result<ScatteredData> {
    let mut data = if is_csv(path) {
        parse_data_csv(path, &read_text(path)?)?
    } else {
        parse_data_bytes(path, &read(path)?)?
    };
    let np = noise_path(path);
    if np.exists() {
        data.noise = Some(read_json::<NoiseInfo>(&np)?);
    }
    Ok(data)
}

fn parse_data_csv(path: &Path, text: &str) -> Result<ScatteredData> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "freq_hz,tx,rx,re,im" => {}
        _ => return Err(Error::format(path, "missing header freq_hz,tx,rx,re,im")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |what: &str| Error::format(path, format!("line {}: {what}", i + 2));
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let freq: f64 = cols[0].parse().map_err(|_| bad("bad frequency"))?;
        let tx: usize = cols[1].parse().map_err(|_| bad("bad transmitter index"))?;
        let rx: usize = cols[2].parse().map_err(|_| bad("bad receiver index"))?;
        let re: f64 = cols[3].parse().map_err(|_| bad("bad real part"))?;
        let im: f64 = cols[4].parse().map_err(|_| bad("bad imaginary part"))?;
        rows.push((freq, tx, rx, Complex64::new(re, im)));
    }
    let n_tx = rows.iter().map(|r| r.1).max().map_or(0, |m| m + 1);
    let n_rx = rows.iter().map(|r| r.2).max().map_or(0, |m| m + 1);
    let mut freqs: Vec<f64> = Vec::new();
    for r in &rows {
        if freqs.last() != Some(&r.0) {
            if freqs.contains(&r.0) {
                return Err(Error::format(path, "rows of one frequency are not contiguous"));
            }
            freqs.push(r.0);
        }
    }
    let per = n_tx * n_rx;
    if rows.len() != freqs.len() * per {
        return Err(Error::format(path, format!("expected {} rows, found {}", freqs.len() * per, rows.len())));
    }
    let mut matrices = vec![DataMatrix::zeros(n_rx, n_tx); freqs.len()];
    let mut seen = vec![false; rows.len()];
    for (j, chunk) in rows.chunks(per).enumerate() {
        for &(_, t, r, v) in chunk {
            let slot = j * per + t * n_rx + r;
            if seen[slot] {
                return Err(Error::format(path, format!("duplicate entry tx {t} rx {r}")));
            }
            seen[slot] = true;
            matrices[j].values[t * n_rx + r] = v;
        }
    }
    ScatteredData::new(freqs, matrices).map_err(|e| Error::format(path, e.to_string()))
}

fn parse_data_bytes(path: &Path, bytes: &[u8]) -> Result<ScatteredData> {
    let short = || Error::format(path, "file is truncated");
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "not a scattered-data file (bad magic)"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if u32_at(4) != VERSION {
        return Err(Error::format(path, format!("unsupported version {}", u32_at(4))));
    }
    let (nf, nt, nr) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
    let expected = nf
        .checked_mul(nt)
        .and_then(|v| v.checked_mul(nr))
        .and_then(|v| v.checked_mul(16))
        .and_then(|v| v.checked_add(20 + 8 * nf))
        .ok_or_else(short)?;
    if bytes.len() != expected {
        return Err(Error::format(path, format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let freqs: Vec<f64> = (0..nf).map(|j| f64_at(20 + 8 * j)).collect();
    let mut offset = 20 + 8 * nf;
    let mut matrices = Vec::with_capacity(nf);
    for _ in 0..nf {
        let mut m = DataMatrix::zeros(nr, nt);
        for v in m.values.iter_mut() {
            *v = Complex64::new(f64_at(offset), f64_at(offset + 8));
            offset += 16;
        }
        matrices.push(m);
    }
    ScatteredData::new(freqs, matrices).map_err(|e| Error::format(path, e.to_string()))
}
