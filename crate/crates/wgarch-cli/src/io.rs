//! Output artifacts: CSV tables, the WGPS path matrix, a minimal SVG
//! plot, and the run manifest. All writers are deterministic functions
//! of their inputs except the manifest's timing field.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use wgarch::limit::ConvergenceRow;
use wgarch::pricing::SmileResult;
use wgarch::simulate::PathSet;

pub const WGPS_MAGIC: &[u8; 4] = b"WGPS";
pub const WGPS_VERSION: u32 = 1;

fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `path_id,log_S_T,V_T`, one row per path.
pub fn write_terminal_csv(path: &Path, paths: &PathSet) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "path_id,log_S_T,V_T")?;
    for (i, (lp, v)) in
        paths.terminal_log_prices.iter().zip(&paths.terminal_variances).enumerate()
    {
        writeln!(w, "{i},{lp},{v}")?;
    }
    w.flush()
}

/// `strike,moneyness,price,price_se,implied_vol,iv_lo,iv_hi`; vol fields
/// are empty where inversion was not possible.
pub fn write_smile_csv(path: &Path, smile: &SmileResult) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "strike,moneyness,price,price_se,implied_vol,iv_lo,iv_hi")?;
    for r in &smile.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.strike,
            r.moneyness,
            r.price,
            r.price_se,
            field(r.implied_vol),
            field(r.iv_lo),
            field(r.iv_hi)
        )?;
    }
    w.flush()
}

/// `delta,omega_rate,alpha_rate,theta_rate,kappa`.
pub fn write_convergence_csv(path: &Path, rows: &[ConvergenceRow]) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "delta,omega_rate,alpha_rate,theta_rate,kappa")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.delta.years(),
            r.omega_rate,
            r.alpha_rate,
            r.theta_rate,
            r.kappa_value
        )?;
    }
    w.flush()
}

/// Full log-price matrix: 16-byte header (magic, version, n_paths,
/// n_steps as little-endian u32) then row-major f64, n_steps + 1 points
/// per path.
pub fn write_wgps(path: &Path, paths: &PathSet) -> io::Result<()> {
    let full = paths.full_log_prices.as_ref().ok_or_else(|| {
        io::Error::new(io::ErrorKind::InvalidInput, "path set holds no full paths")
    })?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(WGPS_MAGIC)?;
    w.write_all(&WGPS_VERSION.to_le_bytes())?;
    w.write_all(&paths.config.n_paths.to_le_bytes())?;
    w.write_all(&paths.config.n_steps.to_le_bytes())?;
    for x in full {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()
}

/// Reads back a WGPS matrix as (n_paths, n_steps, row-major values).
pub fn read_wgps(path: &Path) -> io::Result<(u32, u32, Vec<f64>)> {
    let bytes = fs::read(path)?;
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    if bytes.len() < 16 || &bytes[0..4] != WGPS_MAGIC {
        return Err(bad("not a WGPS file"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    if word(4) != WGPS_VERSION {
        return Err(bad("unsupported WGPS version"));
    }
    let (n_paths, n_steps) = (word(8), word(12));
    let expect = 16 + (n_paths as usize) * (n_steps as usize + 1) * 8;
    if bytes.len() != expect {
        return Err(bad("WGPS payload length mismatch"));
    }
    let values = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((n_paths, n_steps, values))
}

pub struct SvgCurve {
    pub label: String,
    pub color: &'static str,
    pub dashed: bool,
    /// (moneyness, implied vol) points, already sorted by x.
    pub points: Vec<(f64, f64)>,
}

/// Minimal smile plot: axes with five ticks per side, one polyline per
/// curve, legend in the top margin.
pub fn write_svg(path: &Path, curves: &[SvgCurve]) -> io::Result<()> {
    const W: f64 = 840.0;
    const H: f64 = 560.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 50.0;
    const MB: f64 = 50.0;
    let pts = || curves.iter().flat_map(|c| c.points.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0 < x1) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if !(y0 < y1) {
        y0 -= 0.01;
        y1 += 0.01;
    }
    let pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    let sx = move |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = move |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"13\">"
    )?;
    writeln!(w, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>")?;
    writeln!(
        w,
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        H - MB,
        W - MR,
        H - MB
    )?;
    writeln!(w, "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>", H - MB)?;
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let px = sx(fx);
        writeln!(
            w,
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>",
            H - MB,
            H - MB + 5.0
        )?;
        writeln!(
            w,
            "<text x=\"{px}\" y=\"{}\" text-anchor=\"middle\">{:.2}</text>",
            H - MB + 20.0,
            fx
        )?;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let py = sy(fy);
        writeln!(
            w,
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{ML}\" y2=\"{py}\" stroke=\"black\"/>",
            ML - 5.0
        )?;
        writeln!(
            w,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{fy:.3}</text>",
            ML - 9.0,
            py + 4.0
        )?;
    }
    writeln!(
        w,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">moneyness K/S</text>",
        ML + (W - ML - MR) / 2.0,
        H - 8.0
    )?;
    writeln!(
        w,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">implied volatility</text>",
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    )?;
    for (i, c) in curves.iter().enumerate() {
        if c.points.is_empty() {
            continue;
        }
        let dash = if c.dashed { " stroke-dasharray=\"7 4\"" } else { "" };
        let pts: Vec<String> =
            c.points.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        writeln!(
            w,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"{dash} points=\"{}\"/>",
            c.color,
            pts.join(" ")
        )?;
        let lx = ML + 10.0 + 180.0 * (i / 3) as f64;
        let ly = 16.0 + 14.0 * (i % 3) as f64;
        writeln!(
            w,
            "<line x1=\"{lx}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"1.8\"{dash}/>",
            ly - 4.0,
            lx + 26.0,
            ly - 4.0,
            c.color
        )?;
        writeln!(w, "<text x=\"{}\" y=\"{ly}\">{}</text>", lx + 32.0, c.label)?;
    }
    writeln!(w, "</svg>")?;
    w.flush()
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub n_paths: u32,
    pub n_steps: u32,
    pub duration_ms: u128,
    pub truncated_steps: u64,
    pub total_steps: u64,
    pub kappa_clamped_steps: u64,
    pub outputs: Vec<String>,
}

pub fn config_hash(resolved_json: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(resolved_json);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    text.push('\n');
    fs::write(path, text)
}
