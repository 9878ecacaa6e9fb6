//! File formats: field snapshots, CSV tables, JSON reports, SVG plots.
//!
//! A field snapshot is a one-line JSON header followed by the raw samples as
//! little-endian `f64`:
//!
//! ```text
//! {"format":"lclab-field-v1","sizes":[32,32],"period":[6.28,6.28],"role":"scalar"}
//! <8 * product(sizes) bytes of f64 data>
//! ```
//!
//! The binary payload makes round trips lossless. All writers go through a
//! temp-file-plus-rename so partially written artifacts never appear under
//! their final name.

use crate::error::{Error, Result};
use crate::field::{RealField, Role};
use crate::grid::Grid;
use crate::lp::BlockMasses;
use crate::system::{LCParams, ReformState};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Serialize, Deserialize)]
struct FieldHeader {
    format: String,
    sizes: Vec<usize>,
    period: Vec<f64>,
    role: Role,
}

/// Write bytes atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Serialize a field snapshot.
pub fn write_field(path: &Path, field: &RealField) -> Result<()> {
    let header = FieldHeader {
        format: "lclab-field-v1".into(),
        sizes: field.grid().sizes().to_vec(),
        period: field.grid().period().to_vec(),
        role: field.role(),
    };
    let mut bytes = serde_json::to_vec(&header)?;
    bytes.push(b'\n');
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &bytes)
}

/// Read a field snapshot back, reconstructing its grid.
pub fn read_field(path: &Path) -> Result<RealField> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let nl = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| Error::SnapshotFormat("missing header line".into()))?;
    let header: FieldHeader = serde_json::from_slice(&bytes[..nl])?;
    if header.format != "lclab-field-v1" {
        return Err(Error::SnapshotFormat(format!("unknown format `{}`", header.format)));
    }
    let grid = Grid::with_axes(header.sizes, header.period)?;
    let payload = &bytes[nl + 1..];
    if payload.len() != 8 * grid.len() {
        return Err(Error::SnapshotFormat(format!(
            "payload holds {} bytes, grid needs {}",
            payload.len(),
            8 * grid.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RealField::new(grid, values, header.role)
}

#[derive(Debug, Serialize, Deserialize)]
struct StateManifest {
    format: String,
    time: f64,
    params: LCParams,
    dim: usize,
    components: Vec<String>,
}

/// Write a reformulated state as one field file per component plus a
/// manifest.
pub fn write_reform_state(dir: &Path, state: &ReformState, params: &LCParams, time: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let dim = state.grid().dim();
    let mut components = vec!["a".to_string(), "h".to_string()];
    write_field(&dir.join("a.lcf"), &state.a)?;
    write_field(&dir.join("h.lcf"), &state.h)?;
    for i in 0..dim {
        for j in 0..dim {
            let name = format!("omega_{i}{j}");
            write_field(&dir.join(format!("{name}.lcf")), state.omega.comp(i, j))?;
            components.push(name);
        }
    }
    for (m, c) in state.d.comps().iter().enumerate() {
        let name = format!("d_{m}");
        write_field(&dir.join(format!("{name}.lcf")), c)?;
        components.push(name);
    }
    let manifest = StateManifest {
        format: "lclab-state-v1".into(),
        time,
        params: *params,
        dim,
        components,
    };
    atomic_write(&dir.join("state.json"), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

/// Read a reformulated state written by [`write_reform_state`]; returns the
/// state with its recorded time and parameters.
pub fn read_reform_state(dir: &Path) -> Result<(ReformState, LCParams, f64)> {
    let manifest: StateManifest =
        serde_json::from_slice(&std::fs::read(dir.join("state.json"))?)?;
    let a = read_field(&dir.join("a.lcf"))?;
    let h = read_field(&dir.join("h.lcf"))?;
    let dim = manifest.dim;
    let mut rows = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut row = Vec::with_capacity(dim);
        for j in 0..dim {
            row.push(read_field(&dir.join(format!("omega_{i}{j}.lcf")))?);
        }
        rows.push(row);
    }
    let mut d = Vec::new();
    for m in 0.. {
        let path = dir.join(format!("d_{m}.lcf"));
        if !path.exists() {
            break;
        }
        d.push(read_field(&path)?);
    }
    let state = ReformState {
        a,
        h,
        omega: crate::field::MatrixField::new(rows)?,
        d: crate::field::VectorField::new(d)?,
    };
    Ok((state, manifest.params, manifest.time))
}

/// Write a numeric CSV table.
pub fn write_csv(path: &Path, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Per-shell spectrum table `(q, block_L2, 2^{qs} block_L2)`.
pub fn write_spectrum_report(path: &Path, masses: &BlockMasses, s: f64) -> Result<()> {
    let rows: Vec<Vec<f64>> = masses
        .shells()
        .map(|(q, m)| vec![q as f64, m, (q as f64 * s).exp2() * m])
        .collect();
    write_csv(path, &["q", "block_l2", "weighted"], &rows)
}

/// Pretty-printed JSON report.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, &serde_json::to_vec_pretty(value)?)
}

/// One labeled series for [`write_svg_plot`].
pub struct PlotSeries<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Minimal SVG line plot: axes, polylines, legend. `log_y` plots
/// `log10(|y|)` with zero values dropped.
pub fn write_svg_plot(
    path: &Path,
    title: &str,
    series: &[PlotSeries<'_>],
    log_y: bool,
) -> Result<()> {
    const W: f64 = 720.0;
    const H: f64 = 480.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 50.0;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let mapped: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(_, y)| !log_y || *y > 0.0)
                .map(|(x, y)| (*x, if log_y { y.log10() } else { *y }))
                .collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = mapped.iter().flatten().copied().collect();
    if all.is_empty() {
        return atomic_write(path, b"<svg xmlns=\"http://www.w3.org/2000/svg\"/>");
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in &all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-300 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        title
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{:.3}</text>\n",
            sx(fx),
            H - MB + 18.0,
            fx
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{}{:.3}</text>\n",
            ML - 6.0,
            sy(fy) + 4.0,
            if log_y { "1e" } else { "" },
            fy
        ));
    }
    for (si, pts) in mapped.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let coords: Vec<String> =
            pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            coords.join(" "),
            colors[si % colors.len()]
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" fill=\"{}\">{}</text>\n",
            W - MR - 150.0,
            MT + 16.0 * si as f64,
            colors[si % colors.len()],
            series[si].label
        ));
    }
    svg.push_str("</svg>\n");
    atomic_write(path, svg.as_bytes())
}

/// Canonical output layout of one experiment.
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(root.join("traces"))?;
        std::fs::create_dir_all(root.join("reports"))?;
        std::fs::create_dir_all(root.join("plots"))?;
        Ok(OutputLayout { root })
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn trace(&self, name: &str) -> PathBuf {
        self.root.join("traces").join(format!("{name}.csv"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(format!("{name}.json"))
    }

    pub fn plot(&self, name: &str) -> PathBuf {
        self.root.join("plots").join(format!("{name}.svg"))
    }

    pub fn snapshot_dir(&self, name: &str) -> PathBuf {
        self.root.join("snapshots").join(name)
    }
}
