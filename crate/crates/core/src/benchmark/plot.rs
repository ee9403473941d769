//! Minimal SVG line plots. Output depends only on the data, so identical
//! inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::sensitivity::{SensitivityTable, Sweep};
use super::sweep::BenchResult;
use crate::error::Result;
use crate::io;
use crate::optics::Psf;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];
const PANEL_W: f64 = 380.0;
const PANEL_H: f64 = 280.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 92.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 44.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// Non-finite points break the line.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePanel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Tick positions at a 1/2/5 step covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    // y axis always includes zero; errors and sensitivities are non-negative
    y0 = y0.min(0.0);
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    (x0, x1, y0, y1 * 1.05)
}

fn panel(out: &mut String, p: &LinePanel, ox: f64, oy: f64) {
    let (x0, x1, y0, y1) = bounds(&p.series);
    let pw = PANEL_W - MARGIN_L - MARGIN_R;
    let ph = PANEL_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| ox + MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| oy + MARGIN_T + ph - (y - y0) / (y1 - y0) * ph;

    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
        ox + MARGIN_L + pw / 2.0,
        oy + MARGIN_T - 10.0,
        escape(&p.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#000"/>"##,
        ox + MARGIN_L,
        oy + MARGIN_T
    );
    for t in ticks(x0, x1) {
        let x = sx(t);
        let yb = oy + MARGIN_T + ph;
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{yb:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/>"##,
            yb + 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
            yb + 15.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let xl = ox + MARGIN_L;
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{xl:.2}" y2="{y:.2}" stroke="#000"/>"##,
            xl - 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#,
            xl - 6.0,
            y + 3.5,
            tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
        ox + MARGIN_L + pw / 2.0,
        oy + PANEL_H - 8.0,
        escape(&p.x_label)
    );
    let (lx, ly) = (ox + 14.0, oy + MARGIN_T + ph / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{lx:.2}" y="{ly:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
        escape(&p.y_label)
    );

    for (k, s) in p.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, out: &mut String| {
            if run.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    run.join(" ")
                );
            }
            run.clear();
        };
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                run.push(format!("{:.2},{:.2}", sx(x), sy(y)));
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{color}"/>"#,
                    sx(x),
                    sy(y)
                );
            } else {
                flush(&mut run, out);
            }
        }
        flush(&mut run, out);
        let ly = oy + MARGIN_T + 8.0 + 14.0 * k as f64;
        let lx = ox + PANEL_W - MARGIN_R + 8.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
            lx + 20.0,
            ly + 3.5,
            escape(&s.label)
        );
    }
}

/// Panels laid out left to right in rows of `columns`.
pub fn render_panels(panels: &[LinePanel], columns: usize) -> String {
    let columns = columns.max(1).min(panels.len().max(1));
    let rows = panels.len().div_ceil(columns).max(1);
    let (w, h) = (PANEL_W * columns as f64, PANEL_H * rows as f64);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
    );
    for (i, p) in panels.iter().enumerate() {
        panel(
            &mut out,
            p,
            PANEL_W * (i % columns) as f64,
            PANEL_H * (i / columns) as f64,
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One panel per focus distance, one line per aperture: L1 error vs depth.
pub fn bench_panels(result: &BenchResult) -> Vec<LinePanel> {
    result
        .spec
        .focus_distances_m
        .iter()
        .map(|&zf| LinePanel {
            title: format!("Z_f = {zf:.2} m"),
            x_label: "object distance Z (m)".into(),
            y_label: "L1 depth error (m)".into(),
            series: result
                .spec
                .apertures
                .iter()
                .map(|a| Series {
                    label: a.clone(),
                    points: result
                        .cells_for(a, zf)
                        .map(|c| (c.object_distance_m, c.l1_error_m))
                        .collect(),
                })
                .collect(),
        })
        .collect()
}

/// f-number family on top, focal-length family below.
pub fn sensitivity_panels(table: &SensitivityTable) -> Vec<LinePanel> {
    let family = |sweep: Sweep, title: String| LinePanel {
        title,
        x_label: "object distance Z (m)".into(),
        y_label: "ds/dZ (mm per m)".into(),
        series: table
            .curves
            .iter()
            .filter(|c| c.sweep == sweep)
            .map(|c| Series {
                label: c.label(),
                points: table
                    .depths_m
                    .iter()
                    .zip(&c.values)
                    .map(|(&z, &v)| (z, v * 1e3))
                    .collect(),
            })
            .collect(),
    };
    let f_base = table
        .curves
        .iter()
        .find(|c| c.sweep == Sweep::FNumber)
        .map(|c| c.focal_length_m * 1e3);
    let n_base = table
        .curves
        .iter()
        .find(|c| c.sweep == Sweep::FocalLength)
        .map(|c| c.f_number);
    let zf = table.focus_distance_m;
    let mut panels = Vec::new();
    if let Some(f) = f_base {
        panels.push(family(
            Sweep::FNumber,
            format!("varying N (f = {f} mm, Z_f = {zf} m)"),
        ));
    }
    if let Some(n) = n_base {
        panels.push(family(
            Sweep::FocalLength,
            format!("varying f (N = {n}, Z_f = {zf} m)"),
        ));
    }
    panels
}

/// Grid of PSF kernels drawn as gray cells, one tile per depth.
pub fn psf_contact_sheet(psfs: &[Psf]) -> String {
    const TILE: f64 = 140.0;
    const PAD: f64 = 10.0;
    let cols = psfs.len().clamp(1, 4);
    let rows = psfs.len().div_ceil(cols).max(1);
    let (w, h) = (TILE * cols as f64, (TILE + 16.0) * rows as f64);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#000\"/>\n"
    );
    for (i, psf) in psfs.iter().enumerate() {
        let (ox, oy) = (TILE * (i % cols) as f64, (TILE + 16.0) * (i / cols) as f64);
        let k = psf.kernel();
        let n = k.nrows();
        let cell = (TILE - 2.0 * PAD) / n as f64;
        let peak = k.iter().copied().fold(0.0, f64::max);
        for ((y, x), &v) in k.indexed_iter() {
            if v <= 0.0 {
                continue;
            }
            let g = (255.0 * v / peak).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{cell:.3}" height="{cell:.3}" fill="rgb({g},{g},{g})"/>"#,
                ox + PAD + x as f64 * cell,
                oy + PAD + y as f64 * cell
            );
        }
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="11" fill="#fff" text-anchor="middle">Z = {:.3} m, {n} px</text>"##,
            ox + TILE / 2.0,
            oy + TILE + 10.0,
            psf.depth_m()
        );
    }
    out.push_str("</svg>\n");
    out
}

/// What [`emit_plots`] can write.
#[derive(Debug, Clone, Copy)]
pub enum PlotInput<'a> {
    Bench(&'a BenchResult),
    Sensitivity(&'a SensitivityTable),
}

/// Writes `bench.csv` + `bench.svg` or `sensitivity.csv` + `sensitivity.svg`
/// into `out_dir` and returns the paths.
pub fn emit_plots(input: PlotInput<'_>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let (stem, csv, svg) = match input {
        PlotInput::Bench(r) => ("bench", r.to_csv(), render_panels(&bench_panels(r), 3)),
        PlotInput::Sensitivity(t) => (
            "sensitivity",
            t.to_csv(),
            render_panels(&sensitivity_panels(t), 1),
        ),
    };
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let svg_path = out_dir.join(format!("{stem}.svg"));
    io::write_atomic(&csv_path, csv.as_bytes())?;
    io::write_atomic(&svg_path, svg.as_bytes())?;
    Ok(vec![csv_path, svg_path])
}
