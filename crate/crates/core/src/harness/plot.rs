//! Per-run series files and plain SVG line charts built from them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::run::RunRecord;
use crate::error::{Error, Result};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn write_series(path: &Path, header: [&str; 2], points: &[(u32, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for (x, y) in points {
        w.write_record([x.to_string(), y.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub struct Series<'a> {
    pub label: String,
    pub points: &'a [(u32, f64)],
}

/// Renders series as polylines on shared axes. Non-finite points are
/// dropped.
pub fn render_svg(title: &str, y_label: &str, series: &[Series]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let finite = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|(_, y)| y.is_finite())
    };
    let x_max = finite().map(|(x, _)| *x).max().unwrap_or(1).max(1) as f64;
    let (mut y_min, mut y_max) = finite().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, y)| {
        (lo.min(*y), hi.max(*y))
    });
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    if y_max - y_min < 1e-12 {
        y_max = y_min + 1.0;
    }
    let sx = |x: f64| PAD + x / x_max * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y_min) / (y_max - y_min) * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD},{PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(svg, r#"<text x="{PAD}" y="{}">{y_min:.3e}</text>"#, H - PAD + 15.0);
    let _ = writeln!(svg, r#"<text x="5" y="{}">{y_max:.3e}</text>"#, PAD - 5.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">epoch {x_max}</text>"#, W - PAD, H - PAD + 15.0);
    let _ = writeln!(svg, r#"<text x="5" y="{}">{y_label}</text>"#, H / 2.0);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(_, y)| y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x as f64), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.2"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD + 4.0,
            PAD + 14.0 * i as f64,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `<label>_lr.csv`, `<label>_acc.csv` per record plus `lr.svg` and
/// `test_acc.svg` overlays into `dir`. Returns the paths written.
pub fn emit_plot_data(records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::Data("no run records to plot".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut lr_series = Vec::with_capacity(records.len());
    let mut acc_series = Vec::with_capacity(records.len());
    for rec in records {
        let lr: Vec<(u32, f64)> = rec.rows.iter().map(|r| (r.epoch, r.lr)).collect();
        let acc: Vec<(u32, f64)> = rec.rows.iter().map(|r| (r.epoch, r.test_acc)).collect();
        let label = rec.label();
        let p = dir.join(format!("{label}_lr.csv"));
        write_series(&p, ["epoch", "lr"], &lr)?;
        written.push(p);
        let p = dir.join(format!("{label}_acc.csv"));
        write_series(&p, ["epoch", "test_acc"], &acc)?;
        written.push(p);
        lr_series.push((label.clone(), lr));
        acc_series.push((label, acc));
    }
    for (name, title, y, data) in [
        ("lr.svg", "learning rate", "lr", &lr_series),
        ("test_acc.svg", "test accuracy", "acc", &acc_series),
    ] {
        let series: Vec<Series> = data
            .iter()
            .map(|(l, p)| Series {
                label: l.clone(),
                points: p,
            })
            .collect();
        let p = dir.join(name);
        std::fs::write(&p, render_svg(title, y, &series)).map_err(|e| Error::io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}
