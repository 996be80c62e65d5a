//! Experiment artifact files: loss CSV, run metadata JSON, and a static
//! SVG loss plot.

use std::fs;
use std::path::{Path, PathBuf};

use super::RunRecord;
use crate::error::{Error, Result};

/// Writes `losses.csv`, `run.json`, and (optionally) `plot.svg` into the
/// output directory; returns the paths written. Emission is deterministic:
/// re-emitting the same records reproduces the files byte for byte.
pub fn emit_artifacts(records: &[RunRecord], dir: &Path, with_plot: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let csv_path = dir.join("losses.csv");
    let mut csv = String::from("run_id,iteration,loss\n");
    for record in records {
        for (iteration, loss) in record.loss_history.iter().enumerate() {
            csv.push_str(&format!("{},{},{:.16e}\n", record.run_id, iteration, loss));
        }
    }
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    written.push(csv_path);

    let json_path = dir.join("run.json");
    let json = serde_json::to_string_pretty(records)?;
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    written.push(json_path);

    if with_plot {
        let svg_path = dir.join("plot.svg");
        fs::write(&svg_path, loss_plot_svg(records)).map_err(|e| Error::io(&svg_path, e))?;
        written.push(svg_path);
    }
    Ok(written)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Static line chart of loss vs iteration, one polyline per run. Uses a
/// log-scale y axis when every loss is positive, linear otherwise (VQE
/// energies can be negative).
pub fn loss_plot_svg(records: &[RunRecord]) -> String {
    let (width, height, margin) = (720.0, 480.0, 60.0);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let max_len = records
        .iter()
        .map(|r| r.loss_history.len())
        .max()
        .unwrap_or(0);
    let all: Vec<f64> = records
        .iter()
        .flat_map(|r| r.loss_history.iter().copied())
        .collect();
    if max_len < 2 || all.is_empty() {
        svg.push_str("<text x=\"20\" y=\"40\">no loss history</text>\n</svg>\n");
        return svg;
    }

    let log_scale = all.iter().all(|&v| v > 0.0);
    let transform = |v: f64| if log_scale { v.log10() } else { v };
    let y_min = all.iter().copied().map(transform).fold(f64::INFINITY, f64::min);
    let y_max = all
        .iter()
        .copied()
        .map(transform)
        .fold(f64::NEG_INFINITY, f64::max);
    let y_span = (y_max - y_min).max(1e-12);

    let x_of = |i: usize| margin + (width - 2.0 * margin) * i as f64 / (max_len - 1) as f64;
    let y_of = |v: f64| height - margin - (height - 2.0 * margin) * (transform(v) - y_min) / y_span;

    // axes
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = margin,
        b = height - margin,
        r = width - margin,
        t = margin
    ));
    let y_label = |v: f64| if log_scale { format!("1e{v:.1}") } else { format!("{v:.3e}") };
    svg.push_str(&format!(
        "<text x=\"8\" y=\"{}\" font-size=\"11\">{}</text>\n",
        margin + 4.0,
        y_label(y_max)
    ));
    svg.push_str(&format!(
        "<text x=\"8\" y=\"{}\" font-size=\"11\">{}</text>\n",
        height - margin,
        y_label(y_min)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\">iteration</text>\n",
        width / 2.0 - 20.0,
        height - margin / 3.0
    ));

    for (idx, record) in records.iter().enumerate() {
        if record.loss_history.is_empty() {
            continue;
        }
        let color = PALETTE[idx % PALETTE.len()];
        let points: Vec<String> = record
            .loss_history
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x_of(i), y_of(v)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            width - margin + 4.0,
            margin + 14.0 * idx as f64,
            record.run_id
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
