//! Artifact writers: CSV tables with an embedded config line, and an
//! optional SVG heatmap rendering of sweep grids.
//!
//! Every CSV starts with a `# config {json}` comment so each artifact
//! carries enough provenance to reproduce it exactly. Floats are written
//! with shortest round-trip formatting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Write a CSV file with a leading `# config` comment, a header row, and
/// pre-rendered data rows.
pub fn write_csv_with_config(
    path: impl AsRef<Path>,
    config_json: &str,
    header: &str,
    rows: &[String],
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# config {config_json}").map_err(|e| Error::io(path, e))?;
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for row in rows {
        writeln!(w, "{row}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Five-stop approximation of the viridis colormap.
fn colormap(t: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, f64, f64); 5] = [
        (0.267, 0.005, 0.329),
        (0.229, 0.322, 0.546),
        (0.128, 0.567, 0.551),
        (0.369, 0.789, 0.383),
        (0.993, 0.906, 0.144),
    ];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let lo = (t.floor() as usize).min(STOPS.len() - 2);
    let frac = t - lo as f64;
    let lerp = |a: f64, b: f64| a + (b - a) * frac;
    let (r, g, b) = (
        lerp(STOPS[lo].0, STOPS[lo + 1].0),
        lerp(STOPS[lo].1, STOPS[lo + 1].1),
        lerp(STOPS[lo].2, STOPS[lo + 1].2),
    );
    ((r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8)
}

/// Render a sweep grid as an SVG heatmap. `values` is row-major over
/// `(y_ticks, x_ticks)`; missing cells are drawn gray.
pub fn render_heatmap_svg(
    path: impl AsRef<Path>,
    title: &str,
    x_label: &str,
    y_label: &str,
    x_ticks: &[f64],
    y_ticks: &[f64],
    values: &[Option<f64>],
) -> Result<()> {
    let path = path.as_ref();
    if values.len() != x_ticks.len() * y_ticks.len() {
        return Err(Error::Shape(format!(
            "{} cells for a {}x{} grid",
            values.len(),
            y_ticks.len(),
            x_ticks.len()
        )));
    }
    let present: Vec<f64> = values.iter().flatten().cloned().collect();
    let (lo, hi) = present
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };

    const CELL_W: f64 = 72.0;
    const CELL_H: f64 = 44.0;
    const MARGIN_LEFT: f64 = 90.0;
    const MARGIN_TOP: f64 = 50.0;
    let width = MARGIN_LEFT + CELL_W * x_ticks.len() as f64 + 30.0;
    let height = MARGIN_TOP + CELL_H * y_ticks.len() as f64 + 70.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"15\">{title}</text>\n",
        MARGIN_LEFT
    ));
    for (yi, _) in y_ticks.iter().enumerate() {
        for (xi, _) in x_ticks.iter().enumerate() {
            let x = MARGIN_LEFT + CELL_W * xi as f64;
            let y = MARGIN_TOP + CELL_H * yi as f64;
            match values[yi * x_ticks.len() + xi] {
                Some(v) => {
                    let (r, g, b) = colormap((v - lo) / span);
                    let text_color = if (v - lo) / span > 0.6 { "#000" } else { "#fff" };
                    svg.push_str(&format!(
                        "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL_W}\" height=\"{CELL_H}\" \
                         fill=\"rgb({r},{g},{b})\"/>\n"
                    ));
                    svg.push_str(&format!(
                        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{text_color}\">{v:.3}</text>\n",
                        x + CELL_W / 2.0,
                        y + CELL_H / 2.0 + 4.0
                    ));
                }
                None => {
                    svg.push_str(&format!(
                        "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL_W}\" height=\"{CELL_H}\" fill=\"#888\"/>\n"
                    ));
                    svg.push_str(&format!(
                        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#fff\">failed</text>\n",
                        x + CELL_W / 2.0,
                        y + CELL_H / 2.0 + 4.0
                    ));
                }
            }
        }
    }
    for (xi, tick) in x_ticks.iter().enumerate() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{tick}</text>\n",
            MARGIN_LEFT + CELL_W * (xi as f64 + 0.5),
            MARGIN_TOP + CELL_H * y_ticks.len() as f64 + 18.0
        ));
    }
    for (yi, tick) in y_ticks.iter().enumerate() {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{tick}</text>\n",
            MARGIN_LEFT - 8.0,
            MARGIN_TOP + CELL_H * (yi as f64 + 0.5) + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n",
        MARGIN_LEFT + CELL_W * x_ticks.len() as f64 / 2.0,
        MARGIN_TOP + CELL_H * y_ticks.len() as f64 + 44.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" writing-mode=\"tb\">{y_label}</text>\n",
        MARGIN_TOP + CELL_H * y_ticks.len() as f64 / 2.0
    ));
    svg.push_str("</svg>\n");

    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
