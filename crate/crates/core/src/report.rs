//! SVG overlay of the two class densities with the threshold marker.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::calibration::CalibrationResult;
use crate::error::{Error, Result};
use crate::io::open;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct DensityRow {
    pub bin_center: f64,
    pub right_density: f64,
    pub wrong_density: f64,
}

pub fn read_density_csv(path: &Path) -> Result<Vec<DensityRow>> {
    parse_density_csv(open(path)?)
}

pub fn parse_density_csv<R: std::io::Read>(reader: R) -> Result<Vec<DensityRow>> {
    let mut reader = csv::Reader::from_reader(reader);
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedReportInput(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["bin_center", "right_density", "wrong_density"] {
        return Err(Error::MalformedReportInput(format!(
            "unexpected header {headers:?}"
        )));
    }
    let mut rows = Vec::new();
    for row in reader.deserialize::<DensityRow>() {
        let row = row.map_err(|e| Error::MalformedReportInput(e.to_string()))?;
        let finite = [row.bin_center, row.right_density, row.wrong_density]
            .iter()
            .all(|v| v.is_finite());
        if !finite || row.right_density < 0.0 || row.wrong_density < 0.0 {
            return Err(Error::MalformedReportInput(format!("bad row {row:?}")));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::MalformedReportInput("no density rows".into()));
    }
    Ok(rows)
}

fn plot_x(d: f64) -> f64 {
    LEFT + d * (WIDTH - LEFT - RIGHT)
}

/// Inverse of the x mapping, for reading positions back out of a report.
pub fn distance_at(x: f64) -> f64 {
    (x - LEFT) / (WIDTH - LEFT - RIGHT)
}

fn plot_y(density: f64, max: f64) -> f64 {
    TOP + (HEIGHT - TOP - BOTTOM) * (1.0 - density / max)
}

fn polyline(
    rows: &[DensityRow],
    max: f64,
    pick: fn(&DensityRow) -> f64,
    class: &str,
    color: &str,
) -> String {
    let points: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.3},{:.3}", plot_x(r.bin_center), plot_y(pick(r), max)))
        .collect();
    format!(
        "<polyline class=\"{class}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        points.join(" ")
    )
}

/// Renders the density overlay. Output depends only on the inputs.
pub fn render_svg(rows: &[DensityRow], result: &CalibrationResult) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::MalformedReportInput("no density rows".into()));
    }
    if !(0.0..=1.0).contains(&result.threshold) {
        return Err(Error::MalformedReportInput(format!(
            "threshold {} outside [0, 1]",
            result.threshold
        )));
    }
    let max = rows
        .iter()
        .map(|r| r.right_density.max(r.wrong_density))
        .fold(0.0, f64::max);
    let max = if max > 0.0 { max * 1.05 } else { 1.0 };
    let (x0, x1) = (plot_x(0.0), plot_x(1.0));
    let (y0, y1) = (plot_y(0.0, max), plot_y(max, max));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.3}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">Distributions of right and wrong matches ({}, p={})</text>",
        WIDTH / 2.0,
        result.distance_kind,
        result.p
    );
    // axes
    let _ = writeln!(svg, "<line class=\"axis\" x1=\"{x0:.3}\" y1=\"{y0:.3}\" x2=\"{x1:.3}\" y2=\"{y0:.3}\" stroke=\"black\"/>");
    let _ = writeln!(svg, "<line class=\"axis\" x1=\"{x0:.3}\" y1=\"{y0:.3}\" x2=\"{x0:.3}\" y2=\"{y1:.3}\" stroke=\"black\"/>");
    for i in 0..=10 {
        let d = i as f64 / 10.0;
        let _ = writeln!(
            svg,
            "<text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"middle\" font-size=\"11\">{d:.1}</text>",
            plot_x(d),
            y0 + 16.0
        );
    }
    for i in 0..=4 {
        let v = max * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            "<text x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"end\" font-size=\"11\">{v:.2}</text>",
            x0 - 6.0,
            plot_y(v, max) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text class=\"x-label\" x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"middle\" font-size=\"13\">distance</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 18.0
    );
    let _ = writeln!(
        svg,
        "<text class=\"y-label\" x=\"18\" y=\"{:.3}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 {:.3})\">density</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    svg.push_str(&polyline(
        rows,
        max,
        |r| r.right_density,
        "right",
        "#1f77b4",
    ));
    svg.push_str(&polyline(
        rows,
        max,
        |r| r.wrong_density,
        "wrong",
        "#d62728",
    ));
    let tx = plot_x(result.threshold);
    let _ = writeln!(
        svg,
        "<line id=\"threshold\" x1=\"{tx:.3}\" y1=\"{y0:.3}\" x2=\"{tx:.3}\" y2=\"{y1:.3}\" stroke=\"black\" stroke-dasharray=\"6 4\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.3}\" y=\"{:.3}\" font-size=\"12\">threshold = {:.4}</text>",
        tx + 4.0,
        y1 + 12.0,
        result.threshold
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.3}\" y=\"{:.3}\" font-size=\"12\" fill=\"#1f77b4\">right matches</text>",
        x1 - 120.0,
        y1 + 12.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.3}\" y=\"{:.3}\" font-size=\"12\" fill=\"#d62728\">wrong matches</text>",
        x1 - 120.0,
        y1 + 28.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}
