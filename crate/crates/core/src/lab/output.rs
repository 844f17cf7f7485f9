//! Report serialization: the fixed-format CSV table, JSON reports and log-log SVG plots.

use std::path::Path;

use csv::{Terminator, WriterBuilder};
use plotters::prelude::*;
use serde::Serialize;

use super::ConvergenceReport;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = ["epsilon", "k", "lambda_eps", "mu_limit", "abs_err", "grid_nx", "grid_nfiber", "lambda0_h"];

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// The eigenvalue table with 17 significant digits and LF line endings.
pub fn write_csv(report: &ConvergenceReport, out: impl std::io::Write) -> Result<()> {
    let mut w = WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in &report.rows {
        w.write_record([
            sci(r.epsilon),
            r.k.to_string(),
            sci(r.lambda_eps),
            sci(r.mu_limit),
            sci(r.abs_err),
            r.grid_nx.to_string(),
            r.grid_nfiber.to_string(),
            sci(r.lambda0_h),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(report: &ConvergenceReport) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(report, &mut buf)?;
    Ok(String::from_utf8(buf).expect("ascii table"))
}

pub fn write_json(value: &impl Serialize, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// One named series of (x, y) points for a log-log plot.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Log-log plot of positive data; non-positive points are dropped.
pub fn loglog_svg(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let pts: Vec<(f64, f64)> =
        series.iter().flat_map(|s| s.points.iter().copied()).filter(|(x, y)| *x > 0.0 && *y > 0.0).collect();
    if pts.is_empty() {
        return Err(Error::Validation(format!("nothing positive to plot in {title}")));
    }
    let (x0, x1) = pts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = pts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let plot_err = |e: String| Error::Io(std::io::Error::other(e));
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d((x0 / 1.2..x1 * 1.2).log_scale(), (y0 / 2.0..y1 * 2.0).log_scale())
        .map_err(|e| plot_err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(|e| plot_err(e.to_string()))?;
    for (i, s) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let data: Vec<(f64, f64)> = s.points.iter().copied().filter(|(x, y)| *x > 0.0 && *y > 0.0).collect();
        chart
            .draw_series(LineSeries::new(data.clone(), color.stroke_width(2)))
            .map_err(|e| plot_err(e.to_string()))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        chart
            .draw_series(data.into_iter().map(|p| Circle::new(p, 3, color.filled())))
            .map_err(|e| plot_err(e.to_string()))?;
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(|e| plot_err(e.to_string()))?;
    root.present().map_err(|e| plot_err(e.to_string()))?;
    Ok(())
}

/// abs_err against ε, one series per eigenvalue index.
pub fn plot_eigen_errors(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let k = report.rows.iter().map(|r| r.k + 1).max().unwrap_or(0);
    let series: Vec<Series> = (0..k)
        .map(|j| Series {
            label: format!("k = {j}"),
            points: report.rows.iter().filter(|r| r.k == j).map(|r| (r.epsilon, r.abs_err)).collect(),
        })
        .collect();
    loglog_svg(path, "eigenvalue error against the limit operator", "epsilon", "abs_err", &series)
}
