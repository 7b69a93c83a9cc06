//! `log₁₀(gap)` against effective passes, one polyline per solver.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{HarnessError, Result};
use crate::output::TraceRow;

/// Gaps at or below this (including exact zeros and tiny negative round-off)
/// are drawn at `log₁₀ = −16`.
pub const GAP_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub fn clamped_log_gap(gap: f64) -> f64 {
    gap.max(GAP_FLOOR).log10()
}

/// Groups rows by solver, keeping first-appearance order.
pub fn series_from_rows(rows: &[TraceRow]) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for r in rows {
        let idx = match out.iter().position(|s| s.name == r.solver) {
            Some(i) => i,
            None => {
                out.push(Series {
                    name: r.solver.clone(),
                    points: Vec::new(),
                });
                out.len() - 1
            }
        };
        out[idx].points.push((r.pass, r.gap));
    }
    out
}

pub fn emit_plot(series: &[Series], path: &Path, title: &str) -> Result<()> {
    let drawn: Vec<(String, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            let pts = s
                .points
                .iter()
                .filter(|(x, g)| x.is_finite() && !g.is_nan())
                .map(|&(x, g)| (x, if g == f64::INFINITY { f64::MAX.log10() } else { clamped_log_gap(g) }))
                .collect();
            (s.name.clone(), pts)
        })
        .collect();
    if drawn.iter().all(|(_, p)| p.is_empty()) {
        return Err(HarnessError::EmptyTrace(format!("{} series without finite points", series.len())));
    }
    let all = drawn.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let plot_err = |e: &dyn std::fmt::Display| HarnessError::Plot(e.to_string());
    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| plot_err(&e))?;
    chart
        .configure_mesh()
        .x_desc("effective passes")
        .y_desc("log10 gap")
        .draw()
        .map_err(|e| plot_err(&e))?;
    for (k, (name, pts)) in drawn.into_iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(|e| plot_err(&e))?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperRight)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(&e))?;
    root.present().map_err(|e| plot_err(&e))?;
    Ok(())
}
