//! SVG figures for traces and IQ scatter clouds.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::signal::IQPoint;

use super::result::{ExperimentResult, Trace};

const SIZE: (u32, u32) = (720, 480);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

fn plot_error(e: impl std::fmt::Display) -> Error {
    Error::Internal(format!("plotting failed: {e}"))
}

fn padded((lo, hi): (f64, f64)) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.05 };
    (lo - pad, hi + pad)
}

/// Tick label that stays readable for both GHz frequencies and μV-scale IQ.
fn tick(v: &f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    }
}

fn extent<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

pub fn trace_svg(path: &Path, title: &str, trace: &Trace) -> Result<()> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    let (x0, x1) = padded(extent(trace.x.iter()));
    let (y0, y1) = padded(extent(trace.series.values().flatten()));
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_error)?;
    chart.configure_mesh().x_desc(trace.x_label.as_str()).x_label_formatter(&tick).y_label_formatter(&tick).draw().map_err(plot_error)?;
    for (k, (name, ys)) in trace.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<(f64, f64)> =
            trace.x.iter().zip(ys).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(&x, &y)| (x, y)).collect();
        chart
            .draw_series(LineSeries::new(points, color.stroke_width(2)))
            .map_err(plot_error)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_error)?;
    root.present().map_err(plot_error)
}

pub fn scatter_svg(path: &Path, title: &str, clouds: &[(&str, &[IQPoint])]) -> Result<()> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    let all = || clouds.iter().flat_map(|(_, pts)| pts.iter());
    let (i0, i1) = padded(extent(all().map(|p| &p.i)));
    let (q0, q1) = padded(extent(all().map(|p| &p.q)));
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(i0..i1, q0..q1)
        .map_err(plot_error)?;
    chart.configure_mesh().x_desc("I").y_desc("Q").x_label_formatter(&tick).y_label_formatter(&tick).draw().map_err(plot_error)?;
    for (k, (name, pts)) in clouds.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        chart
            .draw_series(pts.iter().map(|p| Circle::new((p.i, p.q), 2, color.mix(0.5).filled())))
            .map_err(plot_error)?
            .label(*name)
            .legend(move |(x, y)| Circle::new((x + 8, y), 4, color.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_error)?;
    root.present().map_err(plot_error)
}

/// One SVG per summary trace and one per raw IQ cloud, next to the JSON.
pub fn write_plots(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(crate::error::io_error(dir))?;
    let stem = result.file_stem();
    let mut written = vec![];
    for (name, trace) in &result.summary {
        let path = dir.join(format!("{stem}_{name}.svg"));
        trace_svg(&path, &format!("{} {name}", result.experiment), trace)?;
        written.push(path);
    }
    if !result.raw_iq.is_empty() {
        let path = dir.join(format!("{stem}_iq.svg"));
        let clouds: Vec<(&str, &[IQPoint])> = result.raw_iq.iter().map(|(k, v)| (k.as_str(), v.as_slice())).collect();
        scatter_svg(&path, &format!("{} IQ", result.experiment), &clouds)?;
        written.push(path);
    }
    Ok(written)
}
