use std::path::Path;

use anyhow::{anyhow, Context, Result};
use plotters::prelude::*;
use rppg_core::dsp::{power_spectrum, BandSpec};
use rppg_core::pipeline::PipelineOutput;

fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[(Vec<(f64, f64)>, RGBColor)]) -> Result<()> {
    let pts = series.iter().flat_map(|(s, _)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return Ok(());
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);

    let root = SVGBackend::new(path, (800, 400)).into_drawing_area();
    let draw = |e| anyhow!("drawing {}: {e}", path.display());
    root.fill(&WHITE).map_err(draw)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(55)
        .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
        .map_err(draw)?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(draw)?;
    for (s, colour) in series {
        chart.draw_series(LineSeries::new(s.iter().copied(), colour)).map_err(draw)?;
    }
    root.present().map_err(draw)
}

/// `spectrum.svg`, `motion.svg` and, when weights were learned, `objective.svg`.
pub fn write_all(dir: &Path, out: &PipelineOutput, fps: f64, band: &BandSpec) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let n = out.final_bvp.len();
    let spectrum: Vec<(f64, f64)> = power_spectrum(&out.final_bvp)
        .into_iter()
        .enumerate()
        .take(n / 2 + 1)
        .map(|(k, p)| (60.0 * k as f64 * fps / n as f64, p))
        .filter(|(bpm, _)| *bpm >= 0.5 * band.low * 60.0 && *bpm <= 1.5 * band.high * 60.0)
        .collect();
    line_chart(
        &dir.join("spectrum.svg"),
        &format!("Pulse spectrum, peak {:.1} BPM", out.hr.hr_bpm),
        "BPM",
        "power",
        &[(spectrum, BLUE)],
    )?;

    let t = |k: usize| k as f64 / fps;
    let velocity: Vec<(f64, f64)> = out.motion.motion_signal.iter().enumerate().map(|(k, v)| (t(k), *v)).collect();
    let angle: Vec<(f64, f64)> = out.motion.global_angle.iter().enumerate().map(|(k, v)| (t(k), *v)).collect();
    line_chart(
        &dir.join("motion.svg"),
        "Global head motion (blue: deg/s, red: angle)",
        "s",
        "deg/s, deg",
        &[(velocity, BLUE), (angle, RED)],
    )?;

    if let Some(fit) = &out.weight_fit {
        let trace: Vec<(f64, f64)> = fit.objective_trace.iter().enumerate().map(|(k, v)| (k as f64, *v)).collect();
        line_chart(&dir.join("objective.svg"), "Weight-learning objective", "iteration", "objective", &[(trace, BLUE)])?;
    }
    Ok(())
}
