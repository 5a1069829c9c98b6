use std::path::Path;

use plotters::prelude::*;

use ucutlass::metrics::FastPCurve;
use ucutlass::schedule::Sweep;

type PlotResult = Result<(), Box<dyn std::error::Error>>;

const SIZE: (u32, u32) = (800, 520);

fn palette(i: usize) -> RGBColor {
    [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK][i % 6]
}

/// Fast-p curves, one series per table, percent on the y axis.
pub fn fast_p(path: &Path, series: &[(String, FastPCurve)]) -> PlotResult {
    let x_max = series
        .iter()
        .flat_map(|(_, c)| c.thresholds.iter().copied())
        .fold(1.0_f64, f64::max);
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Fast-p", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..x_max, 0.0..100.0)?;
    chart.configure_mesh().x_desc("speedup threshold p").y_desc("% of problems").draw()?;
    for (i, (name, curve)) in series.iter().enumerate() {
        let color = palette(i);
        let pts = curve.thresholds.iter().zip(&curve.values).map(|(&p, &v)| (p, 100.0 * v));
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 18, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    root.present()?;
    Ok(())
}

/// Percent of problems at or above a target speedup after each attempt.
pub fn attempt_fast_p(path: &Path, series: &[(String, Vec<f64>)]) -> PlotResult {
    let n = series.iter().map(|(_, c)| c.len()).max().unwrap_or(0).max(1);
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Attempt-Fast-p", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(1.0..n as f64, 0.0..100.0)?;
    chart.configure_mesh().x_desc("attempts").y_desc("% of problems").draw()?;
    for (i, (name, curve)) in series.iter().enumerate() {
        let color = palette(i);
        let pts = curve.iter().enumerate().map(|(k, &v)| ((k + 1) as f64, v));
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 18, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    root.present()?;
    Ok(())
}

/// Every sweep cell as a point, the frontier as a line, the fixed budget at (1, geomean).
pub fn pareto(path: &Path, sweep: &Sweep) -> PlotResult {
    let pts: Vec<(f64, f64)> = sweep.cells.iter().map(|c| (c.token_ratio, c.geomean_speedup)).collect();
    let fixed = (1.0, sweep.fixed.geomean_speedup);
    let y_lo = pts.iter().map(|p| p.1).fold(fixed.1, f64::min);
    let y_hi = pts.iter().map(|p| p.1).fold(fixed.1, f64::max);
    let pad = ((y_hi - y_lo) * 0.05).max(1e-3);
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Cost vs. geomean speedup", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..1.05, (y_lo - pad)..(y_hi + pad))?;
    chart.configure_mesh().x_desc("tokens / fixed tokens").y_desc("geomean speedup").draw()?;
    chart
        .draw_series(pts.iter().map(|&p| Circle::new(p, 3, BLUE.mix(0.5).filled())))?
        .label("policy")
        .legend(|(x, y)| Circle::new((x + 9, y), 3, BLUE.filled()));
    chart
        .draw_series(LineSeries::new(
            sweep.frontier.iter().map(|f| (f.normalized_cost, f.geomean_speedup)),
            RED.stroke_width(2),
        ))?
        .label("frontier")
        .legend(|(x, y)| PathElement::new([(x, y), (x + 18, y)], RED));
    chart
        .draw_series(std::iter::once(Cross::new(fixed, 6, BLACK.stroke_width(2))))?
        .label("fixed")
        .legend(|(x, y)| Cross::new((x + 9, y), 4, BLACK));
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    root.present()?;
    Ok(())
}
