//! Table and figure export. Every figure is an SVG plus a CSV with the
//! plotted data, named deterministically from family, `n` and panel.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{BenchError, Result};
use crate::fit::{percentile, FitResult, Quantity, Table1Row};
use crate::records::ExperimentRecord;

pub const TABLE1_COLUMNS: [&str; 8] = ["family", "n", "quantity", "alpha", "ci_low", "ci_high", "points", "note"];

/// Long-format table: one line per (family, n, exponent).
pub fn write_table1(rows: &[Table1Row], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TABLE1_COLUMNS)?;
    for row in rows {
        for q in Quantity::ALL {
            let n = row.n.to_string();
            let rec: Vec<String> = match row.cells.get(&q) {
                Some(Ok(f)) => vec![
                    row.family.clone(),
                    n,
                    q.name().into(),
                    format!("{:.4}", f.alpha),
                    format!("{:.4}", f.ci_low),
                    format!("{:.4}", f.ci_high),
                    f.used.to_string(),
                    format!("censored={} dropped={}", f.censored, f.dropped),
                ],
                Some(Err(why)) => vec![
                    row.family.clone(),
                    n,
                    q.name().into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    why.clone(),
                ],
                None => continue,
            };
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn plot_err<E: std::fmt::Debug>(e: E) -> BenchError {
    BenchError::Plot(format!("{e:?}"))
}

struct ScatterPoint {
    x: f64,
    y: f64,
    log2_support: f64,
    censored: bool,
}

fn support_color(v: f64, max: f64) -> RGBColor {
    let t = if max > 0.0 { (v / max).clamp(0.0, 1.0) } else { 0.0 };
    // Blue (small support) to red (large support).
    RGBColor((40.0 + 200.0 * t) as u8, 60, (230.0 - 190.0 * t) as u8)
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(0.1);
    (lo - pad, hi + pad)
}

fn scatter_svg(
    path: &Path,
    title: &str,
    y_label: &str,
    pts: &[ScatterPoint],
    fit: Option<&FitResult>,
) -> Result<()> {
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (x0, x1) = bounds(pts.iter().map(|p| p.x));
    let (y0, y1) = bounds(pts.iter().map(|p| p.y));
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("log(1/eps)")
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;
    let max_s = pts.iter().map(|p| p.log2_support).fold(0.0, f64::max);
    chart
        .draw_series(pts.iter().filter(|p| !p.censored).map(|p| {
            Circle::new((p.x, p.y), 3, support_color(p.log2_support, max_s).filled())
        }))
        .map_err(plot_err)?;
    chart
        .draw_series(pts.iter().filter(|p| p.censored).map(|p| Cross::new((p.x, p.y), 4, BLACK)))
        .map_err(plot_err)?;
    if let Some(f) = fit {
        let line = [(x0, f.intercept + f.alpha * x0), (x1, f.intercept + f.alpha * x1)];
        chart
            .draw_series(LineSeries::new(line, BLACK.stroke_width(2)))
            .map_err(plot_err)?
            .label(format!("slope {:.2}", f.alpha))
            .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], BLACK));
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

fn write_scatter_csv(path: &Path, pts: &[ScatterPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["log_inv_eps", "log_y", "log2_support", "censored"])?;
    for p in pts {
        w.write_record([p.x.to_string(), p.y.to_string(), p.log2_support.to_string(), p.censored.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn panel_name(q: Quantity) -> (&'static str, &'static str) {
    match q {
        Quantity::Stage1Samples => ("stage1_samples", "log M1"),
        Quantity::V1Steps => ("stage2_v1_steps", "log t (v1)"),
        Quantity::V2Steps => ("stage2_v2_steps", "log t (v2)"),
        Quantity::Stage3Samples => ("stage3_samples", "log M3"),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    percentile(&v, 0.5)
}

/// Median update steps per integer `log2 |S|` bin, for each variant.
fn steps_vs_support(rs: &[&ExperimentRecord]) -> BTreeMap<String, BTreeMap<i64, f64>> {
    let mut bins: BTreeMap<String, BTreeMap<i64, Vec<f64>>> = BTreeMap::new();
    for r in rs.iter().filter(|r| r.stage == 2 && r.error.is_none()) {
        let s = r.support_size.unwrap_or(0);
        if s == 0 {
            continue;
        }
        let steps = (r.iterations.unwrap_or(0) + r.substeps.unwrap_or(0)) as f64;
        let bin = (s as f64).log2().round() as i64;
        bins.entry(r.variant.clone()).or_default().entry(bin).or_default().push(steps);
    }
    bins.into_iter()
        .map(|(v, m)| (v, m.into_iter().map(|(b, ys)| (b, median(ys))).collect()))
        .collect()
}

fn steps_svg(path: &Path, title: &str, data: &BTreeMap<String, BTreeMap<i64, f64>>) -> Result<()> {
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let xs = data.values().flat_map(|m| m.keys().map(|&b| b as f64));
    let (x0, x1) = bounds(xs);
    let ys = data.values().flat_map(|m| m.values().map(|&y| y.max(1.0).log10()));
    let (y0, y1) = bounds(ys);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("log2 |S|")
        .y_desc("log10 median steps")
        .draw()
        .map_err(plot_err)?;
    for (i, (variant, m)) in data.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let line: Vec<(f64, f64)> = m.iter().map(|(&b, &y)| (b as f64, y.max(1.0).log10())).collect();
        chart
            .draw_series(LineSeries::new(line.clone(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(variant.clone())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], color));
        chart
            .draw_series(line.into_iter().map(|p| Circle::new(p, 3, color.filled())))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Writes every panel into `dir` and returns the created paths.
pub fn write_figures(records: &[ExperimentRecord], table: &[Table1Row], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut groups: BTreeMap<(String, usize), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.state_family.clone(), r.n)).or_default().push(r);
    }
    let mut written = Vec::new();
    for ((family, n), rs) in &groups {
        let row = table.iter().find(|t| &t.family == family && t.n == *n);
        for q in Quantity::ALL {
            let pts: Vec<ScatterPoint> = rs
                .iter()
                .filter_map(|r| {
                    let (eps, y, censored) = q.point(r)?;
                    (y > 0.0).then(|| ScatterPoint {
                        x: (1.0 / eps).ln(),
                        y: y.ln(),
                        log2_support: (r.support_size.unwrap_or(0).max(1) as f64).log2(),
                        censored,
                    })
                })
                .collect();
            if pts.is_empty() {
                continue;
            }
            let (panel, y_label) = panel_name(q);
            let stem = format!("fig_{}_n{}_{}", family.to_lowercase(), n, panel);
            let fit = row.and_then(|r| r.cells.get(&q)).and_then(|c| c.as_ref().ok());
            let svg = dir.join(format!("{stem}.svg"));
            let csv = dir.join(format!("{stem}.csv"));
            scatter_svg(&svg, &format!("{family} n={n}: {panel}"), y_label, &pts, fit)?;
            write_scatter_csv(&csv, &pts)?;
            written.extend([svg, csv]);
        }
        let steps = steps_vs_support(rs);
        if !steps.is_empty() {
            let stem = format!("fig_{}_n{}_steps_vs_support", family.to_lowercase(), n);
            let svg = dir.join(format!("{stem}.svg"));
            let csv_path = dir.join(format!("{stem}.csv"));
            steps_svg(&svg, &format!("{family} n={n}: median update steps"), &steps)?;
            let mut w = csv::Writer::from_path(&csv_path)?;
            w.write_record(["variant", "log2_support", "median_steps"])?;
            for (v, m) in &steps {
                for (b, y) in m {
                    w.write_record([v.clone(), b.to_string(), y.to_string()])?;
                }
            }
            w.flush()?;
            written.extend([svg, csv_path]);
        }
    }
    Ok(written)
}
