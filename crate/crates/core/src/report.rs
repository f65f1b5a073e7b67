//! Metric tables and plots for one or more runs.
//!
//! A single run renders as a per-system table (six detectors plus the
//! selector). Several runs render as an ablation matrix with one selector row
//! per run, labelled by reward function and exploration schedule.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::pipeline::{RunReport, SELECTOR_NAME};

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::InvalidInput(format!("plot rendering failed: {e}"))
}

pub fn metrics_csv(reports: &[RunReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "reward", "epsilon", "system", "precision", "recall", "f1", "tp", "fp", "tn", "fn"])?;
    for r in reports {
        for s in &r.systems {
            let c = &s.confusion;
            w.write_record([
                r.name.clone(),
                r.reward.clone(),
                r.epsilon.clone(),
                s.system.clone(),
                format!("{:.3}", s.precision),
                format!("{:.3}", s.recall),
                format!("{:.3}", s.f1),
                c.tp.to_string(),
                c.fp.to_string(),
                c.tn.to_string(),
                c.fn_.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn grid(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let rule: String = widths.iter().map(|w| format!("+{}", "-".repeat(w + 2))).collect::<String>() + "+\n";
    let line = |cells: Vec<&str>| -> String {
        cells.iter().zip(&widths).map(|(c, w)| format!("| {c:<w$} ")).collect::<String>() + "|\n"
    };
    let mut out = rule.clone();
    out += &line(header.to_vec());
    out += &rule;
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out + &rule
}

fn fmt3(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "0".into() } else { s.to_string() }
}

/// Text rendering: a per-system table for one run, an ablation matrix for several.
pub fn metrics_table(reports: &[RunReport]) -> Result<String> {
    match reports {
        [] => Err(Error::InvalidInput("no reports to render".into())),
        [r] => {
            let rows: Vec<Vec<String>> = r
                .systems
                .iter()
                .map(|s| vec![s.system.clone(), fmt3(s.precision), fmt3(s.recall), fmt3(s.f1)])
                .collect();
            let mut out = format!("{}\n", r.name);
            out += &grid(&["AD Model", "Precision", "Recall", "F1score"], &rows);
            Ok(out)
        }
        many => {
            let mut rows = Vec::with_capacity(many.len());
            for r in many {
                let s = r
                    .system(SELECTOR_NAME)
                    .ok_or_else(|| Error::InvalidInput(format!("run {} has no selector row", r.name)))?;
                rows.push(vec![r.reward.clone(), r.epsilon.clone(), fmt3(s.precision), fmt3(s.recall), fmt3(s.f1)]);
            }
            Ok(grid(&["Reward Function", "Epsilon", "Precision", "Recall", "F1score"], &rows))
        }
    }
}

fn f1_bars(report: &RunReport) -> Result<String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (640, 400)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let n = report.systems.len();
        let mut chart = ChartBuilder::on(&root)
            .margin(20)
            .caption(format!("F1 per system: {}", report.name), ("sans-serif", 18))
            .x_label_area_size(30)
            .y_label_area_size(40)
            .build_cartesian_2d((0..n).into_segmented(), 0.0..1.05f64)
            .map_err(plot_err)?;
        let names: Vec<String> = report.systems.iter().map(|s| s.system.clone()).collect();
        chart
            .configure_mesh()
            .disable_x_mesh()
            .x_labels(n)
            .x_label_formatter(&|v| match v {
                SegmentValue::CenterOf(i) => names.get(*i).cloned().unwrap_or_default(),
                _ => String::new(),
            })
            .y_desc("F1")
            .draw()
            .map_err(plot_err)?;
        chart
            .draw_series(report.systems.iter().enumerate().map(|(i, s)| {
                let mut bar = Rectangle::new(
                    [(SegmentValue::Exact(i), 0.0), (SegmentValue::Exact(i + 1), s.f1)],
                    BLUE.mix(0.6).filled(),
                );
                bar.set_margin(0, 0, 6, 6);
                bar
            }))
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

fn training_curves(report: &RunReport) -> Result<Option<String>> {
    let log = &report.training;
    if log.is_empty() {
        return Ok(None);
    }
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (640, 560)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let (top, bottom) = root.split_vertically(280);
        let max_step = log.last().map_or(1, |r| r.step) as f64;
        let (lo, hi) = log
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.episode_return), b.max(r.episode_return)));
        let pad = ((hi - lo) * 0.05).max(1e-6);
        let mut ret = ChartBuilder::on(&top)
            .margin(15)
            .caption("Episode return", ("sans-serif", 16))
            .x_label_area_size(30)
            .y_label_area_size(50)
            .build_cartesian_2d(0.0..max_step, (lo - pad)..(hi + pad))
            .map_err(plot_err)?;
        ret.configure_mesh().x_desc("step").draw().map_err(plot_err)?;
        ret.draw_series(LineSeries::new(log.iter().map(|r| (r.step as f64, r.episode_return)), &RED))
            .map_err(plot_err)?;
        let mut eps = ChartBuilder::on(&bottom)
            .margin(15)
            .caption("Exploration epsilon", ("sans-serif", 16))
            .x_label_area_size(30)
            .y_label_area_size(50)
            .build_cartesian_2d(0.0..max_step, 0.0..1.05f64)
            .map_err(plot_err)?;
        eps.configure_mesh().x_desc("step").draw().map_err(plot_err)?;
        eps.draw_series(LineSeries::new(log.iter().map(|r| (r.step as f64, r.epsilon)), &BLUE))
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(Some(svg))
}

/// Relative file names and contents; plots are included only when requested.
pub fn render(reports: &[RunReport], plots: bool) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = vec![
        ("metrics.csv".to_string(), metrics_csv(reports)?),
        ("metrics.txt".to_string(), metrics_table(reports)?.into_bytes()),
    ];
    if plots {
        for (i, r) in reports.iter().enumerate() {
            let suffix = if reports.len() == 1 { String::new() } else { format!("_{i}") };
            files.push((format!("plots/f1{suffix}.svg"), f1_bars(r)?.into_bytes()));
            if let Some(svg) = training_curves(r)? {
                files.push((format!("plots/training{suffix}.svg"), svg.into_bytes()));
            }
        }
    }
    Ok(files)
}

/// Writes [`render`] output under `dir`.
pub fn emit_report(reports: &[RunReport], dir: impl AsRef<Path>, plots: bool) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    let files = render(reports, plots)?;
    let mut written = Vec::with_capacity(files.len());
    for (rel, bytes) in files {
        let path = dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        written.push(rel);
    }
    Ok(written)
}

/// Short human summary used by the command line.
pub fn summary_line(r: &RunReport) -> String {
    let mut s = String::new();
    for sys in &r.systems {
        let _ = write!(s, "{}={:.3} ", sys.system, sys.f1);
    }
    s.trim_end().to_string()
}
