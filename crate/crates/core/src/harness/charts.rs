use std::fmt::Write as _;
use std::path::Path;

use super::report::fmt_sig6;
use super::BenchRow;
use crate::error::{Error, Result};

const BAR_W: f64 = 30.0;
const BAR_GAP: f64 = 10.0;
const GROUP_GAP: f64 = 30.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 70.0;
const TOP: f64 = 40.0;
const PLOT_H: f64 = 240.0;
const BOTTOM: f64 = 120.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// x position of every row's bar, grouping rows by dataset.
fn layout(rows: &[BenchRow]) -> (Vec<f64>, f64) {
    let mut xs = Vec::with_capacity(rows.len());
    let mut x = LEFT + BAR_GAP;
    for (i, r) in rows.iter().enumerate() {
        if i > 0 && rows[i - 1].dataset != r.dataset {
            x += GROUP_GAP;
        }
        xs.push(x);
        x += BAR_W + BAR_GAP;
    }
    (xs, x + RIGHT)
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        w / 2.0,
        esc(title)
    );
}

fn label(out: &mut String, x: f64, r: &BenchRow) {
    let y = TOP + PLOT_H + 12.0;
    let _ = writeln!(
        out,
        r#"<text x="{x:.2}" y="{y:.2}" transform="rotate(60 {x:.2} {y:.2})" font-family="sans-serif" font-size="10">{}/{}</text>"#,
        esc(&r.dataset),
        esc(&r.technique)
    );
}

fn axis(out: &mut String, x: f64, ticks: &[(f64, String)], anchor: &str) {
    let _ = writeln!(
        out,
        r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##,
        TOP + PLOT_H
    );
    let dx = if anchor == "end" { -5.0 } else { 5.0 };
    for (y, text) in ticks {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}" font-family="sans-serif" font-size="10">{}</text>"#,
            x + dx,
            y + 3.0,
            esc(text)
        );
    }
}

/// Mean F1 per (dataset, technique) with a dashed reference line at each
/// dataset's baseline. Failed rows get an "n/a" marker instead of a bar.
pub fn f1_chart_svg(rows: &[BenchRow]) -> String {
    let (xs, w) = layout(rows);
    let h = TOP + PLOT_H + BOTTOM;
    let mut out = String::new();
    header(&mut out, w, h, "Mean F1 per technique");
    let y_of = |v: f64| TOP + PLOT_H * (1.0 - v.clamp(0.0, 1.0));
    let ticks: Vec<(f64, String)> = (0..=5).map(|k| (y_of(k as f64 / 5.0), format!("{:.1}", k as f64 / 5.0))).collect();
    axis(&mut out, LEFT, &ticks, "end");
    for (r, &x) in rows.iter().zip(&xs) {
        match r.mean_f1 {
            Some(v) => {
                let y = y_of(v);
                let _ = writeln!(
                    out,
                    r##"<rect class="bar" x="{x:.2}" y="{y:.2}" width="{BAR_W:.2}" height="{:.2}" fill="{}" data-dataset="{}" data-technique="{}" data-value="{}"/>"##,
                    TOP + PLOT_H - y,
                    if r.technique == "baseline" { "#888888" } else { "#3b6ea5" },
                    esc(&r.dataset),
                    esc(&r.technique),
                    fmt_sig6(v)
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    r#"<text class="na" x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="10">n/a</text>"#,
                    x + BAR_W / 2.0,
                    TOP + PLOT_H - 4.0
                );
            }
        }
        label(&mut out, x, r);
    }
    // Baseline reference per dataset group.
    let mut i = 0;
    while i < rows.len() {
        let mut j = i;
        while j < rows.len() && rows[j].dataset == rows[i].dataset {
            j += 1;
        }
        if let Some(b) = rows[i..j].iter().find(|r| r.technique == "baseline").and_then(|r| r.mean_f1) {
            let y = y_of(b);
            let _ = writeln!(
                out,
                r##"<line class="baseline" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#c0392b" stroke-dasharray="6,4"/>"##,
                xs[i] - BAR_GAP / 2.0,
                xs[j - 1] + BAR_W + BAR_GAP / 2.0
            );
        }
        i = j;
    }
    out.push_str("</svg>\n");
    out
}

/// Improvement over the baseline as bars (left axis) with mean inference
/// time per 1000 samples as markers (right axis).
pub fn improvement_chart_svg(rows: &[BenchRow]) -> String {
    let (xs, w) = layout(rows);
    let h = TOP + PLOT_H + BOTTOM;
    let mut out = String::new();
    header(&mut out, w, h, "Improvement over baseline and inference time");
    let max_imp = rows
        .iter()
        .filter_map(|r| r.improvement_pct)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let max_t = rows
        .iter()
        .filter_map(|r| r.infer_ms_per_1k)
        .fold(0.0f64, f64::max);
    let max_t = if max_t > 0.0 { max_t } else { 1.0 };
    let mid = TOP + PLOT_H / 2.0;
    let y_imp = |v: f64| mid - (PLOT_H / 2.0) * (v / max_imp);
    let y_t = |v: f64| TOP + PLOT_H * (1.0 - v / max_t);
    let left: Vec<(f64, String)> = [-1.0, -0.5, 0.0, 0.5, 1.0]
        .iter()
        .map(|k| (y_imp(k * max_imp), format!("{}%", fmt_sig6(k * max_imp))))
        .collect();
    let right: Vec<(f64, String)> = [0.0, 0.5, 1.0]
        .iter()
        .map(|k| (y_t(k * max_t), format!("{} ms/1k", fmt_sig6(k * max_t))))
        .collect();
    axis(&mut out, LEFT, &left, "end");
    axis(&mut out, w - RIGHT, &right, "start");
    let _ = writeln!(
        out,
        r##"<line x1="{LEFT:.2}" y1="{mid:.2}" x2="{:.2}" y2="{mid:.2}" stroke="#333"/>"##,
        w - RIGHT
    );
    for (r, &x) in rows.iter().zip(&xs) {
        if let Some(v) = r.improvement_pct {
            let y = y_imp(v);
            let _ = writeln!(
                out,
                r##"<rect class="bar" x="{x:.2}" y="{:.2}" width="{BAR_W:.2}" height="{:.2}" fill="{}" data-dataset="{}" data-technique="{}" data-value="{}"/>"##,
                y.min(mid),
                (y - mid).abs(),
                if v >= 0.0 { "#2e8b57" } else { "#b03a2e" },
                esc(&r.dataset),
                esc(&r.technique),
                fmt_sig6(v)
            );
        }
        if let Some(t) = r.infer_ms_per_1k {
            let _ = writeln!(
                out,
                r##"<circle class="marker" cx="{:.2}" cy="{:.2}" r="4" fill="#d35400" data-technique="{}" data-value="{}"/>"##,
                x + BAR_W / 2.0,
                y_t(t),
                esc(&r.technique),
                fmt_sig6(t)
            );
        }
        label(&mut out, x, r);
    }
    out.push_str("</svg>\n");
    out
}

/// Writes `f1_by_technique.svg` and `improvement_vs_inference.svg` into `dir`.
pub fn emit_charts(rows: &[BenchRow], dir: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no rows to chart".into()));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("f1_by_technique.svg"), f1_chart_svg(rows))?;
    std::fs::write(dir.join("improvement_vs_inference.svg"), improvement_chart_svg(rows))?;
    Ok(())
}
