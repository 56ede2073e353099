//! Evaluation report: JSON as the machine-readable record, plus a single
//! static HTML page with the segmentation strips, dwell times, score tables
//! and the row-normalized confusion matrix.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{asf1, confusion, ff1};
use crate::types::{
    dwell_times, labels_to_segmentation, segmentation_to_labels, ClassCatalog, LabelSeries, Segment,
    Segmentation,
};

use super::write_atomic;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Placeholder for classes with no frames in either sequence.
pub const ABSENT: &str = "/";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class_id: usize,
    pub name: String,
    pub ff1: Option<f64>,
    pub asf1: Option<f64>,
    pub gt_frames: u64,
    pub pred_frames: u64,
    pub gt_seconds: f64,
    pub pred_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub total_frames: usize,
    pub frame_rate: f64,
    pub mff1: Option<f64>,
    pub masf1: Option<f64>,
    pub classes: Vec<ClassRow>,
    /// Rows are ground truth, columns are predictions.
    pub confusion: Vec<Vec<u64>>,
    pub gt_segments: Vec<Segment>,
    pub pred_segments: Vec<Segment>,
}

/// Scores, confusion and dwell times of a predicted segmentation.
pub fn build_report(
    catalog: &ClassCatalog,
    gt: &LabelSeries,
    pred: &Segmentation,
    frame_rate: f64,
) -> Result<EvalReport> {
    let m = catalog.positive_count();
    let states = catalog.num_states();
    gt.check_classes(m)?;
    let pred_labels = segmentation_to_labels(pred);
    pred_labels.check_classes(m)?;
    let gt_seg = labels_to_segmentation(gt);
    let frame = ff1(gt, &pred_labels)?.padded(states);
    let seg = asf1(&gt_seg, pred)?.padded(states);
    let cm = confusion(gt, &pred_labels)?.padded(states);
    let gt_dwell = dwell_times(&gt_seg, catalog, frame_rate)?;
    let pred_dwell = dwell_times(pred, catalog, frame_rate)?;
    let classes = (0..states)
        .map(|c| ClassRow {
            class_id: c,
            name: catalog.name(c).unwrap_or_default().to_string(),
            ff1: frame.get(c),
            asf1: seg.get(c),
            gt_frames: cm.counts[c].iter().sum(),
            pred_frames: cm.counts.iter().map(|row| row[c]).sum(),
            gt_seconds: gt_dwell.get(&c).copied().unwrap_or(0.0),
            pred_seconds: pred_dwell.get(&c).copied().unwrap_or(0.0),
        })
        .collect();
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        total_frames: gt.len(),
        frame_rate,
        mff1: frame.mean(),
        masf1: seg.mean(),
        classes,
        confusion: cm.counts,
        gt_segments: gt_seg.segments().to_vec(),
        pred_segments: pred.segments().to_vec(),
    })
}

fn score(v: Option<f64>) -> String {
    v.map_or_else(|| ABSENT.to_string(), |v| format!("{v:.3}"))
}

/// Plain-text per-class table, `/` for absent classes.
pub fn render_score_table(report: &EvalReport) -> String {
    let width = report
        .classes
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(4)
        .max(4);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>3}  {:<width$}  {:>6}  {:>6}",
        "id", "class", "FF1", "ASF1"
    );
    for c in &report.classes {
        let _ = writeln!(
            out,
            "{:>3}  {:<width$}  {:>6}  {:>6}",
            c.class_id,
            c.name,
            score(c.ff1),
            score(c.asf1)
        );
    }
    let _ = writeln!(
        out,
        "{:>3}  {:<width$}  {:>6}  {:>6}",
        "",
        "mean",
        score(report.mff1),
        score(report.masf1)
    );
    out
}

/// Fixed color per class id; the negative class is gray.
fn class_color(class_id: usize) -> &'static str {
    const PALETTE: [&str; 12] = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#bcbd22", "#17becf",
        "#aec7e8", "#ffbb78", "#98df8a",
    ];
    if class_id == 0 {
        "#7f7f7f"
    } else {
        PALETTE[(class_id - 1) % PALETTE.len()]
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn strip(out: &mut String, report: &EvalReport, segments: &[Segment], which: &str) {
    const W: f64 = 1000.0;
    let n = report.total_frames as f64;
    let _ = writeln!(
        out,
        r#"<svg class="strip" data-strip="{which}" viewBox="0 0 1000 24" width="100%" height="24" preserveAspectRatio="none" xmlns="http://www.w3.org/2000/svg">"#
    );
    for s in segments {
        let name = report.classes.get(s.class_id).map_or("", |c| c.name.as_str());
        let _ = writeln!(
            out,
            r#"<rect class="seg" x="{:.3}" y="0" width="{:.3}" height="24" fill="{}"><title>{} [{}..{}]</title></rect>"#,
            s.start as f64 / n * W,
            s.len() as f64 / n * W,
            class_color(s.class_id),
            escape(name),
            s.start,
            s.end
        );
    }
    out.push_str("</svg>\n");
}

/// Self-contained static HTML view of a report.
pub fn render_html(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(
        r#"<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Localization report</title>
<style>
body { font-family: sans-serif; margin: 2em; color: #222; }
table { border-collapse: collapse; margin: 1em 0; }
th, td { border: 1px solid #ccc; padding: 0.3em 0.6em; text-align: right; }
th:first-child, td:first-child { text-align: left; }
.swatch { display: inline-block; width: 0.9em; height: 0.9em; margin-right: 0.4em; vertical-align: middle; }
.strip { display: block; margin: 0.2em 0 1em 0; border: 1px solid #999; }
</style>
</head>
<body>
<h1>Localization report</h1>
"#,
    );
    let _ = writeln!(
        out,
        "<p>{} frames at {} fps. mFF1 = {}, mASF1 = {}.</p>",
        report.total_frames,
        report.frame_rate,
        score(report.mff1),
        score(report.masf1)
    );

    out.push_str("<h2>Segmentation</h2>\n<p>Predicted</p>\n");
    strip(&mut out, report, &report.pred_segments, "pred");
    out.push_str("<p>Ground truth</p>\n");
    strip(&mut out, report, &report.gt_segments, "gt");

    out.push_str("<h2>Time spent per location</h2>\n<table>\n<tr><th>class</th><th>estimated (s)</th><th>ground truth (s)</th></tr>\n");
    for c in &report.classes {
        let _ = writeln!(
            out,
            r#"<tr><td><span class="swatch" style="background:{}"></span>{}</td><td>{:.2}</td><td>{:.2}</td></tr>"#,
            class_color(c.class_id),
            escape(&c.name),
            c.pred_seconds,
            c.gt_seconds
        );
    }
    out.push_str("</table>\n");

    out.push_str("<h2>Scores</h2>\n<table>\n<tr><th>measure</th>");
    for c in &report.classes {
        let _ = write!(out, "<th>{}</th>", escape(&c.name));
    }
    out.push_str("<th>mean</th></tr>\n");
    for (label, pick, mean) in [
        (
            "FF1",
            (|c: &ClassRow| c.ff1) as fn(&ClassRow) -> Option<f64>,
            report.mff1,
        ),
        ("ASF1", |c: &ClassRow| c.asf1, report.masf1),
    ] {
        let _ = write!(out, "<tr><td>{label}</td>");
        for c in &report.classes {
            let _ = write!(out, "<td>{}</td>", score(pick(c)));
        }
        let _ = writeln!(out, "<td>{}</td></tr>", score(mean));
    }
    out.push_str("</table>\n");

    out.push_str("<h2>Confusion matrix</h2>\n<p>Rows: ground truth. Columns: prediction. Row-normalized.</p>\n<table>\n<tr><th></th>");
    for c in &report.classes {
        let _ = write!(out, "<th>{}</th>", escape(&c.name));
    }
    out.push_str("</tr>\n");
    for (g, row) in report.confusion.iter().enumerate() {
        let total: u64 = row.iter().sum();
        let name = report.classes.get(g).map_or("", |c| c.name.as_str());
        let _ = write!(out, "<tr><td>{}</td>", escape(name));
        for &count in row {
            let v = if total == 0 {
                0.0
            } else {
                count as f64 / total as f64
            };
            let _ = write!(
                out,
                r#"<td style="background:rgba(31,119,180,{v:.3})" title="{count}">{v:.2}</td>"#
            );
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n</body>\n</html>\n");
    out
}

/// Writes `<prefix>.json` and `<prefix>.html`; returns both paths.
pub fn write_report(report: &EvalReport, path_prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let with_ext = |ext: &str| {
        let mut s = path_prefix.as_os_str().to_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    let json_path = with_ext(".json");
    let html_path = with_ext(".html");
    let mut json = serde_json::to_string_pretty(report).map_err(|source| Error::Json {
        path: json_path.clone(),
        source,
    })?;
    json.push('\n');
    write_atomic(&json_path, json.as_bytes())?;
    write_atomic(&html_path, render_html(report).as_bytes())?;
    Ok((json_path, html_path))
}
