//! Label and posterior CSV files.
//!
//! ```text
//! labels     := comment* "frame,class_id" NL (frame "," class NL)+
//! posteriors := comment* header NL (frame ("," prob)+ NL)+
//! header     := "frame,p0,p1,...,pM"    (merged)
//!             | "frame,p1,...,pM"       (positive only)
//! comment    := "#" key "=" value NL    (frame_rate=..., kind=...)
//! ```
//!
//! Frames start at 0 and increase by one per row. Posterior rows must sum to
//! 1 within 1e-6 and are renormalized when they are off by more than 1e-9.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::{check_row, LabelSeries, PosteriorKind, PosteriorSeries, ROW_SUM_TOLERANCE};

use super::write_atomic;

/// Row-sum tolerance accepted when parsing.
pub const PARSE_SUM_TOLERANCE: f64 = 1e-6;

struct Lines<'a> {
    path: PathBuf,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    comments: Vec<(usize, String, String)>,
}

impl<'a> Lines<'a> {
    fn new(path: &Path, text: &'a str) -> Self {
        Self {
            path: path.to_path_buf(),
            iter: text.lines().enumerate(),
            comments: Vec::new(),
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    /// Reads leading `# key=value` comments and returns the header line.
    fn header(&mut self) -> Result<(usize, &'a str)> {
        for (i, line) in self.iter.by_ref() {
            let line = line.trim_end_matches('\r');
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                let (k, v) = rest.split_once('=').ok_or_else(|| Error::Parse {
                    path: self.path.clone(),
                    line: i + 1,
                    message: format!("comment {rest:?} is not key=value"),
                })?;
                self.comments
                    .push((i + 1, k.trim().to_string(), v.trim().to_string()));
                continue;
            }
            return Ok((i + 1, line));
        }
        Err(self.err(1, "missing header"))
    }

    fn comment(&self, key: &str) -> Option<(usize, &str)> {
        self.comments
            .iter()
            .find(|(_, k, _)| k == key)
            .map(|(l, _, v)| (*l, v.as_str()))
    }

    /// Data rows as (line number, fields), skipping blank lines.
    fn rows(&mut self) -> impl Iterator<Item = (usize, Vec<&'a str>)> + '_ {
        self.iter.by_ref().filter_map(|(i, line)| {
            let line = line.trim_end_matches('\r');
            (!line.trim().is_empty()).then(|| (i + 1, line.split(',').map(str::trim).collect()))
        })
    }
}

fn parse_frame(lines: &Lines, line: usize, field: &str, expected: usize) -> Result<()> {
    let frame: usize = field
        .parse()
        .map_err(|_| lines.err(line, format!("frame {field:?} is not a nonnegative integer")))?;
    if frame != expected {
        let what = if frame < expected {
            "duplicate or out-of-order"
        } else {
            "gap before"
        };
        return Err(lines.err(line, format!("{what} frame {frame}, expected frame {expected}")));
    }
    Ok(())
}

fn parse_frame_rate(lines: &Lines) -> Result<f64> {
    match lines.comment("frame_rate") {
        None => Ok(1.0),
        Some((line, v)) => match v.parse::<f64>() {
            Ok(r) if r.is_finite() && r > 0.0 => Ok(r),
            _ => Err(lines.err(line, format!("invalid frame_rate {v:?}"))),
        },
    }
}

/// Parses a label CSV. `positive_count`, when given, bounds the class ids.
pub fn parse_labels(path: &Path, text: &str, positive_count: Option<usize>) -> Result<LabelSeries> {
    let mut lines = Lines::new(path, text);
    let (hline, header) = lines.header()?;
    if header.split(',').map(str::trim).collect::<Vec<_>>() != ["frame", "class_id"] {
        return Err(lines.err(
            hline,
            format!("expected header \"frame,class_id\", found {header:?}"),
        ));
    }
    let frame_rate = parse_frame_rate(&lines)?;
    let mut labels = Vec::new();
    let rows: Vec<_> = lines.rows().collect();
    for (line, fields) in rows {
        if fields.len() != 2 {
            return Err(lines.err(line, format!("expected 2 fields, found {}", fields.len())));
        }
        parse_frame(&lines, line, fields[0], labels.len())?;
        let class: usize = fields[1].parse().map_err(|_| {
            lines.err(
                line,
                format!("class id {:?} is not a nonnegative integer", fields[1]),
            )
        })?;
        if let Some(m) = positive_count.filter(|&m| class > m) {
            return Err(lines.err(line, format!("class id {class} outside catalog 0..={m}")));
        }
        labels.push(class);
    }
    if labels.is_empty() {
        return Err(lines.err(hline, "no frames after header"));
    }
    LabelSeries::with_frame_rate(labels, frame_rate)
}

pub fn read_labels(path: &Path, positive_count: Option<usize>) -> Result<LabelSeries> {
    let text = std::fs::read_to_string(path)?;
    parse_labels(path, &text, positive_count)
}

pub fn render_labels(labels: &LabelSeries) -> String {
    let mut out = String::with_capacity(labels.len() * 8 + 32);
    if labels.frame_rate() != 1.0 {
        let _ = writeln!(out, "# frame_rate={}", labels.frame_rate());
    }
    out.push_str("frame,class_id\n");
    for (i, c) in labels.labels().iter().enumerate() {
        let _ = writeln!(out, "{i},{c}");
    }
    out
}

pub fn write_labels(path: &Path, labels: &LabelSeries) -> Result<()> {
    write_atomic(path, render_labels(labels).as_bytes())
}

/// Parses a posterior CSV; the header decides between positive-only and merged.
pub fn parse_posteriors(path: &Path, text: &str) -> Result<PosteriorSeries> {
    let mut lines = Lines::new(path, text);
    let (hline, header) = lines.header()?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"frame") || cols.len() < 2 {
        return Err(lines.err(hline, format!("expected header \"frame,p...\", found {header:?}")));
    }
    let first = match cols[1] {
        "p0" => 0,
        "p1" => 1,
        other => {
            return Err(lines.err(
                hline,
                format!("first probability column must be p0 or p1, found {other:?}"),
            ))
        }
    };
    for (j, c) in cols[1..].iter().enumerate() {
        if *c != format!("p{}", first + j) {
            return Err(lines.err(
                hline,
                format!("column {} should be p{}, found {c:?}", j + 2, first + j),
            ));
        }
    }
    let kind = if first == 0 {
        PosteriorKind::Merged
    } else {
        PosteriorKind::PositiveOnly
    };
    if let Some((line, v)) = lines.comment("kind") {
        let declared = match v {
            "positive_only" => PosteriorKind::PositiveOnly,
            "merged" => PosteriorKind::Merged,
            _ => return Err(lines.err(line, format!("unknown kind {v:?}"))),
        };
        if declared != kind {
            return Err(lines.err(line, format!("kind={v} disagrees with header {header:?}")));
        }
    }
    let width = cols.len() - 1;
    let mut data = Vec::new();
    let mut frames = 0;
    let rows: Vec<_> = lines.rows().collect();
    for (line, fields) in rows {
        if fields.len() != width + 1 {
            return Err(lines.err(
                line,
                format!("expected {} fields, found {}", width + 1, fields.len()),
            ));
        }
        parse_frame(&lines, line, fields[0], frames)?;
        let mut row = Vec::with_capacity(width);
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| lines.err(line, format!("probability {f:?} is not a number")))?;
            row.push(v);
        }
        check_row(frames, &row, PARSE_SUM_TOLERANCE).map_err(|e| lines.err(line, e.to_string()))?;
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            row.iter_mut().for_each(|v| *v /= sum);
        }
        data.extend(row);
        frames += 1;
    }
    if frames == 0 {
        return Err(lines.err(hline, "no frames after header"));
    }
    PosteriorSeries::new(kind, width, data)
}

pub fn read_posteriors(path: &Path) -> Result<PosteriorSeries> {
    let text = std::fs::read_to_string(path)?;
    parse_posteriors(path, &text)
}

pub fn render_posteriors(posteriors: &PosteriorSeries) -> String {
    let first = posteriors.kind().first_class();
    let mut out = String::new();
    let kind = match posteriors.kind() {
        PosteriorKind::PositiveOnly => "positive_only",
        PosteriorKind::Merged => "merged",
    };
    let _ = writeln!(out, "# kind={kind}");
    out.push_str("frame");
    for j in 0..posteriors.width() {
        let _ = write!(out, ",p{}", first + j);
    }
    out.push('\n');
    for (i, row) in posteriors.rows().enumerate() {
        let _ = write!(out, "{i}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_posteriors(path: &Path, posteriors: &PosteriorSeries) -> Result<()> {
    write_atomic(path, render_posteriors(posteriors).as_bytes())
}
