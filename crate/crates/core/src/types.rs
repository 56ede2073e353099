//! Domain types shared by every pipeline stage.
//!
//! Frames are 0-based indices. Class id 0 is reserved for the negative
//! class (frames outside every known location); positive classes are
//! `1..=M`. Segment ends are inclusive.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class identifier: 0 is negative, `1..=M` are locations.
pub type ClassId = usize;

/// The reserved negative class.
pub const NEGATIVE: ClassId = 0;

/// Row-sum tolerance for in-memory posterior rows.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// The `M` positive location classes plus the negative class, with display names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CatalogRepr", into = "CatalogRepr")]
pub struct ClassCatalog {
    names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CatalogRepr {
    names: Vec<String>,
}

impl TryFrom<CatalogRepr> for ClassCatalog {
    type Error = Error;
    fn try_from(r: CatalogRepr) -> Result<Self> {
        ClassCatalog::new(r.names)
    }
}

impl From<ClassCatalog> for CatalogRepr {
    fn from(c: ClassCatalog) -> Self {
        CatalogRepr { names: c.names }
    }
}

impl ClassCatalog {
    /// `names[0]` names the negative class; at least one positive class is required.
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::param(
                "catalog needs the negative class and at least one positive class",
            ));
        }
        Ok(Self { names })
    }

    /// Catalog with generic names: "negative", "class 1", ..., "class M".
    pub fn generic(positive_count: usize) -> Result<Self> {
        let names = std::iter::once("negative".to_string())
            .chain((1..=positive_count).map(|c| format!("class {c}")))
            .collect();
        Self::new(names)
    }

    pub fn positive_count(&self) -> usize {
        self.names.len() - 1
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, class_id: ClassId) -> Option<&str> {
        self.names.get(class_id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Per-frame hard class assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSeries {
    labels: Vec<ClassId>,
    frame_rate: f64,
}

impl LabelSeries {
    pub fn new(labels: Vec<ClassId>) -> Result<Self> {
        Self::with_frame_rate(labels, 1.0)
    }

    pub fn with_frame_rate(labels: Vec<ClassId>, frame_rate: f64) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptySeries);
        }
        check_frame_rate(frame_rate)?;
        Ok(Self { labels, frame_rate })
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Always false; a series holds at least one frame.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn max_class(&self) -> ClassId {
        self.labels.iter().copied().max().unwrap_or(NEGATIVE)
    }

    /// Fails if any label exceeds `positive_count`.
    pub fn check_classes(&self, positive_count: usize) -> Result<()> {
        match self.labels.iter().position(|&c| c > positive_count) {
            Some(frame) => Err(Error::ClassOutOfRange {
                frame,
                class_id: self.labels[frame],
                max: positive_count,
            }),
            None => Ok(()),
        }
    }

    pub fn into_labels(self) -> Vec<ClassId> {
        self.labels
    }
}

fn check_frame_rate(frame_rate: f64) -> Result<()> {
    if frame_rate.is_finite() && frame_rate > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "frame rate must be positive, got {frame_rate}"
        )))
    }
}

/// Whether posterior rows cover only the positive classes or all `M + 1` states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorKind {
    /// Columns are classes `1..=M`.
    PositiveOnly,
    /// Columns are classes `0..=M`.
    Merged,
}

impl PosteriorKind {
    /// Class id of column 0.
    pub fn first_class(self) -> ClassId {
        match self {
            PosteriorKind::PositiveOnly => 1,
            PosteriorKind::Merged => 0,
        }
    }
}

/// Per-frame probability rows, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSeries {
    kind: PosteriorKind,
    width: usize,
    data: Vec<f64>,
}

impl PosteriorSeries {
    /// Builds a series from row-major data, validating every row.
    pub fn new(kind: PosteriorKind, width: usize, data: Vec<f64>) -> Result<Self> {
        let min_width = match kind {
            PosteriorKind::PositiveOnly => 1,
            PosteriorKind::Merged => 2,
        };
        if width < min_width {
            return Err(Error::param(format!(
                "{kind:?} posterior needs at least {min_width} columns, got {width}"
            )));
        }
        if data.is_empty() {
            return Err(Error::EmptySeries);
        }
        if !data.len().is_multiple_of(width) {
            return Err(Error::param(format!(
                "{} values do not fill rows of width {width}",
                data.len()
            )));
        }
        for (frame, row) in data.chunks_exact(width).enumerate() {
            check_row(frame, row, ROW_SUM_TOLERANCE)?;
        }
        Ok(Self { kind, width, data })
    }

    pub fn from_rows(kind: PosteriorKind, rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map(Vec::len).ok_or(Error::EmptySeries)?;
        let mut data = Vec::with_capacity(width * rows.len());
        for row in rows {
            if row.len() != width {
                return Err(Error::WidthMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(kind, width, data)
    }

    pub fn kind(&self) -> PosteriorKind {
        self.kind
    }

    /// Number of columns `C`.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of positive classes `M`.
    pub fn positive_count(&self) -> usize {
        match self.kind {
            PosteriorKind::PositiveOnly => self.width,
            PosteriorKind::Merged => self.width - 1,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.width)
    }
}

pub(crate) fn check_row(frame: usize, row: &[f64], tolerance: f64) -> Result<()> {
    if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidPosterior {
            frame,
            reason: format!("entry {v} outside [0, 1]"),
        });
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > tolerance {
        return Err(Error::InvalidPosterior {
            frame,
            reason: format!("row sums to {sum}"),
        });
    }
    Ok(())
}

/// A maximal run of frames `start..=end` sharing one class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub class_id: ClassId,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Ordered, gap-free tiling of `0..total_frames` by maximal runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SegmentationRepr", into = "SegmentationRepr")]
pub struct Segmentation {
    segments: Vec<Segment>,
    total_frames: usize,
}

#[derive(Serialize, Deserialize)]
struct SegmentationRepr {
    total_frames: usize,
    segments: Vec<Segment>,
}

impl TryFrom<SegmentationRepr> for Segmentation {
    type Error = Error;
    fn try_from(r: SegmentationRepr) -> Result<Self> {
        Segmentation::new(r.segments, r.total_frames)
    }
}

impl From<Segmentation> for SegmentationRepr {
    fn from(s: Segmentation) -> Self {
        SegmentationRepr {
            total_frames: s.total_frames,
            segments: s.segments,
        }
    }
}

impl Segmentation {
    /// Validates the tiling and maximal-run invariants.
    pub fn new(segments: Vec<Segment>, total_frames: usize) -> Result<Self> {
        if total_frames == 0 || segments.is_empty() {
            return Err(Error::EmptySeries);
        }
        let mut expected_start = 0;
        let mut prev_class = None;
        for (i, s) in segments.iter().enumerate() {
            if s.start > s.end {
                return Err(Error::NonContiguous(format!(
                    "segment {i} starts at {} after its end {}",
                    s.start, s.end
                )));
            }
            if s.start != expected_start {
                return Err(Error::NonContiguous(format!(
                    "segment {i} starts at {}, expected {expected_start}",
                    s.start
                )));
            }
            if prev_class == Some(s.class_id) {
                return Err(Error::NonContiguous(format!(
                    "segments {} and {i} share class {} and should be one run",
                    i - 1,
                    s.class_id
                )));
            }
            prev_class = Some(s.class_id);
            expected_start = s.end + 1;
        }
        if expected_start != total_frames {
            return Err(Error::NonContiguous(format!(
                "segments cover {expected_start} of {total_frames} frames"
            )));
        }
        Ok(Self {
            segments,
            total_frames,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_frames(&self) -> usize {
        self.total_frames
    }

    pub fn max_class(&self) -> ClassId {
        self.segments.iter().map(|s| s.class_id).max().unwrap_or(NEGATIVE)
    }

    /// Segments of one class, in temporal order.
    pub fn of_class(&self, class_id: ClassId) -> impl Iterator<Item = &Segment> + '_ {
        self.segments.iter().filter(move |s| s.class_id == class_id)
    }
}

/// Connected components of the label sequence: one segment per maximal run.
pub fn labels_to_segmentation(labels: &LabelSeries) -> Segmentation {
    let l = labels.labels();
    let mut segments = Vec::new();
    let mut start = 0;
    for i in 1..=l.len() {
        if i == l.len() || l[i] != l[start] {
            segments.push(Segment {
                start,
                end: i - 1,
                class_id: l[start],
            });
            start = i;
        }
    }
    Segmentation {
        segments,
        total_frames: l.len(),
    }
}

/// Expands a segmentation back to one label per frame.
pub fn segmentation_to_labels(seg: &Segmentation) -> LabelSeries {
    let mut labels = Vec::with_capacity(seg.total_frames);
    for s in &seg.segments {
        labels.extend(std::iter::repeat_n(s.class_id, s.len()));
    }
    LabelSeries {
        labels,
        frame_rate: 1.0,
    }
}

/// Seconds spent in each class present in the segmentation.
///
/// Classes with no frames are omitted; classes outside the catalog are rejected.
pub fn dwell_times(
    seg: &Segmentation,
    catalog: &ClassCatalog,
    frame_rate: f64,
) -> Result<BTreeMap<ClassId, f64>> {
    check_frame_rate(frame_rate)?;
    let mut frames: BTreeMap<ClassId, usize> = BTreeMap::new();
    for s in seg.segments() {
        if s.class_id > catalog.positive_count() {
            return Err(Error::ClassOutOfRange {
                frame: s.start,
                class_id: s.class_id,
                max: catalog.positive_count(),
            });
        }
        *frames.entry(s.class_id).or_default() += s.len();
    }
    Ok(frames
        .into_iter()
        .map(|(c, n)| (c, n as f64 / frame_rate))
        .collect())
}
