//! Negative rejection.
//!
//! The discrimination step only knows the positive classes, so frames outside
//! every known location tend to receive unstable labels. The probability of the
//! negative class at frame `i` is the variation ratio of the labels in a window
//! of size `K` centered at `i`: one minus the relative frequency of the mode.
//!
//! The window is `[i - K/2, i + K/2]` clipped to the sequence, and the ratio is
//! normalized by the number of frames actually inside it, so the value stays in
//! `[0, 1 - 1/W]` for every `K` and at both ends of the sequence.

use crate::error::{Error, Result};
use crate::types::{ClassId, LabelSeries, PosteriorKind, PosteriorSeries, NEGATIVE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RejectionConfig {
    window_k: usize,
}

impl RejectionConfig {
    pub fn new(window_k: usize) -> Result<Self> {
        if window_k == 0 {
            return Err(Error::param("rejection window K must be at least 1"));
        }
        Ok(Self { window_k })
    }

    pub fn window_k(&self) -> usize {
        self.window_k
    }

    fn half(&self) -> usize {
        self.window_k / 2
    }

    /// Inclusive bounds of the clipped window around frame `i`.
    fn bounds(&self, i: usize, len: usize) -> (usize, usize) {
        (i.saturating_sub(self.half()), (i + self.half()).min(len - 1))
    }
}

fn check_positive_only(labels: &LabelSeries) -> Result<()> {
    match labels.labels().iter().position(|&c| c == NEGATIVE) {
        Some(frame) => Err(Error::NegativeInRejectionInput { frame }),
        None => Ok(()),
    }
}

/// Variation ratio of the label window centered at frame `i`.
pub fn variation_ratio(labels: &LabelSeries, i: usize, cfg: &RejectionConfig) -> Result<f64> {
    check_positive_only(labels)?;
    let n = labels.len();
    if i >= n {
        return Err(Error::FrameOutOfRange { index: i, len: n });
    }
    let (lo, hi) = cfg.bounds(i, n);
    let window = &labels.labels()[lo..=hi];
    let mut counts = vec![0usize; labels.max_class() + 1];
    for &c in window {
        counts[c] += 1;
    }
    let mode_count = counts.iter().copied().max().unwrap_or(0);
    Ok(1.0 - mode_count as f64 / window.len() as f64)
}

/// Tracks label multiplicities in a sliding window together with the
/// current maximum multiplicity.
struct ModeCounter {
    counts: Vec<usize>,
    // how many labels currently have each multiplicity
    by_count: Vec<usize>,
    max: usize,
}

impl ModeCounter {
    fn new(num_labels: usize, capacity: usize) -> Self {
        Self {
            counts: vec![0; num_labels],
            by_count: vec![0; capacity + 2],
            max: 0,
        }
    }

    fn add(&mut self, c: ClassId) {
        let k = self.counts[c];
        if k > 0 {
            self.by_count[k] -= 1;
        }
        self.counts[c] = k + 1;
        self.by_count[k + 1] += 1;
        self.max = self.max.max(k + 1);
    }

    fn remove(&mut self, c: ClassId) {
        let k = self.counts[c];
        self.by_count[k] -= 1;
        if k > 1 {
            self.by_count[k - 1] += 1;
        }
        self.counts[c] = k - 1;
        if k == self.max && self.by_count[k] == 0 {
            self.max = k - 1;
        }
    }
}

/// Per-frame negative probability for a whole sequence of positive labels.
pub fn negative_probability_series(labels: &LabelSeries, cfg: &RejectionConfig) -> Result<Vec<f64>> {
    check_positive_only(labels)?;
    let l = labels.labels();
    let n = l.len();
    let mut counter = ModeCounter::new(labels.max_class() + 1, (2 * cfg.half() + 1).min(n));
    let (mut lo, mut hi) = cfg.bounds(0, n);
    for &c in &l[lo..=hi] {
        counter.add(c);
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (new_lo, new_hi) = cfg.bounds(i, n);
        while hi < new_hi {
            hi += 1;
            counter.add(l[hi]);
        }
        while lo < new_lo {
            counter.remove(l[lo]);
            lo += 1;
        }
        let width = hi - lo + 1;
        out.push(1.0 - counter.max as f64 / width as f64);
    }
    Ok(out)
}

/// Combines a positive-only posterior with per-frame negative probabilities
/// into a posterior over all `M + 1` classes.
///
/// Row `i` becomes `[p, (1 - p) * q_1, ..., (1 - p) * q_M]`.
pub fn merge_posterior(positive: &PosteriorSeries, p_neg: &[f64]) -> Result<PosteriorSeries> {
    if positive.kind() != PosteriorKind::PositiveOnly {
        return Err(Error::param("merge_posterior expects a positive-only posterior"));
    }
    if positive.len() != p_neg.len() {
        return Err(Error::LengthMismatch {
            left: positive.len(),
            right: p_neg.len(),
        });
    }
    let width = positive.width() + 1;
    let mut data = Vec::with_capacity(width * positive.len());
    for (frame, (row, &p)) in positive.rows().zip(p_neg).enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidPosterior {
                frame,
                reason: format!("negative probability {p} outside [0, 1]"),
            });
        }
        data.push(p);
        data.extend(row.iter().map(|q| (1.0 - p) * q));
    }
    PosteriorSeries::new(PosteriorKind::Merged, width, data)
}

/// MAP label per frame. Ties go to the lowest class id.
pub fn map_assign(posterior: &PosteriorSeries) -> LabelSeries {
    let offset = posterior.kind().first_class();
    let labels = posterior
        .rows()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best + offset
        })
        .collect();
    LabelSeries::new(labels).expect("posterior series is never empty")
}
