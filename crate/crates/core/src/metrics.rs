//! Frame-level and segment-level evaluation.
//!
//! `ff1` is the per-class F1 over frames. `asf1` is a segment-level F1: for
//! every class, same-class ground truth and predicted segments are matched
//! one-to-one so that the summed overlap F1 is maximal, and the sum is divided
//! by the larger of the two segment counts. Splitting a true segment in two or
//! merging two true segments into one therefore both cost score, even when the
//! frame labels barely change.
//!
//! A class with no frames on either side is absent (`None`) and does not
//! count towards the mean.

use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_assignment;
use crate::error::{Error, Result};
use crate::types::{ClassId, LabelSeries, Segment, Segmentation};

/// Per-class scores; `None` marks a class absent from both inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub per_class: Vec<Option<f64>>,
}

impl ClassScores {
    pub fn get(&self, class_id: ClassId) -> Option<f64> {
        self.per_class.get(class_id).copied().flatten()
    }

    /// Mean over present classes; `None` when every class is absent.
    pub fn mean(&self) -> Option<f64> {
        let present: Vec<f64> = self.per_class.iter().flatten().copied().collect();
        (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
    }

    /// Extends the table with absent classes up to `num_states` entries.
    pub fn padded(mut self, num_states: usize) -> Self {
        if self.per_class.len() < num_states {
            self.per_class.resize(num_states, None);
        }
        self
    }
}

/// Frame counts, rows = ground truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn num_states(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Each row divided by its total; empty rows stay all-zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let t: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if t == 0 { 0.0 } else { c as f64 / t as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn padded(mut self, num_states: usize) -> Self {
        let n = num_states.max(self.counts.len());
        for row in &mut self.counts {
            row.resize(n, 0);
        }
        self.counts.resize(n, vec![0; n]);
        self
    }
}

fn check_lengths(gt: &LabelSeries, pred: &LabelSeries) -> Result<()> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: gt.len(),
            right: pred.len(),
        });
    }
    Ok(())
}

pub fn confusion(gt: &LabelSeries, pred: &LabelSeries) -> Result<ConfusionMatrix> {
    check_lengths(gt, pred)?;
    let n = gt.max_class().max(pred.max_class()) + 1;
    let mut counts = vec![vec![0u64; n]; n];
    for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

fn f1(tp: u64, fp: u64, fn_: u64) -> Option<f64> {
    let denom = 2 * tp + fp + fn_;
    (denom > 0).then(|| 2.0 * tp as f64 / denom as f64)
}

/// Frame-wise F1 per class.
pub fn ff1(gt: &LabelSeries, pred: &LabelSeries) -> Result<ClassScores> {
    let cm = confusion(gt, pred)?;
    let n = cm.num_states();
    let per_class = (0..n)
        .map(|c| {
            let tp = cm.counts[c][c];
            let fn_ = cm.counts[c].iter().sum::<u64>() - tp;
            let fp = (0..n).map(|g| cm.counts[g][c]).sum::<u64>() - tp;
            f1(tp, fp, fn_)
        })
        .collect();
    Ok(ClassScores { per_class })
}

/// F1 between two frame intervals viewed as binary masks.
pub fn interval_f1(a: &Segment, b: &Segment) -> f64 {
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    if lo > hi {
        return 0.0;
    }
    let overlap = hi - lo + 1;
    2.0 * overlap as f64 / (a.len() + b.len()) as f64
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Best total overlap F1 of a one-to-one matching between two ordered lists of
/// disjoint intervals.
///
/// Only overlapping pairs carry weight, so the overlap graph is split into
/// connected components and each is solved separately.
fn best_matching_total(gt: &[Segment], pred: &[Segment]) -> f64 {
    // Overlapping pairs via a merge sweep over both ordered lists.
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < gt.len() && j < pred.len() {
        if gt[i].start.max(pred[j].start) <= gt[i].end.min(pred[j].end) {
            pairs.push((i, j));
        }
        if gt[i].end < pred[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    if pairs.is_empty() {
        return 0.0;
    }
    // Nodes: gt segments 0..g, pred segments g..g+p.
    let g = gt.len();
    let mut parent: Vec<usize> = (0..g + pred.len()).collect();
    for &(i, j) in &pairs {
        let (a, b) = (find(&mut parent, i), find(&mut parent, g + j));
        parent[a.max(b)] = a.min(b);
    }
    let mut components: std::collections::BTreeMap<usize, Vec<(usize, usize)>> = Default::default();
    for &(i, j) in &pairs {
        let root = find(&mut parent, i);
        components.entry(root).or_default().push((i, j));
    }
    let mut total = 0.0;
    for edges in components.values() {
        let mut rows: Vec<usize> = edges.iter().map(|e| e.0).collect();
        let mut cols: Vec<usize> = edges.iter().map(|e| e.1).collect();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        let mut w = vec![vec![0.0; cols.len()]; rows.len()];
        for &(i, j) in edges {
            let r = rows.binary_search(&i).unwrap_or_else(|_| unreachable!());
            let c = cols.binary_search(&j).unwrap_or_else(|_| unreachable!());
            w[r][c] = interval_f1(&gt[i], &pred[j]);
        }
        let assignment = max_weight_assignment(&w);
        total += assignment
            .iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| w[r][c]))
            .sum::<f64>();
    }
    total
}

/// Segment-level F1 per class.
pub fn asf1(gt: &Segmentation, pred: &Segmentation) -> Result<ClassScores> {
    if gt.total_frames() != pred.total_frames() {
        return Err(Error::LengthMismatch {
            left: gt.total_frames(),
            right: pred.total_frames(),
        });
    }
    let n = gt.max_class().max(pred.max_class()) + 1;
    let per_class = (0..n)
        .map(|c| {
            let g: Vec<Segment> = gt.of_class(c).copied().collect();
            let p: Vec<Segment> = pred.of_class(c).copied().collect();
            match (g.len(), p.len()) {
                (0, 0) => None,
                (0, _) | (_, 0) => Some(0.0),
                (a, b) => Some(best_matching_total(&g, &p) / a.max(b) as f64),
            }
        })
        .collect();
    Ok(ClassScores { per_class })
}
