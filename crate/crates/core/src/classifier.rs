//! Discrimination step: per-frame posteriors over the positive classes.
//!
//! Any model that produces one positive-only posterior row per frame can
//! drive the rest of the pipeline. [`CentroidModel`] is a small baseline:
//! an L1-normalized 3D color histogram per frame, one mean histogram per
//! class, and a softmax over negative L1 distances.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ppm::RgbImage;
use crate::types::{ClassId, PosteriorKind, PosteriorSeries, ROW_SUM_TOLERANCE};

pub const DEFAULT_BINS: usize = 4;
pub const DEFAULT_TEMPERATURE: f64 = 0.1;

/// L1-normalized color histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrameFeature(Vec<f64>);

impl TryFrom<Vec<f64>> for FrameFeature {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        FrameFeature::new(v)
    }
}

impl From<FrameFeature> for Vec<f64> {
    fn from(f: FrameFeature) -> Self {
        f.0
    }
}

impl FrameFeature {
    /// Entries must be nonnegative and sum to 1.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("feature vector is empty"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param("feature entries must be finite and nonnegative"));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::param(format!("feature sums to {sum}, expected 1")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1_distance(&self, other: &FrameFeature) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::WidthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum())
    }
}

/// Bin index of an 8-bit channel value.
fn channel_bin(v: u8, bins: usize) -> usize {
    v as usize * bins / 256
}

/// 3D color histogram with `bins` bins per channel, flattened as
/// `(r * bins + g) * bins + b`.
pub fn histogram_feature(image: &RgbImage, bins: usize) -> Result<FrameFeature> {
    if !(1..=256).contains(&bins) {
        return Err(Error::param(format!(
            "bins per channel must be in 1..=256, got {bins}"
        )));
    }
    let mut counts = vec![0u64; bins * bins * bins];
    let mut total = 0u64;
    for [r, g, b] in image.pixels() {
        let idx = (channel_bin(r, bins) * bins + channel_bin(g, bins)) * bins + channel_bin(b, bins);
        counts[idx] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::param("image has no pixels"));
    }
    let values: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let sum: f64 = values.iter().sum();
    FrameFeature::new(values.into_iter().map(|v| v / sum).collect())
}

/// Something that turns a frame feature into a posterior over `1..=M`.
pub trait PositiveClassifier {
    fn positive_count(&self) -> usize;

    /// One probability per positive class, summing to 1.
    fn classify(&self, feature: &FrameFeature) -> Result<Vec<f64>>;

    fn classify_sequence(&self, features: &[FrameFeature]) -> Result<PosteriorSeries>
    where
        Self: Sync,
    {
        if features.is_empty() {
            return Err(Error::EmptySeries);
        }
        let rows = features
            .par_iter()
            .map(|f| self.classify(f))
            .collect::<Result<Vec<_>>>()?;
        PosteriorSeries::from_rows(PosteriorKind::PositiveOnly, &rows)
    }
}

/// Nearest-centroid baseline over color histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    /// Histogram bins per channel; `None` when features are not color histograms.
    pub bins: Option<usize>,
    pub temperature: f64,
    /// `centroids[c - 1]` belongs to class `c`.
    pub centroids: Vec<FrameFeature>,
}

impl CentroidModel {
    pub fn validate(&self) -> Result<()> {
        if self.centroids.is_empty() {
            return Err(Error::param("model has no centroids"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::param(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        let dim = self.centroids[0].len();
        if let Some(b) = self.bins.filter(|b| b.pow(3) != dim) {
            return Err(Error::param(format!(
                "{b} bins per channel imply {} dimensions, centroids have {dim}",
                b.pow(3)
            )));
        }
        if let Some(c) = self.centroids.iter().find(|c| c.len() != dim) {
            return Err(Error::WidthMismatch {
                expected: dim,
                got: c.len(),
            });
        }
        Ok(())
    }
}

/// Class centroids as renormalized feature means.
///
/// Every class in `1..=positive_count` needs at least one feature. When the
/// feature length is a perfect cube it is taken to be a color histogram and
/// the bins per channel are recorded.
pub fn train_centroids(
    features: &BTreeMap<ClassId, Vec<FrameFeature>>,
    positive_count: usize,
    temperature: f64,
) -> Result<CentroidModel> {
    if positive_count == 0 {
        return Err(Error::param("at least one positive class is required"));
    }
    if let Some(&extra) = features.keys().find(|&&c| c == 0 || c > positive_count) {
        return Err(Error::ClassOutOfRange {
            frame: 0,
            class_id: extra,
            max: positive_count,
        });
    }
    let mut centroids = Vec::with_capacity(positive_count);
    let mut dim = None;
    for class in 1..=positive_count {
        let list = features
            .get(&class)
            .filter(|l| !l.is_empty())
            .ok_or(Error::MissingClass(class))?;
        let d = *dim.get_or_insert(list[0].len());
        let mut mean = vec![0.0; d];
        for f in list {
            if f.len() != d {
                return Err(Error::WidthMismatch {
                    expected: d,
                    got: f.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(f.values()) {
                *m += v;
            }
        }
        let sum: f64 = mean.iter().sum();
        centroids.push(FrameFeature::new(mean.into_iter().map(|m| m / sum).collect())?);
    }
    let d = dim.unwrap_or(0);
    let bins = (1..=256usize).find(|b| b.pow(3) == d);
    let model = CentroidModel {
        bins,
        temperature,
        centroids,
    };
    model.validate()?;
    Ok(model)
}

/// Numerically stable softmax.
fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl PositiveClassifier for CentroidModel {
    fn positive_count(&self) -> usize {
        self.centroids.len()
    }

    fn classify(&self, feature: &FrameFeature) -> Result<Vec<f64>> {
        let scores = self
            .centroids
            .iter()
            .map(|c| Ok(-feature.l1_distance(c)? / self.temperature))
            .collect::<Result<Vec<_>>>()?;
        Ok(softmax(&scores))
    }
}
