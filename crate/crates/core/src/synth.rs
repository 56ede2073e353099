//! Synthetic visits with known ground truth.
//!
//! A visit is a walk over a complete graph of rooms. Each room visit lasts a
//! geometric number of frames; between rooms the visitor may pass through a
//! negative interlude (corridors, stairs). The per-frame positive-only
//! posterior imitates a noisy classifier that has never seen negative frames.
//!
//! Randomness comes from xoshiro256** seeded through SplitMix64
//! (`seed_from_u64`). Only integer operations and IEEE division feed the
//! generated values, so outputs are identical across platforms.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClassId, LabelSeries, PosteriorKind, PosteriorSeries, NEGATIVE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Positive classes `M`.
    pub num_classes: usize,
    pub total_frames: usize,
    pub seed: u64,
    /// Expected frames per room visit.
    pub mean_dwell: f64,
    /// Probability that a room change passes through a negative interlude.
    pub negative_gap_prob: f64,
    /// Expected frames per negative interlude.
    pub negative_gap_mean: f64,
    /// Probability that a frame's posterior peaks at its true room.
    pub classifier_accuracy: f64,
    /// 0 spreads the off-peak mass uniformly; 1 spreads it with fully random weights.
    pub confusion_spread: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 9,
            total_frames: 2000,
            seed: 42,
            mean_dwell: 200.0,
            negative_gap_prob: 0.5,
            negative_gap_mean: 60.0,
            classifier_accuracy: 0.75,
            confusion_spread: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::param("synthetic data needs at least 2 classes"));
        }
        if self.total_frames == 0 {
            return Err(Error::param("synthetic data needs at least 1 frame"));
        }
        for (name, v) in [
            ("negative_gap_prob", self.negative_gap_prob),
            ("classifier_accuracy", self.classifier_accuracy),
            ("confusion_spread", self.confusion_spread),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("mean_dwell", self.mean_dwell),
            ("negative_gap_mean", self.negative_gap_mean),
        ] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be at least 1, got {v}")));
            }
        }
        Ok(())
    }
}

struct Source(Xoshiro256StarStar);

impl Source {
    /// Uniform in the open interval (0, 1), 53-bit resolution.
    fn unit(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Uniform in `0..n` by multiply-shift.
    fn index(&mut self, n: usize) -> usize {
        ((self.0.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform class in `1..=m` other than `avoid`.
    fn other_class(&mut self, m: usize, avoid: ClassId) -> ClassId {
        let c = 1 + self.index(m - 1);
        if c >= avoid {
            c + 1
        } else {
            c
        }
    }
}

fn ground_truth(cfg: &SynthConfig, rng: &mut Source) -> Vec<ClassId> {
    let m = cfg.num_classes;
    let n = cfg.total_frames;
    let mut labels = Vec::with_capacity(n);
    let mut room = 1 + rng.index(m);
    while labels.len() < n {
        // Geometric visit length: stop after each frame with probability 1/mean.
        loop {
            labels.push(room);
            if labels.len() == n || rng.bernoulli(1.0 / cfg.mean_dwell) {
                break;
            }
        }
        if labels.len() < n && rng.bernoulli(cfg.negative_gap_prob) {
            loop {
                labels.push(NEGATIVE);
                if labels.len() == n || rng.bernoulli(1.0 / cfg.negative_gap_mean) {
                    break;
                }
            }
        }
        room = rng.other_class(m, room);
    }
    labels
}

fn posterior_row(cfg: &SynthConfig, truth: ClassId, rng: &mut Source, row: &mut Vec<f64>) {
    let m = cfg.num_classes;
    let peak = if truth == NEGATIVE {
        1 + rng.index(m)
    } else if rng.bernoulli(cfg.classifier_accuracy) {
        truth
    } else {
        rng.other_class(m, truth)
    };
    let top = 0.5 + 0.5 * rng.unit();
    let rest = 1.0 - top;
    let weights: Vec<f64> = (0..m - 1)
        .map(|_| (1.0 - cfg.confusion_spread) + cfg.confusion_spread * rng.unit() * (m - 1) as f64)
        .collect();
    let total: f64 = weights.iter().sum();
    let mut w = weights.iter();
    for class in 1..=m {
        if class == peak {
            row.push(top);
        } else {
            row.push(rest * w.next().copied().unwrap_or(0.0) / total);
        }
    }
}

/// Ground-truth labels and positive-only posteriors for one synthetic visit.
pub fn generate(cfg: &SynthConfig) -> Result<(LabelSeries, PosteriorSeries)> {
    cfg.validate()?;
    let mut rng = Source(Xoshiro256StarStar::seed_from_u64(cfg.seed));
    let gt = ground_truth(cfg, &mut rng);
    let mut data = Vec::with_capacity(gt.len() * cfg.num_classes);
    for &truth in &gt {
        posterior_row(cfg, truth, &mut rng, &mut data);
    }
    let positive = PosteriorSeries::new(PosteriorKind::PositiveOnly, cfg.num_classes, data)?;
    Ok((LabelSeries::new(gt)?, positive))
}
