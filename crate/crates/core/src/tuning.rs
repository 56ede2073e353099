//! Grid search over the rejection window `K` and the switching probability
//! `epsilon` on a validation sequence.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::{viterbi_decode, TransitionModel};
use crate::metrics::{asf1, ff1};
use crate::rejection::{map_assign, merge_posterior, negative_probability_series, RejectionConfig};
use crate::types::{labels_to_segmentation, LabelSeries, PosteriorKind, PosteriorSeries};

pub const DEFAULT_K_VALUES: [usize; 3] = [50, 100, 300];
pub const DEFAULT_EPSILON_POINTS: usize = 30;
pub const DEFAULT_LOG10_EPSILON_RANGE: (f64, f64) = (-300.0, -2.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    #[serde(rename = "mASF1")]
    MeanAsf1,
    #[serde(rename = "mFF1")]
    MeanFf1,
}

impl FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "masf1" | "asf1" => Ok(Objective::MeanAsf1),
            "mff1" | "ff1" => Ok(Objective::MeanFf1),
            _ => Err(Error::param(format!(
                "unknown objective {s:?}, expected mASF1 or mFF1"
            ))),
        }
    }
}

/// `points` values of epsilon evenly spaced in log10 between the two
/// exponents (inclusive), each rounded to four significant digits so the grid
/// prints and parses identically everywhere.
pub fn log_spaced_epsilons(log10_lo: f64, log10_hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| {
            let t = if points == 1 {
                0.0
            } else {
                i as f64 / (points - 1) as f64
            };
            let exponent = log10_lo + (log10_hi - log10_lo) * t;
            let raw = 10f64.powf(exponent);
            format!("{raw:.3e}").parse().expect("formatted float parses")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub k_values: Vec<usize>,
    pub epsilon_values: Vec<f64>,
    pub objective: Objective,
}

impl Default for GridSpec {
    fn default() -> Self {
        let (lo, hi) = DEFAULT_LOG10_EPSILON_RANGE;
        Self {
            k_values: DEFAULT_K_VALUES.to_vec(),
            epsilon_values: log_spaced_epsilons(lo, hi, DEFAULT_EPSILON_POINTS),
            objective: Objective::MeanAsf1,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() || self.epsilon_values.is_empty() {
            return Err(Error::param("grid needs at least one K and one epsilon"));
        }
        if self.k_values.contains(&0) {
            return Err(Error::param("K values must be at least 1"));
        }
        if let Some(e) = self.epsilon_values.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::param(format!("epsilon {e} is outside (0, 1)")));
        }
        Ok(())
    }
}

/// One evaluated grid cell. `score` is `None` for skipped cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub k: usize,
    pub epsilon: f64,
    pub valid: bool,
    pub score: Option<f64>,
    pub mff1: Option<f64>,
    pub masf1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub objective: Objective,
    pub best_k: usize,
    pub best_epsilon: f64,
    pub best_score: f64,
    /// Row-major over `k_values` then `epsilon_values`.
    pub cells: Vec<GridCell>,
}

/// Whether cell `a` beats cell `b`: higher score, then larger K, then smaller epsilon.
fn better(a: &GridCell, a_score: f64, b: &GridCell, b_score: f64) -> bool {
    if a_score != b_score {
        return a_score > b_score;
    }
    if a.k != b.k {
        return a.k > b.k;
    }
    a.epsilon < b.epsilon
}

/// Evaluates the full pipeline on every (K, epsilon) cell and picks the best.
pub fn grid_search(positive: &PosteriorSeries, gt: &LabelSeries, spec: &GridSpec) -> Result<GridResult> {
    spec.validate()?;
    if positive.kind() != PosteriorKind::PositiveOnly {
        return Err(Error::param("grid search expects a positive-only posterior"));
    }
    if positive.len() != gt.len() {
        return Err(Error::LengthMismatch {
            left: positive.len(),
            right: gt.len(),
        });
    }
    gt.check_classes(positive.positive_count())?;
    let m = positive.positive_count();
    let gt_seg = labels_to_segmentation(gt);
    let discrimination = map_assign(positive);

    // The merged posterior depends only on K; share it across epsilons.
    let merged = spec
        .k_values
        .par_iter()
        .map(|&k| {
            let p_neg = negative_probability_series(&discrimination, &RejectionConfig::new(k)?)?;
            merge_posterior(positive, &p_neg)
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..spec.k_values.len())
        .flat_map(|ki| (0..spec.epsilon_values.len()).map(move |ei| (ki, ei)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(ki, ei)| {
            let k = spec.k_values[ki];
            let epsilon = spec.epsilon_values[ei];
            let model = match TransitionModel::new(m, epsilon) {
                Ok(model) => model,
                Err(e) => {
                    return Ok(GridCell {
                        k,
                        epsilon,
                        valid: false,
                        score: None,
                        mff1: None,
                        masf1: None,
                        skip_reason: Some(e.to_string()),
                    })
                }
            };
            let decoded = viterbi_decode(&merged[ki], &model)?;
            let mff1 = ff1(gt, &decoded.labels)?.mean();
            let masf1 = asf1(&gt_seg, &labels_to_segmentation(&decoded.labels))?.mean();
            let score = match spec.objective {
                Objective::MeanAsf1 => masf1,
                Objective::MeanFf1 => mff1,
            };
            Ok(GridCell {
                k,
                epsilon,
                valid: true,
                score,
                mff1,
                masf1,
                skip_reason: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = cells
        .iter()
        .filter_map(|c| c.score.map(|s| (c, s)))
        .reduce(|acc, cand| {
            if better(cand.0, cand.1, acc.0, acc.1) {
                cand
            } else {
                acc
            }
        })
        .ok_or(Error::NoValidCells)?;
    Ok(GridResult {
        objective: spec.objective,
        best_k: best.0.k,
        best_epsilon: best.0.epsilon,
        best_score: best.1,
        cells: cells.clone(),
    })
}
