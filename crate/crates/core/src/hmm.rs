//! Sequential modeling with an "almost identity" HMM.
//!
//! There are `M + 1` states, one per class. Staying in a state has probability
//! `1 - M * epsilon`; moving to any other state has probability `epsilon`.
//! Emissions are the merged per-frame posteriors. Decoding maximizes
//!
//! ```text
//! prod_{i>=2} P(y_i | y_{i-1}) * prod_{i>=1} P(y_i | F_i)
//! ```
//!
//! in log space, with no initial-state factor.

use crate::error::{Error, Result};
use crate::rejection::{map_assign, merge_posterior, negative_probability_series, RejectionConfig};
use crate::types::{labels_to_segmentation, LabelSeries, PosteriorKind, PosteriorSeries, Segmentation};

/// Emission probabilities are floored here before taking logs.
pub const EMISSION_FLOOR: f64 = 1e-12;

/// Transition structure with uniform off-diagonal probability `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionModel {
    num_states: usize,
    epsilon: f64,
    log_stay: f64,
    log_switch: f64,
}

impl TransitionModel {
    /// `positive_count` is `M`; the model has `M + 1` states.
    pub fn new(positive_count: usize, epsilon: f64) -> Result<Self> {
        if positive_count == 0 {
            return Err(Error::param("transition model needs at least one positive class"));
        }
        let m = positive_count as f64;
        if !(epsilon > 0.0 && epsilon.is_finite() && m * epsilon < 1.0) {
            return Err(Error::param(format!(
                "epsilon must satisfy 0 < epsilon and M * epsilon < 1 (M = {positive_count}, epsilon = {epsilon:e})"
            )));
        }
        Ok(Self {
            num_states: positive_count + 1,
            epsilon,
            log_stay: (-m * epsilon).ln_1p(),
            log_switch: epsilon.ln(),
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn log_stay(&self) -> f64 {
        self.log_stay
    }

    pub fn log_switch(&self) -> f64 {
        self.log_switch
    }

    pub fn transition_logprob(&self, from: usize, to: usize) -> Result<f64> {
        for state in [from, to] {
            if state >= self.num_states {
                return Err(Error::StateOutOfRange {
                    state,
                    num_states: self.num_states,
                });
            }
        }
        Ok(if from == to {
            self.log_stay
        } else {
            self.log_switch
        })
    }
}

/// Most probable state path and its log score.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub labels: LabelSeries,
    pub log_joint: f64,
}

/// Log-emission for one probability, with the floor applied.
pub fn log_emission(p: f64) -> f64 {
    p.max(EMISSION_FLOOR).ln()
}

/// Best and runner-up entries of a score vector, lowest index first on ties.
fn top_two(scores: &[f64]) -> (usize, Option<usize>) {
    let mut best = 0;
    let mut second: Option<usize> = None;
    for (j, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            second = Some(best);
            best = j;
        } else if second.is_none_or(|k| s > scores[k]) {
            second = Some(j);
        }
    }
    (best, second)
}

/// Viterbi decoding in `O(N * states)`.
///
/// Because every off-diagonal transition has the same probability, the best
/// predecessor of state `j` is either `j` itself or the best state other than
/// `j`, so only the top two scores of the previous frame are needed. On exact
/// ties the lowest state id wins, both for predecessors and the final state.
pub fn viterbi_decode(emissions: &PosteriorSeries, model: &TransitionModel) -> Result<DecodeResult> {
    if emissions.kind() != PosteriorKind::Merged || emissions.width() != model.num_states() {
        return Err(Error::WidthMismatch {
            expected: model.num_states(),
            got: emissions.width(),
        });
    }
    let n = emissions.len();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    let s = model.num_states();
    let (stay, switch) = (model.log_stay(), model.log_switch());

    let mut score: Vec<f64> = emissions.row(0).iter().map(|&p| log_emission(p)).collect();
    let mut next = vec![0.0; s];
    // back[i * s + j]: best predecessor of state j at frame i
    let mut back = vec![0u32; n * s];

    for i in 1..n {
        let (best, second) = top_two(&score);
        let row = emissions.row(i);
        for j in 0..s {
            let other = if j == best { second } else { Some(best) };
            let keep = score[j] + stay;
            let (from, prev) = match other {
                Some(k) => {
                    let moved = score[k] + switch;
                    if moved > keep || (moved == keep && k < j) {
                        (k, moved)
                    } else {
                        (j, keep)
                    }
                }
                None => (j, keep),
            };
            back[i * s + j] = from as u32;
            next[j] = prev + log_emission(row[j]);
        }
        std::mem::swap(&mut score, &mut next);
    }

    let (mut state, _) = top_two(&score);
    let log_joint = score[state];
    let mut labels = vec![0; n];
    for i in (0..n).rev() {
        labels[i] = state;
        if i > 0 {
            state = back[i * s + state] as usize;
        }
    }
    Ok(DecodeResult {
        labels: LabelSeries::new(labels)?,
        log_joint,
    })
}

/// Label sequences produced by each pipeline stage.
#[derive(Debug, Clone)]
pub struct PipelineStages {
    /// MAP over positive classes only.
    pub discrimination: LabelSeries,
    /// MAP over the merged posterior, after negative rejection.
    pub rejection: LabelSeries,
    /// Viterbi-smoothed labels.
    pub smoothed: DecodeResult,
}

/// Runs discrimination, negative rejection and HMM smoothing, keeping every
/// intermediate label sequence.
pub fn run_pipeline(positive: &PosteriorSeries, k: usize, epsilon: f64) -> Result<PipelineStages> {
    if positive.kind() != PosteriorKind::PositiveOnly {
        return Err(Error::param("pipeline input must be a positive-only posterior"));
    }
    let model = TransitionModel::new(positive.positive_count(), epsilon)?;
    let cfg = RejectionConfig::new(k)?;
    let discrimination = map_assign(positive);
    let p_neg = negative_probability_series(&discrimination, &cfg)?;
    let merged = merge_posterior(positive, &p_neg)?;
    let rejection = map_assign(&merged);
    let smoothed = viterbi_decode(&merged, &model)?;
    Ok(PipelineStages {
        discrimination,
        rejection,
        smoothed,
    })
}

/// Full pipeline from positive-only posteriors to a temporal segmentation.
pub fn segment_video(positive: &PosteriorSeries, k: usize, epsilon: f64) -> Result<Segmentation> {
    let stages = run_pipeline(positive, k, epsilon)?;
    Ok(labels_to_segmentation(&stages.smoothed.labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn merged(rows: &[Vec<f64>]) -> PosteriorSeries {
        PosteriorSeries::from_rows(PosteriorKind::Merged, rows).unwrap()
    }

    /// Exhaustive path enumeration; independent of the decoder.
    fn brute_force(rows: &[Vec<f64>], eps: f64) -> f64 {
        let s = rows[0].len();
        let m = (s - 1) as f64;
        let n = rows.len();
        let mut best = f64::NEG_INFINITY;
        for code in 0..s.pow(n as u32) {
            let path: Vec<usize> = (0..n).map(|i| (code / s.pow(i as u32)) % s).collect();
            let mut total = 0.0;
            for i in 0..n {
                total += rows[i][path[i]].max(1e-12).ln();
                if i > 0 {
                    total += if path[i] == path[i - 1] {
                        (1.0 - m * eps).ln()
                    } else {
                        eps.ln()
                    };
                }
            }
            best = best.max(total);
        }
        best
    }

    #[test]
    fn transition_examples() {
        let t = TransitionModel::new(9, 1e-152).unwrap();
        let v = t.transition_logprob(3, 3).unwrap();
        assert!(v.abs() < 1e-140 && v <= 0.0);
        let t = TransitionModel::new(2, 0.1).unwrap();
        assert_eq!(t.transition_logprob(0, 1).unwrap(), 0.1f64.ln());
        for (m, eps) in [(1, 0.5), (2, 0.1), (9, 1e-3), (4, 0.2)] {
            let t = TransitionModel::new(m, eps).unwrap();
            let total = t.transition_logprob(0, 0).unwrap().exp()
                + m as f64 * t.transition_logprob(0, 1).unwrap().exp();
            assert!((total - 1.0).abs() < 1e-15);
        }
        assert!(matches!(
            t.transition_logprob(0, 3),
            Err(Error::StateOutOfRange {
                state: 3,
                num_states: 3
            })
        ));
    }

    #[test]
    fn transition_rejects_bad_epsilon() {
        assert!(TransitionModel::new(9, 0.0).is_err());
        assert!(TransitionModel::new(9, 1.0 / 9.0).is_err());
        assert!(TransitionModel::new(9, f64::NAN).is_err());
        assert!(TransitionModel::new(0, 0.1).is_err());
        assert!(TransitionModel::new(9, 1e-300).is_ok());
    }

    #[test]
    fn single_frame_is_map() {
        let model = TransitionModel::new(2, 0.1).unwrap();
        let r = viterbi_decode(&merged(&[vec![0.2, 0.5, 0.3]]), &model).unwrap();
        assert_eq!(r.labels.labels(), &[1]);
        assert_eq!(r.log_joint, 0.5f64.ln());
    }

    #[test]
    fn uniform_rows_pick_lowest_constant_path() {
        let model = TransitionModel::new(2, 0.1).unwrap();
        let third = 1.0 / 3.0;
        let r = viterbi_decode(&merged(&vec![vec![third; 3]; 3]), &model).unwrap();
        assert_eq!(r.labels.labels(), &[0, 0, 0]);
    }

    #[test]
    fn four_frame_example_matches_enumeration() {
        let rows = vec![
            vec![0.9, 0.05, 0.05],
            vec![0.05, 0.9, 0.05],
            vec![0.05, 0.9, 0.05],
            vec![0.9, 0.05, 0.05],
        ];
        let model = TransitionModel::new(2, 0.1).unwrap();
        let r = viterbi_decode(&merged(&rows), &model).unwrap();
        let oracle = brute_force(&rows, 0.1);
        assert!((r.log_joint - oracle).abs() < 1e-9);
        // The two middle frames justify two switches at epsilon = 0.1.
        assert_eq!(r.labels.labels(), &[0, 1, 1, 0]);
    }

    #[test]
    fn tied_four_frame_example_attains_enumerated_max() {
        // Staying put and switching twice score exactly the same here.
        let rows = vec![
            vec![0.8, 0.1, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.8, 0.1, 0.1],
        ];
        let model = TransitionModel::new(2, 0.1).unwrap();
        let r = viterbi_decode(&merged(&rows), &model).unwrap();
        assert!((r.log_joint - brute_force(&rows, 0.1)).abs() < 1e-9);
    }

    #[test]
    fn width_mismatch_rejected() {
        let model = TransitionModel::new(3, 0.1).unwrap();
        assert!(matches!(
            viterbi_decode(&merged(&[vec![0.5, 0.5]]), &model),
            Err(Error::WidthMismatch { expected: 4, got: 2 })
        ));
        let pos =
            PosteriorSeries::from_rows(PosteriorKind::PositiveOnly, &[vec![0.2, 0.3, 0.2, 0.3]]).unwrap();
        assert!(viterbi_decode(&pos, &model).is_err());
    }

    #[test]
    fn clean_input_gives_one_segment() {
        let rows = vec![vec![0.0, 1.0, 0.0]; 40];
        let pos = PosteriorSeries::from_rows(PosteriorKind::PositiveOnly, &rows).unwrap();
        let seg = segment_video(&pos, 5, 1e-3).unwrap();
        assert_eq!(seg.segments().len(), 1);
        assert_eq!(seg.segments()[0].class_id, 2);
        assert_eq!(seg.segments()[0].end, 39);
    }

    #[test]
    fn uniform_positive_rows_collapse_to_negative() {
        // MAP on uniform rows always picks class 1, so the label window is
        // unanimous and rejection gives 0; the merged row is [0, 1/3, 1/3, 1/3].
        // Ties then resolve to the lowest positive class.
        let third = 1.0 / 3.0;
        let pos =
            PosteriorSeries::from_rows(PosteriorKind::PositiveOnly, &vec![vec![third; 3]; 100]).unwrap();
        let stages = run_pipeline(&pos, 5, 1e-3).unwrap();
        assert!(stages.discrimination.labels().iter().all(|&c| c == 1));
        let seg = labels_to_segmentation(&stages.smoothed.labels);
        assert_eq!(seg.segments().len(), 1);
        assert_eq!(seg.segments()[0].class_id, 1);
    }

    #[test]
    fn scattered_labels_collapse_to_negative() {
        // Peaks cycle over three classes: every window of 5 has mode count 2
        // (1 near the edges is impossible here), so rejection dominates.
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|i| {
                let mut r = vec![0.3; 3];
                r[i % 3] = 0.4;
                r
            })
            .collect();
        let pos = PosteriorSeries::from_rows(PosteriorKind::PositiveOnly, &rows).unwrap();
        let seg = segment_video(&pos, 5, 1e-3).unwrap();
        assert_eq!(seg.segments().len(), 1);
        assert_eq!(seg.segments()[0].class_id, 0);
    }

    #[test]
    fn pipeline_rejects_merged_input_and_bad_params() {
        let pos = PosteriorSeries::from_rows(PosteriorKind::PositiveOnly, &[vec![0.5, 0.5]]).unwrap();
        assert!(segment_video(&pos, 0, 1e-3).is_err());
        assert!(segment_video(&pos, 5, 0.5).is_err());
        let m = merged(&[vec![0.5, 0.5]]);
        assert!(segment_video(&m, 5, 1e-3).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, f64)> {
            (2usize..=4, 1usize..=6).prop_flat_map(|(s, n)| {
                (
                    prop::collection::vec(
                        prop::collection::vec(0.001f64..1.0, s).prop_map(|r| {
                            let t: f64 = r.iter().sum();
                            r.into_iter().map(|x| x / t).collect::<Vec<_>>()
                        }),
                        n,
                    ),
                    prop::sample::select(vec![0.3 / (s - 1) as f64, 0.1, 1e-3, 1e-30]),
                )
            })
        }

        proptest! {
            #[test]
            fn decoder_attains_enumerated_max((rows, eps) in instance()) {
                let model = TransitionModel::new(rows[0].len() - 1, eps).unwrap();
                let r = viterbi_decode(&merged(&rows), &model).unwrap();
                prop_assert!((r.log_joint - brute_force(&rows, eps)).abs() < 1e-9);
            }

            #[test]
            fn log_joint_is_the_score_of_the_returned_path((rows, eps) in instance()) {
                let model = TransitionModel::new(rows[0].len() - 1, eps).unwrap();
                let r = viterbi_decode(&merged(&rows), &model).unwrap();
                let path = r.labels.labels();
                let mut total = 0.0;
                for i in 0..path.len() {
                    total += log_emission(rows[i][path[i]]);
                    if i > 0 {
                        total += model.transition_logprob(path[i - 1], path[i]).unwrap();
                    }
                }
                prop_assert!((total - r.log_joint).abs() < 1e-9);
            }
        }
    }
}
