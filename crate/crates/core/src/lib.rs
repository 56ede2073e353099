//! Room-level localization of a visitor from egocentric video.
//!
//! The pipeline turns per-frame evidence into temporal segments in three
//! stages:
//!
//! 1. **Discrimination** ([`classifier`]): a classifier trained only on the
//!    `M` known locations emits a posterior over them for each frame.
//! 2. **Negative rejection** ([`rejection`]): the variation ratio of the MAP
//!    labels in a window of `K` frames becomes the probability of the
//!    negative class 0, merged with the positive posterior.
//! 3. **Sequential modeling** ([`hmm`]): Viterbi decoding under an
//!    "almost identity" transition matrix smooths the labels; the runs of the
//!    decoded sequence are the output segments.
//!
//! [`metrics`] scores a segmentation frame by frame (FF1) and segment by
//! segment (ASF1), [`tuning`] grid-searches `K` and `epsilon`, [`synth`]
//! generates ground-truth-known sequences and [`io`] holds the file formats
//! and the static report.

pub mod assignment;
pub mod classifier;
pub mod error;
pub mod hmm;
pub mod io;
pub mod metrics;
pub mod ppm;
pub mod rejection;
pub mod synth;
pub mod tuning;
pub mod types;

pub use error::{Error, Result};
pub use hmm::{run_pipeline, segment_video, viterbi_decode, DecodeResult, PipelineStages, TransitionModel};
pub use metrics::{asf1, confusion, ff1, ClassScores, ConfusionMatrix};
pub use rejection::{
    map_assign, merge_posterior, negative_probability_series, variation_ratio, RejectionConfig,
};
pub use types::{
    dwell_times, labels_to_segmentation, segmentation_to_labels, ClassCatalog, ClassId, LabelSeries,
    PosteriorKind, PosteriorSeries, Segment, Segmentation, NEGATIVE,
};

/// Rejection window selected on the HoloLens validation video.
pub const HOLOLENS_K: usize = 50;
/// Switching probability selected on the HoloLens validation video.
pub const HOLOLENS_EPSILON: f64 = 1e-152;
/// Rejection window selected on the GoPro validation video.
pub const GOPRO_K: usize = 300;
/// Switching probability selected on the GoPro validation video.
pub const GOPRO_EPSILON: f64 = 1e-171;
