//! Command-line workflow: synthesize, train, classify, segment, evaluate, tune.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors, 1 for
//! internal and I/O failures.

pub mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use egoloc::classifier::{
    histogram_feature, train_centroids, PositiveClassifier, DEFAULT_BINS, DEFAULT_TEMPERATURE,
};
use egoloc::io::{self, Manifest, SegmentationFile, Split};
use egoloc::synth::{generate, SynthConfig};
use egoloc::tuning::{grid_search, log_spaced_epsilons, GridResult, GridSpec, Objective};
use egoloc::{labels_to_segmentation, ClassCatalog, LabelSeries, PosteriorKind, TransitionModel};

use config::{resolve, KeyValues};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad input files, violated preconditions.
    Usage(String),
    Core(egoloc::Error),
    Internal(anyhow::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Internal(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<egoloc::Error> for CliError {
    fn from(e: egoloc::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) | CliError::Internal(_) => 1,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "egoloc",
    version,
    about = "Room-level localization from egocentric video"
)]
pub struct Cli {
    /// Plain-text `key = value` file with defaults for the subcommand's flags (flags win)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic visit: ground-truth labels and positive-only posteriors
    Synth(SynthArgs),
    /// Train the color-histogram centroid classifier on the manifest's train split
    Train(TrainArgs),
    /// Turn a directory of PPM frames into a positive-only posterior CSV
    Classify(ClassifyArgs),
    /// Run negative rejection and HMM smoothing on positive-only posteriors
    Segment(SegmentArgs),
    /// Score a segmentation against ground truth and write the JSON + HTML report
    Eval(EvalArgs),
    /// Grid-search K and epsilon on a validation sequence
    Tune(TuneArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of positive classes M [default: 9]
    #[arg(long)]
    pub classes: Option<usize>,
    /// Number of frames N [default: 2000]
    #[arg(long)]
    pub frames: Option<usize>,
    /// PRNG seed [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Probability that a frame's posterior peaks at the true room [default: 0.75]
    #[arg(long)]
    pub accuracy: Option<f64>,
    /// Expected frames per room visit [default: 200]
    #[arg(long)]
    pub mean_dwell: Option<f64>,
    /// Probability of a negative interlude between rooms [default: 0.5]
    #[arg(long)]
    pub gap_prob: Option<f64>,
    /// Expected frames per negative interlude [default: 60]
    #[arg(long)]
    pub gap_mean: Option<f64>,
    /// Off-peak mass concentration, 0 = uniform [default: 0]
    #[arg(long)]
    pub spread: Option<f64>,
    /// Frame rate recorded in the label file [default: 1]
    #[arg(long)]
    pub fps: Option<f64>,
    /// Output prefix; writes <prefix>.labels.csv and <prefix>.posteriors.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Manifest JSON listing the sequences
    #[arg(long)]
    pub manifest: PathBuf,
    /// Histogram bins per channel [default: 4]
    #[arg(long)]
    pub bins: Option<usize>,
    /// Softmax temperature [default: 0.1]
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Output model JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Model JSON written by `train`
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of .ppm frames, taken in file-name order
    #[arg(long)]
    pub frames_dir: PathBuf,
    /// Output posterior CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// K = 50, epsilon = 1e-152
    Hololens,
    /// K = 300, epsilon = 1e-171
    Gopro,
}

impl Preset {
    fn values(self) -> (usize, f64) {
        match self {
            Preset::Hololens => (egoloc::HOLOLENS_K, egoloc::HOLOLENS_EPSILON),
            Preset::Gopro => (egoloc::GOPRO_K, egoloc::GOPRO_EPSILON),
        }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Positive-only posterior CSV
    #[arg(long)]
    pub posteriors: PathBuf,
    /// Rejection window K [default: 50]
    #[arg(long)]
    pub k: Option<usize>,
    /// HMM switching probability epsilon, 0 < epsilon < 1/M [default: 1e-152]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Named (K, epsilon) pair; explicit --k/--epsilon override it [default: hololens]
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Output segmentation JSON
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the discrimination and rejection label CSVs next to --out
    #[arg(long)]
    pub emit_intermediate: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted segmentation JSON
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth label CSV
    #[arg(long)]
    pub gt: PathBuf,
    /// Manifest providing class names (optional)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Frame rate for dwell times [default: from the label file, else 1]
    #[arg(long)]
    pub fps: Option<f64>,
    /// Output prefix; writes <prefix>.json and <prefix>.html
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Positive-only posterior CSV of the validation sequence
    #[arg(long)]
    pub posteriors: PathBuf,
    /// Ground-truth label CSV of the validation sequence
    #[arg(long)]
    pub gt: PathBuf,
    /// Grid file (key = value): k_values, epsilon_values or
    /// epsilon_log10_range + epsilon_points, objective
    /// [default: K in {50,100,300}, 30 log-spaced epsilon in [1e-300, 1e-2], mASF1]
    #[arg(long, value_name = "FILE")]
    pub grid: Option<PathBuf>,
    /// Objective to maximize: masf1 or mff1 (overrides the grid file) [default: masf1]
    #[arg(long)]
    pub objective: Option<String>,
    /// Output score table JSON
    #[arg(long)]
    pub out: PathBuf,
}

fn load_config(path: Option<&Path>) -> CliResult<KeyValues> {
    path.map_or_else(|| Ok(KeyValues::default()), KeyValues::load)
}

/// Runs one subcommand, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => cmd_synth(a, &cfg, out),
        Command::Train(a) => cmd_train(a, &cfg, out),
        Command::Classify(a) => cmd_classify(a, out),
        Command::Segment(a) => cmd_segment(a, &cfg, out),
        Command::Eval(a) => cmd_eval(a, &cfg, out),
        Command::Tune(a) => cmd_tune(a, &cfg, out),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_synth(a: SynthArgs, cfg: &KeyValues, out: &mut dyn Write) -> CliResult {
    let d = SynthConfig::default();
    let synth = SynthConfig {
        num_classes: resolve(a.classes, cfg, "classes", d.num_classes)?,
        total_frames: resolve(a.frames, cfg, "frames", d.total_frames)?,
        seed: resolve(a.seed, cfg, "seed", d.seed)?,
        mean_dwell: resolve(a.mean_dwell, cfg, "mean_dwell", d.mean_dwell)?,
        negative_gap_prob: resolve(a.gap_prob, cfg, "gap_prob", d.negative_gap_prob)?,
        negative_gap_mean: resolve(a.gap_mean, cfg, "gap_mean", d.negative_gap_mean)?,
        classifier_accuracy: resolve(a.accuracy, cfg, "accuracy", d.classifier_accuracy)?,
        confusion_spread: resolve(a.spread, cfg, "spread", d.confusion_spread)?,
    };
    let fps = resolve(a.fps, cfg, "fps", 1.0)?;
    let (gt, positive) = generate(&synth)?;
    let gt = LabelSeries::with_frame_rate(gt.into_labels(), fps)?;
    let labels_path = with_suffix(&a.out, ".labels.csv");
    let post_path = with_suffix(&a.out, ".posteriors.csv");
    io::write_labels(&labels_path, &gt)?;
    io::write_posteriors(&post_path, &positive)?;
    writeln!(
        out,
        "wrote {} and {} ({} frames, {} classes, seed {})",
        labels_path.display(),
        post_path.display(),
        gt.len(),
        synth.num_classes,
        synth.seed
    )?;
    Ok(())
}

pub fn cmd_train(a: TrainArgs, cfg: &KeyValues, out: &mut dyn Write) -> CliResult {
    let bins = resolve(a.bins, cfg, "bins", DEFAULT_BINS)?;
    let temperature = resolve(a.temperature, cfg, "temperature", DEFAULT_TEMPERATURE)?;
    let manifest = Manifest::load(&a.manifest)?;
    let m = manifest.catalog.positive_count();
    let train: Vec<_> = manifest.split(Split::Train).collect();
    if train.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: train split is empty",
            a.manifest.display()
        )));
    }
    let mut features: BTreeMap<usize, Vec<_>> = BTreeMap::new();
    for seq in train {
        let labels_path = seq
            .labels
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("train sequence {:?} has no labels", seq.name)))?;
        let labels = io::read_labels(labels_path, Some(m))?;
        let frames = seq.frame_paths()?;
        if frames.len() != labels.len() {
            return Err(CliError::Usage(format!(
                "train sequence {:?}: {} frames but {} labels",
                seq.name,
                frames.len(),
                labels.len()
            )));
        }
        let feats = frames
            .par_iter()
            .map(|p| histogram_feature(&egoloc::ppm::read_ppm(p)?, bins))
            .collect::<egoloc::Result<Vec<_>>>()?;
        for (f, &c) in feats.into_iter().zip(labels.labels()) {
            // Only positive frames train the classifier.
            if c != egoloc::NEGATIVE {
                features.entry(c).or_default().push(f);
            }
        }
    }
    let model = train_centroids(&features, m, temperature).map_err(|e| match e {
        egoloc::Error::MissingClass(c) => CliError::Usage(format!(
            "class {c} ({}) has no frames in the train split",
            manifest.catalog.name(c).unwrap_or("?")
        )),
        other => other.into(),
    })?;
    io::write_model(&a.out, &model)?;
    for c in 1..=m {
        writeln!(
            out,
            "class {c} {}: {} frames",
            manifest.catalog.name(c).unwrap_or_default(),
            features.get(&c).map_or(0, Vec::len)
        )?;
    }
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(())
}

pub fn cmd_classify(a: ClassifyArgs, out: &mut dyn Write) -> CliResult {
    let model = io::read_model(&a.model)?;
    let bins = model
        .bins
        .ok_or_else(|| CliError::Usage("model was not trained on color histograms".into()))?;
    let frames = io::list_frames(&a.frames_dir)?;
    if frames.is_empty() {
        return Err(CliError::Usage(format!(
            "no .ppm frames in {}",
            a.frames_dir.display()
        )));
    }
    let feats = frames
        .par_iter()
        .map(|p| histogram_feature(&egoloc::ppm::read_ppm(p)?, bins))
        .collect::<egoloc::Result<Vec<_>>>()?;
    let posterior = model.classify_sequence(&feats)?;
    io::write_posteriors(&a.out, &posterior)?;
    writeln!(out, "wrote {} ({} frames)", a.out.display(), posterior.len())?;
    Ok(())
}

pub fn cmd_segment(a: SegmentArgs, cfg: &KeyValues, out: &mut dyn Write) -> CliResult {
    let preset = match a.preset {
        Some(p) => p,
        None => match cfg.get::<String>("preset")? {
            Some(name) => Preset::from_str(&name, true)
                .map_err(|_| CliError::Usage(format!("unknown preset {name:?}")))?,
            None => Preset::Hololens,
        },
    };
    let (k0, eps0) = preset.values();
    let k = resolve(a.k, cfg, "k", k0)?;
    let epsilon = resolve(a.epsilon, cfg, "epsilon", eps0)?;
    let positive = io::read_posteriors(&a.posteriors)?;
    if positive.kind() != PosteriorKind::PositiveOnly {
        return Err(CliError::Usage(format!(
            "{}: expected positive-only posteriors (header frame,p1,...)",
            a.posteriors.display()
        )));
    }
    let m = positive.positive_count();
    if k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    if TransitionModel::new(m, epsilon).is_err() {
        return Err(CliError::Usage(format!(
            "epsilon = {epsilon:e} is invalid for M = {m} classes: need 0 < epsilon and M * epsilon < 1 \
             so the self-transition probability 1 - M * epsilon stays positive"
        )));
    }
    let stages = egoloc::run_pipeline(&positive, k, epsilon)?;
    let seg = labels_to_segmentation(&stages.smoothed.labels);
    let mut file = SegmentationFile::new(&seg, m);
    file.k = Some(k);
    file.epsilon = Some(epsilon);
    io::write_segmentation(&a.out, &file)?;
    if a.emit_intermediate {
        let stem = a.out.with_extension("");
        io::write_labels(&with_suffix(&stem, ".discrimination.csv"), &stages.discrimination)?;
        io::write_labels(&with_suffix(&stem, ".rejection.csv"), &stages.rejection)?;
    }
    writeln!(
        out,
        "K={k} epsilon={epsilon:e}: {} segments over {} frames, wrote {}",
        seg.segments().len(),
        seg.total_frames(),
        a.out.display()
    )?;
    Ok(())
}

pub fn cmd_eval(a: EvalArgs, cfg: &KeyValues, out: &mut dyn Write) -> CliResult {
    let (file, pred) = io::read_segmentation(&a.pred)?;
    let manifest_path = match a.manifest {
        Some(p) => Some(p),
        None => cfg.get::<PathBuf>("manifest")?,
    };
    let catalog = match manifest_path {
        Some(p) => Manifest::load(&p)?.catalog,
        None => ClassCatalog::generic(file.num_classes)?,
    };
    let gt = io::read_labels(&a.gt, Some(catalog.positive_count()))?;
    if gt.len() != pred.total_frames() {
        return Err(CliError::Usage(format!(
            "frame count mismatch: {} has {} frames, {} has {}",
            a.gt.display(),
            gt.len(),
            a.pred.display(),
            pred.total_frames()
        )));
    }
    let fps = resolve(a.fps, cfg, "fps", gt.frame_rate())?;
    let report = io::build_report(&catalog, &gt, &pred, fps)?;
    let (json, html) = io::write_report(&report, &a.out)?;
    write!(out, "{}", io::render_score_table(&report))?;
    writeln!(
        out,
        "mFF1={} mASF1={}",
        fmt_opt(report.mff1),
        fmt_opt(report.masf1)
    )?;
    writeln!(out, "wrote {} and {}", json.display(), html.display())?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "/".to_string(), |v| format!("{v:?}"))
}

/// Reads a grid file; anything unspecified keeps the default grid.
pub fn load_grid(path: Option<&Path>) -> CliResult<GridSpec> {
    let mut spec = GridSpec::default();
    let Some(path) = path else {
        return Ok(spec);
    };
    let kv = KeyValues::load(path)?;
    for key in kv.keys() {
        if ![
            "k_values",
            "epsilon_values",
            "epsilon_log10_range",
            "epsilon_points",
            "objective",
        ]
        .contains(&key)
        {
            return Err(CliError::Usage(format!(
                "{}: unknown grid key {key}",
                path.display()
            )));
        }
    }
    if let Some(k) = kv.get_list("k_values")? {
        spec.k_values = k;
    }
    let range: Option<Vec<f64>> = kv.get_list("epsilon_log10_range")?;
    let points: Option<usize> = kv.get("epsilon_points")?;
    match (kv.get_list::<f64>("epsilon_values")?, range) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(format!(
                "{}: give either epsilon_values or epsilon_log10_range, not both",
                path.display()
            )))
        }
        (Some(values), None) => spec.epsilon_values = values,
        (None, Some(r)) if r.len() == 2 => {
            spec.epsilon_values = log_spaced_epsilons(r[0], r[1], points.unwrap_or(spec.epsilon_values.len()))
        }
        (None, Some(_)) => {
            return Err(CliError::Usage(format!(
                "{}: epsilon_log10_range needs two values",
                path.display()
            )))
        }
        (None, None) => {
            if let Some(p) = points {
                let (lo, hi) = egoloc::tuning::DEFAULT_LOG10_EPSILON_RANGE;
                spec.epsilon_values = log_spaced_epsilons(lo, hi, p);
            }
        }
    }
    if let Some(o) = kv.get::<String>("objective")? {
        spec.objective = o.parse::<Objective>()?;
    }
    Ok(spec)
}

#[derive(serde::Serialize)]
struct TuneOutput<'a> {
    schema_version: u32,
    k_values: &'a [usize],
    epsilon_values: &'a [f64],
    #[serde(flatten)]
    result: &'a GridResult,
}

pub fn cmd_tune(a: TuneArgs, cfg: &KeyValues, out: &mut dyn Write) -> CliResult {
    let grid_path = match a.grid {
        Some(p) => Some(p),
        None => cfg.get::<PathBuf>("grid")?,
    };
    let mut spec = load_grid(grid_path.as_deref())?;
    let objective = match a.objective {
        Some(o) => Some(o),
        None => cfg.get::<String>("objective")?,
    };
    if let Some(o) = objective {
        spec.objective = o.parse::<Objective>()?;
    }
    let positive = io::read_posteriors(&a.posteriors)?;
    if positive.kind() != PosteriorKind::PositiveOnly {
        return Err(CliError::Usage(format!(
            "{}: expected positive-only posteriors",
            a.posteriors.display()
        )));
    }
    let gt = io::read_labels(&a.gt, Some(positive.positive_count()))?;
    if gt.len() != positive.len() {
        return Err(CliError::Usage(format!(
            "frame count mismatch: {} frames of labels, {} of posteriors",
            gt.len(),
            positive.len()
        )));
    }
    let result = grid_search(&positive, &gt, &spec)?;
    let table = TuneOutput {
        schema_version: 1,
        k_values: &spec.k_values,
        epsilon_values: &spec.epsilon_values,
        result: &result,
    };
    let mut json = serde_json::to_string_pretty(&table).map_err(|e| CliError::Internal(e.into()))?;
    json.push('\n');
    io::write_atomic(&a.out, json.as_bytes())?;
    let skipped = result.cells.iter().filter(|c| !c.valid).count();
    writeln!(
        out,
        "best K={} epsilon={:e} {}={:?} ({} cells, {} skipped), wrote {}",
        result.best_k,
        result.best_epsilon,
        match result.objective {
            Objective::MeanAsf1 => "mASF1",
            Objective::MeanFf1 => "mFF1",
        },
        result.best_score,
        result.cells.len(),
        skipped,
        a.out.display()
    )?;
    Ok(())
}
