//! `kfmot` command line.
//!
//! Every subcommand reads and writes files only, so steps compose through
//! the file system. Exit status is 0 on success, 1 for invalid input or
//! usage and 2 for failures while running.

mod ablate;
mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use ablate::{
    ablation_csv, mean_std, parse_sweep, run_ablation, run_cell, run_cells, segmentation, sign_test, train_variant,
    AblationConfig, CellResult, TrainedVariant, Variant, ABLATION_HEADER, TRAIN_SEED_OFFSET,
};
pub use config::{config_args, parse_config};

use crate::assoc::{
    track_sequence, train_edge_scorer, training_graphs, EdgeScorer, FocalLossConfig, JointGcn, TrackerConfig,
    TrainConfig, BASE_IOU_THRESHOLD, DEFAULT_LEVELS, DEFAULT_MAX_CANDIDATES, DEFAULT_MERGE_THRESHOLD, UNFREEZE_AFTER,
};
use crate::data_io::{
    parse_detections, parse_feature_file, parse_ground_truth, parse_results, write_feature_file, write_ground_truth,
    write_detections, write_results, Sequence,
};
use crate::iff::{fuse_sequence, FusionConfig, FusionMode, GcnLayer, DEFAULT_A, DEFAULT_M};
use crate::kfe::{train_kfe, QConfig, SegmentationStrategy};
use crate::metrics::{evaluate, report_csv};
use crate::synth::{generate, NoiseConfig, OcclusionGap, ScenarioConfig, ScenarioKind, DEFAULT_FEATURE_DIM, DEFAULT_MOTION_JITTER};
use crate::{Error, Result};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "KFMOT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "kfmot", version, about = "Multi-object tracking with key-frame segmentation and intra-frame feature fusion")]
#[command(args_override_self = true)]
struct Cli {
    /// key=value file supplying defaults for the subcommand's flags
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a key-frame segmentation of a sequence
    Segment(SegmentArgs),
    /// Fuse each detection's feature with its in-frame neighbours
    Fuse(FuseArgs),
    /// Train the edge scorer (and optionally the GCN weight) on labeled sequences
    Train(TrainArgs),
    /// Track a sequence into a results file
    Track(TrackArgs),
    /// Evaluate results against ground truth
    Eval(EvalArgs),
    /// Generate a synthetic scenario
    Synth(SynthArgs),
    /// Run the variant ablation on synthetic suites
    Ablate(AblateArgs),
    /// Render a CSV table as aligned text or markdown
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SequenceArgs {
    /// Detection file
    #[arg(long, value_name = "FILE")]
    dets: PathBuf,
    /// Feature file
    #[arg(long, value_name = "FILE")]
    feats: PathBuf,
    /// Sequence length; defaults to the last frame with detections
    #[arg(long)]
    frames: Option<u32>,
}

#[derive(Debug, Args)]
struct KfeArgs {
    #[arg(long, default_value_t = 2)]
    min_len: u32,
    #[arg(long, default_value_t = 10)]
    max_len: u32,
    /// Episodes; defaults to (LN−u)(LN−n)·100 capped at 50000
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    learn_rate: f64,
    #[arg(long, default_value_t = 0.99)]
    discount: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    xi: f64,
}

impl KfeArgs {
    fn config(&self, seed: u64) -> QConfig {
        QConfig {
            epsilon: self.epsilon,
            learn_rate: self.learn_rate,
            discount: self.discount,
            delta: self.delta,
            xi: self.xi,
            episodes: self.episodes,
            seed,
            ..QConfig::new(self.min_len, self.max_len)
        }
    }
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[command(flatten)]
    seq: SequenceArgs,
    #[command(flatten)]
    kfe: KfeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Strategy output file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FusionArgs {
    /// none, average or gcn; defaults to gcn with --gcn-weights, none otherwise
    #[arg(long)]
    fusion: Option<String>,
    /// Share of the detection's own feature
    #[arg(long, default_value_t = DEFAULT_A)]
    a: f64,
    /// Neighbours per detection
    #[arg(long, default_value_t = DEFAULT_M)]
    m: usize,
    /// GCN weight file
    #[arg(long, value_name = "FILE")]
    gcn_weights: Option<PathBuf>,
}

impl FusionArgs {
    fn mode(&self) -> Result<Option<FusionMode>> {
        match self.fusion.as_deref() {
            None if self.gcn_weights.is_some() => Ok(Some(FusionMode::Gcn)),
            None | Some("none") => Ok(None),
            Some(s) => s.parse().map(Some),
        }
    }

    fn config(&self) -> Result<Option<FusionConfig>> {
        Ok(self.mode()?.map(|mode| FusionConfig::new(self.a, self.m, mode)))
    }

    fn layer(&self) -> Result<Option<GcnLayer>> {
        self.gcn_weights
            .as_deref()
            .map(|p| GcnLayer::parse(&read(p)?))
            .transpose()
    }
}

#[derive(Debug, Args)]
struct FuseArgs {
    #[command(flatten)]
    seq: SequenceArgs,
    /// average or gcn
    #[arg(long, default_value = "gcn")]
    mode: String,
    #[arg(long, default_value_t = DEFAULT_A)]
    a: f64,
    #[arg(long, default_value_t = DEFAULT_M)]
    m: usize,
    /// GCN weight file; an identity weight is used when absent
    #[arg(long, visible_alias = "weights", value_name = "FILE")]
    gcn_weights: Option<PathBuf>,
    /// Fused feature file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrackerArgs {
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    levels: usize,
    /// Level-1 window; defaults to the longest segment
    #[arg(long)]
    base_window: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_MAX_CANDIDATES)]
    max_candidates: usize,
    #[arg(long, default_value_t = BASE_IOU_THRESHOLD)]
    base_iou: f64,
    #[arg(long, default_value_t = DEFAULT_MERGE_THRESHOLD)]
    merge_threshold: f64,
}

impl TrackerArgs {
    fn config(&self) -> TrackerConfig {
        TrackerConfig {
            levels: self.levels,
            base_window: self.base_window,
            max_candidates: self.max_candidates,
            base_iou: self.base_iou,
            merge_threshold: self.merge_threshold,
        }
    }
}

#[derive(Debug, Args)]
struct TrackArgs {
    #[command(flatten)]
    seq: SequenceArgs,
    /// Segmentation strategy file
    #[arg(long, value_name = "FILE")]
    strategy: PathBuf,
    /// Scorer weight file; hand-set weights are used when absent
    #[arg(long, value_name = "FILE")]
    scorer: Option<PathBuf>,
    #[command(flatten)]
    fusion: FusionArgs,
    #[command(flatten)]
    tracker: TrackerArgs,
    /// Results output file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainOptArgs {
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-2)]
    step: f64,
    #[arg(long, default_value_t = UNFREEZE_AFTER)]
    unfreeze_after: usize,
    /// Focal-loss focusing exponent
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    /// Focal-loss positive-class weight
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
}

impl TrainOptArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            step: self.step,
            unfreeze_after: self.unfreeze_after,
            focal: FocalLossConfig {
                gamma: self.gamma,
                alpha: self.alpha,
            },
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Detection files, one per training sequence
    #[arg(long, required = true, value_name = "FILE")]
    dets: Vec<PathBuf>,
    /// Feature files, matching --dets
    #[arg(long, required = true, value_name = "FILE")]
    feats: Vec<PathBuf>,
    /// Ground-truth files, matching --dets
    #[arg(long, required = true, value_name = "FILE")]
    gt: Vec<PathBuf>,
    /// Strategy files, matching --dets
    #[arg(long, required = true, value_name = "FILE")]
    strategy: Vec<PathBuf>,
    #[command(flatten)]
    fusion: FusionArgs,
    #[command(flatten)]
    tracker: TrackerArgs,
    #[command(flatten)]
    opt: TrainOptArgs,
    /// Seed of the GCN initialization when no --gcn-weights are given
    #[arg(long, default_value_t = 0)]
    gcn_seed: u64,
    /// Trained scorer output file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Trained GCN weight output file (gcn fusion only)
    #[arg(long, value_name = "FILE")]
    gcn_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Results files, one per sequence
    #[arg(long, required = true, value_name = "FILE")]
    results: Vec<PathBuf>,
    /// Ground-truth files, matching --results
    #[arg(long, required = true, value_name = "FILE")]
    gt: Vec<PathBuf>,
    /// Sequence names; default to the results file stems
    #[arg(long)]
    names: Vec<String>,
    /// Report CSV; printed to standard output when absent
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    #[arg(long, default_value_t = 0.0)]
    feature_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    box_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    drop_rate: f64,
}

impl NoiseArgs {
    fn config(&self) -> NoiseConfig {
        NoiseConfig {
            feature_sigma: self.feature_noise,
            box_sigma: self.box_noise,
            drop_rate: self.drop_rate,
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// occlusion, lookalike, crossing or random_walk
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 5)]
    objects: usize,
    #[arg(long, default_value_t = 60)]
    frames: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_FEATURE_DIM)]
    feature_dim: usize,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Per-frame jitter of the true motion
    #[arg(long, default_value_t = DEFAULT_MOTION_JITTER)]
    jitter: f64,
    /// Extra hidden interval object:start:length (repeatable)
    #[arg(long)]
    gap: Vec<String>,
    /// Lookalike pair i:j (repeatable); replaces the default pair
    #[arg(long)]
    pair: Vec<String>,
    /// Directory receiving det.txt, gt.txt, feat.txt and scenario.txt
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct AblateArgs {
    /// Comma-separated scenario kinds
    #[arg(long, default_value = "occlusion,lookalike")]
    kinds: String,
    /// Comma-separated variants among baseline, iff, kfe, both
    #[arg(long, default_value = "baseline,iff,kfe,both")]
    variants: String,
    /// Number of evaluation seeds
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    seed_start: u64,
    #[arg(long, default_value_t = 4)]
    train_sequences: usize,
    #[arg(long, default_value_t = 6)]
    objects: usize,
    #[arg(long, default_value_t = 60)]
    frames: u32,
    #[arg(long, default_value_t = DEFAULT_FEATURE_DIM)]
    feature_dim: usize,
    #[arg(long, default_value_t = 0.1)]
    feature_noise: f64,
    #[arg(long, default_value_t = 2.0)]
    box_noise: f64,
    #[arg(long, default_value_t = 0.05)]
    drop_rate: f64,
    #[command(flatten)]
    kfe: KfeArgs,
    /// Segment length of the fixed segmentation
    #[arg(long, default_value_t = 10)]
    baseline_len: u32,
    /// average or gcn
    #[arg(long, default_value = "gcn")]
    fusion_mode: String,
    #[arg(long, default_value_t = DEFAULT_A)]
    a: f64,
    #[arg(long, default_value_t = DEFAULT_M)]
    m: usize,
    /// Fusion-ratio sweep start:end:step for the IFF variants
    #[arg(long)]
    sweep_a: Option<String>,
    #[command(flatten)]
    tracker: TrackerArgs,
    #[command(flatten)]
    opt: TrainOptArgs,
    #[arg(long, default_value_t = 0)]
    gcn_seed: u64,
    /// Output CSV; printed to standard output when absent
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// CSV file to render
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// text or markdown
    #[arg(long, default_value = "text")]
    format: String,
    /// Output file; printed to standard output when absent
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Detections with features attached, named after the detection file.
fn load_sequence(dets: &Path, feats: &Path, frames: Option<u32>) -> Result<Sequence> {
    let mut seq = parse_detections(&read(dets)?)?;
    seq.attach_features(&parse_feature_file(&read(feats)?)?)?;
    seq.name = dets
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match frames {
        Some(n) => seq.with_length(n),
        None => Ok(seq),
    }
}

fn cmd_segment(a: &SegmentArgs) -> Result<()> {
    let seq = load_sequence(&a.seq.dets, &a.seq.feats, a.seq.frames)?;
    let cfg = a.kfe.config(a.seed);
    cfg.validate()?;
    let trained = train_kfe(&seq, &cfg)?;
    write(&a.out, &trained.best.to_file_string())
}

fn cmd_fuse(a: &FuseArgs) -> Result<()> {
    let seq = load_sequence(&a.seq.dets, &a.seq.feats, a.seq.frames)?;
    let cfg = FusionConfig::new(a.a, a.m, a.mode.parse()?);
    let layer = a.gcn_weights.as_deref().map(|p| GcnLayer::parse(&read(p)?)).transpose()?;
    let fused = fuse_sequence(&seq, &cfg, layer.as_ref())?;
    write(&a.out, &write_feature_file(&fused.feature_table()))
}

fn load_strategy(path: &Path, seq: &Sequence) -> Result<SegmentationStrategy> {
    let s = SegmentationStrategy::parse(&read(path)?)?;
    s.validate_tiling(seq.length)?;
    Ok(s)
}

fn cmd_track(a: &TrackArgs) -> Result<()> {
    let seq = load_sequence(&a.seq.dets, &a.seq.feats, a.seq.frames)?;
    let strategy = load_strategy(&a.strategy, &seq)?;
    let tracker = a.tracker.config();
    tracker.validate()?;
    let scorer = match &a.scorer {
        Some(p) => EdgeScorer::parse(&read(p)?)?,
        None => EdgeScorer::heuristic(tracker.levels),
    };
    let fusion = a.fusion.config()?;
    let layer = a.fusion.layer()?;
    let tracks = track_sequence(&seq, &strategy, fusion.as_ref(), layer.as_ref(), &scorer, &tracker)?;
    write(&a.out, &write_results(&tracks))
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let n = a.dets.len();
    if a.feats.len() != n || a.gt.len() != n || a.strategy.len() != n {
        return Err(Error::Validation(
            "--dets, --feats, --gt and --strategy must be given the same number of times".into(),
        ));
    }
    let tracker = a.tracker.config();
    tracker.validate()?;
    let opt = a.opt.config();
    opt.validate()?;
    let fusion = a.fusion.config()?;
    let mut layer = a.fusion.layer()?;
    let mut sequences = Vec::new();
    let mut graphs = Vec::new();
    for k in 0..n {
        let seq = load_sequence(&a.dets[k], &a.feats[k], None)?;
        if layer.is_none() && fusion.is_some_and(|f| f.mode == FusionMode::Gcn) {
            layer = Some(GcnLayer::init(seq.feature_dim, a.gcn_seed));
        }
        let gt = parse_ground_truth(&read(&a.gt[k])?)?;
        let strategy = load_strategy(&a.strategy[k], &seq)?;
        graphs.extend(training_graphs(&seq, k, &gt, &strategy, fusion.as_ref(), layer.as_ref(), &tracker)?);
        sequences.push(seq);
    }
    let init = EdgeScorer::zeros(tracker.levels);
    let report = match (fusion, &layer) {
        (Some(f), Some(l)) if f.mode == FusionMode::Gcn => {
            let joint = JointGcn::new(&sequences, f)?;
            train_edge_scorer(&graphs, &init, &opt, Some((&joint, l)))?
        }
        _ => train_edge_scorer(&graphs, &init, &opt, None)?,
    };
    write(&a.out, &report.scorer.to_file_string())?;
    match (&a.gcn_out, &report.layer) {
        (Some(p), Some(l)) => write(p, &l.to_file_string()),
        (Some(_), None) => Err(Error::Validation("--gcn-out needs gcn fusion".into())),
        _ => Ok(()),
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    if a.results.len() != a.gt.len() {
        return Err(Error::Validation("--results and --gt must be given the same number of times".into()));
    }
    if !a.names.is_empty() && a.names.len() != a.results.len() {
        return Err(Error::Validation("--names must match --results".into()));
    }
    let mut named = Vec::new();
    for (k, (r, g)) in a.results.iter().zip(&a.gt).enumerate() {
        let preds = parse_results(&read(r)?)?;
        let gts = parse_ground_truth(&read(g)?)?;
        let name = a.names.get(k).cloned().unwrap_or_else(|| {
            r.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("seq{}", k + 1))
        });
        named.push((name, evaluate(&preds, &gts)));
    }
    emit(a.out.as_deref(), &report_csv(&named))
}

fn parse_triple(s: &str) -> Result<OcclusionGap> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("gap {s:?} is not object:start:length"));
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(OcclusionGap {
        object: parts[0].parse().map_err(|_| bad())?,
        start: parts[1].parse().map_err(|_| bad())?,
        length: parts[2].parse().map_err(|_| bad())?,
    })
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("pair {s:?} is not i:j"));
    let (i, j) = s.split_once(':').ok_or_else(bad)?;
    Ok((i.parse().map_err(|_| bad())?, j.parse().map_err(|_| bad())?))
}

fn scenario_text(s: &ScenarioConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kind={}", s.kind);
    let _ = writeln!(out, "objects={}", s.num_objects);
    let _ = writeln!(out, "frames={}", s.length);
    let _ = writeln!(out, "feature-dim={}", s.feature_dim);
    let _ = writeln!(out, "seed={}", s.seed);
    let _ = writeln!(out, "feature-noise={}", s.noise.feature_sigma);
    let _ = writeln!(out, "box-noise={}", s.noise.box_sigma);
    let _ = writeln!(out, "drop-rate={}", s.noise.drop_rate);
    let _ = writeln!(out, "jitter={}", s.motion_jitter);
    for g in &s.occlusion_gaps {
        let _ = writeln!(out, "gap={}:{}:{}", g.object, g.start, g.length);
    }
    for (i, j) in &s.lookalike_pairs {
        let _ = writeln!(out, "pair={i}:{j}");
    }
    out
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let kind: ScenarioKind = a.kind.parse()?;
    let mut cfg = ScenarioConfig::new(kind, a.objects, a.frames, a.seed);
    cfg.feature_dim = a.feature_dim;
    cfg.noise = a.noise.config();
    cfg.motion_jitter = a.jitter;
    cfg.occlusion_gaps = a.gap.iter().map(|g| parse_triple(g)).collect::<Result<_>>()?;
    if !a.pair.is_empty() {
        cfg.lookalike_pairs = a.pair.iter().map(|p| parse_pair(p)).collect::<Result<_>>()?;
    }
    let out = generate(&cfg)?;
    fs::create_dir_all(&a.out_dir).map_err(|source| Error::Io {
        path: a.out_dir.display().to_string(),
        source,
    })?;
    write(&a.out_dir.join("det.txt"), &write_detections(&out.detections))?;
    write(&a.out_dir.join("feat.txt"), &write_feature_file(&out.detections.feature_table()))?;
    write(&a.out_dir.join("gt.txt"), &write_ground_truth(&out.gt))?;
    write(&a.out_dir.join("scenario.txt"), &scenario_text(&out.scenario))
}

fn split_list<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.trim().parse()).collect()
}

fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    let cfg = AblationConfig {
        kinds: split_list(&a.kinds)?,
        variants: split_list(&a.variants)?,
        seeds: (a.seed_start..a.seed_start + a.seeds).collect(),
        train_sequences: a.train_sequences,
        num_objects: a.objects,
        length: a.frames,
        feature_dim: a.feature_dim,
        noise: NoiseConfig {
            feature_sigma: a.feature_noise,
            box_sigma: a.box_noise,
            drop_rate: a.drop_rate,
        },
        kfe: a.kfe.config(0),
        baseline_len: a.baseline_len,
        fusion: FusionConfig::new(a.a, a.m, a.fusion_mode.parse()?),
        sweep_a: a.sweep_a.as_deref().map(parse_sweep).transpose()?,
        tracker: a.tracker.config(),
        train: a.opt.config(),
        gcn_seed: a.gcn_seed,
    };
    emit(a.out.as_deref(), &run_ablation(&cfg)?)
}

/// Render CSV as aligned columns or a markdown table.
pub fn render_table(csv: &str, markdown: bool) -> String {
    let rows: Vec<Vec<&str>> = csv.lines().filter(|l| !l.is_empty()).map(|l| l.split(',').collect()).collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        // Markdown rules need at least three dashes.
        .map(|w| if markdown { w.max(3) } else { w })
        .collect();
    let mut out = String::new();
    for (k, r) in rows.iter().enumerate() {
        let cells: Vec<String> = (0..cols)
            .map(|c| format!("{:<w$}", r.get(c).copied().unwrap_or(""), w = widths[c]))
            .collect();
        if markdown {
            let _ = writeln!(out, "| {} |", cells.join(" | "));
            if k == 0 {
                let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
                let _ = writeln!(out, "| {} |", rule.join(" | "));
            }
        } else {
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
    }
    out
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let markdown = match a.format.as_str() {
        "text" => false,
        "markdown" => true,
        f => return Err(Error::Config(format!("unknown report format {f:?}"))),
    };
    emit(a.out.as_deref(), &render_table(&read(&a.input)?, markdown))
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        // A pool built earlier in the process (tests) is kept as is.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Fuse(a) => cmd_fuse(a),
        Command::Train(a) => cmd_train(a),
        Command::Track(a) => cmd_track(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Run the command line and return the process exit status.
pub fn main(argv: Vec<OsString>) -> i32 {
    let argv = match config::config_path(&argv) {
        Some(path) => match read(Path::new(&path)).and_then(|t| parse_config(&t)) {
            Ok(entries) => config::splice_after_subcommand(&argv, config_args(&entries)),
            Err(e) => {
                eprintln!("error: {e}");
                return 1;
            }
        },
        None => argv,
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn sweep_parsing() {
        let s = parse_sweep("0:1:0.1").unwrap();
        assert_eq!(s.len(), 11);
        assert_eq!(s[3], 0.3);
        assert_eq!(s[10], 1.0);
        assert!(parse_sweep("1:0:0.1").is_err());
        assert!(parse_sweep("0:1").is_err());
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test(5, 0) - 1.0 / 32.0).abs() < 1e-12);
        assert!((sign_test(0, 0) - 1.0).abs() < 1e-12);
        // P(X ≥ 8 | n = 10) = 56 / 1024
        assert!((sign_test(8, 2) - 56.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[]), None);
        assert_eq!(mean_std(&[2.0]), Some((2.0, 0.0)));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn variants_parse() {
        assert_eq!("+IFF".parse::<Variant>().unwrap(), Variant::Iff);
        assert_eq!("both".parse::<Variant>().unwrap(), Variant::Both);
        assert!("nothing".parse::<Variant>().is_err());
    }

    #[test]
    fn table_rendering() {
        let t = render_table("a,bb\n1,2\n", false);
        assert_eq!(t, "a  bb\n1  2\n");
        let m = render_table("a,bb\n1,2\n", true);
        assert!(m.starts_with("| a   | bb  |\n| --- | --- |\n"), "{m}");
    }
}
