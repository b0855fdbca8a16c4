//! Ablation harness: baseline vs +IFF vs +KFE vs both on synthetic suites.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use crate::assoc::{
    track_sequence, train_edge_scorer, training_graphs, EdgeScorer, JointGcn, LabeledGraph, TrackerConfig,
    TrainConfig,
};
use crate::data_io::{Sequence, TrackSet};
use crate::iff::{FusionConfig, FusionMode, GcnLayer};
use crate::kfe::{train_kfe, QConfig, SegmentationStrategy};
use crate::metrics::{evaluate, MetricReport};
use crate::synth::{generate, NoiseConfig, ScenarioConfig, ScenarioKind, DEFAULT_FEATURE_DIM};
use crate::{Error, Result};

/// Training sequences use seeds from this offset on, disjoint from
/// evaluation seeds.
pub const TRAIN_SEED_OFFSET: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    Baseline,
    Iff,
    Kfe,
    Both,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Self::Baseline, Self::Iff, Self::Kfe, Self::Both];

    pub fn name(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Iff => "+IFF",
            Self::Kfe => "+KFE",
            Self::Both => "+both",
        }
    }

    pub fn uses_kfe(self) -> bool {
        matches!(self, Self::Kfe | Self::Both)
    }

    pub fn uses_iff(self) -> bool {
        matches!(self, Self::Iff | Self::Both)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('+').to_ascii_lowercase();
        match t.as_str() {
            "baseline" => Ok(Self::Baseline),
            "iff" => Ok(Self::Iff),
            "kfe" => Ok(Self::Kfe),
            "both" => Ok(Self::Both),
            _ => Err(Error::Config(format!("unknown variant {s:?}"))),
        }
    }
}

/// Everything one ablation run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub kinds: Vec<ScenarioKind>,
    pub variants: Vec<Variant>,
    /// Evaluation seeds.
    pub seeds: Vec<u64>,
    /// Number of training sequences per suite.
    pub train_sequences: usize,
    pub num_objects: usize,
    pub length: u32,
    pub feature_dim: usize,
    pub noise: NoiseConfig,
    /// Segmentation agent for the KFE variants.
    pub kfe: QConfig,
    /// Segment length of the fixed segmentation used without KFE.
    pub baseline_len: u32,
    /// Fusion used by the IFF variants.
    pub fusion: FusionConfig,
    /// Fusion ratios to sweep for the IFF variants instead of `fusion.a`.
    pub sweep_a: Option<Vec<f64>>,
    pub tracker: TrackerConfig,
    pub train: TrainConfig,
    /// Seed of the GCN weight initialization.
    pub gcn_seed: u64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            kinds: vec![ScenarioKind::Occlusion],
            variants: Variant::ALL.to_vec(),
            seeds: (1..=5).collect(),
            train_sequences: 4,
            num_objects: 6,
            length: 60,
            feature_dim: DEFAULT_FEATURE_DIM,
            noise: NoiseConfig {
                feature_sigma: 0.1,
                box_sigma: 2.0,
                drop_rate: 0.05,
            },
            kfe: QConfig::new(2, 10),
            baseline_len: 10,
            fusion: FusionConfig::default(),
            sweep_a: None,
            tracker: TrackerConfig::default(),
            train: TrainConfig::default(),
            gcn_seed: 0,
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() || self.variants.is_empty() || self.seeds.is_empty() {
            return Err(Error::Validation("ablation needs kinds, variants and seeds".into()));
        }
        if self.train_sequences == 0 {
            return Err(Error::Validation("at least one training sequence is required".into()));
        }
        if self.baseline_len == 0 {
            return Err(Error::Validation("baseline segment length must be ≥ 1".into()));
        }
        self.kfe.validate()?;
        self.fusion.validate()?;
        self.tracker.validate()?;
        self.train.validate()?;
        self.noise.validate()?;
        if let Some(sweep) = &self.sweep_a {
            if sweep.is_empty() {
                return Err(Error::Validation("empty fusion-ratio sweep".into()));
            }
            for &a in sweep {
                FusionConfig { a, ..self.fusion }.validate()?;
            }
        }
        Ok(())
    }

    pub fn scenario(&self, kind: ScenarioKind, seed: u64) -> ScenarioConfig {
        let mut s = ScenarioConfig::new(kind, self.num_objects, self.length, seed);
        s.noise = self.noise;
        s.feature_dim = self.feature_dim;
        s
    }

    /// `(variant, fusion ratio)` rows in output order.
    fn rows(&self) -> Vec<(Variant, Option<f64>)> {
        let mut rows = Vec::new();
        for &v in &self.variants {
            if v.uses_iff() {
                match &self.sweep_a {
                    Some(sweep) => rows.extend(sweep.iter().map(|&a| (v, Some(a)))),
                    None => rows.push((v, Some(self.fusion.a))),
                }
            } else {
                rows.push((v, None));
            }
        }
        rows
    }
}

/// Components a variant runs with once trained.
#[derive(Debug, Clone)]
pub struct TrainedVariant {
    pub variant: Variant,
    pub fusion: Option<FusionConfig>,
    pub layer: Option<GcnLayer>,
    pub scorer: EdgeScorer,
}

/// Metrics of one (kind, variant, ratio, seed) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub kind: ScenarioKind,
    pub variant: Variant,
    pub a: Option<f64>,
    pub seed: u64,
    pub report: MetricReport,
}

/// Segmentation used by a variant: the trained KFE strategy or the fixed
/// equal-length tiling.
pub fn segmentation(variant: Variant, seq: &Sequence, cfg: &AblationConfig, seed: u64) -> Result<SegmentationStrategy> {
    if variant.uses_kfe() {
        let q = QConfig { seed, ..cfg.kfe };
        Ok(train_kfe(seq, &q)?.best)
    } else {
        Ok(SegmentationStrategy::uniform(seq.length, cfg.baseline_len))
    }
}

/// Train the edge scorer (and, with IFF in gcn mode, the GCN weight) on the
/// suite's training sequences.
pub fn train_variant(
    cfg: &AblationConfig,
    kind: ScenarioKind,
    variant: Variant,
    a: Option<f64>,
) -> Result<TrainedVariant> {
    let fusion = a.map(|a| FusionConfig { a, ..cfg.fusion });
    let layer = fusion
        .filter(|f| f.mode == FusionMode::Gcn)
        .map(|_| GcnLayer::init(cfg.feature_dim, cfg.gcn_seed));
    let mut sequences = Vec::new();
    let mut graphs: Vec<LabeledGraph> = Vec::new();
    for k in 0..cfg.train_sequences {
        let seed = TRAIN_SEED_OFFSET + k as u64;
        let out = generate(&cfg.scenario(kind, seed))?;
        let strategy = segmentation(variant, &out.detections, cfg, seed)?;
        graphs.extend(training_graphs(
            &out.detections,
            k,
            &out.gt,
            &strategy,
            fusion.as_ref(),
            layer.as_ref(),
            &cfg.tracker,
        )?);
        sequences.push(out.detections);
    }
    let init = EdgeScorer::zeros(cfg.tracker.levels);
    let report = match (&fusion, &layer) {
        (Some(f), Some(l)) => {
            let joint = JointGcn::new(&sequences, *f)?;
            train_edge_scorer(&graphs, &init, &cfg.train, Some((&joint, l)))?
        }
        _ => train_edge_scorer(&graphs, &init, &cfg.train, None)?,
    };
    Ok(TrainedVariant {
        variant,
        fusion,
        layer: report.layer,
        scorer: report.scorer,
    })
}

/// Track one evaluation sequence with a trained variant.
pub fn run_cell(
    cfg: &AblationConfig,
    kind: ScenarioKind,
    trained: &TrainedVariant,
    seed: u64,
) -> Result<(TrackSet, TrackSet)> {
    let out = generate(&cfg.scenario(kind, seed))?;
    let strategy = segmentation(trained.variant, &out.detections, cfg, seed)?;
    let tracks = track_sequence(
        &out.detections,
        &strategy,
        trained.fusion.as_ref(),
        trained.layer.as_ref(),
        &trained.scorer,
        &cfg.tracker,
    )?;
    Ok((tracks, out.gt))
}

fn context(e: Error, kind: ScenarioKind, variant: Variant, seed: Option<u64>) -> Error {
    let where_ = match seed {
        Some(s) => format!("{kind}/{variant}/seed {s}"),
        None => format!("{kind}/{variant}/training"),
    };
    match e {
        Error::Training(m) => Error::Training(format!("{where_}: {m}")),
        Error::Config(m) => Error::Config(format!("{where_}: {m}")),
        Error::Validation(m) => Error::Validation(format!("{where_}: {m}")),
        other => other,
    }
}

/// Metrics of every cell, ordered by kind, row and seed.
pub fn run_cells(cfg: &AblationConfig) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let rows: Vec<(ScenarioKind, Variant, Option<f64>)> = cfg
        .kinds
        .iter()
        .flat_map(|&k| cfg.rows().into_iter().map(move |(v, a)| (k, v, a)))
        .collect();
    let trained: Vec<TrainedVariant> = rows
        .par_iter()
        .map(|&(k, v, a)| train_variant(cfg, k, v, a).map_err(|e| context(e, k, v, None)))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, u64)> = (0..rows.len())
        .flat_map(|r| cfg.seeds.iter().map(move |&s| (r, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(r, seed)| {
            let (kind, variant, a) = rows[r];
            let (tracks, gt) = run_cell(cfg, kind, &trained[r], seed).map_err(|e| context(e, kind, variant, Some(seed)))?;
            Ok(CellResult {
                kind,
                variant,
                a,
                seed,
                report: evaluate(&tracks, &gt),
            })
        })
        .collect()
}

pub const ABLATION_HEADER: &str = "kind,variant,a,b,seeds,HOTA,HOTA_sd,DetA,DetA_sd,AssA,AssA_sd,IDF1,IDF1_sd,MOTA,MOTA_sd,IDS,IDS_sd,FP,FP_sd,FN,FN_sd";

/// Mean and sample standard deviation; `None` for no values.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, sd))
}

/// One CSV row per (kind, variant, ratio) with mean and standard deviation
/// of every metric over seeds. Undefined metrics are skipped per seed and
/// reported as `NA` when no seed defines them.
pub fn ablation_csv(cells: &[CellResult]) -> String {
    let mut out = String::from(ABLATION_HEADER);
    out.push('\n');
    let mut start = 0;
    while start < cells.len() {
        let key = |c: &CellResult| (c.kind, c.variant, c.a.map(f64::to_bits));
        let end = start + cells[start..].iter().take_while(|c| key(c) == key(&cells[start])).count();
        let group = &cells[start..end];
        let c0 = &group[0];
        let (a, b) = match c0.a {
            Some(a) => (format!("{a}"), format!("{}", 1.0 - a)),
            None => ("NA".into(), "NA".into()),
        };
        let _ = write!(out, "{},{},{a},{b},{}", c0.kind, c0.variant, group.len());
        let metrics: [&dyn Fn(&MetricReport) -> Option<f64>; 8] = [
            &|r| r.hota,
            &|r| r.deta,
            &|r| r.assa,
            &|r| r.idf1,
            &|r| r.mota,
            &|r| Some(r.ids as f64),
            &|r| Some(r.fp as f64),
            &|r| Some(r.fn_ as f64),
        ];
        for m in metrics {
            let vals: Vec<f64> = group.iter().filter_map(|c| m(&c.report)).collect();
            match mean_std(&vals) {
                Some((mean, sd)) => {
                    let _ = write!(out, ",{mean:.6},{sd:.6}");
                }
                None => out.push_str(",NA,NA"),
            }
        }
        out.push('\n');
        start = end;
    }
    out
}

/// Run every cell and format the table.
pub fn run_ablation(cfg: &AblationConfig) -> Result<String> {
    Ok(ablation_csv(&run_cells(cfg)?))
}

/// One-sided sign test: probability of at least `wins` successes among
/// `wins + losses` fair coin flips. Ties are discarded beforehand.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    // Sum C(n, k) / 2^n for k ≥ wins in log space.
    let ln_fact = |m: usize| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    (wins..=n)
        .map(|k| (ln_fact(n) - ln_fact(k) - ln_fact(n - k) - n as f64 * 2f64.ln()).exp())
        .sum::<f64>()
        .min(1.0)
}

/// Parse `start:end:step` into an inclusive list of ratios.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("sweep {spec:?} is not start:end:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || end < start {
        return Err(bad());
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    // Round to the step's decimal grid so 0.1 steps print as 0.3, not 0.30000000000000004.
    let scale = 1e9;
    Ok((0..=count)
        .map(|k| ((start + k as f64 * step) * scale).round() / scale)
        .collect())
}
