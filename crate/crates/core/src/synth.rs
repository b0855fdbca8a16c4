//! Seeded synthetic scenes with ground truth.
//!
//! Objects move linearly with per-frame jitter on a 1920×1080 canvas and
//! reflect at its borders. Four layouts are available: crossing pairs,
//! crossing pairs where the rear member is hidden while overlapped,
//! lookalike pairs walking side by side with their own companions, and free
//! random walks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data_io::{BBox, Detection, Sequence, TrackSet};
use crate::{Error, Result};

pub const CANVAS_WIDTH: f64 = 1920.0;
pub const CANVAS_HEIGHT: f64 = 1080.0;
pub const DEFAULT_FEATURE_DIM: usize = 32;
pub const DEFAULT_MOTION_JITTER: f64 = 1.0;

/// In occlusion scenes the second object of each crossing pair passes behind
/// the first and is hidden while their boxes overlap at least this much.
pub const OCCLUSION_IOU: f64 = 0.3;

/// Speed range of crossing objects, pixels per frame.
pub const CROSSING_SPEED: (f64, f64) = (14.0, 24.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScenarioKind {
    Occlusion,
    Lookalike,
    Crossing,
    RandomWalk,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [Self::Occlusion, Self::Lookalike, Self::Crossing, Self::RandomWalk];

    pub fn name(self) -> &'static str {
        match self {
            Self::Occlusion => "occlusion",
            Self::Lookalike => "lookalike",
            Self::Crossing => "crossing",
            Self::RandomWalk => "random_walk",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario kind {s:?}")))
    }
}

/// Object `object` (1-based) is hidden for `length` frames from `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct OcclusionGap {
    pub object: usize,
    pub start: u32,
    pub length: u32,
}

impl OcclusionGap {
    pub fn end(&self) -> u32 {
        self.start + self.length - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseConfig {
    pub feature_sigma: f64,
    pub box_sigma: f64,
    /// Probability of dropping each box.
    pub drop_rate: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("feature sigma", self.feature_sigma), ("box sigma", self.box_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be ≥ 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err(Error::Validation(format!("drop rate {} outside [0,1)", self.drop_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub num_objects: usize,
    /// Number of frames `LN`.
    pub length: u32,
    pub feature_dim: usize,
    /// Extra hidden intervals on top of those implied by the layout.
    pub occlusion_gaps: Vec<OcclusionGap>,
    /// Object pairs (1-based) sharing one base feature.
    pub lookalike_pairs: Vec<(usize, usize)>,
    pub noise: NoiseConfig,
    /// Standard deviation of the per-frame center jitter of the true motion.
    pub motion_jitter: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Noise-free scenario; the lookalike kind pairs objects 1 and 2.
    pub fn new(kind: ScenarioKind, num_objects: usize, length: u32, seed: u64) -> Self {
        let lookalike_pairs = if kind == ScenarioKind::Lookalike && num_objects >= 2 {
            vec![(1, 2)]
        } else {
            Vec::new()
        };
        Self {
            kind,
            num_objects,
            length,
            feature_dim: DEFAULT_FEATURE_DIM,
            occlusion_gaps: Vec::new(),
            lookalike_pairs,
            noise: NoiseConfig::default(),
            motion_jitter: DEFAULT_MOTION_JITTER,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_objects == 0 || self.length == 0 || self.feature_dim == 0 {
            return Err(Error::Validation(
                "objects, frames and feature dimension must be positive".into(),
            ));
        }
        if !(self.motion_jitter >= 0.0 && self.motion_jitter.is_finite()) {
            return Err(Error::Validation(format!("motion jitter {} must be ≥ 0", self.motion_jitter)));
        }
        self.noise.validate()?;
        let mut hidden: BTreeMap<usize, BTreeSet<u32>> = BTreeMap::new();
        for g in &self.occlusion_gaps {
            if g.object < 1 || g.object > self.num_objects {
                return Err(Error::Validation(format!("gap refers to unknown object {}", g.object)));
            }
            if g.start < 1 || g.length < 1 || g.end() > self.length {
                return Err(Error::Validation(format!(
                    "gap ({},{},{}) outside frames 1..={}",
                    g.object, g.start, g.length, self.length
                )));
            }
            let set = hidden.entry(g.object).or_default();
            for t in g.start..=g.end() {
                if !set.insert(t) {
                    return Err(Error::Validation(format!("overlapping gaps for object {}", g.object)));
                }
            }
        }
        let mut paired = BTreeSet::new();
        for &(i, j) in &self.lookalike_pairs {
            if i == j || i < 1 || j < 1 || i > self.num_objects || j > self.num_objects {
                return Err(Error::Validation(format!("invalid lookalike pair ({i},{j})")));
            }
            if !paired.insert(i) || !paired.insert(j) {
                return Err(Error::Validation(format!("object in more than one lookalike pair ({i},{j})")));
            }
        }
        Ok(())
    }
}

/// Generated scene. `scenario.occlusion_gaps` lists every hidden interval,
/// including those implied by the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub gt: TrackSet,
    pub detections: Sequence,
    /// Base appearance feature of every object id.
    pub features: BTreeMap<i64, Vec<f64>>,
    pub scenario: ScenarioConfig,
}

/// Reflect `x` into `[lo, hi]`, as a point bouncing between two walls.
fn fold(x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    let m = (x - lo).rem_euclid(2.0 * span);
    if m <= span {
        lo + m
    } else {
        lo + 2.0 * span - m
    }
}

/// Unconstrained center path of one object plus its box size.
struct Path {
    width: f64,
    height: f64,
    centers: Vec<(f64, f64)>,
}

impl Path {
    fn linear(width: f64, height: f64, start: (f64, f64), vel: (f64, f64), length: u32) -> Self {
        let centers = (0..length)
            .map(|k| (start.0 + vel.0 * k as f64, start.1 + vel.1 * k as f64))
            .collect();
        Self { width, height, centers }
    }

    fn boxes(&self, jitter: &[(f64, f64)]) -> Vec<BBox> {
        self.centers
            .iter()
            .zip(jitter)
            .map(|(&(x, y), &(jx, jy))| {
                let cx = fold(x + jx, self.width / 2.0, CANVAS_WIDTH - self.width / 2.0);
                let cy = fold(y + jy, self.height / 2.0, CANVAS_HEIGHT - self.height / 2.0);
                BBox::new(cx - self.width / 2.0, cy - self.height / 2.0, self.width, self.height)
            })
            .collect()
    }
}

fn box_size(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let w = rng.random_range(50.0..90.0);
    (w, 2.4 * w)
}

fn random_walk(rng: &mut ChaCha8Rng, length: u32) -> Path {
    let (w, h) = box_size(rng);
    let mut pos = (rng.random_range(w..CANVAS_WIDTH - w), rng.random_range(h..CANVAS_HEIGHT - h));
    let speed = rng.random_range(1.0..6.0);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let mut vel = (speed * angle.cos(), speed * angle.sin());
    let kick = Normal::new(0.0, 0.3).expect("valid sigma");
    let mut centers = Vec::with_capacity(length as usize);
    for _ in 0..length {
        centers.push(pos);
        vel.0 += kick.sample(rng);
        vel.1 += kick.sample(rng);
        pos = (pos.0 + vel.0, pos.1 + vel.1);
    }
    Path {
        width: w,
        height: h,
        centers,
    }
}

/// Two objects on one lane heading towards each other, meeting mid-sequence.
fn crossing_pair(rng: &mut ChaCha8Rng, length: u32) -> (Path, Path) {
    let (wa, ha) = box_size(rng);
    let (wb, hb) = box_size(rng);
    let lane = rng.random_range(ha / 2.0..CANVAS_HEIGHT - ha / 2.0);
    let meet_t = rng.random_range(length as f64 / 3.0..=(2.0 * length as f64 / 3.0).max(length as f64 / 3.0));
    let meet_x = rng.random_range(0.25 * CANVAS_WIDTH..0.75 * CANVAS_WIDTH);
    let sa = rng.random_range(CROSSING_SPEED.0..CROSSING_SPEED.1);
    let sb = rng.random_range(CROSSING_SPEED.0..CROSSING_SPEED.1);
    let lane_b = lane + rng.random_range(-0.1..0.1) * hb;
    let k = meet_t - 1.0;
    (
        Path::linear(wa, ha, (meet_x - sa * k, lane), (sa, 0.0), length),
        Path::linear(wb, hb, (meet_x + sb * k, lane_b), (-sb, 0.0), length),
    )
}

/// Lookalike pair walking side by side; each member brings `companions[i]`
/// distinct objects on its far side. While the pair is hidden during
/// `hidden = (start, length)` the whole group sidesteps by about one pair
/// spacing, so after the gap each member stands where the other was headed.
fn lookalike_group(rng: &mut ChaCha8Rng, length: u32, companions: [usize; 2], hidden: Option<(u32, u32)>) -> Vec<Path> {
    let (w, h) = box_size(rng);
    let spacing = 1.2 * w;
    let x0 = rng.random_range(0.3 * CANVAS_WIDTH..0.7 * CANVAS_WIDTH);
    let y0 = rng.random_range(0.3 * CANVAS_HEIGHT..0.7 * CANVAS_HEIGHT);
    let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let vel = (rng.random_range(-1.0..1.0), dir * rng.random_range(3.0..8.0));
    let side_step = if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.8..1.2) * spacing;
    let mut paths = vec![
        Path::linear(w, h, (x0 - spacing / 2.0, y0), vel, length),
        Path::linear(w, h, (x0 + spacing / 2.0, y0), vel, length),
    ];
    for (side, &count) in companions.iter().enumerate() {
        let sign = if side == 0 { -1.0 } else { 1.0 };
        // Companions flank their member diagonally, alternating ahead and
        // behind, one column further out every second companion.
        for k in 0..count {
            let (cw, ch) = box_size(rng);
            let column = (k / 2 + 1) as f64;
            let dx = sign * (spacing / 2.0 + 0.8 * spacing * column);
            let dy = if k % 2 == 0 { 0.45 } else { -0.45 } * h + rng.random_range(-0.05..0.05) * h;
            paths.push(Path::linear(cw, ch, (x0 + dx, y0 + dy), vel, length));
        }
    }
    if let Some((start, gap)) = hidden {
        for p in &mut paths {
            for (k, c) in p.centers.iter_mut().enumerate() {
                let t = k as u32 + 1;
                let progress = if t < start {
                    0.0
                } else {
                    (f64::from(t - start + 1) / f64::from(gap + 1)).min(1.0)
                };
                c.0 += side_step * progress;
            }
        }
    }
    paths
}

/// Per-object paths for the layout, in object order, plus hidden intervals
/// implied by the layout.
fn layout(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> (Vec<Path>, Vec<OcclusionGap>) {
    let n = cfg.num_objects;
    let len = cfg.length;
    let mut paths: Vec<Option<Path>> = (0..n).map(|_| None).collect();
    let mut implied = Vec::new();
    match cfg.kind {
        ScenarioKind::RandomWalk => {}
        ScenarioKind::Crossing | ScenarioKind::Occlusion => {
            for p in 0..n / 2 {
                let (a, b) = crossing_pair(rng, len);
                paths[2 * p] = Some(a);
                paths[2 * p + 1] = Some(b);
            }
        }
        ScenarioKind::Lookalike => {
            let members: Vec<usize> = cfg.lookalike_pairs.iter().flat_map(|&(i, j)| [i - 1, j - 1]).collect();
            let others: Vec<usize> = (0..n).filter(|o| !members.contains(o)).collect();
            let mut count = vec![0usize; members.len()];
            for k in 0..others.len() {
                count[k % members.len().max(1)] += 1;
            }
            let mut next_other = others.iter();
            for (p, &(i, j)) in cfg.lookalike_pairs.iter().enumerate() {
                // Both lookalikes vanish together for a few frames.
                let hidden = (len >= 8).then(|| {
                    let gap = rng.random_range(3..=6).min(len / 4).max(1);
                    let start = rng.random_range(len / 4..=(3 * len / 4).saturating_sub(gap).max(len / 4));
                    (start.max(1), gap)
                });
                if let Some((start, gap)) = hidden {
                    for o in [i, j] {
                        implied.push(OcclusionGap {
                            object: o,
                            start,
                            length: gap,
                        });
                    }
                }
                let mut group = lookalike_group(rng, len, [count[2 * p], count[2 * p + 1]], hidden).into_iter();
                paths[i - 1] = group.next();
                paths[j - 1] = group.next();
                for g in group {
                    if let Some(&o) = next_other.next() {
                        paths[o] = Some(g);
                    }
                }
            }
        }
    }
    let paths: Vec<Path> = paths
        .into_iter()
        .map(|p| p.unwrap_or_else(|| random_walk(rng, len)))
        .collect();
    (paths, implied)
}

/// Merge hidden frames of every object into maximal intervals.
fn gaps_from_hidden(hidden: &BTreeMap<usize, BTreeSet<u32>>) -> Vec<OcclusionGap> {
    let mut out = Vec::new();
    for (&object, frames) in hidden {
        let mut run: Option<(u32, u32)> = None;
        for &t in frames {
            run = match run {
                Some((s, e)) if t == e + 1 => Some((s, t)),
                Some((s, e)) => {
                    out.push(OcclusionGap { object, start: s, length: e - s + 1 });
                    Some((t, t))
                }
                None => Some((t, t)),
            };
        }
        if let Some((s, e)) = run {
            out.push(OcclusionGap { object, start: s, length: e - s + 1 });
        }
    }
    out
}

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("valid sigma");
    loop {
        let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generate a scene. Deterministic in `cfg`.
pub fn generate(cfg: &ScenarioConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (paths, implied) = layout(cfg, &mut rng);
    let jitter = Normal::new(0.0, cfg.motion_jitter.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let boxes: Vec<Vec<BBox>> = paths
        .iter()
        .map(|p| {
            let j: Vec<(f64, f64)> = (0..cfg.length)
                .map(|_| {
                    if cfg.motion_jitter > 0.0 {
                        (jitter.sample(&mut rng), jitter.sample(&mut rng))
                    } else {
                        (0.0, 0.0)
                    }
                })
                .collect();
            p.boxes(&j)
        })
        .collect();

    let mut features: BTreeMap<i64, Vec<f64>> = (1..=cfg.num_objects)
        .map(|o| (o as i64, unit_gaussian(&mut rng, cfg.feature_dim)))
        .collect();
    for &(i, j) in &cfg.lookalike_pairs {
        let base = features[&(i as i64)].clone();
        features.insert(j as i64, base);
    }

    let mut hidden: BTreeMap<usize, BTreeSet<u32>> = BTreeMap::new();
    for g in cfg.occlusion_gaps.iter().chain(&implied) {
        hidden.entry(g.object).or_default().extend(g.start..=g.end());
    }
    if cfg.kind == ScenarioKind::Occlusion {
        for p in 0..cfg.num_objects / 2 {
            let (a, b) = (&boxes[2 * p], &boxes[2 * p + 1]);
            for t in 0..cfg.length as usize {
                if a[t].iou(&b[t]) >= OCCLUSION_IOU {
                    hidden.entry(2 * p + 2).or_default().insert(t as u32 + 1);
                }
            }
        }
    }

    let mut rows = Vec::new();
    for (o, bs) in boxes.iter().enumerate() {
        let h = hidden.get(&(o + 1));
        for (k, b) in bs.iter().enumerate() {
            let t = k as u32 + 1;
            if !h.is_some_and(|h| h.contains(&t)) {
                rows.push((o as i64 + 1, t, *b));
            }
        }
    }
    let gt = TrackSet::from_rows(rows)?;
    let mut scenario = cfg.clone();
    scenario.occlusion_gaps = gaps_from_hidden(&hidden);
    let mut detections = degrade(&gt, &features, &cfg.noise, cfg.seed ^ 0x5eed_de64)?;
    detections = detections.with_length(cfg.length)?;
    detections.name = format!("{}-{}", cfg.kind, cfg.seed);
    Ok(SynthOutput {
        gt,
        detections,
        features,
        scenario,
    })
}

/// Detections observed from `gt`: each box is dropped with the configured
/// rate, box coordinates get Gaussian jitter, and features are the
/// per-identity `features` with Gaussian jitter, re-normalized. With zero
/// noise the detections mirror `gt` exactly.
pub fn degrade(
    gt: &TrackSet,
    features: &BTreeMap<i64, Vec<f64>>,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Sequence> {
    noise.validate()?;
    let dim = features.values().next().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let box_noise = Normal::new(0.0, noise.box_sigma).map_err(|e| Error::Validation(e.to_string()))?;
    let feat_noise = Normal::new(0.0, noise.feature_sigma).map_err(|e| Error::Validation(e.to_string()))?;
    let mut dets = Vec::new();
    for (frame, boxes) in gt.by_frame() {
        for (id, b) in boxes {
            // Draw every variate even for dropped boxes so that one noise
            // setting does not shift the random stream of another.
            let keep = rng.random::<f64>() >= noise.drop_rate;
            let jit: [f64; 4] = std::array::from_fn(|_| box_noise.sample(&mut rng));
            let base = features
                .get(&id)
                .ok_or_else(|| Error::Validation(format!("no feature for identity {id}")))?;
            let mut f: Vec<f64> = base.iter().map(|x| x + feat_noise.sample(&mut rng)).collect();
            if noise.feature_sigma > 0.0 {
                let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    f.iter_mut().for_each(|x| *x /= norm);
                }
            }
            if !keep {
                continue;
            }
            let bbox = if noise.box_sigma > 0.0 {
                BBox::new(
                    b.left + jit[0],
                    b.top + jit[1],
                    (b.width + jit[2]).max(1.0),
                    (b.height + jit[3]).max(1.0),
                )
            } else {
                b
            };
            dets.push(Detection {
                frame,
                det_id: -1,
                bbox,
                confidence: 1.0,
                feature: f,
            });
        }
    }
    let length = gt.last_frame();
    Sequence::from_detections("", length, dim, dets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn occlusion_gap_example() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Occlusion, 1, 10, 3);
        cfg.occlusion_gaps = vec![OcclusionGap { object: 1, start: 4, length: 3 }];
        let out = generate(&cfg).unwrap();
        let frames: Vec<u32> = out.gt.tracks()[&1].iter().map(|(f, _)| *f).collect();
        assert_eq!(frames, vec![1, 2, 3, 7, 8, 9, 10]);
        for t in 4..=6 {
            assert!(out.detections.detections(t).is_empty());
        }
        assert_eq!(out.detections.num_detections(), 7);
    }

    #[test]
    fn lookalike_features_identical_without_noise() {
        let cfg = ScenarioConfig::new(ScenarioKind::Lookalike, 6, 30, 5);
        let out = generate(&cfg).unwrap();
        assert_eq!(out.features[&1], out.features[&2]);
        assert_ne!(out.features[&1], out.features[&3]);
    }

    #[test]
    fn same_seed_same_output() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Crossing, 5, 40, 9);
        cfg.noise = NoiseConfig { feature_sigma: 0.1, box_sigma: 2.0, drop_rate: 0.1 };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        cfg.seed = 10;
        let other = generate(&cfg).unwrap();
        cfg.seed = 9;
        assert_ne!(generate(&cfg).unwrap().gt, other.gt);
    }

    #[test]
    fn zero_noise_mirrors_ground_truth() {
        for kind in ScenarioKind::ALL {
            let out = generate(&ScenarioConfig::new(kind, 5, 30, 2)).unwrap();
            let gt_frames = out.gt.by_frame();
            assert_eq!(out.detections.num_detections(), out.gt.num_boxes());
            for (t, dets) in &out.detections.frames {
                let mut expect: Vec<BBox> = gt_frames[t].iter().map(|(_, b)| *b).collect();
                let mut got: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
                let key = |b: &BBox| (b.left.to_bits(), b.top.to_bits());
                expect.sort_by_key(key);
                got.sort_by_key(key);
                assert_eq!(got, expect);
            }
        }
    }

    #[test]
    fn drop_rate_is_binomial() {
        let rows = (1..=1000u32).map(|t| (1i64, t, BBox::new(0.0, 0.0, 10.0, 10.0)));
        let gt = TrackSet::from_rows(rows).unwrap();
        let feats = BTreeMap::from([(1i64, vec![1.0, 0.0])]);
        let noise = NoiseConfig { drop_rate: 0.5, ..NoiseConfig::default() };
        let kept = degrade(&gt, &feats, &noise, 17).unwrap().num_detections() as f64;
        let sd = (1000.0f64 * 0.25).sqrt();
        assert!((kept - 500.0).abs() <= 3.0 * sd, "kept {kept}");
    }

    #[test]
    fn occlusion_layout_hides_rear_objects() {
        let cfg = ScenarioConfig::new(ScenarioKind::Occlusion, 4, 60, 7);
        let out = generate(&cfg).unwrap();
        let clean = generate(&ScenarioConfig {
            kind: ScenarioKind::Crossing,
            ..cfg.clone()
        })
        .unwrap();
        assert!(!out.scenario.occlusion_gaps.is_empty());
        for g in &out.scenario.occlusion_gaps {
            let frames: BTreeSet<u32> = out.gt.tracks()[&(g.object as i64)].iter().map(|(f, _)| *f).collect();
            for t in g.start..=g.end() {
                assert!(!frames.contains(&t));
                // Its partner covers it in the unoccluded scene.
                assert_eq!(g.object % 2, 0);
                let by_frame = clean.gt.by_frame();
                let boxes = &by_frame[&t];
                let find = |id: i64| boxes.iter().find(|(i, _)| *i == id).unwrap().1;
                let (me, front) = (find(g.object as i64), find(g.object as i64 - 1));
                assert!(me.iou(&front) >= OCCLUSION_IOU);
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::RandomWalk, 2, 10, 0);
        cfg.occlusion_gaps = vec![OcclusionGap { object: 1, start: 9, length: 3 }];
        assert!(matches!(generate(&cfg), Err(Error::Validation(_))));
        cfg.occlusion_gaps = vec![
            OcclusionGap { object: 1, start: 2, length: 3 },
            OcclusionGap { object: 1, start: 4, length: 2 },
        ];
        assert!(matches!(generate(&cfg), Err(Error::Validation(_))));
        cfg.occlusion_gaps.clear();
        cfg.lookalike_pairs = vec![(1, 3)];
        assert!(matches!(generate(&cfg), Err(Error::Validation(_))));
        cfg.lookalike_pairs.clear();
        cfg.noise.drop_rate = 1.0;
        assert!(matches!(generate(&cfg), Err(Error::Validation(_))));
        assert!("teleport".parse::<ScenarioKind>().is_err());
        assert_eq!("random_walk".parse::<ScenarioKind>().unwrap(), ScenarioKind::RandomWalk);
    }

    proptest! {
        #[test]
        fn boxes_stay_on_canvas(seed in 0u64..500, kind in 0usize..4) {
            let out = generate(&ScenarioConfig::new(ScenarioKind::ALL[kind], 6, 40, seed)).unwrap();
            for track in out.gt.tracks().values() {
                for (_, b) in track {
                    prop_assert!(b.left >= -1e-9 && b.top >= -1e-9);
                    prop_assert!(b.left + b.width <= CANVAS_WIDTH + 1e-9);
                    prop_assert!(b.top + b.height <= CANVAS_HEIGHT + 1e-9);
                }
            }
        }

        #[test]
        fn jittered_features_are_unit(seed in 0u64..200) {
            let mut cfg = ScenarioConfig::new(ScenarioKind::RandomWalk, 3, 10, seed);
            cfg.noise.feature_sigma = 0.2;
            let out = generate(&cfg).unwrap();
            for dets in out.detections.frames.values() {
                for d in dets {
                    let n: f64 = d.feature.iter().map(|x| x * x).sum::<f64>().sqrt();
                    prop_assert!((n - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
