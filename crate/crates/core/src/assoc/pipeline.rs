use std::collections::BTreeMap;

use rayon::prelude::*;

use super::graph::{build_level_graph, LevelGraph, DEFAULT_MAX_CANDIDATES};
use super::scorer::{score_edges, EdgeScorer};
use super::tracklet::{build_tracklets, Tracklet, BASE_IOU_THRESHOLD};
use super::train::LabeledGraph;
use crate::assignment::max_weight_matching;
use crate::data_io::{Sequence, TrackSet};
use crate::iff::{fuse_sequence, FusionConfig, GcnLayer};
use crate::kfe::SegmentationStrategy;
use crate::metrics::CLEAR_THRESHOLD;
use crate::{Error, Result};

pub const DEFAULT_LEVELS: usize = 3;
pub const DEFAULT_MERGE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub levels: usize,
    /// Level-1 window; defaults to the longest segment of the strategy.
    pub base_window: Option<u32>,
    pub max_candidates: usize,
    pub base_iou: f64,
    pub merge_threshold: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS,
            base_window: None,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            base_iou: BASE_IOU_THRESHOLD,
            merge_threshold: DEFAULT_MERGE_THRESHOLD,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Config("at least one level is required".into()));
        }
        if self.max_candidates == 0 {
            return Err(Error::Config("max candidates must be ≥ 1".into()));
        }
        if self.base_window == Some(0) {
            return Err(Error::Config("base window must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&self.base_iou) {
            return Err(Error::Config(format!("base IoU {} outside [0,1]", self.base_iou)));
        }
        if !(0.0..=1.0).contains(&self.merge_threshold) {
            return Err(Error::Config(format!(
                "merge threshold {} outside [0,1]",
                self.merge_threshold
            )));
        }
        Ok(())
    }

    /// `base × 2^(level − 1)`.
    pub fn window(&self, base: u32, level: usize) -> u32 {
        base.saturating_mul(1u32 << (level - 1).min(31))
    }
}

/// Edges accepted by the one-to-one assignment, as indices into
/// `graph.edges`, sorted.
///
/// Among edges scoring at least `threshold`, the assignment first maximizes
/// the number of accepted links and then their total score. Ranking by count
/// first keeps the accepted set monotone in the threshold.
pub fn select_edges(graph: &LevelGraph, scores: &[f64], threshold: f64) -> Vec<usize> {
    let n = graph.nodes.len();
    let bonus = n as f64 + 1.0;
    let mut weights = vec![vec![None; n]; n];
    let mut index = BTreeMap::new();
    for (e, edge) in graph.edges.iter().enumerate() {
        if scores[e] >= threshold {
            let w = bonus + scores[e];
            let cell: &mut Option<f64> = &mut weights[edge.from][edge.to];
            if cell.map_or(true, |c| w > c) {
                *cell = Some(w);
                index.insert((edge.from, edge.to), e);
            }
        }
    }
    let mut accepted: Vec<usize> = max_weight_matching(&weights)
        .into_iter()
        .map(|pair| index[&pair])
        .collect();
    accepted.sort_unstable();
    accepted
}

/// Merge tracklets along the accepted edges. Output is ordered by first
/// frame then first ordinal, with ids counted from `first_id`.
pub fn match_and_merge(
    graph: &LevelGraph,
    scores: &[f64],
    threshold: f64,
    seq: &Sequence,
    first_id: usize,
) -> Vec<Tracklet> {
    let n = graph.nodes.len();
    let mut next = vec![None; n];
    let mut has_pred = vec![false; n];
    for e in select_edges(graph, scores, threshold) {
        let edge = &graph.edges[e];
        next[edge.from] = Some(edge.to);
        has_pred[edge.to] = true;
    }
    let mut chains: Vec<Vec<usize>> = Vec::new();
    for start in (0..n).filter(|&i| !has_pred[i]) {
        let mut chain = vec![start];
        while let Some(j) = next[chain[chain.len() - 1]] {
            chain.push(j);
        }
        chains.push(chain);
    }
    let mut merged: Vec<Tracklet> = chains
        .into_iter()
        .map(|chain| {
            if chain.len() == 1 {
                return graph.nodes[chain[0]].clone();
            }
            let members = chain
                .iter()
                .flat_map(|&i| graph.nodes[i].members.iter().copied())
                .collect();
            Tracklet::new(0, members, seq)
        })
        .collect();
    sort_and_number(&mut merged, first_id);
    merged
}

fn sort_and_number(tracklets: &mut [Tracklet], first_id: usize) {
    tracklets.sort_by_key(|t| (t.first_frame(), t.members[0].ordinal));
    for (k, t) in tracklets.iter_mut().enumerate() {
        t.id = first_id + k;
    }
}

/// Level-0 tracklets of every segment.
pub fn base_tracklets(seq: &Sequence, strategy: &SegmentationStrategy, base_iou: f64) -> Vec<Tracklet> {
    let mut all: Vec<Tracklet> = strategy
        .segments
        .par_iter()
        .map(|s| build_tracklets(seq, s, base_iou, 0))
        .flatten()
        .collect();
    sort_and_number(&mut all, 1);
    all
}

fn base_window(strategy: &SegmentationStrategy, cfg: &TrackerConfig) -> u32 {
    cfg.base_window
        .unwrap_or_else(|| strategy.segments.iter().map(|s| s.len()).max().unwrap_or(1))
}

fn prepare(
    seq: &Sequence,
    strategy: &SegmentationStrategy,
    fusion: Option<&FusionConfig>,
    layer: Option<&GcnLayer>,
    cfg: &TrackerConfig,
) -> Result<Sequence> {
    cfg.validate()?;
    strategy.validate_tiling(seq.length)?;
    match fusion {
        Some(f) => fuse_sequence(seq, f, layer),
        None => Ok(seq.clone()),
    }
}

/// Run the level hierarchy with `score` deciding each level's edge scores;
/// `visit` sees every level graph with its scores.
fn run_levels(
    seq: &Sequence,
    strategy: &SegmentationStrategy,
    cfg: &TrackerConfig,
    mut score: impl FnMut(&LevelGraph) -> Result<Vec<f64>>,
    mut visit: impl FnMut(&LevelGraph, &[f64]),
) -> Result<Vec<Tracklet>> {
    let base = base_window(strategy, cfg);
    let mut tracklets = base_tracklets(seq, strategy, cfg.base_iou);
    for level in 1..=cfg.levels {
        let graph = build_level_graph(tracklets, level, cfg.window(base, level), cfg.max_candidates)?;
        let scores = score(&graph)?;
        visit(&graph, &scores);
        tracklets = match_and_merge(&graph, &scores, cfg.merge_threshold, seq, 1);
        debug_assert!(tracklets
            .iter()
            .all(|t| t.members.windows(2).all(|w| w[0].frame < w[1].frame)));
    }
    Ok(tracklets)
}

fn to_trackset(tracklets: &[Tracklet]) -> Result<TrackSet> {
    TrackSet::from_rows(
        tracklets
            .iter()
            .flat_map(|t| t.members.iter().map(move |m| (t.id as i64, m.frame, m.bbox))),
    )
}

/// Fuse, build per-segment tracklets, merge level by level, and emit tracks
/// numbered 1.. in order of first appearance.
pub fn track_sequence(
    seq: &Sequence,
    strategy: &SegmentationStrategy,
    fusion: Option<&FusionConfig>,
    layer: Option<&GcnLayer>,
    scorer: &EdgeScorer,
    cfg: &TrackerConfig,
) -> Result<TrackSet> {
    let fused = prepare(seq, strategy, fusion, layer, cfg)?;
    let tracklets = run_levels(&fused, strategy, cfg, |g| score_edges(g, scorer), |_, _| {})?;
    to_trackset(&tracklets)
}

/// Ground-truth id of each detection `(frame, ordinal)` that overlaps a
/// ground-truth box with IoU ≥ 0.5 under a per-frame optimal matching.
pub fn detection_identities(seq: &Sequence, gt: &TrackSet) -> BTreeMap<(u32, usize), i64> {
    let gt_frames = gt.by_frame();
    let mut ids = BTreeMap::new();
    for (&frame, dets) in &seq.frames {
        let Some(gts) = gt_frames.get(&frame) else {
            continue;
        };
        let weights: Vec<Vec<Option<f64>>> = dets
            .iter()
            .map(|d| {
                gts.iter()
                    .map(|(_, b)| {
                        let v = d.bbox.iou(b);
                        (v > 0.0 && v >= CLEAR_THRESHOLD).then_some(v)
                    })
                    .collect()
            })
            .collect();
        for (di, gi) in max_weight_matching(&weights) {
            ids.insert((frame, di), gts[gi].0);
        }
    }
    ids
}

/// Majority ground-truth id of a tracklet's members; ties go to the smaller
/// id. `None` when no member is matched.
pub fn tracklet_identity(t: &Tracklet, ids: &BTreeMap<(u32, usize), i64>) -> Option<i64> {
    let mut votes: BTreeMap<i64, usize> = BTreeMap::new();
    for m in &t.members {
        if let Some(&id) = ids.get(&(m.frame, m.ordinal)) {
            *votes.entry(id).or_default() += 1;
        }
    }
    let best = votes.values().copied().max()?;
    votes.into_iter().find(|&(_, v)| v == best).map(|(id, _)| id)
}

/// Edge labels: positive when both ends carry the same ground-truth id.
pub fn label_edges(graph: &LevelGraph, ids: &BTreeMap<(u32, usize), i64>) -> Vec<bool> {
    let node_ids: Vec<Option<i64>> = graph.nodes.iter().map(|t| tracklet_identity(t, ids)).collect();
    graph
        .edges
        .iter()
        .map(|e| node_ids[e.from].is_some() && node_ids[e.from] == node_ids[e.to])
        .collect()
}

/// Labeled level graphs for one training sequence. Levels above the first
/// are built from merges along the positive edges, preferring short gaps.
#[allow(clippy::too_many_arguments)]
pub fn training_graphs(
    seq: &Sequence,
    sequence_index: usize,
    gt: &TrackSet,
    strategy: &SegmentationStrategy,
    fusion: Option<&FusionConfig>,
    layer: Option<&GcnLayer>,
    cfg: &TrackerConfig,
) -> Result<Vec<LabeledGraph>> {
    let fused = prepare(seq, strategy, fusion, layer, cfg)?;
    let ids = detection_identities(&fused, gt);
    let mut out = Vec::new();
    run_levels(
        &fused,
        strategy,
        cfg,
        |g| {
            let labels = label_edges(g, &ids);
            Ok(g.edges
                .iter()
                .zip(&labels)
                .map(|(e, &pos)| {
                    if pos {
                        1.0 - 1e-3 * e.feature.time_gap as f64 / g.window as f64
                    } else {
                        0.0
                    }
                })
                .collect())
        },
        |g, _| {
            out.push(LabeledGraph {
                sequence: sequence_index,
                labels: label_edges(g, &ids),
                graph: g.clone(),
            })
        },
    )?;
    Ok(out)
}
