use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::graph::LevelGraph;
use super::scorer::{focal_loss_logit, linear, EdgeScorer, FocalLossConfig, NUM_WEIGHTS};
use super::tracklet::Tracklet;
use crate::data_io::Sequence;
use crate::iff::{frame_batches, fuse_batch, gcn_gradients, FrameBatch, FusionConfig, FusionMode, GcnLayer};
use crate::{Error, Result};

/// Iterations spent per level before the next one unfreezes.
pub const UNFREEZE_AFTER: usize = 500;

/// Loss increase tolerated before a step is rejected and the step size halved.
const INCREASE_TOLERANCE: f64 = 1.01;

/// A level graph with one ground-truth label per candidate edge.
#[derive(Debug, Clone)]
pub struct LabeledGraph {
    /// Index of the source sequence, used by joint GCN training.
    pub sequence: usize,
    pub graph: LevelGraph,
    pub labels: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Initial gradient-descent step.
    pub step: f64,
    pub unfreeze_after: usize,
    pub focal: FocalLossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            step: 1e-2,
            unfreeze_after: UNFREEZE_AFTER,
            focal: FocalLossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.focal.validate()?;
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        if self.unfreeze_after == 0 {
            return Err(Error::Config("unfreeze interval must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Deepest trainable level at iteration `it`.
    pub fn depth_at(&self, it: usize, max_level: usize) -> usize {
        (1 + it / self.unfreeze_after).min(max_level)
    }
}

/// Raw (unfused) sequences whose GCN fusion weights are trained together
/// with the scorer. Indexed by [`LabeledGraph::sequence`].
#[derive(Debug, Clone)]
pub struct JointGcn {
    pub fusion: FusionConfig,
    batches: Vec<Vec<FrameBatch>>,
    frame_pos: Vec<BTreeMap<u32, usize>>,
}

impl JointGcn {
    pub fn new(sequences: &[Sequence], fusion: FusionConfig) -> Result<Self> {
        fusion.validate()?;
        if fusion.mode != FusionMode::Gcn {
            return Err(Error::Config("joint training needs gcn fusion".into()));
        }
        let batches = sequences
            .iter()
            .map(|s| frame_batches(s, fusion.m))
            .collect::<Result<Vec<_>>>()?;
        let frame_pos = batches
            .iter()
            .map(|bs| bs.iter().enumerate().map(|(k, b)| (b.frame, k)).collect())
            .collect();
        Ok(Self {
            fusion,
            batches,
            frame_pos,
        })
    }

    fn fused(&self, layer: &GcnLayer) -> Result<Vec<Vec<DMatrix<f64>>>> {
        self.batches
            .iter()
            .map(|bs| bs.iter().map(|b| fuse_batch(b, &self.fusion, Some(layer))).collect())
            .collect()
    }

    fn tracklet_feature(&self, fused: &[Vec<DMatrix<f64>>], s: usize, t: &Tracklet) -> Vec<f64> {
        let dim = fused[s].first().map_or(0, |m| m.ncols());
        let mut mean = vec![0.0; dim];
        for m in &t.members {
            let row = fused[s][self.frame_pos[s][&m.frame]].row(m.ordinal);
            for (acc, v) in mean.iter_mut().zip(row.iter()) {
                *acc += v;
            }
        }
        let n = t.members.len() as f64;
        mean.iter_mut().for_each(|v| *v /= n);
        mean
    }
}

/// Objective value and gradients at one parameter point.
#[derive(Debug, Clone)]
pub struct ObjectiveValue {
    /// Sum of focal losses over edges of the trainable levels.
    pub loss: f64,
    /// Number of edges contributing to `loss`.
    pub edges: usize,
    /// Gradient per level; frozen levels are absent.
    pub grad_scorer: BTreeMap<usize, [f64; NUM_WEIGHTS]>,
    /// Gradient with respect to the GCN weight when jointly trained.
    pub grad_w: Option<DMatrix<f64>>,
}

impl ObjectiveValue {
    pub fn mean_loss(&self) -> f64 {
        self.loss / self.edges.max(1) as f64
    }
}

/// Cosine similarity and its gradients with respect to both inputs.
fn cosine_with_grad(a: &[f64], b: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return (0.0, vec![0.0; a.len()], vec![0.0; b.len()]);
    }
    let c = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    let ga = a.iter().zip(b).map(|(x, y)| y / (na * nb) - c * x / (na * na)).collect();
    let gb = a.iter().zip(b).map(|(x, y)| x / (na * nb) - c * y / (nb * nb)).collect();
    (c, ga, gb)
}

/// Summed focal loss over edges of levels `≤ depth`, with gradients for the
/// scorer weights of those levels and, when `gcn` is given, for the GCN
/// weight. With `gcn`, appearance similarities are recomputed from the fused
/// features instead of read from the stored edge features.
pub fn objective(
    graphs: &[LabeledGraph],
    scorer: &EdgeScorer,
    depth: usize,
    focal: &FocalLossConfig,
    gcn: Option<(&JointGcn, &GcnLayer)>,
) -> Result<ObjectiveValue> {
    let mut loss = 0.0;
    let mut edges = 0;
    let mut grad_scorer: BTreeMap<usize, [f64; NUM_WEIGHTS]> = BTreeMap::new();
    let fused = gcn.map(|(j, layer)| j.fused(layer)).transpose()?;
    let mut upstream: Option<Vec<Vec<DMatrix<f64>>>> = fused
        .as_ref()
        .map(|f| f.iter().map(|bs| bs.iter().map(|m| DMatrix::zeros(m.nrows(), m.ncols())).collect()).collect());

    for g in graphs.iter().filter(|g| g.graph.level <= depth) {
        if g.labels.len() != g.graph.edges.len() {
            return Err(Error::Training(format!(
                "{} labels for {} edges",
                g.labels.len(),
                g.graph.edges.len()
            )));
        }
        let w = *scorer.weights(g.graph.level)?;
        let grad = grad_scorer.entry(g.graph.level).or_insert([0.0; NUM_WEIGHTS]);
        let node_feats: Option<Vec<Vec<f64>>> = match (gcn, &fused) {
            (Some((j, _)), Some(f)) => {
                Some(g.graph.nodes.iter().map(|t| j.tracklet_feature(f, g.sequence, t)).collect())
            }
            _ => None,
        };
        let mut node_grads: Vec<Vec<f64>> = match &node_feats {
            Some(nf) => nf.iter().map(|f| vec![0.0; f.len()]).collect(),
            None => Vec::new(),
        };
        for (e, edge) in g.graph.edges.iter().enumerate() {
            let mut x = g.graph.inputs(e);
            let cos_grads = node_feats.as_ref().map(|nf| {
                let (c, ga, gb) = cosine_with_grad(&nf[edge.from], &nf[edge.to]);
                x[0] = c;
                (ga, gb)
            });
            let (l, dz) = focal_loss_logit(linear(&w, &x), g.labels[e], focal);
            loss += l;
            edges += 1;
            for k in 0..4 {
                grad[k] += dz * x[k];
            }
            grad[4] += dz;
            if let Some((ga, gb)) = cos_grads {
                let ds = dz * w[0];
                for (acc, v) in node_grads[edge.from].iter_mut().zip(&ga) {
                    *acc += ds * v;
                }
                for (acc, v) in node_grads[edge.to].iter_mut().zip(&gb) {
                    *acc += ds * v;
                }
            }
        }
        if let (Some((j, _)), Some(up)) = (gcn, upstream.as_mut()) {
            for (t, gt) in g.graph.nodes.iter().zip(&node_grads) {
                let scale = 1.0 / t.members.len() as f64;
                for m in &t.members {
                    let target = &mut up[g.sequence][j.frame_pos[g.sequence][&m.frame]];
                    for (c, v) in gt.iter().enumerate() {
                        target[(m.ordinal, c)] += v * scale;
                    }
                }
            }
        }
    }

    let grad_w = match (gcn, upstream) {
        (Some((j, layer)), Some(up)) => {
            let d = layer.dim();
            let mut gw = DMatrix::zeros(d, d);
            for (s, bs) in j.batches.iter().enumerate() {
                for (b, batch) in bs.iter().enumerate() {
                    if up[s][b].iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let (g, _) = gcn_gradients(&batch.features, &batch.graph, layer, &j.fusion, &up[s][b])?;
                    gw += g;
                }
            }
            Some(gw)
        }
        _ => None,
    };
    Ok(ObjectiveValue {
        loss,
        edges,
        grad_scorer,
        grad_w,
    })
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub scorer: EdgeScorer,
    /// Trained GCN weight when jointly trained.
    pub layer: Option<GcnLayer>,
    /// Mean per-edge loss at the start of every iteration.
    pub loss_history: Vec<f64>,
    /// Unfrozen depth at every iteration.
    pub depth_history: Vec<usize>,
    /// Step size after all halvings.
    pub final_step: f64,
}

/// Gradient descent on the summed focal loss of all unfrozen levels.
///
/// Level `L + 1` unfreezes once `unfreeze_after` iterations have been spent
/// at depth `L`. A step that raises the loss by more than 1% at unchanged
/// depth is rejected and the step size halved, so large edge sets stay
/// stable at the default step. When `gcn` is given the GCN weight is updated
/// with the same step.
pub fn train_edge_scorer(
    graphs: &[LabeledGraph],
    init: &EdgeScorer,
    cfg: &TrainConfig,
    gcn: Option<(&JointGcn, &GcnLayer)>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if graphs.iter().all(|g| g.labels.is_empty()) {
        return Err(Error::Training("no labeled edges".into()));
    }
    let max_level = graphs.iter().map(|g| g.graph.level).max().unwrap_or(1);
    for g in graphs {
        init.weights(g.graph.level)?;
    }
    let mut scorer = init.clone();
    let mut layer = gcn.map(|(_, l)| l.clone());
    let joint = gcn.map(|(j, _)| j);
    let mut step = cfg.step;
    let mut loss_history = Vec::with_capacity(cfg.iterations);
    let mut depth_history = Vec::with_capacity(cfg.iterations);

    let eval = |s: &EdgeScorer, l: &Option<GcnLayer>, depth: usize| {
        objective(graphs, s, depth, &cfg.focal, joint.zip(l.as_ref()))
    };
    let mut current: Option<(usize, ObjectiveValue)> = None;
    for it in 0..cfg.iterations {
        let depth = cfg.depth_at(it, max_level);
        scorer.set_depth(depth);
        let cur = match current.take() {
            Some((d, v)) if d == depth => v,
            _ => eval(&scorer, &layer, depth)?,
        };
        loss_history.push(cur.mean_loss());
        depth_history.push(depth);

        let mut cand = scorer.clone();
        for (&level, g) in &cur.grad_scorer {
            let w = cand.weights_mut(level)?;
            for k in 0..NUM_WEIGHTS {
                w[k] -= step * g[k];
            }
        }
        let cand_layer = match (&layer, &cur.grad_w) {
            (Some(l), Some(gw)) => {
                let mut l = l.clone();
                l.weight -= gw * step;
                Some(l)
            }
            _ => layer.clone(),
        };
        let next = eval(&cand, &cand_layer, depth)?;
        if next.loss.is_finite() && next.loss <= cur.loss * INCREASE_TOLERANCE {
            scorer = cand;
            layer = cand_layer;
            current = Some((depth, next));
        } else {
            step *= 0.5;
            current = Some((depth, cur));
        }
    }
    Ok(TrainReport {
        scorer,
        layer,
        loss_history,
        depth_history,
        final_step: step,
    })
}
