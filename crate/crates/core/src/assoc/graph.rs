use super::tracklet::Tracklet;
use crate::kfe::cosine_similarity;
use crate::Result;

/// Default number of candidate successors kept per tracklet.
pub const DEFAULT_MAX_CANDIDATES: usize = 10;

/// Motion and appearance cues for one candidate link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFeature {
    pub appearance_sim: f64,
    /// Frames between the end of the earlier and start of the later tracklet.
    pub time_gap: u32,
    /// Distance between the extrapolated and observed centers, in units of
    /// the earlier tracklet's last box height.
    pub center_dist: f64,
    pub iou_pred: f64,
}

impl EdgeFeature {
    pub fn between(a: &Tracklet, b: &Tracklet) -> Result<Self> {
        let gap = b.first_frame() - a.last_frame();
        let pred = a.extrapolate(gap);
        let (px, py) = pred.center();
        let (ox, oy) = b.first_box().center();
        Ok(Self {
            appearance_sim: cosine_similarity(&a.feature, &b.feature)?,
            time_gap: gap,
            center_dist: (px - ox).hypot(py - oy) / a.last_box().height,
            iou_pred: pred.iou(&b.first_box()),
        })
    }

    /// Scorer inputs, each roughly in `[-1, 1]`: similarity, gap over the
    /// window, squashed distance and predicted IoU.
    pub fn inputs(&self, window: u32) -> [f64; 4] {
        [
            self.appearance_sim,
            self.time_gap as f64 / window.max(1) as f64,
            self.center_dist / (1.0 + self.center_dist),
            self.iou_pred,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Index of the earlier tracklet in `nodes`.
    pub from: usize,
    /// Index of the later tracklet in `nodes`.
    pub to: usize,
    pub feature: EdgeFeature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelGraph {
    pub level: usize,
    pub window: u32,
    pub nodes: Vec<Tracklet>,
    pub edges: Vec<Edge>,
}

impl LevelGraph {
    pub fn inputs(&self, e: usize) -> [f64; 4] {
        self.edges[e].feature.inputs(self.window)
    }
}

/// Candidate successors: for each tracklet, the `k` tracklets starting after
/// it ends with the smallest gap, up to `window` frames. Ties go to the
/// earlier position in `tracklets`.
pub fn build_level_graph(tracklets: Vec<Tracklet>, level: usize, window: u32, k: usize) -> Result<LevelGraph> {
    let mut edges = Vec::new();
    for (i, a) in tracklets.iter().enumerate() {
        let end = a.last_frame();
        let mut cands: Vec<(u32, usize)> = tracklets
            .iter()
            .enumerate()
            .filter(|(j, b)| *j != i && b.first_frame() > end && b.first_frame() - end <= window)
            .map(|(j, b)| (b.first_frame() - end, j))
            .collect();
        cands.sort();
        for &(_, j) in cands.iter().take(k) {
            edges.push(Edge {
                from: i,
                to: j,
                feature: EdgeFeature::between(a, &tracklets[j])?,
            });
        }
    }
    Ok(LevelGraph {
        level,
        window,
        nodes: tracklets,
        edges,
    })
}
