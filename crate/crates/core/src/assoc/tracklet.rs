use crate::assignment::max_weight_matching;
use crate::data_io::{BBox, Sequence};
use crate::kfe::Segment;

/// Default IoU needed to link detections of consecutive frames.
pub const BASE_IOU_THRESHOLD: f64 = 0.3;

/// Members used for the constant-velocity estimate.
const VELOCITY_WINDOW: usize = 5;

/// A detection inside a tracklet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Member {
    pub frame: u32,
    /// Within-frame ordinal of the detection.
    pub ordinal: usize,
    pub bbox: BBox,
}

/// Short trajectory: detections in strictly increasing frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub id: usize,
    pub members: Vec<Member>,
    /// Mean of the member features.
    pub feature: Vec<f64>,
    /// Box-center velocity in pixels per frame.
    pub velocity: (f64, f64),
}

impl Tracklet {
    /// Build from members (sorted by frame) and recompute feature and motion
    /// from `seq`.
    pub fn new(id: usize, members: Vec<Member>, seq: &Sequence) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0].frame < w[1].frame));
        let mut t = Self {
            id,
            members,
            feature: Vec::new(),
            velocity: (0.0, 0.0),
        };
        t.refresh(seq);
        t
    }

    pub fn refresh(&mut self, seq: &Sequence) {
        self.feature = mean_feature(&self.members, seq);
        self.velocity = velocity(&self.members);
    }

    pub fn first_frame(&self) -> u32 {
        self.members[0].frame
    }

    pub fn last_frame(&self) -> u32 {
        self.members[self.members.len() - 1].frame
    }

    pub fn span(&self) -> (u32, u32) {
        (self.first_frame(), self.last_frame())
    }

    pub fn first_box(&self) -> BBox {
        self.members[0].bbox
    }

    pub fn last_box(&self) -> BBox {
        self.members[self.members.len() - 1].bbox
    }

    /// Last box moved forward by `gap` frames at constant velocity.
    pub fn extrapolate(&self, gap: u32) -> BBox {
        let b = self.last_box();
        let (cx, cy) = b.center();
        b.with_center(
            cx + self.velocity.0 * gap as f64,
            cy + self.velocity.1 * gap as f64,
        )
    }

    /// Concatenate two temporally ordered tracklets.
    pub fn concat(id: usize, a: &Tracklet, b: &Tracklet, seq: &Sequence) -> Tracklet {
        debug_assert!(a.last_frame() < b.first_frame());
        let members = a.members.iter().chain(&b.members).copied().collect();
        Tracklet::new(id, members, seq)
    }
}

pub(crate) fn mean_feature(members: &[Member], seq: &Sequence) -> Vec<f64> {
    let mut mean = vec![0.0; seq.feature_dim];
    if members.is_empty() {
        return mean;
    }
    for m in members {
        let f = &seq.detections(m.frame)[m.ordinal].feature;
        for (acc, v) in mean.iter_mut().zip(f) {
            *acc += v;
        }
    }
    let n = members.len() as f64;
    mean.iter_mut().for_each(|v| *v /= n);
    mean
}

fn velocity(members: &[Member]) -> (f64, f64) {
    if members.len() < 2 {
        return (0.0, 0.0);
    }
    let tail = &members[members.len().saturating_sub(VELOCITY_WINDOW)..];
    let (a, b) = (tail[0], tail[tail.len() - 1]);
    let dt = (b.frame - a.frame) as f64;
    let (ax, ay) = a.bbox.center();
    let (bx, by) = b.bbox.center();
    ((bx - ax) / dt, (by - ay) / dt)
}

/// Link detections frame to frame inside `segment`: Hungarian matching on
/// IoU between consecutive frames, accepting pairs with IoU ≥
/// `iou_threshold`. Unmatched detections open new tracklets; a tracklet ends
/// when it finds no match in the next frame. Ids start at `first_id`.
pub fn build_tracklets(
    seq: &Sequence,
    segment: &Segment,
    iou_threshold: f64,
    first_id: usize,
) -> Vec<Tracklet> {
    let mut finished: Vec<Vec<Member>> = Vec::new();
    let mut active: Vec<Vec<Member>> = Vec::new();
    for t in segment.first..=segment.last.min(seq.length) {
        let dets = seq.detections(t);
        let weights: Vec<Vec<Option<f64>>> = active
            .iter()
            .map(|tr| {
                let last = tr[tr.len() - 1].bbox;
                dets.iter()
                    .map(|d| {
                        let v = last.iou(&d.bbox);
                        (v > 0.0 && v >= iou_threshold).then_some(v)
                    })
                    .collect()
            })
            .collect();
        let matches = max_weight_matching(&weights);
        let mut det_taken = vec![false; dets.len()];
        let mut next_active = Vec::new();
        let mut matched_track = vec![None; active.len()];
        for (ti, di) in matches {
            matched_track[ti] = Some(di);
            det_taken[di] = true;
        }
        for (ti, mut tr) in active.into_iter().enumerate() {
            match matched_track[ti] {
                Some(di) => {
                    tr.push(Member {
                        frame: t,
                        ordinal: di,
                        bbox: dets[di].bbox,
                    });
                    next_active.push(tr);
                }
                None => finished.push(tr),
            }
        }
        for (di, d) in dets.iter().enumerate() {
            if !det_taken[di] {
                next_active.push(vec![Member {
                    frame: t,
                    ordinal: di,
                    bbox: d.bbox,
                }]);
            }
        }
        active = next_active;
    }
    finished.extend(active);
    finished.sort_by_key(|m| (m[0].frame, m[0].ordinal));
    finished
        .into_iter()
        .enumerate()
        .map(|(k, m)| Tracklet::new(first_id + k, m, seq))
        .collect()
}
