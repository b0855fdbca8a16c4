//! MOT-Challenge style text formats: detections, ground truth, results and
//! per-detection appearance features.
//!
//! Within a frame, detections are kept in a canonical order (by box, then
//! confidence, then id). The position in that order is the detection's
//! *ordinal*, which is the key used by feature files. Writers emit detections
//! in canonical order, so ordinals survive a write/parse cycle.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Axis-aligned box in pixels: `(left, top, width, height)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        Self {
            left,
            top,
            width,
            height,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.left + self.width / 2.0, self.top + self.height / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Box of the same size whose center is `(cx, cy)`.
    pub fn with_center(&self, cx: f64, cy: f64) -> Self {
        Self::new(cx - self.width / 2.0, cy - self.height / 2.0, self.width, self.height)
    }

    /// Intersection over union.
    pub fn iou(&self, other: &BBox) -> f64 {
        let x1 = self.left.max(other.left);
        let y1 = self.top.max(other.top);
        let x2 = (self.left + self.width).min(other.left + other.width);
        let y2 = (self.top + self.height).min(other.top + other.height);
        let inter = (x2 - x1).max(0.0) * (y2 - y1).max(0.0);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            (inter / union).clamp(0.0, 1.0)
        }
    }

    fn validate(&self, line: usize) -> Result<()> {
        let finite = [self.left, self.top, self.width, self.height]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::parse(line, "non-finite box coordinate"));
        }
        if self.width <= 0.0 || self.height <= 0.0 {
            return Err(Error::Validation(format!(
                "line {line}: box width and height must be positive (got {}x{})",
                self.width, self.height
            )));
        }
        Ok(())
    }

    fn canonical_cmp(&self, other: &BBox) -> Ordering {
        self.left
            .total_cmp(&other.left)
            .then(self.top.total_cmp(&other.top))
            .then(self.width.total_cmp(&other.width))
            .then(self.height.total_cmp(&other.height))
    }
}

/// One box in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// 1-based frame index.
    pub frame: u32,
    /// Identity from the file, `-1` when unassigned.
    pub det_id: i64,
    pub bbox: BBox,
    pub confidence: f64,
    /// Appearance feature; empty until features are attached.
    pub feature: Vec<f64>,
}

impl Detection {
    fn canonical_cmp(&self, other: &Detection) -> Ordering {
        self.bbox
            .canonical_cmp(&other.bbox)
            .then(self.confidence.total_cmp(&other.confidence))
            .then(self.det_id.cmp(&other.det_id))
    }
}

/// All detections of a video, grouped by frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sequence {
    pub name: String,
    /// Total number of frames `LN`.
    pub length: u32,
    /// Feature dimension `D`; zero when no features are attached.
    pub feature_dim: usize,
    /// Frame index → detections in canonical order. Frames without
    /// detections may be absent.
    pub frames: BTreeMap<u32, Vec<Detection>>,
}

impl Sequence {
    /// Detections of frame `t`, empty when the frame has none.
    pub fn detections(&self, t: u32) -> &[Detection] {
        self.frames.get(&t).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn num_detections(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    /// Group detections by frame in canonical order. Every detection must
    /// lie in `1..=length` and carry a `feature_dim`-long feature.
    pub fn from_detections(
        name: impl Into<String>,
        length: u32,
        feature_dim: usize,
        detections: impl IntoIterator<Item = Detection>,
    ) -> Result<Self> {
        let mut frames: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
        for d in detections {
            if d.frame < 1 || d.frame > length {
                return Err(Error::Index {
                    index: d.frame as i64,
                    lo: 1,
                    hi: length as i64,
                });
            }
            if d.feature.len() != feature_dim {
                return Err(Error::dim(feature_dim, d.feature.len()));
            }
            frames.entry(d.frame).or_default().push(d);
        }
        for dets in frames.values_mut() {
            dets.sort_by(Detection::canonical_cmp);
        }
        Ok(Self {
            name: name.into(),
            length,
            feature_dim,
            frames,
        })
    }

    /// Override the sequence length (must cover every frame present).
    pub fn with_length(mut self, length: u32) -> Result<Self> {
        if let Some((&last, _)) = self.frames.iter().next_back() {
            if last > length {
                return Err(Error::Validation(format!(
                    "length {length} is shorter than last frame {last}"
                )));
            }
        }
        self.length = length;
        Ok(self)
    }

    /// Bind features to detections by within-frame ordinal.
    ///
    /// Every detection must receive exactly one feature, and every feature
    /// must refer to an existing detection.
    pub fn attach_features(&mut self, feats: &FeatureTable) -> Result<()> {
        for (&(frame, ordinal), _) in feats.rows.iter() {
            if self.detections(frame).len() <= ordinal {
                return Err(Error::Validation(format!(
                    "feature row ({frame},{ordinal}) has no matching detection"
                )));
            }
        }
        for (&frame, dets) in self.frames.iter_mut() {
            for (ordinal, det) in dets.iter_mut().enumerate() {
                let f = feats.rows.get(&(frame, ordinal)).ok_or_else(|| {
                    Error::Validation(format!(
                        "detection ({frame},{ordinal}) has no feature row"
                    ))
                })?;
                det.feature = f.clone();
            }
        }
        self.feature_dim = feats.dim;
        Ok(())
    }

    /// Feature rows of every detection, keyed by (frame, ordinal).
    pub fn feature_table(&self) -> FeatureTable {
        let mut rows = BTreeMap::new();
        for (&frame, dets) in &self.frames {
            for (ordinal, det) in dets.iter().enumerate() {
                rows.insert((frame, ordinal), det.feature.clone());
            }
        }
        FeatureTable {
            dim: self.feature_dim,
            rows,
        }
    }
}

/// Pooled feature of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeature {
    pub frame: u32,
    pub vector: Vec<f64>,
}

/// Parsed feature file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub dim: usize,
    pub rows: BTreeMap<(u32, usize), Vec<f64>>,
}

/// Trajectories keyed by track id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackSet {
    tracks: BTreeMap<i64, Vec<(u32, BBox)>>,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from unordered `(id, frame, box)` rows.
    pub fn from_rows(rows: impl IntoIterator<Item = (i64, u32, BBox)>) -> Result<Self> {
        let mut tracks: BTreeMap<i64, Vec<(u32, BBox)>> = BTreeMap::new();
        for (id, frame, b) in rows {
            tracks.entry(id).or_default().push((frame, b));
        }
        for (id, boxes) in tracks.iter_mut() {
            boxes.sort_by_key(|(f, _)| *f);
            if boxes.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Validation(format!(
                    "track {id} has two boxes in one frame"
                )));
            }
        }
        Ok(Self { tracks })
    }

    /// Append a box; frames must strictly increase within a track.
    pub fn push(&mut self, id: i64, frame: u32, b: BBox) -> Result<()> {
        let track = self.tracks.entry(id).or_default();
        if let Some(&(last, _)) = track.last() {
            if frame <= last {
                return Err(Error::Validation(format!(
                    "track {id}: frame {frame} does not follow {last}"
                )));
            }
        }
        track.push((frame, b));
        Ok(())
    }

    pub fn tracks(&self) -> &BTreeMap<i64, Vec<(u32, BBox)>> {
        &self.tracks
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn num_boxes(&self) -> usize {
        self.tracks.values().map(Vec::len).sum()
    }

    /// Frame → list of (id, box), ids ascending.
    pub fn by_frame(&self) -> BTreeMap<u32, Vec<(i64, BBox)>> {
        let mut out: BTreeMap<u32, Vec<(i64, BBox)>> = BTreeMap::new();
        for (&id, boxes) in &self.tracks {
            for &(f, b) in boxes {
                out.entry(f).or_default().push((id, b));
            }
        }
        out
    }

    /// Largest frame index present, 0 when empty.
    pub fn last_frame(&self) -> u32 {
        self.tracks
            .values()
            .filter_map(|t| t.last().map(|(f, _)| *f))
            .max()
            .unwrap_or(0)
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::parse(line, format!("invalid {what} '{s}'")))
}

fn parse_int(s: &str, line: usize, what: &str) -> Result<i64> {
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    let v = parse_f64(s, line, what)?;
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(Error::parse(line, format!("{what} '{s}' is not an integer")));
    }
    Ok(v as i64)
}

fn parse_frame(s: &str, line: usize) -> Result<u32> {
    let v = parse_int(s, line, "frame")?;
    if v < 1 || v > u32::MAX as i64 {
        return Err(Error::parse(line, format!("frame index {v} must be >= 1")));
    }
    Ok(v as u32)
}

struct MotRow {
    frame: u32,
    id: i64,
    bbox: BBox,
    conf: f64,
    extra: Vec<String>,
}

fn parse_mot_rows(text: &str) -> Result<Vec<MotRow>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let f = split_fields(trimmed);
        if f.len() < 7 {
            return Err(Error::parse(
                line,
                format!("expected at least 7 fields, found {}", f.len()),
            ));
        }
        let frame = parse_frame(f[0], line)?;
        let id = parse_int(f[1], line, "id")?;
        let bbox = BBox::new(
            parse_f64(f[2], line, "left")?,
            parse_f64(f[3], line, "top")?,
            parse_f64(f[4], line, "width")?,
            parse_f64(f[5], line, "height")?,
        );
        bbox.validate(line)?;
        let conf = parse_f64(f[6], line, "confidence")?;
        out.push(MotRow {
            frame,
            id,
            bbox,
            conf,
            extra: f[7..].iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(out)
}

/// Parse a detection file (`frame,id,left,top,width,height,conf[,x,y,z]`).
///
/// The sequence length is the largest frame index present; use
/// [`Sequence::with_length`] to override it.
pub fn parse_detections(text: &str) -> Result<Sequence> {
    let rows = parse_mot_rows(text)?;
    let mut frames: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for r in rows {
        if !(0.0..=1.0).contains(&r.conf) {
            return Err(Error::Validation(format!(
                "frame {}: confidence {} outside [0,1]",
                r.frame, r.conf
            )));
        }
        frames.entry(r.frame).or_default().push(Detection {
            frame: r.frame,
            det_id: r.id,
            bbox: r.bbox,
            confidence: r.conf,
            feature: Vec::new(),
        });
    }
    for dets in frames.values_mut() {
        dets.sort_by(Detection::canonical_cmp);
    }
    let length = frames.keys().next_back().copied().unwrap_or(0);
    Ok(Sequence {
        name: String::new(),
        length,
        feature_dim: 0,
        frames,
    })
}

/// Serialize detections in canonical order.
pub fn write_detections(seq: &Sequence) -> String {
    let mut out = String::new();
    for (frame, dets) in &seq.frames {
        for d in dets {
            let b = d.bbox;
            let _ = writeln!(
                out,
                "{frame},{},{},{},{},{},{},-1,-1,-1",
                d.det_id, b.left, b.top, b.width, b.height, d.confidence
            );
        }
    }
    out
}

/// Parse a ground-truth file. Rows carrying `flag` and `class` columns are
/// kept only when both equal 1; shorter rows are always kept.
pub fn parse_ground_truth(text: &str) -> Result<TrackSet> {
    let rows = parse_mot_rows(text)?;
    let mut kept = Vec::with_capacity(rows.len());
    for r in rows {
        // The 7th column is the consider flag in ground-truth files.
        let flag_ok = r.conf == 1.0;
        let class_ok = match r.extra.first() {
            Some(c) => c.parse::<f64>().map(|c| c == 1.0).unwrap_or(false),
            None => true,
        };
        if flag_ok && class_ok {
            kept.push((r.id, r.frame, r.bbox));
        }
    }
    TrackSet::from_rows(kept)
}

/// Serialize ground truth as `frame,id,left,top,width,height,1,1,1`.
pub fn write_ground_truth(tracks: &TrackSet) -> String {
    let mut out = String::new();
    for (frame, rows) in tracks.by_frame() {
        for (id, b) in rows {
            let _ = writeln!(
                out,
                "{frame},{id},{},{},{},{},1,1,1",
                b.left, b.top, b.width, b.height
            );
        }
    }
    out
}

/// Parse a result file into tracks (ids as written).
pub fn parse_results(text: &str) -> Result<TrackSet> {
    let rows = parse_mot_rows(text)?;
    TrackSet::from_rows(rows.into_iter().map(|r| (r.id, r.frame, r.bbox)))
}

/// Emit `frame,id,left,top,width,height,conf,-1,-1,-1` lines sorted by frame
/// then id. Confidence is always written as `1`.
pub fn write_results(tracks: &TrackSet) -> String {
    let mut out = String::new();
    for (frame, rows) in tracks.by_frame() {
        for (id, b) in rows {
            let _ = writeln!(
                out,
                "{frame},{id},{},{},{},{},1,-1,-1,-1",
                b.left, b.top, b.width, b.height
            );
        }
    }
    out
}

/// Parse a feature file: a `D=<int>` header then `frame,ordinal,v0..v{D-1}`.
pub fn parse_feature_file(text: &str) -> Result<FeatureTable> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing D=<int> header"))?;
    let dim = header
        .strip_prefix("D=")
        .and_then(|d| d.trim().parse::<usize>().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::parse(hline, format!("bad header '{header}'")))?;

    let mut rows = BTreeMap::new();
    for (line, l) in lines {
        let f = split_fields(l);
        if f.len() != dim + 2 {
            return Err(Error::parse(
                line,
                format!("expected {} values, found {}", dim, f.len().saturating_sub(2)),
            ));
        }
        let frame = parse_frame(f[0], line)?;
        let ordinal = parse_int(f[1], line, "ordinal")?;
        if ordinal < 0 {
            return Err(Error::parse(line, "negative ordinal"));
        }
        let v = f[2..]
            .iter()
            .map(|s| parse_f64(s, line, "feature value"))
            .collect::<Result<Vec<_>>>()?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::parse(line, "non-finite feature value"));
        }
        if rows.insert((frame, ordinal as usize), v).is_some() {
            return Err(Error::Validation(format!(
                "line {line}: duplicate feature row ({frame},{ordinal})"
            )));
        }
    }
    Ok(FeatureTable { dim, rows })
}

pub fn write_feature_file(table: &FeatureTable) -> String {
    let mut out = format!("D={}\n", table.dim);
    for (&(frame, ordinal), v) in &table.rows {
        let _ = write!(out, "{frame},{ordinal}");
        for x in v {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

/// L2-normalized mean of the detection features in frame `t`; the zero
/// vector when the frame is empty or the mean vanishes.
pub fn frame_feature(seq: &Sequence, t: u32) -> Result<FrameFeature> {
    if t < 1 || t > seq.length {
        return Err(Error::Index {
            index: t as i64,
            lo: 1,
            hi: seq.length as i64,
        });
    }
    let dets = seq.detections(t);
    let mut mean = vec![0.0; seq.feature_dim];
    for d in dets {
        if d.feature.len() != seq.feature_dim {
            return Err(Error::dim(seq.feature_dim, d.feature.len()));
        }
        for (m, x) in mean.iter_mut().zip(&d.feature) {
            *m += x;
        }
    }
    if !dets.is_empty() {
        let n = dets.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            mean.iter_mut().for_each(|m| *m /= norm);
        }
    }
    Ok(FrameFeature {
        frame: t,
        vector: mean,
    })
}
