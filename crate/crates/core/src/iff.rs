//! Intra-frame feature fusion.
//!
//! Each detection's appearance feature is blended with information from its
//! spatially closest detections in the same frame, either by a plain average
//! of the neighbours or by one graph-convolution layer over the frame's
//! nearest-neighbour graph:
//!
//! ```text
//! average: f_i ← a·f_i + (1 − a)·mean(f_j, j ∈ N_m(i))
//! gcn:     F   ← a·F   + (1 − a)·σ(S F W),  S = D̂^{-1/2}(A + I)D̂^{-1/2}
//! ```
//!
//! `A` is the symmetrized m-nearest-neighbour adjacency (box centers,
//! Euclidean distance). Fused features are not re-normalized.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data_io::{BBox, Sequence};
use crate::error::{Error, Result};

/// Default fusion weight of a detection's own feature.
pub const DEFAULT_A: f64 = 0.4;
pub const DEFAULT_M: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    Average,
    Gcn,
}

impl FromStr for FusionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(FusionMode::Average),
            "gcn" => Ok(FusionMode::Gcn),
            _ => Err(Error::Config(format!("unknown fusion mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Weight of the detection's own feature; the neighbours get `1 - a`.
    pub a: f64,
    /// Neighbour count.
    pub m: usize,
    pub mode: FusionMode,
}

impl FusionConfig {
    pub fn new(a: f64, m: usize, mode: FusionMode) -> Self {
        Self { a, m, mode }
    }

    pub fn b(&self) -> f64 {
        1.0 - self.a
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.a) {
            return Err(Error::Config(format!("fusion weight a={} outside [0,1]", self.a)));
        }
        if self.m == 0 {
            return Err(Error::Config("neighbour count m must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self::new(DEFAULT_A, DEFAULT_M, FusionMode::Gcn)
    }
}

/// Nearest-neighbour graph over the detections of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGraph {
    pub centers: Vec<(f64, f64)>,
    /// Directed neighbour lists, closest first.
    pub neighbors: Vec<Vec<usize>>,
    pub m: usize,
}

impl FrameGraph {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Symmetrized adjacency (0/1, zero diagonal).
    pub fn adjacency(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut a = DMatrix::zeros(n, n);
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &j in ns {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
        a
    }

    /// `D̂^{-1/2}(A + I)D̂^{-1/2}`.
    pub fn normalized_adjacency(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut s = self.adjacency() + DMatrix::identity(n, n);
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|i| 1.0 / s.row(i).sum().sqrt())
            .collect();
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
            }
        }
        s
    }
}

/// Connect each box to its `m` closest others by center distance; ties go to
/// the smaller index.
pub fn build_frame_graph(boxes: &[BBox], m: usize) -> FrameGraph {
    let centers: Vec<(f64, f64)> = boxes.iter().map(BBox::center).collect();
    let k = m.min(centers.len().saturating_sub(1));
    let neighbors = centers
        .iter()
        .enumerate()
        .map(|(i, &(xi, yi))| {
            let mut others: Vec<(f64, usize)> = centers
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, &(xj, yj))| (((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt(), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();
    FrameGraph { centers, neighbors, m }
}

/// `a·f + (1 − a)·mean(neighbours)`; `f` unchanged without neighbours.
pub fn average_fusion(f: &[f64], neighbor_feats: &[&[f64]], cfg: &FusionConfig) -> Result<Vec<f64>> {
    for nf in neighbor_feats {
        if nf.len() != f.len() {
            return Err(Error::dim(f.len(), nf.len()));
        }
    }
    if neighbor_feats.is_empty() || cfg.b() == 0.0 {
        return Ok(f.to_vec());
    }
    let k = neighbor_feats.len() as f64;
    Ok((0..f.len())
        .map(|d| {
            let mean = neighbor_feats.iter().map(|nf| nf[d]).sum::<f64>() / k;
            cfg.a * f[d] + cfg.b() * mean
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

/// One graph-convolution layer with a square weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayer {
    pub weight: DMatrix<f64>,
    pub activation: Activation,
}

impl GcnLayer {
    pub fn identity(dim: usize) -> Self {
        Self {
            weight: DMatrix::identity(dim, dim),
            activation: Activation::Identity,
        }
    }

    /// Identity plus uniform noise in `[-0.01, 0.01]`.
    pub fn init(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = DMatrix::identity(dim, dim);
        for v in w.iter_mut() {
            *v += rng.random_range(-0.01..=0.01);
        }
        Self {
            weight: w,
            activation: Activation::Identity,
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.nrows()
    }

    fn activate(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        match self.activation {
            Activation::Identity => z.clone(),
            Activation::Relu => z.map(|v| v.max(0.0)),
        }
    }

    fn derivative(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        match self.activation {
            Activation::Identity => DMatrix::from_element(z.nrows(), z.ncols(), 1.0),
            Activation::Relu => z.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
        }
    }

    /// `D=<int>` header followed by `D` rows; a `# activation=relu` line
    /// selects the rectifier.
    pub fn to_file_string(&self) -> String {
        let d = self.dim();
        let mut out = format!("D={d}\n");
        if self.activation == Activation::Relu {
            out.push_str("# activation=relu\n");
        }
        for i in 0..d {
            let row: Vec<String> = (0..d).map(|j| self.weight[(i, j)].to_string()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut activation = Activation::Identity;
        let mut dim = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let l = raw.trim();
            if l.is_empty() {
                continue;
            }
            if let Some(c) = l.strip_prefix('#') {
                if c.trim() == "activation=relu" {
                    activation = Activation::Relu;
                }
                continue;
            }
            if dim.is_none() {
                let d = l
                    .strip_prefix("D=")
                    .and_then(|d| d.trim().parse::<usize>().ok())
                    .filter(|&d| d > 0)
                    .ok_or_else(|| Error::parse(line, format!("bad header '{l}'")))?;
                dim = Some(d);
                continue;
            }
            let row = l
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(line, format!("bad weight '{s}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != dim.unwrap_or(0) {
                return Err(Error::parse(line, format!("expected {} weights", dim.unwrap_or(0))));
            }
            rows.push(row);
        }
        let d = dim.ok_or_else(|| Error::parse(1, "missing D=<int> header"))?;
        if rows.len() != d {
            return Err(Error::Validation(format!("expected {d} weight rows, found {}", rows.len())));
        }
        Ok(Self {
            weight: DMatrix::from_fn(d, d, |i, j| rows[i][j]),
            activation,
        })
    }
}

fn check_shapes(h: &DMatrix<f64>, graph: &FrameGraph, layer: &GcnLayer) -> Result<()> {
    if h.nrows() != graph.len() {
        return Err(Error::dim(graph.len(), h.nrows()));
    }
    if h.ncols() != layer.dim() || layer.weight.ncols() != layer.dim() {
        return Err(Error::dim(layer.dim(), h.ncols()));
    }
    Ok(())
}

/// `σ(S H W)`.
pub fn gcn_layer(h: &DMatrix<f64>, graph: &FrameGraph, layer: &GcnLayer) -> Result<DMatrix<f64>> {
    check_shapes(h, graph, layer)?;
    let z = graph.normalized_adjacency() * h * &layer.weight;
    Ok(layer.activate(&z))
}

/// `a·H + (1 − a)·gcn_layer(H)`.
pub fn gcn_fusion(
    graph: &FrameGraph,
    h: &DMatrix<f64>,
    layer: &GcnLayer,
    cfg: &FusionConfig,
) -> Result<DMatrix<f64>> {
    check_shapes(h, graph, layer)?;
    if cfg.b() == 0.0 {
        return Ok(h.clone());
    }
    let conv = gcn_layer(h, graph, layer)?;
    Ok(h * cfg.a + conv * cfg.b())
}

/// Gradients of `⟨upstream, gcn_fusion(H)⟩` with respect to `W` and `H`.
pub fn gcn_gradients(
    h: &DMatrix<f64>,
    graph: &FrameGraph,
    layer: &GcnLayer,
    cfg: &FusionConfig,
    upstream: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_shapes(h, graph, layer)?;
    if upstream.shape() != h.shape() {
        return Err(Error::dim(h.len(), upstream.len()));
    }
    let s = graph.normalized_adjacency();
    let sh = &s * h;
    let z = &sh * &layer.weight;
    let gz = upstream.component_mul(&layer.derivative(&z)) * cfg.b();
    let grad_w = sh.transpose() * &gz;
    let grad_h = upstream * cfg.a + s.transpose() * gz * layer.weight.transpose();
    Ok((grad_w, grad_h))
}

/// Per-frame graph and stacked features, cached for repeated fusion passes.
#[derive(Debug, Clone)]
pub struct FrameBatch {
    pub frame: u32,
    pub graph: FrameGraph,
    pub features: DMatrix<f64>,
}

/// Build one batch per non-empty frame.
pub fn frame_batches(seq: &Sequence, m: usize) -> Result<Vec<FrameBatch>> {
    seq.frames
        .iter()
        .filter(|(_, d)| !d.is_empty())
        .map(|(&frame, dets)| {
            let boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
            let dim = seq.feature_dim;
            for d in dets {
                if d.feature.len() != dim {
                    return Err(Error::dim(dim, d.feature.len()));
                }
            }
            Ok(FrameBatch {
                frame,
                graph: build_frame_graph(&boxes, m),
                features: DMatrix::from_fn(dets.len(), dim, |i, j| dets[i].feature[j]),
            })
        })
        .collect()
}

/// Fused features of one batch.
pub fn fuse_batch(batch: &FrameBatch, cfg: &FusionConfig, layer: Option<&GcnLayer>) -> Result<DMatrix<f64>> {
    match cfg.mode {
        FusionMode::Gcn => {
            let default;
            let layer = match layer {
                Some(l) => l,
                None => {
                    default = GcnLayer::identity(batch.features.ncols());
                    &default
                }
            };
            gcn_fusion(&batch.graph, &batch.features, layer, cfg)
        }
        FusionMode::Average => {
            let rows: Vec<Vec<f64>> = (0..batch.features.nrows())
                .map(|i| batch.features.row(i).iter().copied().collect())
                .collect();
            let mut out = batch.features.clone();
            for (i, ns) in batch.graph.neighbors.iter().enumerate() {
                let nf: Vec<&[f64]> = ns.iter().map(|&j| rows[j].as_slice()).collect();
                let fused = average_fusion(&rows[i], &nf, cfg)?;
                for (j, v) in fused.into_iter().enumerate() {
                    out[(i, j)] = v;
                }
            }
            Ok(out)
        }
    }
}

/// Copy of `seq` with every detection feature replaced by its fused version.
pub fn fuse_sequence(seq: &Sequence, cfg: &FusionConfig, layer: Option<&GcnLayer>) -> Result<Sequence> {
    cfg.validate()?;
    if let Some(l) = layer {
        if l.dim() != seq.feature_dim {
            return Err(Error::dim(seq.feature_dim, l.dim()));
        }
    }
    let mut out = seq.clone();
    let fused: BTreeMap<u32, DMatrix<f64>> = frame_batches(seq, cfg.m)?
        .iter()
        .map(|b| fuse_batch(b, cfg, layer).map(|f| (b.frame, f)))
        .collect::<Result<_>>()?;
    for (frame, dets) in out.frames.iter_mut() {
        if let Some(f) = fused.get(frame) {
            for (i, d) in dets.iter_mut().enumerate() {
                d.feature = f.row(i).iter().copied().collect();
            }
        }
    }
    Ok(out)
}
