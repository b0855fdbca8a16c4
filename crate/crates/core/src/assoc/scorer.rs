use super::graph::LevelGraph;
use crate::{Error, Result};

/// Feature weights plus bias.
pub const NUM_WEIGHTS: usize = 5;

/// Probabilities handed to [`focal_loss`] by callers are clamped to
/// `[PROB_CLAMP, 1 − PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelWeights {
    pub level: usize,
    /// `[w_app, w_gap, w_dist, w_iou, bias]`.
    pub weights: [f64; NUM_WEIGHTS],
    pub frozen: bool,
}

/// Linear edge classifier with one weight set per hierarchy level.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeScorer {
    levels: Vec<LevelWeights>,
}

impl EdgeScorer {
    /// Levels must be distinct, ≥ 1 and finite; they are stored sorted.
    pub fn new(mut levels: Vec<LevelWeights>) -> Result<Self> {
        levels.sort_by_key(|l| l.level);
        for (k, l) in levels.iter().enumerate() {
            if l.level == 0 {
                return Err(Error::Config("scorer levels start at 1".into()));
            }
            if k > 0 && levels[k - 1].level == l.level {
                return Err(Error::Config(format!("duplicate scorer level {}", l.level)));
            }
            if l.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::Config(format!("non-finite weight at level {}", l.level)));
            }
        }
        Ok(Self { levels })
    }

    /// Levels `1..=num_levels` sharing `weights`; only level 1 starts unfrozen.
    pub fn uniform(num_levels: usize, weights: [f64; NUM_WEIGHTS]) -> Self {
        Self {
            levels: (1..=num_levels)
                .map(|level| LevelWeights {
                    level,
                    weights,
                    frozen: level > 1,
                })
                .collect(),
        }
    }

    pub fn zeros(num_levels: usize) -> Self {
        Self::uniform(num_levels, [0.0; NUM_WEIGHTS])
    }

    /// Hand-set weights favouring similar, nearby, well-predicted links.
    /// Used when no trained scorer is supplied.
    pub fn heuristic(num_levels: usize) -> Self {
        Self::uniform(num_levels, [8.0, -2.0, -4.0, 2.0, -4.0])
    }

    pub fn levels(&self) -> &[LevelWeights] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    fn position(&self, level: usize) -> Result<usize> {
        self.levels
            .binary_search_by_key(&level, |l| l.level)
            .map_err(|_| Error::Config(format!("scorer has no weights for level {level}")))
    }

    pub fn weights(&self, level: usize) -> Result<&[f64; NUM_WEIGHTS]> {
        Ok(&self.levels[self.position(level)?].weights)
    }

    pub fn weights_mut(&mut self, level: usize) -> Result<&mut [f64; NUM_WEIGHTS]> {
        let k = self.position(level)?;
        Ok(&mut self.levels[k].weights)
    }

    pub fn is_frozen(&self, level: usize) -> Result<bool> {
        Ok(self.levels[self.position(level)?].frozen)
    }

    /// Unfreeze exactly the levels `≤ depth`.
    pub fn set_depth(&mut self, depth: usize) {
        for l in &mut self.levels {
            l.frozen = l.level > depth;
        }
    }

    pub fn logit(&self, level: usize, x: &[f64; 4]) -> Result<f64> {
        Ok(linear(self.weights(level)?, x))
    }

    pub fn to_file_string(&self) -> String {
        self.levels
            .iter()
            .map(|l| {
                let w = l.weights;
                format!("{},{},{},{},{},{}\n", l.level, w[0], w[1], w[2], w[3], w[4])
            })
            .collect()
    }

    /// Parse `level,w_app,w_gap,w_dist,w_iou,bias` lines; blank lines and
    /// `#` comments are skipped. Parsed levels are all unfrozen.
    pub fn parse(text: &str) -> Result<Self> {
        let mut levels = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != NUM_WEIGHTS + 1 {
                return Err(Error::parse(k + 1, format!("expected 6 fields, got {}", fields.len())));
            }
            let level = fields[0]
                .parse::<usize>()
                .map_err(|e| Error::parse(k + 1, format!("level: {e}")))?;
            let mut weights = [0.0; NUM_WEIGHTS];
            for (w, f) in weights.iter_mut().zip(&fields[1..]) {
                *w = f.parse::<f64>().map_err(|e| Error::parse(k + 1, format!("weight: {e}")))?;
            }
            levels.push(LevelWeights {
                level,
                weights,
                frozen: false,
            });
        }
        if levels.is_empty() {
            return Err(Error::Validation("scorer file has no levels".into()));
        }
        Self::new(levels)
    }
}

pub(crate) fn linear(w: &[f64; NUM_WEIGHTS], x: &[f64; 4]) -> f64 {
    w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + w[3] * x[3] + w[4]
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Link probability of every candidate edge of `graph`.
pub fn score_edges(graph: &LevelGraph, scorer: &EdgeScorer) -> Result<Vec<f64>> {
    let w = scorer.weights(graph.level)?;
    Ok((0..graph.edges.len())
        .map(|e| sigmoid(linear(w, &graph.inputs(e))))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalLossConfig {
    /// Focusing exponent γ ≥ 0.
    pub gamma: f64,
    /// Positive-class weight in (0, 1).
    pub alpha: f64,
}

impl Default for FocalLossConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            alpha: 0.25,
        }
    }
}

impl FocalLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be ≥ 0, got {}", self.gamma)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        Ok(())
    }

    fn alpha_t(&self, y: bool) -> f64 {
        if y {
            self.alpha
        } else {
            1.0 - self.alpha
        }
    }
}

/// `−α_t (1 − p_t)^γ log p_t`.
pub fn focal_loss(p: f64, y: bool, cfg: &FocalLossConfig) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} outside (0,1)")));
    }
    let pt = if y { p } else { 1.0 - p };
    Ok(-cfg.alpha_t(y) * (1.0 - pt).powf(cfg.gamma) * pt.ln())
}

/// Focal loss of the logit `z` and its derivative with respect to `z`,
/// evaluated without forming the probability first.
pub fn focal_loss_logit(z: f64, y: bool, cfg: &FocalLossConfig) -> (f64, f64) {
    let zt = if y { z } else { -z };
    let log_pt = log_sigmoid(zt);
    let pt = sigmoid(zt);
    let qt = sigmoid(-zt);
    let at = cfg.alpha_t(y);
    let mod_ = qt.powf(cfg.gamma);
    let loss = -at * mod_ * log_pt;
    let dzt = at * (cfg.gamma * pt * mod_ * log_pt - mod_ * qt);
    (loss, if y { dzt } else { -dzt })
}
