//! Key-frame extraction: a tabular Q-learning agent that splits a sequence
//! into contiguous, variable-length segments whose boundary frames differ in
//! appearance.
//!
//! # Environment
//!
//! The state is the cut position `c`, the first frame of the segment being
//! placed. An action is a segment length `L ∈ [min_len, max_len]`; the
//! segment becomes `[c, c + L - 1]`, clamped at the end of the sequence. One
//! cut fixes both the next segment's first frame (`c + L`) and the current
//! segment's last frame (`c - 1 + L`), so the agent makes a single choice per
//! step from the sum of the first-frame and last-frame tables.
//!
//! Each step yields two reward halves:
//!
//! * `κ_a`: dissimilarity between this segment's first frame and the next
//!   segment's first frame (zero on the last step),
//! * `κ_b`: dissimilarity between the previous segment's last frame and this
//!   segment's last frame (zero on the first step),
//!
//! each `(1 - cos)·δ + ξ/2`. Summed over an episode they equal the sum of the
//! per-transition reward over all consecutive segment pairs. The episode
//! score is that sum divided by the number of segments.
//!
//! Because the score is a ratio, each table is trained on its reward half
//! minus half of the best score found so far. The discounted return of a
//! tiling then approximates `R - κ_best · K`, which is non-positive for every
//! tiling and zero exactly at the best-ratio ones, so the greedy policy
//! converges towards the best-scoring segmentation instead of towards the
//! one with the most transitions.

mod oracle;
mod qtable;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data_io::{frame_feature, Sequence};
use crate::error::{Error, Result};

pub use oracle::{enumerate_segmentations, oracle_best_segmentation, MAX_ORACLE_LEN};
pub use qtable::{select_action, update_q, QTable, QTablePair, QUpdateTrace};

/// Hyperparameters of the key-frame agent.
#[derive(Debug, Clone, PartialEq)]
pub struct QConfig {
    /// Exploration rate ε.
    pub epsilon: f64,
    /// Learning rate q.
    pub learn_rate: f64,
    /// Discount factor α.
    pub discount: f64,
    /// Reward scale δ.
    pub delta: f64,
    /// Reward offset ξ per transition.
    pub xi: f64,
    /// Shortest segment `u`.
    pub min_len: u32,
    /// Longest segment `n`.
    pub max_len: u32,
    /// Explicit episode count; `None` uses [`QConfig::default_episodes`].
    pub episodes: Option<u64>,
    pub episode_cap: u64,
    pub seed: u64,
}

impl QConfig {
    pub fn new(min_len: u32, max_len: u32) -> Self {
        Self {
            epsilon: 0.1,
            learn_rate: 0.1,
            discount: 0.99,
            delta: 1.0,
            xi: 0.0,
            min_len,
            max_len,
            episodes: None,
            episode_cap: 50_000,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_len < 1 || self.max_len < self.min_len {
            return Err(Error::Config(format!(
                "segment lengths need 1 <= u <= n (got u={}, n={})",
                self.min_len, self.max_len
            )));
        }
        // ε = 0 is accepted for pure exploitation.
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon {} outside [0,1]", self.epsilon)));
        }
        if !(self.learn_rate > 0.0 && self.learn_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning rate {} outside (0,1]",
                self.learn_rate
            )));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config(format!("discount {} outside [0,1)", self.discount)));
        }
        if !self.delta.is_finite() || !self.xi.is_finite() {
            return Err(Error::Config("delta and xi must be finite".into()));
        }
        if self.episode_cap == 0 || self.episodes == Some(0) {
            return Err(Error::Config("episode count must be positive".into()));
        }
        Ok(())
    }

    /// `M = (LN - u)(LN - n)·100`, clamped to `[1, episode_cap]`.
    pub fn default_episodes(&self, length: u32) -> u64 {
        let ln = length as i128;
        let m = (ln - self.min_len as i128) * (ln - self.max_len as i128) * 100;
        m.clamp(1, self.episode_cap as i128) as u64
    }

    pub fn episodes_for(&self, length: u32) -> u64 {
        self.episodes.unwrap_or_else(|| self.default_episodes(length))
    }
}

impl Default for QConfig {
    fn default() -> Self {
        Self::new(2, 10)
    }
}

/// Inclusive frame range `[first, last]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segment {
    pub first: u32,
    pub last: u32,
}

impl Segment {
    pub fn new(first: u32, last: u32) -> Self {
        debug_assert!(first <= last);
        Self { first, last }
    }

    pub fn len(&self) -> u32 {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Segments tiling `[1, LN]` plus their normalized reward.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationStrategy {
    pub segments: Vec<Segment>,
    pub score: f64,
}

impl SegmentationStrategy {
    pub fn lengths(&self) -> Vec<u32> {
        self.segments.iter().map(Segment::len).collect()
    }

    /// Segments from a list of lengths starting at frame 1.
    pub fn segments_from_lengths(lengths: &[u32]) -> Vec<Segment> {
        let mut start = 1;
        lengths
            .iter()
            .map(|&l| {
                let s = Segment::new(start, start + l - 1);
                start += l;
                s
            })
            .collect()
    }

    /// Fixed-length tiling of `[1, length]`; the final segment takes the rest.
    pub fn uniform(length: u32, seg_len: u32) -> Self {
        assert!(seg_len >= 1);
        let mut segments = Vec::new();
        let mut start = 1;
        while start <= length {
            let last = (start + seg_len - 1).min(length);
            segments.push(Segment::new(start, last));
            start = last + 1;
        }
        Self {
            segments,
            score: 0.0,
        }
    }

    /// Check that the segments tile `[1, length]` exactly.
    pub fn validate_tiling(&self, length: u32) -> Result<()> {
        let mut expected = 1;
        for s in &self.segments {
            if s.first != expected || s.last < s.first {
                return Err(Error::Validation(format!(
                    "segment [{},{}] does not start at frame {expected}",
                    s.first, s.last
                )));
            }
            expected = s.last + 1;
        }
        if expected != length + 1 {
            return Err(Error::Validation(format!(
                "segments cover [1,{}] but the sequence has {length} frames",
                expected - 1
            )));
        }
        Ok(())
    }

    /// `segment_index,first_frame,last_frame` rows (1-based index) and a
    /// trailing `# kappa_sum=<score>` line.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.segments.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, s.first, s.last);
        }
        let _ = writeln!(out, "# kappa_sum={}", self.score);
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        let mut score = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let l = raw.trim();
            if l.is_empty() {
                continue;
            }
            if let Some(rest) = l.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("kappa_sum=") {
                    score = Some(v.trim().parse::<f64>().map_err(|_| {
                        Error::parse(line, format!("invalid kappa_sum '{v}'"))
                    })?);
                }
                continue;
            }
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::parse(line, "expected segment_index,first,last"));
            }
            let nums = f
                .iter()
                .map(|s| s.parse::<u32>().map_err(|_| Error::parse(line, format!("bad integer '{s}'"))))
                .collect::<Result<Vec<_>>>()?;
            if nums[0] as usize != segments.len() + 1 {
                return Err(Error::parse(line, "segment indices must be consecutive from 1"));
            }
            if nums[1] < 1 || nums[2] < nums[1] {
                return Err(Error::parse(line, "segment must satisfy 1 <= first <= last"));
            }
            segments.push(Segment::new(nums[1], nums[2]));
        }
        Ok(Self {
            segments,
            score: score.unwrap_or(0.0),
        })
    }
}

/// Cosine similarity, defined as 0 when either vector has zero norm.
pub fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dim(x.len(), y.len()));
    }
    let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        dot += a * b;
        nx += a * a;
        ny += b * b;
    }
    if nx == 0.0 || ny == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nx.sqrt() * ny.sqrt())).clamp(-1.0, 1.0))
}

/// Reward halves `(κ_a, κ_b)` of the transition `seg_i → seg_next`.
pub fn segment_reward(
    seg_i: &Segment,
    seg_next: &Segment,
    seq: &Sequence,
    cfg: &QConfig,
) -> Result<(f64, f64)> {
    let f = |t| frame_feature(seq, t).map(|f| f.vector);
    let phi_a = cosine_similarity(&f(seg_i.first)?, &f(seg_next.first)?)?;
    let phi_b = cosine_similarity(&f(seg_i.last)?, &f(seg_next.last)?)?;
    Ok((
        (1.0 - phi_a) * cfg.delta + cfg.xi / 2.0,
        (1.0 - phi_b) * cfg.delta + cfg.xi / 2.0,
    ))
}

/// Boundary rewards with frame features computed once.
///
/// Only frame pairs at distance `1..=max_len` ever appear in a reward, so
/// those similarities are cached.
#[derive(Debug, Clone)]
pub struct RewardModel {
    length: u32,
    max_len: u32,
    delta: f64,
    half_xi: f64,
    /// `sim[(t - 1) * max_len + (d - 1)] = cos(f_t, f_{t+d})`.
    sim: Vec<f64>,
}

impl RewardModel {
    pub fn new(seq: &Sequence, cfg: &QConfig) -> Result<Self> {
        let feats = (1..=seq.length)
            .map(|t| frame_feature(seq, t).map(|f| f.vector))
            .collect::<Result<Vec<_>>>()?;
        Self::from_frame_features(&feats, cfg)
    }

    /// `feats[t - 1]` is the pooled feature of frame `t`.
    pub fn from_frame_features(feats: &[Vec<f64>], cfg: &QConfig) -> Result<Self> {
        let length = feats.len() as u32;
        let n = cfg.max_len as usize;
        let mut sim = vec![0.0; feats.len() * n];
        for t in 0..feats.len() {
            for d in 1..=n {
                if t + d < feats.len() {
                    sim[t * n + d - 1] = cosine_similarity(&feats[t], &feats[t + d])?;
                }
            }
        }
        Ok(Self {
            length,
            max_len: cfg.max_len,
            delta: cfg.delta,
            half_xi: cfg.xi / 2.0,
            sim,
        })
    }

    pub fn length(&self) -> u32 {
        self.length
    }

    /// One reward half for frames `t` and `t + d`.
    fn half(&self, t: u32, d: u32) -> f64 {
        debug_assert!(d >= 1 && d <= self.max_len && t + d <= self.length);
        let phi = self.sim[(t as usize - 1) * self.max_len as usize + d as usize - 1];
        (1.0 - phi) * self.delta + self.half_xi
    }

    /// Rewards for cutting a segment of (already clamped) length `len` at
    /// cut position `cut`.
    pub fn step(&self, cut: u32, len: u32) -> (f64, f64) {
        let next = cut + len;
        let kappa_a = if next <= self.length {
            self.half(cut, len)
        } else {
            0.0
        };
        let kappa_b = if cut > 1 { self.half(cut - 1, len) } else { 0.0 };
        (kappa_a, kappa_b)
    }

    /// Normalized score of a tiling, accumulated step by step exactly as a
    /// rollout does.
    pub fn score_lengths(&self, lengths: &[u32]) -> f64 {
        if lengths.is_empty() {
            return 0.0;
        }
        let mut cut = 1;
        let mut sum = 0.0;
        for &l in lengths {
            let (a, b) = self.step(cut, l);
            sum = sum + a + b;
            cut += l;
        }
        sum / lengths.len() as f64
    }

    pub fn score_segments(&self, segments: &[Segment]) -> f64 {
        let lengths: Vec<u32> = segments.iter().map(Segment::len).collect();
        self.score_lengths(&lengths)
    }
}

/// Rollout environment over one sequence.
#[derive(Debug, Clone)]
pub struct KfeEnv {
    rewards: RewardModel,
    cfg: QConfig,
}

impl KfeEnv {
    pub fn new(seq: &Sequence, cfg: &QConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            rewards: RewardModel::new(seq, cfg)?,
            cfg: cfg.clone(),
        })
    }

    pub fn from_rewards(rewards: RewardModel, cfg: &QConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            rewards,
            cfg: cfg.clone(),
        })
    }

    pub fn rewards(&self) -> &RewardModel {
        &self.rewards
    }

    pub fn config(&self) -> &QConfig {
        &self.cfg
    }

    /// Fresh zero tables sized for this sequence (one extra terminal state).
    pub fn new_tables(&self) -> QTablePair {
        QTablePair::new(
            self.rewards.length as usize,
            self.cfg.min_len,
            self.cfg.max_len,
        )
    }

    fn clamp(&self, cut: u32, action: u32) -> u32 {
        action.min(self.rewards.length - cut + 1)
    }

    /// One learning episode. `baseline` is the per-segment score subtracted
    /// from the learning signal (the best normalized score seen so far).
    pub fn rollout(
        &self,
        tables: &mut QTablePair,
        baseline: f64,
        rng: &mut ChaCha8Rng,
    ) -> SegmentationStrategy {
        self.run(Some((tables, baseline, rng)), None)
    }

    /// Pure exploitation of `tables`, no updates.
    pub fn greedy_rollout(&self, tables: &QTablePair) -> SegmentationStrategy {
        self.run(None, Some(tables))
    }

    fn run(
        &self,
        mut learn: Option<(&mut QTablePair, f64, &mut ChaCha8Rng)>,
        greedy: Option<&QTablePair>,
    ) -> SegmentationStrategy {
        let length = self.rewards.length;
        if length == 0 {
            return SegmentationStrategy {
                segments: Vec::new(),
                score: 0.0,
            };
        }
        let u = self.cfg.min_len;
        let mut segments = Vec::new();
        let mut kappa_sum = 0.0;
        let mut cut = 1;
        while cut <= length {
            let action = match (&mut learn, greedy) {
                (Some((tables, _, rng)), _) => {
                    select_action(&tables.joint_row(cut), u, &self.cfg, &mut **rng)
                }
                (None, Some(tables)) => {
                    u + qtable::argmax(&tables.joint_row(cut)).0 as u32
                }
                (None, None) => unreachable!(),
            };
            let len = self.clamp(cut, action);
            let (kappa_a, kappa_b) = self.rewards.step(cut, len);
            let next = cut + len;
            if let Some((tables, baseline, _)) = &mut learn {
                let half = *baseline / 2.0;
                update_q(&mut tables.first, cut, action, kappa_a - half, next, &self.cfg);
                update_q(&mut tables.last, cut, action, kappa_b - half, next, &self.cfg);
            }
            kappa_sum = kappa_sum + kappa_a + kappa_b;
            segments.push(Segment::new(cut, next - 1));
            cut = next;
        }
        let score = kappa_sum / segments.len() as f64;
        SegmentationStrategy { segments, score }
    }
}

/// Outcome of [`train_kfe`].
#[derive(Debug, Clone)]
pub struct KfeTraining {
    /// Best strategy over all episodes (`FS_best`, `κ_best`).
    pub best: SegmentationStrategy,
    /// 1-based episode that produced `best`.
    pub best_episode: u64,
    pub episodes: u64,
    pub tables: QTablePair,
    /// `κ_best` after each episode.
    pub best_history: Vec<f64>,
}

/// Run the configured number of episodes and keep the best-scoring
/// strategy (strict improvements only). Deterministic in `cfg.seed`.
pub fn train_kfe(seq: &Sequence, cfg: &QConfig) -> Result<KfeTraining> {
    let env = KfeEnv::new(seq, cfg)?;
    Ok(train_env(&env))
}

pub fn train_env(env: &KfeEnv) -> KfeTraining {
    let cfg = env.config();
    let episodes = cfg.episodes_for(env.rewards.length);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tables = env.new_tables();
    let mut best: Option<SegmentationStrategy> = None;
    let mut best_episode = 0;
    let mut best_history = Vec::with_capacity(episodes as usize);
    for episode in 1..=episodes {
        let baseline = best.as_ref().map_or(0.0, |b| b.score);
        let strategy = env.rollout(&mut tables, baseline, &mut rng);
        if best.as_ref().is_none_or(|b| strategy.score > b.score) {
            best = Some(strategy);
            best_episode = episode;
        }
        best_history.push(best.as_ref().map_or(0.0, |b| b.score));
    }
    KfeTraining {
        best: best.expect("at least one episode"),
        best_episode,
        episodes,
        tables,
        best_history,
    }
}
