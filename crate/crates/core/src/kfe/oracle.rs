//! Exhaustive search over all tilings, for checking the agent on short
//! sequences.

use super::{QConfig, RewardModel, SegmentationStrategy};
use crate::data_io::Sequence;
use crate::error::{Error, Result};

/// Longest sequence the enumeration accepts.
pub const MAX_ORACLE_LEN: u32 = 16;

/// Every tiling of `[1, length]` as a tuple of segment lengths, in
/// lexicographic order. Non-final lengths lie in `[u, n]`, the final one in
/// `[1, n]`.
pub fn enumerate_segmentations(length: u32, u: u32, n: u32) -> Result<Vec<Vec<u32>>> {
    if length > MAX_ORACLE_LEN {
        return Err(Error::Size(format!(
            "enumeration limited to {MAX_ORACLE_LEN} frames, got {length}"
        )));
    }
    if u < 1 || n < u {
        return Err(Error::Config(format!("need 1 <= u <= n (got u={u}, n={n})")));
    }
    let mut out = Vec::new();
    if length == 0 {
        return Ok(out);
    }
    let mut prefix = Vec::new();
    extend(length, u, n, &mut prefix, &mut out);
    Ok(out)
}

fn extend(remaining: u32, u: u32, n: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    for l in 1..=n.min(remaining) {
        if l == remaining {
            prefix.push(l);
            out.push(prefix.clone());
            prefix.pop();
        } else if l >= u {
            prefix.push(l);
            extend(remaining - l, u, n, prefix, out);
            prefix.pop();
        }
    }
}

/// Highest-scoring tiling; ties go to the lexicographically smallest
/// length tuple.
pub fn oracle_best_segmentation(seq: &Sequence, cfg: &QConfig) -> Result<(SegmentationStrategy, f64)> {
    let tilings = enumerate_segmentations(seq.length, cfg.min_len, cfg.max_len)?;
    let model = RewardModel::new(seq, cfg)?;
    let mut best: Option<(Vec<u32>, f64)> = None;
    for t in tilings {
        let score = model.score_lengths(&t);
        if best.as_ref().is_none_or(|(_, b)| score > *b) {
            best = Some((t, score));
        }
    }
    let (lengths, score) = best.unwrap_or((Vec::new(), 0.0));
    Ok((
        SegmentationStrategy {
            segments: SegmentationStrategy::segments_from_lengths(&lengths),
            score,
        },
        score,
    ))
}
