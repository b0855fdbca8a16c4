//! Tracking metrics: HOTA (with DetA and AssA), CLEAR MOTA with identity
//! switches, and IDF1.
//!
//! HOTA uses one Hungarian matching per frame and localization threshold,
//! maximizing total IoU over pairs with IoU ≥ α, for the 19 thresholds
//! `0.05, 0.10, …, 0.95`. Ratios whose denominator is zero are reported as
//! `None` rather than NaN.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::assignment::max_weight_matching;
use crate::data_io::{BBox, TrackSet};

/// Matching threshold for CLEAR and identity metrics.
pub const CLEAR_THRESHOLD: f64 = 0.5;

/// The 19 HOTA localization thresholds.
pub fn alphas() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

/// One-to-one matching of a single frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatch {
    /// `(pred index, gt index, iou)` sorted by pred index.
    pub pairs: Vec<(usize, usize, f64)>,
    pub fp: usize,
    pub fn_: usize,
}

fn admissible(iou: f64, alpha: f64) -> bool {
    iou > 0.0 && iou >= alpha - f64::EPSILON
}

/// Hungarian matching maximizing total IoU over pairs with IoU ≥ `alpha`.
pub fn match_frame(preds: &[BBox], gts: &[BBox], alpha: f64) -> FrameMatch {
    let weights: Vec<Vec<Option<f64>>> = preds
        .iter()
        .map(|p| {
            gts.iter()
                .map(|g| {
                    let v = p.iou(g);
                    admissible(v, alpha).then_some(v)
                })
                .collect()
        })
        .collect();
    let pairs: Vec<(usize, usize, f64)> = max_weight_matching(&weights)
        .into_iter()
        .map(|(p, g)| (p, g, weights[p][g].unwrap_or(0.0)))
        .collect();
    FrameMatch {
        fp: preds.len() - pairs.len(),
        fn_: gts.len() - pairs.len(),
        pairs,
    }
}

type FrameRows = BTreeMap<u32, Vec<(i64, BBox)>>;

fn frames_of(preds: &TrackSet, gts: &TrackSet) -> (FrameRows, FrameRows, BTreeSet<u32>) {
    let p = preds.by_frame();
    let g = gts.by_frame();
    let frames = p.keys().chain(g.keys()).copied().collect();
    (p, g, frames)
}

/// CLEAR counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearResult {
    /// `None` when there are no ground-truth boxes.
    pub mota: Option<f64>,
    pub ids: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tp: usize,
    pub num_gt: usize,
}

/// MOTA and identity switches. Matches of the previous frame are kept when
/// both boxes are still present with IoU ≥ `threshold`; the remaining boxes
/// are matched by Hungarian assignment on IoU.
pub fn compute_mota(preds: &TrackSet, gts: &TrackSet, threshold: f64) -> ClearResult {
    let (pf, gf, frames) = frames_of(preds, gts);
    let empty = Vec::new();
    let mut prev: BTreeMap<i64, i64> = BTreeMap::new();
    let mut last_pred_of_gt: BTreeMap<i64, i64> = BTreeMap::new();
    let (mut tp, mut fp, mut fn_, mut ids, mut num_gt) = (0, 0, 0, 0, 0);

    for t in frames {
        let p = pf.get(&t).unwrap_or(&empty);
        let g = gf.get(&t).unwrap_or(&empty);
        num_gt += g.len();
        let mut matched: Vec<(usize, usize)> = Vec::new();
        let mut p_used = vec![false; p.len()];
        let mut g_used = vec![false; g.len()];
        for (gi, (gid, gb)) in g.iter().enumerate() {
            if let Some(pid) = prev.get(gid) {
                if let Some(pi) = p.iter().position(|(id, _)| id == pid) {
                    if !p_used[pi] && admissible(p[pi].1.iou(gb), threshold) {
                        p_used[pi] = true;
                        g_used[gi] = true;
                        matched.push((pi, gi));
                    }
                }
            }
        }
        let free_p: Vec<usize> = (0..p.len()).filter(|&i| !p_used[i]).collect();
        let free_g: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let weights: Vec<Vec<Option<f64>>> = free_p
            .iter()
            .map(|&pi| {
                free_g
                    .iter()
                    .map(|&gi| {
                        let v = p[pi].1.iou(&g[gi].1);
                        admissible(v, threshold).then_some(v)
                    })
                    .collect()
            })
            .collect();
        for (a, b) in max_weight_matching(&weights) {
            matched.push((free_p[a], free_g[b]));
        }

        prev.clear();
        for &(pi, gi) in &matched {
            let (gid, pid) = (g[gi].0, p[pi].0);
            if let Some(&last) = last_pred_of_gt.get(&gid) {
                if last != pid {
                    ids += 1;
                }
            }
            last_pred_of_gt.insert(gid, pid);
            prev.insert(gid, pid);
        }
        tp += matched.len();
        fp += p.len() - matched.len();
        fn_ += g.len() - matched.len();
    }

    let mota = (num_gt > 0).then(|| 1.0 - (fn_ + fp + ids) as f64 / num_gt as f64);
    ClearResult {
        mota,
        ids,
        fp,
        fn_,
        tp,
        num_gt,
    }
}

/// Identity (IDF1) counts.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResult {
    pub idf1: Option<f64>,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

fn idf1_from(idtp: usize, idfp: usize, idfn: usize) -> Option<f64> {
    let denom = 2 * idtp + idfp + idfn;
    (denom > 0).then(|| 2.0 * idtp as f64 / denom as f64)
}

/// IDF1 from a global one-to-one matching of predicted and ground-truth
/// trajectories maximizing the number of co-located frames (IoU ≥
/// `threshold`).
pub fn compute_idf1(preds: &TrackSet, gts: &TrackSet, threshold: f64) -> IdentityResult {
    let (pf, gf, frames) = frames_of(preds, gts);
    let pids: Vec<i64> = preds.tracks().keys().copied().collect();
    let gids: Vec<i64> = gts.tracks().keys().copied().collect();
    let pidx: BTreeMap<i64, usize> = pids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let gidx: BTreeMap<i64, usize> = gids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut counts = vec![vec![0usize; gids.len()]; pids.len()];
    for t in frames {
        if let (Some(p), Some(g)) = (pf.get(&t), gf.get(&t)) {
            for (pid, pb) in p {
                for (gid, gb) in g {
                    if admissible(pb.iou(gb), threshold) {
                        counts[pidx[pid]][gidx[gid]] += 1;
                    }
                }
            }
        }
    }
    let weights: Vec<Vec<Option<f64>>> = counts
        .iter()
        .map(|r| r.iter().map(|&c| (c > 0).then_some(c as f64)).collect())
        .collect();
    let idtp: usize = max_weight_matching(&weights)
        .into_iter()
        .map(|(i, j)| counts[i][j])
        .sum();
    let idfp = preds.num_boxes() - idtp;
    let idfn = gts.num_boxes() - idtp;
    IdentityResult {
        idf1: idf1_from(idtp, idfp, idfn),
        idtp,
        idfp,
        idfn,
    }
}

/// HOTA components at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaRow {
    pub alpha: f64,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    /// `Σ_TP A(c)`, so that `assa = assa_sum / tp`.
    pub assa_sum: f64,
}

impl AlphaRow {
    fn from_counts(alpha: f64, tp: usize, fn_: usize, fp: usize, assa_sum: f64) -> Self {
        let denom = tp + fn_ + fp;
        let deta = if denom > 0 { tp as f64 / denom as f64 } else { 0.0 };
        let assa = if tp > 0 { assa_sum / tp as f64 } else { 0.0 };
        Self {
            alpha,
            hota: (deta * assa).sqrt(),
            deta,
            assa,
            tp,
            fn_,
            fp,
            assa_sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotaResult {
    pub hota: Option<f64>,
    pub deta: Option<f64>,
    pub assa: Option<f64>,
    pub per_alpha: Vec<AlphaRow>,
}

fn mean_over_alpha(rows: &[AlphaRow], f: impl Fn(&AlphaRow) -> f64) -> f64 {
    rows.iter().map(f).sum::<f64>() / rows.len() as f64
}

fn hota_from_rows(per_alpha: Vec<AlphaRow>, defined: bool) -> HotaResult {
    let pick = |f: fn(&AlphaRow) -> f64| defined.then(|| mean_over_alpha(&per_alpha, f));
    HotaResult {
        hota: pick(|r| r.hota),
        deta: pick(|r| r.deta),
        assa: pick(|r| r.assa),
        per_alpha,
    }
}

pub fn compute_hota(preds: &TrackSet, gts: &TrackSet) -> HotaResult {
    let (pf, gf, frames) = frames_of(preds, gts);
    let empty = Vec::new();
    let gt_count: BTreeMap<i64, usize> = gts.tracks().iter().map(|(&id, t)| (id, t.len())).collect();
    let pred_count: BTreeMap<i64, usize> =
        preds.tracks().iter().map(|(&id, t)| (id, t.len())).collect();

    let per_alpha = alphas()
        .into_iter()
        .map(|alpha| {
            let (mut tp, mut fn_, mut fp) = (0, 0, 0);
            let mut pair_tp: BTreeMap<(i64, i64), usize> = BTreeMap::new();
            for &t in &frames {
                let p = pf.get(&t).unwrap_or(&empty);
                let g = gf.get(&t).unwrap_or(&empty);
                let pb: Vec<BBox> = p.iter().map(|(_, b)| *b).collect();
                let gb: Vec<BBox> = g.iter().map(|(_, b)| *b).collect();
                let m = match_frame(&pb, &gb, alpha);
                tp += m.pairs.len();
                fn_ += m.fn_;
                fp += m.fp;
                for (pi, gi, _) in m.pairs {
                    *pair_tp.entry((g[gi].0, p[pi].0)).or_default() += 1;
                }
            }
            let assa_sum: f64 = pair_tp
                .iter()
                .map(|(&(gid, pid), &tpa)| {
                    let a = tpa as f64 / (gt_count[&gid] + pred_count[&pid] - tpa) as f64;
                    tpa as f64 * a
                })
                .sum();
            AlphaRow::from_counts(alpha, tp, fn_, fp, assa_sum)
        })
        .collect();
    hota_from_rows(per_alpha, !(gts.is_empty() && preds.is_empty()))
}

/// Full report for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub hota: Option<f64>,
    pub deta: Option<f64>,
    pub assa: Option<f64>,
    pub idf1: Option<f64>,
    pub mota: Option<f64>,
    pub ids: usize,
    pub fp: usize,
    pub fn_: usize,
    pub num_gt: usize,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
    pub per_alpha: Vec<AlphaRow>,
}

pub fn evaluate(preds: &TrackSet, gts: &TrackSet) -> MetricReport {
    let h = compute_hota(preds, gts);
    let c = compute_mota(preds, gts, CLEAR_THRESHOLD);
    let i = compute_idf1(preds, gts, CLEAR_THRESHOLD);
    MetricReport {
        hota: h.hota,
        deta: h.deta,
        assa: h.assa,
        idf1: i.idf1,
        mota: c.mota,
        ids: c.ids,
        fp: c.fp,
        fn_: c.fn_,
        num_gt: c.num_gt,
        idtp: i.idtp,
        idfp: i.idfp,
        idfn: i.idfn,
        per_alpha: h.per_alpha,
    }
}

/// Pool several sequences: detection counts are summed per threshold and
/// association scores weighted by true positives.
pub fn combine(reports: &[MetricReport]) -> MetricReport {
    let per_alpha: Vec<AlphaRow> = alphas()
        .into_iter()
        .enumerate()
        .map(|(k, alpha)| {
            let rows = reports.iter().filter_map(|r| r.per_alpha.get(k));
            let (mut tp, mut fn_, mut fp, mut s) = (0, 0, 0, 0.0);
            for r in rows {
                tp += r.tp;
                fn_ += r.fn_;
                fp += r.fp;
                s += r.assa_sum;
            }
            AlphaRow::from_counts(alpha, tp, fn_, fp, s)
        })
        .collect();
    let defined = per_alpha.iter().any(|r| r.tp + r.fn_ + r.fp > 0);
    let h = hota_from_rows(per_alpha, defined);
    let sum = |f: fn(&MetricReport) -> usize| reports.iter().map(f).sum::<usize>();
    let (ids, fp, fn_, num_gt) = (sum(|r| r.ids), sum(|r| r.fp), sum(|r| r.fn_), sum(|r| r.num_gt));
    let (idtp, idfp, idfn) = (sum(|r| r.idtp), sum(|r| r.idfp), sum(|r| r.idfn));
    MetricReport {
        hota: h.hota,
        deta: h.deta,
        assa: h.assa,
        idf1: idf1_from(idtp, idfp, idfn),
        mota: (num_gt > 0).then(|| 1.0 - (fn_ + fp + ids) as f64 / num_gt as f64),
        ids,
        fp,
        fn_,
        num_gt,
        idtp,
        idfp,
        idfn,
        per_alpha: h.per_alpha,
    }
}

pub const REPORT_HEADER: &str = "sequence,HOTA,DetA,AssA,IDF1,MOTA,IDS,FP,FN";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

/// One CSV row per sequence plus a `COMBINED` row.
pub fn report_csv(named: &[(String, MetricReport)]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    let row = |out: &mut String, name: &str, r: &MetricReport| {
        let _ = writeln!(
            out,
            "{name},{},{},{},{},{},{},{},{}",
            fmt_opt(r.hota),
            fmt_opt(r.deta),
            fmt_opt(r.assa),
            fmt_opt(r.idf1),
            fmt_opt(r.mota),
            r.ids,
            r.fp,
            r.fn_
        );
    };
    for (name, r) in named {
        row(&mut out, name, r);
    }
    let all: Vec<MetricReport> = named.iter().map(|(_, r)| r.clone()).collect();
    row(&mut out, "COMBINED", &combine(&all));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x: f64) -> BBox {
        BBox::new(x, 0.0, 10.0, 20.0)
    }

    fn split_fixture() -> (TrackSet, TrackSet) {
        let gt = TrackSet::from_rows((1..=4).map(|f| (1, f, b(f as f64)))).unwrap();
        let pred = TrackSet::from_rows(
            (1..=4).map(|f| (if f <= 2 { 1 } else { 2 }, f, b(f as f64))),
        )
        .unwrap();
        (pred, gt)
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BBox::new(5.0, 5.0, 1.0, 1.0)), 0.0);
        assert!((iou(&a, &BBox::new(1.0, 0.0, 2.0, 2.0)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn frame_matching() {
        let g = [b(0.0)];
        let m = match_frame(&[b(0.0)], &g, 0.5);
        assert_eq!((m.pairs.len(), m.fp, m.fn_), (1, 0, 0));
        let m = match_frame(&[b(0.0)], &[], 0.5);
        assert_eq!(m.fp, 1);

        // IoU 0.9 and 0.6 against the same gt
        let gt = BBox::new(0.0, 0.0, 10.0, 10.0);
        let p09 = BBox::new(0.0, 0.0, 10.0, 9.0);
        let p06 = BBox::new(0.0, 0.0, 10.0, 6.0);
        assert!((gt.iou(&p09) - 0.9).abs() < 1e-12 && (gt.iou(&p06) - 0.6).abs() < 1e-12);
        let m = match_frame(&[p06, p09], &[gt], 0.5);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].0, 1);
        assert_eq!(m.fp, 1);
    }

    #[test]
    fn perfect_predictions() {
        let (_, gt) = split_fixture();
        let r = evaluate(&gt, &gt);
        assert_eq!(r.hota, Some(1.0));
        assert_eq!(r.deta, Some(1.0));
        assert_eq!(r.assa, Some(1.0));
        assert_eq!(r.idf1, Some(1.0));
        assert_eq!(r.mota, Some(1.0));
        assert_eq!((r.ids, r.fp, r.fn_), (0, 0, 0));
    }

    #[test]
    fn split_track() {
        let (pred, gt) = split_fixture();
        let c = compute_mota(&pred, &gt, 0.5);
        assert_eq!((c.fp, c.fn_, c.ids), (0, 0, 1));
        assert_eq!(c.mota, Some(0.75));
        let i = compute_idf1(&pred, &gt, 0.5);
        assert_eq!((i.idtp, i.idfp, i.idfn), (2, 2, 2));
        assert_eq!(i.idf1, Some(0.5));
        let h = compute_hota(&pred, &gt);
        for row in &h.per_alpha {
            assert_eq!(row.deta, 1.0);
            assert!((row.assa - 0.5).abs() < 1e-12);
            assert_eq!(row.hota, (row.deta * row.assa).sqrt());
        }
        assert!((h.hota.unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_cases() {
        let (_, gt) = split_fixture();
        let none = TrackSet::new();
        let r = evaluate(&none, &gt);
        assert_eq!(r.mota, Some(0.0));
        assert_eq!(r.fn_, 4);
        assert_eq!(r.idf1, Some(0.0));
        assert_eq!(r.hota, Some(0.0));

        let r = evaluate(&gt, &none);
        assert_eq!(r.mota, None);
        let r = evaluate(&none, &none);
        assert_eq!((r.mota, r.hota, r.idf1), (None, None, None));
        let csv = report_csv(&[("s".into(), r)]);
        assert!(csv.contains("s,NA,NA,NA,NA,NA,0,0,0"));
    }

    #[test]
    fn carry_over_keeps_previous_match() {
        // Two preds overlap one gt; the previous match is kept even when
        // the other pred has a higher IoU.
        let gt = TrackSet::from_rows([(1, 1, b(0.0)), (1, 2, b(0.0))]).unwrap();
        let pred = TrackSet::from_rows([
            (7, 1, b(0.0)),
            (7, 2, b(2.0)),
            (8, 2, b(0.0)),
        ])
        .unwrap();
        let c = compute_mota(&pred, &gt, 0.5);
        assert_eq!((c.ids, c.fp), (0, 1));
    }

    #[test]
    fn combined_of_one_equals_itself() {
        let (pred, gt) = split_fixture();
        let r = evaluate(&pred, &gt);
        let c = combine(std::slice::from_ref(&r));
        assert!((c.hota.unwrap() - r.hota.unwrap()).abs() < 1e-12);
        assert_eq!(c.mota, r.mota);
        assert_eq!(c.idf1, r.idf1);
    }

    fn arb_tracks() -> impl Strategy<Value = TrackSet> {
        proptest::collection::vec(
            (1i64..6, 1u32..12, 0.0f64..60.0, 0.0f64..30.0),
            0..30,
        )
        .prop_map(|rows| {
            let mut seen = std::collections::BTreeSet::new();
            let rows: Vec<_> = rows
                .into_iter()
                .filter(|(id, f, _, _)| seen.insert((*id, *f)))
                .map(|(id, f, x, y)| (id, f, BBox::new(x, y, 20.0, 40.0)))
                .collect();
            TrackSet::from_rows(rows).unwrap()
        })
    }

    fn relabel(ts: &TrackSet, offset: i64, flip: bool) -> TrackSet {
        TrackSet::from_rows(ts.tracks().iter().flat_map(|(&id, boxes)| {
            let nid = if flip { 100 - id } else { id + offset };
            boxes.iter().map(move |&(f, b)| (nid, f, b))
        }))
        .unwrap()
    }

    fn shift(ts: &TrackSet, by: u32) -> TrackSet {
        TrackSet::from_rows(
            ts.tracks()
                .iter()
                .flat_map(|(&id, boxes)| boxes.iter().map(move |&(f, b)| (id, f + by, b))),
        )
        .unwrap()
    }

    fn close(a: Option<f64>, b: Option<f64>) -> bool {
        match (a, b) {
            (Some(x), Some(y)) => (x - y).abs() < 1e-12,
            (None, None) => true,
            _ => false,
        }
    }

    proptest! {
        #[test]
        fn invariant_under_id_permutation(p in arb_tracks(), g in arb_tracks(), off in 1i64..50) {
            let base = evaluate(&p, &g);
            for (pp, gg) in [(relabel(&p, off, false), g.clone()), (p.clone(), relabel(&g, 0, true))] {
                let r = evaluate(&pp, &gg);
                prop_assert!(close(r.hota, base.hota));
                prop_assert!(close(r.assa, base.assa));
                prop_assert!(close(r.idf1, base.idf1));
                prop_assert!(close(r.mota, base.mota));
                prop_assert_eq!(r.ids, base.ids);
            }
        }

        #[test]
        fn hota_is_geometric_mean_per_alpha(p in arb_tracks(), g in arb_tracks()) {
            for row in evaluate(&p, &g).per_alpha {
                prop_assert_eq!(row.hota, (row.deta * row.assa).sqrt());
            }
        }

        #[test]
        fn invariant_under_frame_translation(p in arb_tracks(), g in arb_tracks(), by in 1u32..100) {
            let a = evaluate(&p, &g);
            let b = evaluate(&shift(&p, by), &shift(&g, by));
            prop_assert!(close(a.hota, b.hota));
            prop_assert!(close(a.mota, b.mota));
            prop_assert!(close(a.idf1, b.idf1));
            prop_assert_eq!(a.ids, b.ids);
        }

        #[test]
        fn self_evaluation_is_perfect(g in arb_tracks()) {
            prop_assume!(!g.is_empty());
            let r = evaluate(&g, &g);
            prop_assert_eq!(r.mota, Some(1.0));
            prop_assert_eq!(r.idf1, Some(1.0));
            prop_assert!((r.hota.unwrap() - 1.0).abs() < 1e-12);
            prop_assert_eq!((r.ids, r.fp, r.fn_), (0, 0, 0));
        }
    }
}
