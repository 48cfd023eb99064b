//! Tracking quality metrics.
//!
//! Predictions are scored against ground truth per frame with an optimal
//! IoU assignment (no carry-over between frames), producing miss /
//! false-positive / identity-switch counts; identity quality is scored with
//! one global trajectory assignment. Counts from several sequences can be
//! merged before deriving the ratios, which is how multi-sequence scores
//! are defined.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::association::{solve, Cost, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::io::mot::MotRecord;

/// A ground-truth box and a predicted box overlapping at least this much
/// can be counted as the same object.
pub const MATCH_IOU: f64 = 0.5;

/// Raw per-sequence tallies. Derive scores only after merging everything
/// that should be scored together.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalCounts {
    pub gt_total: usize,
    pub pred_total: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub id_switches: usize,
    /// Frame-level matches and their summed overlap.
    pub matched: usize,
    pub iou_sum: f64,
    /// Frame-level matches consistent with the best global identity
    /// assignment.
    pub idtp: usize,
}

impl EvalCounts {
    pub fn merge(&mut self, other: &EvalCounts) {
        self.gt_total += other.gt_total;
        self.pred_total += other.pred_total;
        self.false_negatives += other.false_negatives;
        self.false_positives += other.false_positives;
        self.id_switches += other.id_switches;
        self.matched += other.matched;
        self.iou_sum += other.iou_sum;
        self.idtp += other.idtp;
    }

    /// Multi-object tracking accuracy: 1 minus the error rate over ground
    /// truth boxes. Can be negative.
    pub fn mota(&self) -> f64 {
        1.0 - (self.false_negatives + self.false_positives + self.id_switches) as f64
            / self.gt_total as f64
    }

    /// Identity F1: harmonic mean of identity precision and recall under
    /// the best one-to-one trajectory pairing.
    pub fn idf1(&self) -> f64 {
        if self.gt_total + self.pred_total == 0 {
            return 0.0;
        }
        2.0 * self.idtp as f64 / (self.gt_total + self.pred_total) as f64
    }

    /// Average overlap of frame-level matches (localization quality).
    pub fn mean_matched_iou(&self) -> f64 {
        if self.matched == 0 {
            return 0.0;
        }
        self.iou_sum / self.matched as f64
    }
}

fn by_frame(records: &[MotRecord]) -> BTreeMap<i64, Vec<(i64, BoundingBox)>> {
    let mut map: BTreeMap<i64, Vec<(i64, BoundingBox)>> = BTreeMap::new();
    for r in records {
        map.entry(r.frame).or_default().push((r.id, r.bbox));
    }
    map
}

/// Score `pred` against `gt` at the standard overlap threshold.
pub fn evaluate(gt: &[MotRecord], pred: &[MotRecord]) -> Result<EvalCounts> {
    evaluate_at(gt, pred, MATCH_IOU)
}

/// Score with an explicit overlap threshold.
pub fn evaluate_at(gt: &[MotRecord], pred: &[MotRecord], min_iou: f64) -> Result<EvalCounts> {
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let gt_frames = by_frame(gt);
    let pred_frames = by_frame(pred);

    let mut counts = EvalCounts { gt_total: gt.len(), pred_total: pred.len(), ..Default::default() };
    // Last predicted identity each ground-truth identity was matched to.
    let mut last_pred_of: HashMap<i64, i64> = HashMap::new();
    // Co-occurrence frames per (gt id, pred id), for the identity score.
    let mut overlap_frames: HashMap<(i64, i64), usize> = HashMap::new();

    let frames: BTreeSet<i64> = gt_frames.keys().chain(pred_frames.keys()).copied().collect();
    let empty: Vec<(i64, BoundingBox)> = Vec::new();
    for frame in frames {
        let g = gt_frames.get(&frame).unwrap_or(&empty);
        let p = pred_frames.get(&frame).unwrap_or(&empty);
        for (gid, gb) in g {
            for (pid, pb) in p {
                if iou(gb, pb) >= min_iou {
                    *overlap_frames.entry((*gid, *pid)).or_insert(0) += 1;
                }
            }
        }
        let costs = CostMatrix::from_fn(g.len(), p.len(), |r, c| {
            let overlap = iou(&g[r].1, &p[c].1);
            if overlap >= min_iou {
                Cost::Finite(1.0 - overlap)
            } else {
                Cost::Gated
            }
        });
        let assignment = solve(&costs);
        counts.false_negatives += assignment.unmatched_rows.len();
        counts.false_positives += assignment.unmatched_cols.len();
        for (r, c) in assignment.matches {
            let (gid, gb) = g[r];
            let (pid, pb) = p[c];
            counts.matched += 1;
            counts.iou_sum += iou(&gb, &pb);
            if let Some(prev) = last_pred_of.insert(gid, pid) {
                if prev != pid {
                    counts.id_switches += 1;
                }
            }
        }
    }

    counts.idtp = identity_true_positives(&overlap_frames);
    Ok(counts)
}

/// Best one-to-one pairing of ground-truth and predicted identities,
/// maximizing total co-occurring frames; returns that total.
fn identity_true_positives(overlap_frames: &HashMap<(i64, i64), usize>) -> usize {
    if overlap_frames.is_empty() {
        return 0;
    }
    let gt_ids: BTreeSet<i64> = overlap_frames.keys().map(|k| k.0).collect();
    let pred_ids: BTreeSet<i64> = overlap_frames.keys().map(|k| k.1).collect();
    let gt_ids: Vec<i64> = gt_ids.into_iter().collect();
    let pred_ids: Vec<i64> = pred_ids.into_iter().collect();
    let max_w = *overlap_frames.values().max().expect("non-empty") as f64;
    // Minimizing (max_w - w) at forced maximum cardinality maximizes the
    // summed weight: zero-weight pairs contribute zero either way.
    let costs = CostMatrix::from_fn(gt_ids.len(), pred_ids.len(), |r, c| {
        let w = overlap_frames.get(&(gt_ids[r], pred_ids[c])).copied().unwrap_or(0) as f64;
        Cost::Finite(max_w - w)
    });
    solve(&costs)
        .matches
        .iter()
        .map(|&(r, c)| overlap_frames.get(&(gt_ids[r], pred_ids[c])).copied().unwrap_or(0))
        .sum()
}

/// Average displacement error between two aligned box sequences: the mean
/// over steps of the mean absolute difference of the four box parameters.
pub fn ade(truth: &[BoundingBox], pred: &[BoundingBox]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::Config(format!(
            "trajectory lengths differ: {} vs {}",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Config("cannot compare empty trajectories".into()));
    }
    let total: f64 = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| {
            ((t.x - p.x).abs() + (t.y - p.y).abs() + (t.w - p.w).abs() + (t.h - p.h).abs()) / 4.0
        })
        .sum();
    Ok(total / truth.len() as f64)
}
