//! Association costs and their fusion.
//!
//! Each cascade builds one gating matrix from box overlap and any number of
//! auxiliary cost matrices (appearance, confidence trend, height profile),
//! fuses them into a single weighted matrix, and hands it to the assignment
//! solver. Gating is an explicit sentinel, never a large finite cost, so a
//! gated pair can never be chosen no matter how the weights are scaled.

mod hungarian;

pub use hungarian::{solve, Assignment};

use crate::error::{Error, Result};
use crate::geometry::{expand, iou, BoundingBox};

/// One association cost cell. [`Cost::Gated`] marks a forbidden pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cost {
    Finite(f64),
    Gated,
}

impl Cost {
    pub fn is_gated(&self) -> bool {
        matches!(self, Cost::Gated)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Cost::Finite(v) => Some(*v),
            Cost::Gated => None,
        }
    }
}

/// Dense rows x cols matrix of [`Cost`] cells, rows = tracks, cols = detections.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Cost>,
}

impl CostMatrix {
    pub fn filled(rows: usize, cols: usize, value: Cost) -> Self {
        CostMatrix { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cost) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CostMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, r: usize, c: usize) -> Cost {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Cost) {
        self.data[r * self.cols + c] = v;
    }

    fn validate(&self) -> Result<()> {
        for r in 0..self.rows {
            for c in 0..self.cols {
                if let Cost::Finite(v) = self.at(r, c) {
                    if !v.is_finite() {
                        return Err(Error::NonFiniteCost { row: r, col: c });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Overlap gating parameters for one cascade.
///
/// The acceptance threshold starts at `threshold_upper` and decays by
/// `decay` per occluded frame down to `threshold_lower`; a plain fixed
/// threshold is the special case `upper == lower`. Both boxes are expanded
/// by `expansion_rate` before the overlap test, and `fuse_score` multiplies
/// the overlap by the detection confidence before thresholding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtIouParams {
    pub threshold_upper: f64,
    pub threshold_lower: f64,
    pub decay: f64,
    pub expansion_rate: f64,
    pub fuse_score: bool,
}

impl DtIouParams {
    /// Fixed-threshold IoU gate (no decay, no expansion, no score fusion).
    pub fn fixed(threshold: f64) -> Self {
        DtIouParams {
            threshold_upper: threshold,
            threshold_lower: threshold,
            decay: 0.0,
            expansion_rate: 0.0,
            fuse_score: false,
        }
    }

    /// Effective acceptance threshold after `t_occluded` missed frames.
    pub fn threshold_at(&self, t_occluded: i64) -> f64 {
        (self.threshold_upper - self.decay * t_occluded as f64).max(self.threshold_lower)
    }
}

/// Overlap cost between a predicted track box and a detection, with the
/// acceptance threshold relaxed by occlusion age.
pub fn dtiou_cost(track_box: &BoundingBox, det: &BoundingBox, t_occluded: i64, p: &DtIouParams) -> Cost {
    let a = expand(track_box, p.expansion_rate);
    let b = expand(det, p.expansion_rate);
    let mut score = iou(&a, &b);
    if p.fuse_score {
        score *= det.confidence;
    }
    if score < p.threshold_at(t_occluded) {
        Cost::Gated
    } else {
        Cost::Finite(1.0 - score)
    }
}

/// Height-profile cost on normalized boxes: weighted absolute differences of
/// box height and bottom-edge vertical position.
pub fn hpc_cost(track_box: &BoundingBox, det: &BoundingBox, lambda_h: f64, lambda_y: f64) -> f64 {
    lambda_h * (track_box.h - det.h).abs() + lambda_y * (track_box.bottom() - det.bottom()).abs()
}

/// Confidence-trend cost: predicted track confidence (clamped to [0, 1])
/// against the detection confidence.
pub fn atcm_cost(predicted_conf: f64, det_conf: f64) -> f64 {
    (predicted_conf.clamp(0.0, 1.0) - det_conf).abs()
}

/// Unit-norm appearance embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scale to unit length; errors on (numerically) zero vectors.
    pub fn normalized(&self) -> Result<Embedding> {
        let n = self.norm();
        if n < 1e-12 {
            return Err(Error::ZeroNormEmbedding);
        }
        Ok(Embedding(self.0.iter().map(|v| v / n).collect()))
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

/// Cosine distance between unit embeddings, in [0, 2].
pub fn appearance_cost(track: &Embedding, det: &Embedding) -> Result<f64> {
    if track.dim() != det.dim() {
        return Err(Error::EmbeddingDimMismatch { track: track.dim(), detection: det.dim() });
    }
    if track.norm() < 1e-12 || det.norm() < 1e-12 {
        return Err(Error::ZeroNormEmbedding);
    }
    Ok(1.0 - track.dot(det))
}

/// Exponential moving average of a track's appearance, renormalized to unit
/// length. `current` absent adopts the detection embedding; a degenerate
/// blend (opposite vectors cancelling out) keeps the current one.
pub fn update_track_embedding(current: Option<&Embedding>, detection: &Embedding, alpha: f64) -> Result<Embedding> {
    let det = detection.normalized()?;
    let Some(cur) = current else { return Ok(det) };
    if cur.dim() != det.dim() {
        return Err(Error::EmbeddingDimMismatch { track: cur.dim(), detection: det.dim() });
    }
    let blended = Embedding(
        cur.0.iter().zip(&det.0).map(|(c, d)| alpha * c + (1.0 - alpha) * d).collect(),
    );
    match blended.normalized() {
        Ok(e) => Ok(e),
        Err(_) => Ok(cur.clone()),
    }
}

/// Auxiliary cost component for [`fuse`]: a weight plus row-major values.
/// `None` cells contribute nothing (e.g. appearance where a track has no
/// embedding yet).
pub struct ComponentCosts {
    pub weight: f64,
    pub values: Vec<Option<f64>>,
}

/// Weighted sum of the gating matrix and auxiliary components. A gated cell
/// stays gated regardless of the other terms.
pub fn fuse(gate: &CostMatrix, gate_weight: f64, components: &[ComponentCosts]) -> Result<CostMatrix> {
    gate.validate()?;
    if gate_weight < 0.0 {
        return Err(Error::NegativeWeight { component: "overlap", weight: gate_weight });
    }
    let cells = gate.rows * gate.cols;
    for comp in components {
        if comp.weight < 0.0 {
            return Err(Error::NegativeWeight { component: "auxiliary", weight: comp.weight });
        }
        if comp.values.len() != cells {
            return Err(Error::CostShapeMismatch {
                rows: gate.rows,
                cols: gate.cols,
                other_rows: comp.values.len() / gate.cols.max(1),
                other_cols: gate.cols,
            });
        }
        if comp.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCost { row: 0, col: 0 });
        }
    }
    let mut out = CostMatrix::filled(gate.rows, gate.cols, Cost::Gated);
    for r in 0..gate.rows {
        for c in 0..gate.cols {
            let Cost::Finite(base) = gate.at(r, c) else { continue };
            let mut total = gate_weight * base;
            for comp in components {
                if let Some(v) = comp.values[r * gate.cols + c] {
                    total += comp.weight * v;
                }
            }
            out.set(r, c, Cost::Finite(total));
        }
    }
    Ok(out)
}
