//! Trajectory feature extraction for the learned motion filter.
//!
//! Histories arrive as `(frame, box)` pairs in image-fraction coordinates.
//! Each observation becomes a 13-channel row: 4 absolute coordinates, 4
//! standardized frame-gap-scaled first differences, 4 standardized
//! frame-gap-scaled coordinates relative to the newest observation, and the
//! signed frame offset from that newest observation. Prediction targets are
//! 5-channel rows: standardized offsets from the newest observation plus a
//! positive frame offset. Gap scaling divides by the frame distance so a
//! detection missed for k frames contributes a per-frame rate, not a k-fold
//! larger jump.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// One observation of a track: frame index plus box.
///
/// Inside the feature extractor coordinates must be image fractions; a
/// sanity window of [-2, 3] per coordinate is enforced (off-screen is fine,
/// garbage is not). Elsewhere (the measurement buffer) the same type carries
/// pixel boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedBox {
    pub frame: i64,
    pub bbox: BoundingBox,
}

impl TimedBox {
    pub fn new(frame: i64, bbox: BoundingBox) -> Self {
        TimedBox { frame, bbox }
    }
}

pub const INPUT_CHANNELS: usize = 13;
pub const TARGET_CHANNELS: usize = 5;

/// Per-channel standardization constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
}

impl ChannelStats {
    pub const IDENTITY: ChannelStats = ChannelStats { mean: 0.0, std: 1.0 };

    pub fn standardize(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn destandardize(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// Standardization constants for the three derived channel groups.
///
/// `diff` covers the gap-scaled first differences, `rel_input` the
/// gap-scaled relative coordinates of input rows, `rel_target` the unscaled
/// relative coordinates of target rows. Absolute coordinates and times are
/// never standardized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub diff: [ChannelStats; 4],
    pub rel_input: [ChannelStats; 4],
    pub rel_target: [ChannelStats; 4],
}

impl FeatureStats {
    /// Mean 0, std 1 everywhere: standardization becomes the identity.
    pub fn identity() -> Self {
        FeatureStats {
            diff: [ChannelStats::IDENTITY; 4],
            rel_input: [ChannelStats::IDENTITY; 4],
            rel_target: [ChannelStats::IDENTITY; 4],
        }
    }
}

/// Extracted input rows, one per observation, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct InputFeatures(pub Vec<[f64; INPUT_CHANNELS]>);

/// Extracted target rows, one per future observation, soonest first.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFeatures(pub Vec<[f64; TARGET_CHANNELS]>);

fn box4(b: &BoundingBox) -> [f64; 4] {
    [b.x, b.y, b.w, b.h]
}

fn check_history(history: &[TimedBox]) -> Result<()> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    for pair in history.windows(2) {
        if pair[1].frame <= pair[0].frame {
            return Err(Error::NonIncreasingFrames { prev: pair[0].frame, frame: pair[1].frame });
        }
    }
    for tb in history {
        for v in box4(&tb.bbox) {
            if !v.is_finite() || !(-2.0..=3.0).contains(&v) {
                return Err(Error::CoordinateOutOfRange { value: v });
            }
        }
    }
    Ok(())
}

/// Build the n x 13 input matrix for a history of n observations.
///
/// The first row's difference channels and the last row's relative channels
/// are hard zeros (no predecessor / zero offset), bypassing standardization.
pub fn extract_input(history: &[TimedBox], stats: &FeatureStats) -> Result<InputFeatures> {
    check_history(history)?;
    let last = &history[history.len() - 1];
    let last_box = box4(&last.bbox);
    let mut rows = Vec::with_capacity(history.len());
    for (k, tb) in history.iter().enumerate() {
        let cur = box4(&tb.bbox);
        let mut row = [0.0f64; INPUT_CHANNELS];
        row[..4].copy_from_slice(&cur);
        if k > 0 {
            let prev = &history[k - 1];
            let gap = (tb.frame - prev.frame) as f64;
            let pb = box4(&prev.bbox);
            for c in 0..4 {
                row[4 + c] = stats.diff[c].standardize((cur[c] - pb[c]) / gap);
            }
        }
        if k + 1 < history.len() {
            let gap = (last.frame - tb.frame) as f64;
            for c in 0..4 {
                row[8 + c] = stats.rel_input[c].standardize((cur[c] - last_box[c]) / gap);
            }
        }
        row[12] = (tb.frame - last.frame) as f64;
        rows.push(row);
    }
    Ok(InputFeatures(rows))
}

/// Build the m x 5 target matrix for future observations of the same track.
///
/// Offsets are relative to `last` (the newest input observation) and are not
/// gap-scaled; times are `frame - last.frame`, strictly positive and
/// strictly increasing.
pub fn extract_target(last: &TimedBox, future: &[TimedBox], stats: &FeatureStats) -> Result<TargetFeatures> {
    if future.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let mut prev_frame = last.frame;
    let last_box = box4(&last.bbox);
    let mut rows = Vec::with_capacity(future.len());
    for tb in future {
        if tb.frame <= prev_frame {
            return Err(Error::NonIncreasingFrames { prev: prev_frame, frame: tb.frame });
        }
        prev_frame = tb.frame;
        let cur = box4(&tb.bbox);
        let mut row = [0.0f64; TARGET_CHANNELS];
        for c in 0..4 {
            row[c] = stats.rel_target[c].standardize(cur[c] - last_box[c]);
        }
        row[4] = (tb.frame - last.frame) as f64;
        rows.push(row);
    }
    Ok(TargetFeatures(rows))
}

/// Build the 13-channel token for a single observation newer than `last`,
/// used when a filter conditions on a detection it has not yet absorbed.
///
/// The layout mirrors [`extract_input`] with `last` acting as both the
/// predecessor and the anchor; the time channel is positive, which is what
/// distinguishes these tokens from history rows (whose times are <= 0).
pub fn extract_observation_token(
    obs: &TimedBox,
    last: &TimedBox,
    stats: &FeatureStats,
) -> Result<[f64; INPUT_CHANNELS]> {
    if obs.frame <= last.frame {
        return Err(Error::NonIncreasingFrames { prev: last.frame, frame: obs.frame });
    }
    check_history(std::slice::from_ref(obs))?;
    let cur = box4(&obs.bbox);
    let last_box = box4(&last.bbox);
    let gap = (obs.frame - last.frame) as f64;
    let mut row = [0.0f64; INPUT_CHANNELS];
    row[..4].copy_from_slice(&cur);
    for c in 0..4 {
        row[4 + c] = stats.diff[c].standardize((cur[c] - last_box[c]) / gap);
        row[8 + c] = stats.rel_input[c].standardize((cur[c] - last_box[c]) / -gap);
    }
    row[12] = gap;
    Ok(row)
}

/// Invert target standardization and re-anchor at `last_box`, flooring the
/// extent at 1e-6 so downstream geometry stays valid.
pub fn destandardize_target(row: &[f64; 4], last_box: &BoundingBox, stats: &FeatureStats) -> BoundingBox {
    let lb = box4(last_box);
    let mut out = [0.0f64; 4];
    for c in 0..4 {
        out[c] = stats.rel_target[c].destandardize(row[c]) + lb[c];
    }
    BoundingBox { x: out[0], y: out[1], w: out[2].max(1e-6), h: out[3].max(1e-6), confidence: 1.0 }
}

/// Fit standardization constants over `(input, target)` history pairs.
///
/// Uses population standard deviation floored at 1e-8. Sample values are
/// sorted per channel before accumulation so the result is bit-identical
/// under any ordering of the windows.
pub fn fit_stats<'a, I>(windows: I) -> Result<FeatureStats>
where
    I: IntoIterator<Item = (&'a [TimedBox], &'a [TimedBox])>,
{
    let mut diff: [Vec<f64>; 4] = Default::default();
    let mut rel_in: [Vec<f64>; 4] = Default::default();
    let mut rel_tg: [Vec<f64>; 4] = Default::default();

    for (input, target) in windows {
        check_history(input)?;
        let last = input[input.len() - 1];
        let last_box = box4(&last.bbox);
        for pair in input.windows(2) {
            let gap = (pair[1].frame - pair[0].frame) as f64;
            let a = box4(&pair[0].bbox);
            let b = box4(&pair[1].bbox);
            for c in 0..4 {
                diff[c].push((b[c] - a[c]) / gap);
            }
        }
        for tb in &input[..input.len() - 1] {
            let gap = (last.frame - tb.frame) as f64;
            let cur = box4(&tb.bbox);
            for c in 0..4 {
                rel_in[c].push((cur[c] - last_box[c]) / gap);
            }
        }
        for tb in target {
            let cur = box4(&tb.bbox);
            for c in 0..4 {
                rel_tg[c].push(cur[c] - last_box[c]);
            }
        }
    }

    let fit_group = |samples: &mut [Vec<f64>; 4]| -> Result<[ChannelStats; 4]> {
        let mut out = [ChannelStats::IDENTITY; 4];
        for (c, values) in samples.iter_mut().enumerate() {
            if values.is_empty() {
                return Err(Error::NotEnoughSamples { needed: 2, got: 1 });
            }
            values.sort_by(f64::total_cmp);
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            out[c] = ChannelStats { mean, std: var.sqrt().max(1e-8) };
        }
        Ok(out)
    };

    Ok(FeatureStats {
        diff: fit_group(&mut diff)?,
        rel_input: fit_group(&mut rel_in)?,
        rel_target: fit_group(&mut rel_tg)?,
    })
}
