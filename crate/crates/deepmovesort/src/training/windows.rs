//! Sliding windows over ground-truth tracks and their tensor preparation.

use rand::RngCore;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::{
    extract_input, extract_observation_token, extract_target, FeatureStats, TimedBox,
    INPUT_CHANNELS,
};
use crate::geometry::BoundingBox;
use crate::nn::Mat;

/// One supervised example: a history to encode and the track's actual
/// future inside the prediction horizon.
#[derive(Debug, Clone)]
pub struct TrainingWindow {
    pub history: Vec<TimedBox>,
    pub future: Vec<TimedBox>,
}

/// Slide over `track` (frames strictly increasing) anchoring a window at
/// every `stride`-th observation, starting from the first. The history is
/// the anchor plus up to `history_len - 1` predecessors; the future is every
/// later observation within `m_max` frames. Anchors with no future in range
/// produce nothing.
pub fn make_windows(
    track: &[TimedBox],
    history_len: usize,
    m_max: usize,
    stride: usize,
) -> Vec<TrainingWindow> {
    assert!(stride >= 1, "stride must be positive");
    assert!(history_len >= 1, "history must hold at least the anchor");
    let mut out = Vec::new();
    for a in (0..track.len()).step_by(stride) {
        let last_frame = track[a].frame;
        let future: Vec<TimedBox> = track[a + 1..]
            .iter()
            .take_while(|tb| tb.frame - last_frame <= m_max as i64)
            .copied()
            .collect();
        if future.is_empty() {
            continue;
        }
        let start = (a + 1).saturating_sub(history_len);
        out.push(TrainingWindow { history: track[start..=a].to_vec(), future });
    }
    out
}

/// Augmentation knobs. Noise is Gaussian per coordinate with standard
/// deviation `noise_scale` times the box's own width (for x, w) or height
/// (for y, h); masking drops non-final history rows independently.
#[derive(Debug, Clone, Copy)]
pub struct AugmentParams {
    pub noise_scale: f64,
    pub mask_prob: f64,
}

/// Window tensors ready for the model.
pub struct PreparedWindow {
    /// n x 13 encoder input.
    pub features: Mat,
    /// k x 13 decoder tokens, one per valid step in horizon order.
    pub dec_tokens: Mat,
    /// m_max x 4 standardized clean offsets; rows of invalid steps are zero.
    pub targets: Mat,
    pub valid: Vec<bool>,
}

fn noised_box(b: &BoundingBox, scale: f64, rng: &mut dyn RngCore) -> BoundingBox {
    let dx = Normal::new(0.0, scale * b.w).expect("finite std").sample(rng);
    let dy = Normal::new(0.0, scale * b.h).expect("finite std").sample(rng);
    let dw = Normal::new(0.0, scale * b.w).expect("finite std").sample(rng);
    let dh = Normal::new(0.0, scale * b.h).expect("finite std").sample(rng);
    BoundingBox {
        x: b.x + dx,
        y: b.y + dy,
        w: (b.w + dw).max(1e-6),
        h: (b.h + dh).max(1e-6),
        confidence: b.confidence,
    }
}

/// Build tensors for one window. With `aug` the history rows are noised and
/// non-final rows dropped with `mask_prob`, and the decoder sees noised
/// copies of the future observations; supervision always stays clean. The
/// RNG draw order is pinned (mask flags, then history noise, then token
/// noise) so a given `(seed, window)` pair always augments identically.
pub fn prepare_window(
    window: &TrainingWindow,
    stats: &FeatureStats,
    m_max: usize,
    mut aug: Option<(&AugmentParams, &mut dyn RngCore)>,
) -> Result<PreparedWindow> {
    let history: Vec<TimedBox> = match &mut aug {
        Some((params, rng)) => {
            let n = window.history.len();
            let keep: Vec<bool> = (0..n)
                .map(|k| {
                    if k + 1 == n {
                        true
                    } else {
                        use rand::Rng;
                        rng.gen::<f64>() >= params.mask_prob
                    }
                })
                .collect();
            window
                .history
                .iter()
                .zip(&keep)
                .filter(|(_, keep)| **keep)
                .map(|(tb, _)| TimedBox::new(tb.frame, noised_box(&tb.bbox, params.noise_scale, *rng)))
                .collect()
        }
        None => window.history.clone(),
    };
    let feature_rows = extract_input(&history, stats)?;
    let mut features = Mat::zeros(feature_rows.0.len(), INPUT_CHANNELS);
    for (r, row) in feature_rows.0.iter().enumerate() {
        features.row_mut(r).copy_from_slice(row);
    }
    let last = *history.last().expect("non-empty history");

    let target_rows = extract_target(&last, &window.future, stats)?;
    let mut targets = Mat::zeros(m_max, 4);
    let mut valid = vec![false; m_max];
    let mut tokens = Vec::with_capacity(window.future.len());
    for (i, row) in target_rows.0.iter().enumerate() {
        let dt = row[4] as usize;
        if dt < 1 || dt > m_max {
            return Err(Error::HorizonTooLong { m: dt, m_max });
        }
        targets.row_mut(dt - 1).copy_from_slice(&row[..4]);
        valid[dt - 1] = true;
        let obs = &window.future[i];
        let obs_box = match &mut aug {
            Some((params, rng)) => noised_box(&obs.bbox, params.noise_scale, *rng),
            None => obs.bbox,
        };
        tokens.push(extract_observation_token(&TimedBox::new(obs.frame, obs_box), &last, stats)?);
    }
    let mut dec_tokens = Mat::zeros(tokens.len(), INPUT_CHANNELS);
    for (r, row) in tokens.iter().enumerate() {
        dec_tokens.row_mut(r).copy_from_slice(row);
    }
    Ok(PreparedWindow { features, dec_tokens, targets, valid })
}
