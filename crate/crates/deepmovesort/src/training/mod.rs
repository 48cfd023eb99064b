//! Motion-model training: window building, augmentation, the symmetric
//! Huber objective, AdamW, and a finite-difference gradient verifier.

mod adamw;
mod loss;
mod windows;

pub use adamw::AdamW;
pub use loss::{e2e_loss, huber, huber_derivative, LossOutput};
pub use windows::{make_windows, prepare_window, AugmentParams, PreparedWindow, TrainingWindow};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::features::{fit_stats, FeatureStats, TimedBox};
use crate::filter::TransFilterModel;
use crate::rng::substream;

/// RNG stream tags; see [`crate::rng::substream`].
const STREAM_SHUFFLE: u64 = 1;
const STREAM_AUGMENT: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    /// Epochs of linear warmup before the step decay starts.
    pub warmup_epochs: usize,
    /// After warmup the rate drops by 10x every this many epochs.
    pub lr_decay_every: usize,
    pub noise_scale: f64,
    pub mask_prob: f64,
    pub huber_delta: f64,
    /// Window anchor stride along each track.
    pub stride: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 12,
            batch_size: 32,
            lr: 5e-5,
            weight_decay: 1e-4,
            warmup_epochs: 4,
            lr_decay_every: 4,
            noise_scale: 0.05,
            mask_prob: 0.2,
            huber_delta: 0.5,
            stride: 1,
            seed: 0,
        }
    }
}

/// Learning rate for a given epoch: linear warmup to `lr`, then 10x step
/// decay every `lr_decay_every` epochs.
pub fn lr_at(cfg: &TrainConfig, epoch: usize) -> f64 {
    if epoch < cfg.warmup_epochs {
        cfg.lr * (epoch + 1) as f64 / cfg.warmup_epochs as f64
    } else {
        let past = epoch - cfg.warmup_epochs;
        cfg.lr * 0.1f64.powi((past / cfg.lr_decay_every.max(1)) as i32)
    }
}

/// Windows from every track, in track order then anchor order. The position
/// in this list is the window's augmentation index, so the same corpus
/// always augments the same way.
pub fn make_training_set(
    tracks: &[Vec<TimedBox>],
    history_len: usize,
    m_max: usize,
    stride: usize,
) -> Vec<TrainingWindow> {
    tracks
        .iter()
        .flat_map(|t| make_windows(t, history_len, m_max, stride))
        .collect()
}

/// Standardization constants over the clean windows.
pub fn fit_window_stats(windows: &[TrainingWindow]) -> Result<FeatureStats> {
    fit_stats(windows.iter().map(|w| (w.history.as_slice(), w.future.as_slice())))
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean window loss per epoch, accumulated in window-index order so the
    /// value is independent of the shuffle.
    pub epoch_losses: Vec<f64>,
    pub windows: usize,
}

/// Run the full loop: per-epoch shuffle, fixed per-window augmentation,
/// per-window forward/backward with gradients averaged over each batch,
/// one AdamW step per batch.
pub fn train(
    model: &mut TransFilterModel,
    windows: &[TrainingWindow],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if windows.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    let aug = AugmentParams { noise_scale: cfg.noise_scale, mask_prob: cfg.mask_prob };
    let mut opt = AdamW::new(&model.params, cfg.weight_decay);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = lr_at(cfg, epoch);
        let mut order: Vec<usize> = (0..windows.len()).collect();
        order.shuffle(&mut substream(cfg.seed, STREAM_SHUFFLE, epoch as u64));
        let mut losses = vec![0.0f64; windows.len()];
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.params.zeros_like();
            let scale = 1.0 / batch.len() as f64;
            for &wi in batch {
                let mut rng = substream(cfg.seed, STREAM_AUGMENT, wi as u64);
                let prep =
                    prepare_window(&windows[wi], &model.stats, model.hyper.m_max, Some((&aug, &mut rng)))?;
                let enc = model.encode_features(&prep.features);
                let head = model.head_forward(&enc);
                let dec = model.decode_tokens(&enc, &prep.dec_tokens);
                let mut out = e2e_loss(&head.out, &dec.out, &prep.targets, &prep.valid, cfg.huber_delta)?;
                losses[wi] = out.loss;
                out.d_head.scale(scale);
                out.d_dec.scale(scale);
                model.backward(&enc, &head, &out.d_head, Some((&dec, &out.d_dec)), &mut grads);
            }
            opt.step(&mut model.params, &grads, lr);
        }
        let mean = losses.iter().sum::<f64>() / windows.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        epoch_losses.push(mean);
    }
    Ok(TrainReport { epoch_losses, windows: windows.len() })
}

/// Compare every analytic parameter gradient of the training objective
/// against central finite differences with step 1e-4. Returns the worst
/// relative error, using `max(1e-4, |analytic|, |numeric|)` as denominator.
pub fn gradient_check(model: &mut TransFilterModel, prep: &PreparedWindow, huber_delta: f64) -> Result<f64> {
    let loss_of = |m: &TransFilterModel| -> Result<f64> {
        let enc = m.encode_features(&prep.features);
        let head = m.head_forward(&enc);
        let dec = m.decode_tokens(&enc, &prep.dec_tokens);
        Ok(e2e_loss(&head.out, &dec.out, &prep.targets, &prep.valid, huber_delta)?.loss)
    };

    let enc = model.encode_features(&prep.features);
    let head = model.head_forward(&enc);
    let dec = model.decode_tokens(&enc, &prep.dec_tokens);
    let out = e2e_loss(&head.out, &dec.out, &prep.targets, &prep.valid, huber_delta)?;
    let mut grads = model.params.zeros_like();
    model.backward(&enc, &head, &out.d_head, Some((&dec, &out.d_dec)), &mut grads);
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    grads.for_each(&mut |_, m| analytic.push(m.data().to_vec()));

    fn bump(params: &mut crate::filter::TransFilterParams, tensor: usize, i: usize, delta: f64) {
        let mut k = 0;
        params.for_each_mut(&mut |_, m| {
            if k == tensor {
                m.data_mut()[i] += delta;
            }
            k += 1;
        });
    }

    const H: f64 = 1e-4;
    let mut worst = 0.0f64;
    for (tensor, grad) in analytic.iter().enumerate() {
        for (i, &ga) in grad.iter().enumerate() {
            bump(&mut model.params, tensor, i, H);
            let up = loss_of(model)?;
            bump(&mut model.params, tensor, i, -2.0 * H);
            let down = loss_of(model)?;
            bump(&mut model.params, tensor, i, H);
            let gn = (up - down) / (2.0 * H);
            let rel = (ga - gn).abs() / ga.abs().max(gn.abs()).max(1e-4);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
