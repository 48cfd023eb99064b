//! Transformer motion model.
//!
//! A track's observation history is embedded token-wise, tagged with a
//! recency-anchored positional encoding and pushed through a small
//! post-norm encoder stack. Two readers share that encoding:
//!
//! - a pooled head emits box offsets for every horizon 1..=m_max in one
//!   shot, so lookahead during occlusion costs nothing beyond the encode;
//! - a cross-attention decoder conditions on a single new observation and
//!   emits its denoised offset, reusing the token embedding on the input
//!   side (no positional encoding, no self-attention: one token).
//!
//! All outputs live in standardized offset space relative to the newest
//! history entry and are de-standardized at the edges.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::MeasurementBuffer;
use crate::error::{Error, Result};
use crate::features::{
    destandardize_target, extract_input, extract_observation_token, FeatureStats, TimedBox,
    INPUT_CHANNELS,
};
use crate::geometry::{AffineTransform, BoundingBox};
use crate::nn::{
    silu_backward, silu_forward, FeedForward, FeedForwardCache, LayerNorm, LayerNormCache, Linear,
    LinearCache, Mat, MhaCache, MultiHeadAttention, SiluCache,
};

use super::rpe::recency_encoding;
use super::TrackFilter;

/// Architecture sizes. `history_len` caps how many trailing observations the
/// encoder reads; `m_max` is the one-shot prediction horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransFilterHyper {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub history_len: usize,
    pub m_max: usize,
}

impl Default for TransFilterHyper {
    fn default() -> Self {
        TransFilterHyper { d_model: 32, n_heads: 4, n_layers: 2, history_len: 10, m_max: 30 }
    }
}

impl TransFilterHyper {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.d_model % 2 != 0 || self.d_model % self.n_heads.max(1) != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be even and divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_heads == 0 || self.n_layers == 0 || self.history_len == 0 || self.m_max == 0 {
            return Err(Error::Config(
                "n_heads, n_layers, history_len and m_max must all be positive".into(),
            ));
        }
        Ok(())
    }

    /// Hidden width of the position-wise feed-forward blocks.
    pub fn ff_dim(&self) -> usize {
        4 * self.d_model
    }
}

/// Two Linear+LayerNorm+SiLU blocks lifting a 13-channel token to d_model.
/// Shared between encoder history rows and decoder observation tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbed {
    pub fc1: Linear,
    pub ln1: LayerNorm,
    pub fc2: Linear,
    pub ln2: LayerNorm,
}

pub struct TokenEmbedCache {
    fc1: LinearCache,
    ln1: LayerNormCache,
    s1: SiluCache,
    fc2: LinearCache,
    ln2: LayerNormCache,
    s2: SiluCache,
}

impl TokenEmbed {
    fn new(d: usize, rng: &mut impl Rng) -> Self {
        TokenEmbed {
            fc1: Linear::new(INPUT_CHANNELS, d, rng),
            ln1: LayerNorm::new(d),
            fc2: Linear::new(d, d, rng),
            ln2: LayerNorm::new(d),
        }
    }

    fn zeros_like(&self) -> TokenEmbed {
        TokenEmbed {
            fc1: self.fc1.zeros_like(),
            ln1: self.ln1.zeros_like(),
            fc2: self.fc2.zeros_like(),
            ln2: self.ln2.zeros_like(),
        }
    }

    fn forward(&self, x: &Mat) -> (Mat, TokenEmbedCache) {
        let (h1, fc1) = self.fc1.forward(x);
        let (n1, ln1) = self.ln1.forward(&h1);
        let (a1, s1) = silu_forward(&n1);
        let (h2, fc2) = self.fc2.forward(&a1);
        let (n2, ln2) = self.ln2.forward(&h2);
        let (a2, s2) = silu_forward(&n2);
        (a2, TokenEmbedCache { fc1, ln1, s1, fc2, ln2, s2 })
    }

    fn backward(&self, cache: &TokenEmbedCache, dy: &Mat, grad: &mut TokenEmbed) -> Mat {
        let dn2 = silu_backward(&cache.s2, dy);
        let dh2 = self.ln2.backward(&cache.ln2, &dn2, &mut grad.ln2);
        let da1 = self.fc2.backward(&cache.fc2, &dh2, &mut grad.fc2);
        let dn1 = silu_backward(&cache.s1, &da1);
        let dh1 = self.ln1.backward(&cache.ln1, &dn1, &mut grad.ln1);
        self.fc1.backward(&cache.fc1, &dh1, &mut grad.fc1)
    }

    fn for_each<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a Mat)) {
        self.fc1.for_each(&format!("{prefix}.fc1"), f);
        self.ln1.for_each(&format!("{prefix}.ln1"), f);
        self.fc2.for_each(&format!("{prefix}.fc2"), f);
        self.ln2.for_each(&format!("{prefix}.ln2"), f);
    }

    fn for_each_mut<'a>(&'a mut self, prefix: &str, f: &mut impl FnMut(String, &'a mut Mat)) {
        self.fc1.for_each_mut(&format!("{prefix}.fc1"), f);
        self.ln1.for_each_mut(&format!("{prefix}.ln1"), f);
        self.fc2.for_each_mut(&format!("{prefix}.fc2"), f);
        self.ln2.for_each_mut(&format!("{prefix}.ln2"), f);
    }
}

/// Post-norm encoder block: LN(x + SelfAttn(x)), then LN(x + FFN(x)).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub attn: MultiHeadAttention,
    pub ln_attn: LayerNorm,
    pub ffn: FeedForward,
    pub ln_ffn: LayerNorm,
}

pub struct EncoderLayerCache {
    attn: MhaCache,
    ln_attn: LayerNormCache,
    ffn: FeedForwardCache,
    ln_ffn: LayerNormCache,
}

impl EncoderLayer {
    fn new(d: usize, n_heads: usize, ff_dim: usize, rng: &mut impl Rng) -> Self {
        EncoderLayer {
            attn: MultiHeadAttention::new(d, n_heads, rng),
            ln_attn: LayerNorm::new(d),
            ffn: FeedForward::new(d, ff_dim, rng),
            ln_ffn: LayerNorm::new(d),
        }
    }

    fn zeros_like(&self) -> EncoderLayer {
        EncoderLayer {
            attn: self.attn.zeros_like(),
            ln_attn: self.ln_attn.zeros_like(),
            ffn: self.ffn.zeros_like(),
            ln_ffn: self.ln_ffn.zeros_like(),
        }
    }

    fn forward(&self, x: &Mat) -> (Mat, EncoderLayerCache) {
        let (a, attn) = self.attn.forward(x, x);
        let mut sum1 = x.clone();
        sum1.add_assign(&a);
        let (y1, ln_attn) = self.ln_attn.forward(&sum1);
        let (f, ffn) = self.ffn.forward(&y1);
        let mut sum2 = y1.clone();
        sum2.add_assign(&f);
        let (y2, ln_ffn) = self.ln_ffn.forward(&sum2);
        (y2, EncoderLayerCache { attn, ln_attn, ffn, ln_ffn })
    }

    fn backward(&self, cache: &EncoderLayerCache, dy: &Mat, grad: &mut EncoderLayer) -> Mat {
        let dsum2 = self.ln_ffn.backward(&cache.ln_ffn, dy, &mut grad.ln_ffn);
        let mut dy1 = dsum2.clone();
        dy1.add_assign(&self.ffn.backward(&cache.ffn, &dsum2, &mut grad.ffn));
        let dsum1 = self.ln_attn.backward(&cache.ln_attn, &dy1, &mut grad.ln_attn);
        let (dq, dkv) = self.attn.backward(&cache.attn, &dsum1, &mut grad.attn);
        let mut dx = dsum1;
        dx.add_assign(&dq);
        dx.add_assign(&dkv);
        dx
    }

    fn for_each<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a Mat)) {
        self.attn.for_each(&format!("{prefix}.attn"), f);
        self.ln_attn.for_each(&format!("{prefix}.ln_attn"), f);
        self.ffn.for_each(&format!("{prefix}.ffn"), f);
        self.ln_ffn.for_each(&format!("{prefix}.ln_ffn"), f);
    }

    fn for_each_mut<'a>(&'a mut self, prefix: &str, f: &mut impl FnMut(String, &'a mut Mat)) {
        self.attn.for_each_mut(&format!("{prefix}.attn"), f);
        self.ln_attn.for_each_mut(&format!("{prefix}.ln_attn"), f);
        self.ffn.for_each_mut(&format!("{prefix}.ffn"), f);
        self.ln_ffn.for_each_mut(&format!("{prefix}.ln_ffn"), f);
    }
}

/// Pooled prediction head: mean over encoder rows feeds
/// Linear -> LayerNorm -> SiLU -> Linear(d -> m_max * 4).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionHead {
    pub fc1: Linear,
    pub ln: LayerNorm,
    pub fc2: Linear,
}

pub struct HeadCache {
    fc1: LinearCache,
    ln: LayerNormCache,
    s: SiluCache,
    fc2: LinearCache,
}

impl PredictionHead {
    fn new(d: usize, m_max: usize, rng: &mut impl Rng) -> Self {
        PredictionHead {
            fc1: Linear::new(d, d, rng),
            ln: LayerNorm::new(d),
            fc2: Linear::new(d, m_max * 4, rng),
        }
    }

    fn zeros_like(&self) -> PredictionHead {
        PredictionHead { fc1: self.fc1.zeros_like(), ln: self.ln.zeros_like(), fc2: self.fc2.zeros_like() }
    }

    fn forward(&self, pooled: &Mat) -> (Mat, HeadCache) {
        let (h, fc1) = self.fc1.forward(pooled);
        let (n, ln) = self.ln.forward(&h);
        let (a, s) = silu_forward(&n);
        let (out, fc2) = self.fc2.forward(&a);
        (out, HeadCache { fc1, ln, s, fc2 })
    }

    fn backward(&self, cache: &HeadCache, dy: &Mat, grad: &mut PredictionHead) -> Mat {
        let da = self.fc2.backward(&cache.fc2, dy, &mut grad.fc2);
        let dn = silu_backward(&cache.s, &da);
        let dh = self.ln.backward(&cache.ln, &dn, &mut grad.ln);
        self.fc1.backward(&cache.fc1, &dh, &mut grad.fc1)
    }

    fn for_each<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a Mat)) {
        self.fc1.for_each(&format!("{prefix}.fc1"), f);
        self.ln.for_each(&format!("{prefix}.ln"), f);
        self.fc2.for_each(&format!("{prefix}.fc2"), f);
    }

    fn for_each_mut<'a>(&'a mut self, prefix: &str, f: &mut impl FnMut(String, &'a mut Mat)) {
        self.fc1.for_each_mut(&format!("{prefix}.fc1"), f);
        self.ln.for_each_mut(&format!("{prefix}.ln"), f);
        self.fc2.for_each_mut(&format!("{prefix}.fc2"), f);
    }
}

/// Observation decoder: cross-attention from the embedded observation token
/// into the encoder rows, post-norm residuals, then a linear read-out of the
/// four standardized offset coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub cross: MultiHeadAttention,
    pub ln_attn: LayerNorm,
    pub ffn: FeedForward,
    pub ln_ffn: LayerNorm,
    pub out: Linear,
}

pub struct DecoderCache {
    cross: MhaCache,
    ln_attn: LayerNormCache,
    ffn: FeedForwardCache,
    ln_ffn: LayerNormCache,
    out: LinearCache,
}

impl Decoder {
    fn new(d: usize, n_heads: usize, ff_dim: usize, rng: &mut impl Rng) -> Self {
        Decoder {
            cross: MultiHeadAttention::new(d, n_heads, rng),
            ln_attn: LayerNorm::new(d),
            ffn: FeedForward::new(d, ff_dim, rng),
            ln_ffn: LayerNorm::new(d),
            out: Linear::new(d, 4, rng),
        }
    }

    fn zeros_like(&self) -> Decoder {
        Decoder {
            cross: self.cross.zeros_like(),
            ln_attn: self.ln_attn.zeros_like(),
            ffn: self.ffn.zeros_like(),
            ln_ffn: self.ln_ffn.zeros_like(),
            out: self.out.zeros_like(),
        }
    }

    fn forward(&self, q: &Mat, enc_out: &Mat) -> (Mat, DecoderCache) {
        let (a, cross) = self.cross.forward(q, enc_out);
        let mut sum1 = q.clone();
        sum1.add_assign(&a);
        let (y1, ln_attn) = self.ln_attn.forward(&sum1);
        let (ff, ffn) = self.ffn.forward(&y1);
        let mut sum2 = y1.clone();
        sum2.add_assign(&ff);
        let (y2, ln_ffn) = self.ln_ffn.forward(&sum2);
        let (rel, out) = self.out.forward(&y2);
        (rel, DecoderCache { cross, ln_attn, ffn, ln_ffn, out })
    }

    /// Returns gradients for the embedded query tokens and encoder rows.
    fn backward(&self, cache: &DecoderCache, dy: &Mat, grad: &mut Decoder) -> (Mat, Mat) {
        let dy2 = self.out.backward(&cache.out, dy, &mut grad.out);
        let dsum2 = self.ln_ffn.backward(&cache.ln_ffn, &dy2, &mut grad.ln_ffn);
        let mut dy1 = dsum2.clone();
        dy1.add_assign(&self.ffn.backward(&cache.ffn, &dsum2, &mut grad.ffn));
        let dsum1 = self.ln_attn.backward(&cache.ln_attn, &dy1, &mut grad.ln_attn);
        let (dq_attn, denc) = self.cross.backward(&cache.cross, &dsum1, &mut grad.cross);
        let mut dq = dsum1;
        dq.add_assign(&dq_attn);
        (dq, denc)
    }

    fn for_each<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a Mat)) {
        self.cross.for_each(&format!("{prefix}.cross"), f);
        self.ln_attn.for_each(&format!("{prefix}.ln_attn"), f);
        self.ffn.for_each(&format!("{prefix}.ffn"), f);
        self.ln_ffn.for_each(&format!("{prefix}.ln_ffn"), f);
        self.out.for_each(&format!("{prefix}.out"), f);
    }

    fn for_each_mut<'a>(&'a mut self, prefix: &str, f: &mut impl FnMut(String, &'a mut Mat)) {
        self.cross.for_each_mut(&format!("{prefix}.cross"), f);
        self.ln_attn.for_each_mut(&format!("{prefix}.ln_attn"), f);
        self.ffn.for_each_mut(&format!("{prefix}.ffn"), f);
        self.ln_ffn.for_each_mut(&format!("{prefix}.ln_ffn"), f);
        self.out.for_each_mut(&format!("{prefix}.out"), f);
    }
}

/// Every parameter of the model. Doubles as the gradient container: a
/// `zeros_like` twin accumulates via the shared enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransFilterParams {
    pub embed: TokenEmbed,
    pub encoder: Vec<EncoderLayer>,
    pub head: PredictionHead,
    pub decoder: Decoder,
}

impl TransFilterParams {
    pub fn zeros_like(&self) -> TransFilterParams {
        TransFilterParams {
            embed: self.embed.zeros_like(),
            encoder: self.encoder.iter().map(EncoderLayer::zeros_like).collect(),
            head: self.head.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }

    /// Canonical parameter walk. Serialization, optimizer state and gradient
    /// application all iterate in exactly this order.
    pub fn for_each<'a>(&'a self, f: &mut impl FnMut(String, &'a Mat)) {
        self.embed.for_each("token_embed", f);
        for (i, layer) in self.encoder.iter().enumerate() {
            layer.for_each(&format!("encoder.{i}"), f);
        }
        self.head.for_each("head", f);
        self.decoder.for_each("decoder", f);
    }

    pub fn for_each_mut<'a>(&'a mut self, f: &mut impl FnMut(String, &'a mut Mat)) {
        self.embed.for_each_mut("token_embed", f);
        for (i, layer) in self.encoder.iter_mut().enumerate() {
            layer.for_each_mut(&format!("encoder.{i}"), f);
        }
        self.head.for_each_mut("head", f);
        self.decoder.for_each_mut("decoder", f);
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each(&mut |_, m| n += m.data().len());
        n
    }
}

/// A trained (or freshly initialized) motion model plus the feature
/// standardization constants it was fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct TransFilterModel {
    pub hyper: TransFilterHyper,
    pub stats: FeatureStats,
    pub params: TransFilterParams,
}

/// Everything the encoder produced for one history, caches included.
pub struct EncodeForward {
    embed_cache: TokenEmbedCache,
    layer_caches: Vec<EncoderLayerCache>,
    /// Per-row encoder outputs, n x d.
    pub enc_out: Mat,
    /// Temporal mean over rows, 1 x d.
    pub pooled: Mat,
}

pub struct HeadForward {
    cache: HeadCache,
    /// 1 x (m_max * 4); row-major horizon blocks of standardized offsets.
    pub out: Mat,
}

pub struct DecodeForward {
    embed_cache: TokenEmbedCache,
    cache: DecoderCache,
    /// k x 4 standardized offsets, one row per observation token.
    pub out: Mat,
}

impl TransFilterModel {
    pub fn new(hyper: TransFilterHyper, stats: FeatureStats, rng: &mut impl Rng) -> Result<Self> {
        hyper.validate()?;
        let d = hyper.d_model;
        let params = TransFilterParams {
            embed: TokenEmbed::new(d, rng),
            encoder: (0..hyper.n_layers)
                .map(|_| EncoderLayer::new(d, hyper.n_heads, hyper.ff_dim(), rng))
                .collect(),
            head: PredictionHead::new(d, hyper.m_max, rng),
            decoder: Decoder::new(d, hyper.n_heads, hyper.ff_dim(), rng),
        };
        Ok(TransFilterModel { hyper, stats, params })
    }

    /// Encode the trailing `history_len` observations of `history`.
    pub fn encode(&self, history: &[TimedBox]) -> Result<EncodeForward> {
        let start = history.len().saturating_sub(self.hyper.history_len);
        let features = extract_input(&history[start..], &self.stats)?;
        let n = features.0.len();
        let mut x = Mat::zeros(n, INPUT_CHANNELS);
        for (r, row) in features.0.iter().enumerate() {
            x.row_mut(r).copy_from_slice(row);
        }
        Ok(self.encode_features(&x))
    }

    /// Matrix-level encode used by both inference and training.
    pub fn encode_features(&self, features: &Mat) -> EncodeForward {
        let (mut x, embed_cache) = self.params.embed.forward(features);
        x.add_assign(&recency_encoding(x.rows(), self.hyper.d_model));
        let mut layer_caches = Vec::with_capacity(self.params.encoder.len());
        for layer in &self.params.encoder {
            let (y, cache) = layer.forward(&x);
            layer_caches.push(cache);
            x = y;
        }
        let n = x.rows() as f64;
        let mut pooled = Mat::zeros(1, self.hyper.d_model);
        for r in 0..x.rows() {
            for c in 0..self.hyper.d_model {
                *pooled.at_mut(0, c) += x.at(r, c) / n;
            }
        }
        EncodeForward { embed_cache, layer_caches, enc_out: x, pooled }
    }

    pub fn head_forward(&self, enc: &EncodeForward) -> HeadForward {
        let (out, cache) = self.params.head.forward(&enc.pooled);
        HeadForward { cache, out }
    }

    /// Run the decoder on raw 13-channel observation tokens (k x 13).
    pub fn decode_tokens(&self, enc: &EncodeForward, tokens: &Mat) -> DecodeForward {
        let (q, embed_cache) = self.params.embed.forward(tokens);
        let (out, cache) = self.params.decoder.forward(&q, &enc.enc_out);
        DecodeForward { embed_cache, cache, out }
    }

    /// De-standardize the head output into pixel-fraction boxes anchored at
    /// `last`, one per horizon 1..=m_max.
    pub fn predict_boxes(&self, head_out: &Mat, last: &BoundingBox) -> Vec<BoundingBox> {
        let row = head_out.row(0);
        (0..self.hyper.m_max)
            .map(|j| {
                let coords: [f64; 4] = row[4 * j..4 * j + 4].try_into().expect("head block is 4 wide");
                destandardize_target(&coords, last, &self.stats)
            })
            .collect()
    }

    /// Denoise one observation against the encoded history.
    pub fn filter_box(&self, enc: &EncodeForward, last: &TimedBox, obs: &TimedBox) -> Result<BoundingBox> {
        let token = extract_observation_token(obs, last, &self.stats)?;
        let tokens = Mat::from_vec(1, INPUT_CHANNELS, token.to_vec());
        let dec = self.decode_tokens(enc, &tokens);
        let coords: [f64; 4] = dec.out.row(0).try_into().expect("decoder emits 4 coords");
        Ok(destandardize_target(&coords, &last.bbox, &self.stats))
    }

    /// Backpropagate through head, optional decoder, encoder stack and the
    /// shared token embedding, accumulating into `grads`.
    pub fn backward(
        &self,
        enc: &EncodeForward,
        head: &HeadForward,
        d_head_out: &Mat,
        dec: Option<(&DecodeForward, &Mat)>,
        grads: &mut TransFilterParams,
    ) {
        let d = self.hyper.d_model;
        let n_rows = enc.enc_out.rows();
        let mut d_enc_out = Mat::zeros(n_rows, d);
        if let Some((dec_fwd, d_dec_out)) = dec {
            let (d_q, d_enc_dec) = self.params.decoder.backward(&dec_fwd.cache, d_dec_out, &mut grads.decoder);
            d_enc_out.add_assign(&d_enc_dec);
            // Shared embedding: observation-token path. Input gradient of
            // the raw features is discarded (they are data, not parameters).
            self.params.embed.backward(&dec_fwd.embed_cache, &d_q, &mut grads.embed);
        }
        let d_pooled = self.params.head.backward(&head.cache, d_head_out, &mut grads.head);
        let n = n_rows as f64;
        for r in 0..n_rows {
            for c in 0..d {
                *d_enc_out.at_mut(r, c) += d_pooled.at(0, c) / n;
            }
        }
        let mut dx = d_enc_out;
        for i in (0..self.params.encoder.len()).rev() {
            dx = self.params.encoder[i].backward(&enc.layer_caches[i], &dx, &mut grads.encoder[i]);
        }
        // The positional encoding is an additive constant: gradient passes
        // through unchanged into the embedding.
        self.params.embed.backward(&enc.embed_cache, &dx, &mut grads.embed);
    }
}

/// Per-track state: an `Arc` of the shared model plus the cached encoding of
/// the current buffer contents. The cache is invalidated by the buffer's
/// dirty flag, so misses during occlusion reuse the same encoder pass.
pub struct TransFilterTrack {
    model: Arc<TransFilterModel>,
    ctx: Option<CachedContext>,
    encoder_passes: usize,
}

struct CachedContext {
    enc: EncodeForward,
    last: TimedBox,
    predictions: Vec<BoundingBox>,
}

impl TransFilterTrack {
    pub fn new(model: Arc<TransFilterModel>) -> Self {
        TransFilterTrack { model, ctx: None, encoder_passes: 0 }
    }

    /// How many times the encoder has actually run; occlusion reuse keeps
    /// this flat while the buffer is unchanged.
    pub fn encoder_passes(&self) -> usize {
        self.encoder_passes
    }

    fn ensure_context(&mut self, buffer: &mut MeasurementBuffer) -> Result<()> {
        if self.ctx.is_some() && !buffer.is_dirty() {
            return Ok(());
        }
        let history = buffer.history();
        let enc = self.model.encode(history)?;
        let last = *history.last().ok_or(Error::EmptyHistory)?;
        let head = self.model.head_forward(&enc);
        let predictions = self.model.predict_boxes(&head.out, &last.bbox);
        self.ctx = Some(CachedContext { enc, last, predictions });
        self.encoder_passes += 1;
        buffer.mark_clean();
        Ok(())
    }
}

impl TrackFilter for TransFilterTrack {
    fn predict(&mut self, buffer: &mut MeasurementBuffer, m: usize) -> Result<Vec<BoundingBox>> {
        let m_max = self.model.hyper.m_max;
        if m > m_max {
            return Err(Error::HorizonTooLong { m, m_max });
        }
        self.ensure_context(buffer)?;
        Ok(self.ctx.as_ref().expect("context ensured").predictions[..m].to_vec())
    }

    fn filter(&mut self, buffer: &mut MeasurementBuffer, obs: &TimedBox) -> Result<BoundingBox> {
        self.ensure_context(buffer)?;
        let ctx = self.ctx.as_ref().expect("context ensured");
        let mut filtered = self.model.filter_box(&ctx.enc, &ctx.last, obs)?;
        filtered.confidence = obs.bbox.confidence;
        Ok(filtered)
    }

    fn apply_camera_motion(&mut self, _transform: &AffineTransform) {
        // State lives in the buffer; realigning it flips the dirty flag and
        // the next predict/filter re-encodes.
    }

    fn max_horizon(&self) -> Option<usize> {
        Some(self.model.hyper.m_max)
    }

    fn encoder_passes(&self) -> Option<usize> {
        Some(self.encoder_passes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffer::{BufferConfig, BufferPolicy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_hyper() -> TransFilterHyper {
        TransFilterHyper { d_model: 4, n_heads: 2, n_layers: 1, history_len: 3, m_max: 2 }
    }

    fn tiny_model(seed: u64) -> TransFilterModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TransFilterModel::new(tiny_hyper(), FeatureStats::identity(), &mut rng).unwrap()
    }

    fn tb(frame: i64, x: f64, y: f64) -> TimedBox {
        TimedBox::new(frame, BoundingBox::xywh(x, y, 0.1, 0.2))
    }

    fn probe_loss(y: &Mat) -> f64 {
        let mut acc = 0.0;
        for r in 0..y.rows() {
            for c in 0..y.cols() {
                acc += y.at(r, c) * (1.0 + 0.3 * ((r * 7 + c * 3) % 5) as f64);
            }
        }
        acc
    }

    fn probe_grad(y: &Mat) -> Mat {
        Mat::from_fn(y.rows(), y.cols(), |r, c| 1.0 + 0.3 * ((r * 7 + c * 3) % 5) as f64)
    }

    #[test]
    fn hyper_validation() {
        assert!(tiny_hyper().validate().is_ok());
        let mut bad = tiny_hyper();
        bad.d_model = 6;
        bad.n_heads = 4;
        assert!(bad.validate().is_err());
        let mut zero = tiny_hyper();
        zero.m_max = 0;
        assert!(zero.validate().is_err());
    }

    #[test]
    fn shapes_are_consistent() {
        let model = tiny_model(7);
        let history = vec![tb(0, 0.1, 0.1), tb(1, 0.12, 0.1), tb(2, 0.14, 0.1)];
        let enc = model.encode(&history).unwrap();
        assert_eq!((enc.enc_out.rows(), enc.enc_out.cols()), (3, 4));
        let head = model.head_forward(&enc);
        assert_eq!((head.out.rows(), head.out.cols()), (1, 8));
        let boxes = model.predict_boxes(&head.out, &history[2].bbox);
        assert_eq!(boxes.len(), 2);
        for b in &boxes {
            assert!(b.w > 0.0 && b.h > 0.0);
        }
        let filtered = model.filter_box(&enc, &history[2], &tb(3, 0.16, 0.1)).unwrap();
        assert!(filtered.w > 0.0);
    }

    #[test]
    fn history_is_truncated_to_window() {
        let model = tiny_model(7);
        let long: Vec<TimedBox> = (0..8).map(|f| tb(f, 0.1 + 0.01 * f as f64, 0.2)).collect();
        let enc_long = model.encode(&long).unwrap();
        let enc_tail = model.encode(&long[5..]).unwrap();
        assert_eq!(enc_long.enc_out.rows(), 3);
        for r in 0..3 {
            for c in 0..4 {
                assert_eq!(enc_long.enc_out.at(r, c), enc_tail.enc_out.at(r, c));
            }
        }
    }

    #[test]
    fn encoder_is_order_sensitive() {
        // Mean pooling alone would be permutation-invariant; the positional
        // encoding must break that.
        let model = tiny_model(9);
        let x = Mat::from_fn(3, INPUT_CHANNELS, |r, c| 0.05 * (r as f64 + 1.0) - 0.01 * c as f64);
        let mut swapped = x.clone();
        for c in 0..INPUT_CHANNELS {
            let a = swapped.at(0, c);
            let b = swapped.at(1, c);
            *swapped.at_mut(0, c) = b;
            *swapped.at_mut(1, c) = a;
        }
        let a = model.encode_features(&x);
        let b = model.encode_features(&swapped);
        let diff: f64 = (0..4).map(|c| (a.pooled.at(0, c) - b.pooled.at(0, c)).abs()).sum();
        assert!(diff > 1e-6, "pooled encoding ignored row order (diff {diff})");
    }

    #[test]
    fn deterministic_across_instances() {
        let m1 = tiny_model(3);
        let m2 = tiny_model(3);
        let history = vec![tb(0, 0.1, 0.1), tb(2, 0.2, 0.15), tb(3, 0.25, 0.18)];
        let h1 = m1.head_forward(&m1.encode(&history).unwrap());
        let h2 = m2.head_forward(&m2.encode(&history).unwrap());
        assert_eq!(h1.out.data(), h2.out.data());
    }

    #[test]
    fn full_model_gradients_match_finite_differences() {
        let mut model = tiny_model(11);
        let features = Mat::from_fn(3, INPUT_CHANNELS, |r, c| {
            0.08 * (r as f64 + 1.0) - 0.02 * (c as f64) + 0.01 * ((r + c) % 3) as f64
        });
        let tokens = Mat::from_fn(2, INPUT_CHANNELS, |r, c| 0.05 * (r as f64 + 2.0) + 0.015 * (c as f64 % 4.0));

        let run = |m: &TransFilterModel| -> f64 {
            let enc = m.encode_features(&features);
            let head = m.head_forward(&enc);
            let dec = m.decode_tokens(&enc, &tokens);
            probe_loss(&head.out) + probe_loss(&dec.out)
        };

        let enc = model.encode_features(&features);
        let head = model.head_forward(&enc);
        let dec = model.decode_tokens(&enc, &tokens);
        let mut grads = model.params.zeros_like();
        let d_head = probe_grad(&head.out);
        let d_dec = probe_grad(&dec.out);
        model.backward(&enc, &head, &d_head, Some((&dec, &d_dec)), &mut grads);

        // Flatten analytic grads in canonical order.
        let mut names = Vec::new();
        let mut flat_grads = Vec::new();
        grads.for_each(&mut |name, m| {
            names.push(name);
            flat_grads.push(m.data().to_vec());
        });

        // Probe a few entries of every tensor against central differences.
        fn bump(params: &mut TransFilterParams, t_idx: usize, probe: usize, delta: f64) {
            let mut k = 0;
            params.for_each_mut(&mut |_, m| {
                if k == t_idx {
                    m.data_mut()[probe] += delta;
                }
                k += 1;
            });
        }
        let h = 1e-5;
        for (t_idx, t_name) in names.iter().enumerate() {
            let len = flat_grads[t_idx].len();
            for probe in [0, len / 2, len - 1] {
                let analytic = flat_grads[t_idx][probe];
                bump(&mut model.params, t_idx, probe, h);
                let up = run(&model);
                bump(&mut model.params, t_idx, probe, -2.0 * h);
                let down = run(&model);
                bump(&mut model.params, t_idx, probe, h);
                let fd = (up - down) / (2.0 * h);
                let denom = analytic.abs().max(fd.abs()).max(1e-4);
                assert!(
                    (analytic - fd).abs() / denom < 1e-3,
                    "{t_name}[{probe}]: analytic {analytic} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn occlusion_reuses_encoding_bit_exactly() {
        let model = Arc::new(tiny_model(5));
        let mut track = TransFilterTrack::new(Arc::clone(&model));
        let mut buffer = MeasurementBuffer::new(BufferConfig {
            policy: BufferPolicy::DeepMoveSort,
            t_max: 30,
            l_min: 3,
            lazy_alignment: false,
        });
        for f in 0..3 {
            buffer.update(f, Some(tb(f, 0.1 + 0.02 * f as f64, 0.2)));
        }
        let first = track.predict(&mut buffer, 1).unwrap();
        assert_eq!(track.encoder_passes(), 1);

        // Misses: the buffer is untouched, so deeper lookahead must come
        // from the same encoding without another pass.
        buffer.update(3, None);
        buffer.update(4, None);
        let deeper = track.predict(&mut buffer, 2).unwrap();
        assert_eq!(track.encoder_passes(), 1, "re-encoded an unchanged buffer");
        assert_eq!(first[0], deeper[0], "cached horizon-1 box must be bit-identical");

        // A fresh track over the same buffer contents recomputes the same
        // numbers exactly.
        let mut fresh = TransFilterTrack::new(model);
        let again = fresh.predict(&mut buffer, 2).unwrap();
        assert_eq!(deeper, again);

        // New observation invalidates.
        buffer.update(5, Some(tb(5, 0.2, 0.2)));
        track.predict(&mut buffer, 1).unwrap();
        assert_eq!(track.encoder_passes(), 2);
    }

    #[test]
    fn horizon_is_bounded() {
        let model = Arc::new(tiny_model(5));
        let mut track = TransFilterTrack::new(model);
        let mut buffer = MeasurementBuffer::new(BufferConfig::default());
        buffer.update(0, Some(tb(0, 0.1, 0.2)));
        assert!(matches!(
            track.predict(&mut buffer, 3),
            Err(Error::HorizonTooLong { m: 3, m_max: 2 })
        ));
    }

    #[test]
    fn filtered_box_keeps_observation_confidence() {
        let model = Arc::new(tiny_model(5));
        let mut track = TransFilterTrack::new(model);
        let mut buffer = MeasurementBuffer::new(BufferConfig::default());
        for f in 0..3 {
            buffer.update(f, Some(tb(f, 0.1 + 0.02 * f as f64, 0.2)));
        }
        let obs = TimedBox::new(3, BoundingBox::new(0.17, 0.2, 0.1, 0.2, 0.66).unwrap());
        let filtered = track.filter(&mut buffer, &obs).unwrap();
        assert_eq!(filtered.confidence, 0.66);
    }
}
