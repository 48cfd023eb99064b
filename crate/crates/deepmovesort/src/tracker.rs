//! Track lifecycle and per-frame association.
//!
//! Each frame runs three association cascades over one cost model:
//! high-confidence detections against every live track, low-confidence
//! detections against the unmatched active/lost remainder, and a final
//! round giving unconfirmed new tracks a second chance at the leftover
//! high-confidence detections. Matched tracks absorb their detection
//! through the motion filter; unmatched ones age toward deletion.
//!
//! Box coordinates are unit-agnostic, but the height/vertical-position cost
//! assumes a roughly [0, 1] scale, so [`run_sequence`] converts pixel input
//! to image fractions on the way in and back on the way out.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::association::{
    self, appearance_cost, atcm_cost, dtiou_cost, solve, ComponentCosts, CostMatrix, DtIouParams,
    Embedding,
};
use crate::buffer::{BufferConfig, MeasurementBuffer};
use crate::error::{Error, Result};
use crate::features::TimedBox;
use crate::filter::{ConfidenceKalman, KalmanTrackFilter, TrackFilter, TransFilterModel, TransFilterTrack};
use crate::geometry::{iou, AffineTransform, BoundingBox};
use crate::io::mot::MotRecord;

/// Detections below this confidence never reach any cascade.
pub const MIN_DETECTION_CONFIDENCE: f64 = 0.1;

/// Gate parameters plus fusion weights for one association cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeConfig {
    pub gate: DtIouParams,
    /// Weight of the overlap cost (1 - IoU) itself.
    pub overlap_weight: f64,
    pub appearance_weight: f64,
    pub atcm_weight: f64,
    pub hpc_weight: f64,
    pub hpc_height_weight: f64,
    pub hpc_vertical_weight: f64,
}

impl CascadeConfig {
    fn validate(&self, name: &str) -> Result<()> {
        let g = &self.gate;
        if !(0.0..=1.0).contains(&g.threshold_upper)
            || !(0.0..=1.0).contains(&g.threshold_lower)
            || g.threshold_upper < g.threshold_lower
        {
            return Err(Error::Config(format!(
                "{name}: thresholds must satisfy 0 <= lower <= upper <= 1 (got {} / {})",
                g.threshold_lower, g.threshold_upper
            )));
        }
        if g.decay < 0.0 || g.expansion_rate < 0.0 {
            return Err(Error::Config(format!("{name}: decay and expansion rate must be non-negative")));
        }
        for (label, w) in [
            ("overlap", self.overlap_weight),
            ("appearance", self.appearance_weight),
            ("atcm", self.atcm_weight),
            ("hpc", self.hpc_weight),
            ("hpc height", self.hpc_height_weight),
            ("hpc vertical", self.hpc_vertical_weight),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config(format!("{name}: {label} weight {w} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Tracker hyper-parameters. Defaults follow the dance-dataset column of the
/// reference configuration: split at 0.6, 30-frame occlusion timeout,
/// 3-frame initialization at confidence 0.7, duplicate removal disabled
/// (threshold 1.0), no noise filtering, no camera compensation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// High/low split for the first vs second cascade.
    pub detection_confidence_threshold: f64,
    pub track_max_time_lost: usize,
    pub track_init_time: usize,
    /// Minimum detection confidence to spawn a track.
    pub track_init_confidence: f64,
    /// Active/lost pairs overlapping at least this much lose the younger.
    pub duplicate_iou_threshold: f64,
    /// Store the filter's corrected box in the buffer instead of the raw
    /// detection.
    pub apply_noise_filtering: bool,
    pub use_cmc: bool,
    /// High-confidence cascade (the only one using appearance).
    pub ha: CascadeConfig,
    /// Low-confidence cascade.
    pub la: CascadeConfig,
    /// New-track fallback cascade.
    pub na: CascadeConfig,
    pub buffer: BufferConfig,
    /// Measurement-noise scale of the per-track confidence model.
    pub confidence_sigma: f64,
    /// Appearance EMA smoothing toward the history (1 keeps the old
    /// embedding, 0 adopts each new one).
    pub appearance_alpha: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            detection_confidence_threshold: 0.6,
            track_max_time_lost: 30,
            track_init_time: 3,
            track_init_confidence: 0.7,
            duplicate_iou_threshold: 1.0,
            apply_noise_filtering: false,
            use_cmc: false,
            ha: CascadeConfig {
                gate: DtIouParams {
                    threshold_upper: 0.5,
                    threshold_lower: 0.25,
                    decay: 0.2,
                    expansion_rate: 0.0,
                    fuse_score: false,
                },
                overlap_weight: 1.0,
                appearance_weight: 2.0,
                atcm_weight: 1.5,
                hpc_weight: 2.0,
                hpc_height_weight: 1.0,
                hpc_vertical_weight: 1.0,
            },
            la: CascadeConfig {
                gate: DtIouParams::fixed(0.5),
                overlap_weight: 1.0,
                appearance_weight: 0.0,
                atcm_weight: 1.0,
                hpc_weight: 2.0,
                hpc_height_weight: 1.0,
                hpc_vertical_weight: 1.0,
            },
            na: CascadeConfig {
                gate: DtIouParams::fixed(0.25),
                overlap_weight: 1.0,
                appearance_weight: 0.0,
                atcm_weight: 0.0,
                hpc_weight: 2.0,
                hpc_height_weight: 1.0,
                hpc_vertical_weight: 1.0,
            },
            buffer: BufferConfig::default(),
            confidence_sigma: 0.2,
            appearance_alpha: 0.9,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        for (label, v) in [
            ("detection_confidence_threshold", self.detection_confidence_threshold),
            ("track_init_confidence", self.track_init_confidence),
            ("duplicate_iou_threshold", self.duplicate_iou_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{label} = {v} must be in [0, 1]")));
            }
        }
        if self.track_max_time_lost < 1 || self.track_init_time < 1 {
            return Err(Error::Config("track times must be at least 1".into()));
        }
        if !(self.confidence_sigma.is_finite() && self.confidence_sigma >= 0.0) {
            return Err(Error::Config(format!("confidence_sigma = {} must be non-negative", self.confidence_sigma)));
        }
        if !(0.0..=1.0).contains(&self.appearance_alpha) {
            return Err(Error::Config(format!("appearance_alpha = {} must be in [0, 1]", self.appearance_alpha)));
        }
        self.ha.validate("ha")?;
        self.la.validate("la")?;
        self.na.validate("na")?;
        if self.buffer.t_max < 1 || self.buffer.l_min < 1 {
            return Err(Error::Config("buffer t_max and l_min must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which motion filter new tracks get.
#[derive(Clone)]
pub enum FilterKind {
    Kalman,
    Transformer(Arc<TransFilterModel>),
}

impl FilterKind {
    fn spawn(&self, first: &TimedBox) -> Box<dyn TrackFilter> {
        match self {
            FilterKind::Kalman => Box::new(KalmanTrackFilter::new(first)),
            FilterKind::Transformer(model) => Box::new(TransFilterTrack::new(Arc::clone(model))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    /// Unconfirmed: spawned but not yet associated for `track_init_time`
    /// consecutive frames.
    New,
    Active,
    /// Occluded: retained and re-identifiable until the timeout.
    Lost,
}

pub struct Track {
    id: u64,
    status: TrackStatus,
    buffer: MeasurementBuffer,
    filter: Box<dyn TrackFilter>,
    confidence: ConfidenceKalman,
    embedding: Option<Embedding>,
    frames_since_seen: usize,
    consecutive_hits: usize,
    birth_frame: i64,
    // Refreshed at the start of every step, before association.
    predicted_box: BoundingBox,
    predicted_conf: f64,
}

impl Track {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn status(&self) -> TrackStatus {
        self.status
    }

    pub fn birth_frame(&self) -> i64 {
        self.birth_frame
    }

    pub fn frames_since_seen(&self) -> usize {
        self.frames_since_seen
    }

    pub fn consecutive_hits(&self) -> usize {
        self.consecutive_hits
    }

    /// This frame's motion prediction (valid after a step).
    pub fn predicted_box(&self) -> BoundingBox {
        self.predicted_box
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    /// Encoder invocations of the underlying filter, when it has one.
    pub fn encoder_passes(&self) -> Option<usize> {
        self.filter.encoder_passes()
    }

    pub fn last_box(&mut self) -> Option<TimedBox> {
        self.buffer.last()
    }

    /// The box representing this track right now: the buffered observation
    /// when matched this frame, the motion prediction while occluded.
    fn current_box(&mut self) -> BoundingBox {
        if self.frames_since_seen == 0 {
            self.buffer.last().map(|t| t.bbox).unwrap_or(self.predicted_box)
        } else {
            self.predicted_box
        }
    }
}

/// One emitted result row: an active track's box for this frame. The box
/// confidence echoes the matched detection's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmittedTrack {
    pub id: u64,
    pub bbox: BoundingBox,
}

/// Everything a step decided, for callers that need more than the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub emitted: Vec<EmittedTrack>,
    /// (track id, detection index into the step's input slice), all
    /// cascades combined, in cascade-then-solver order.
    pub matches: Vec<(u64, usize)>,
}

struct Detection {
    /// Index into the caller's detection slice.
    index: usize,
    bbox: BoundingBox,
    embedding: Option<Embedding>,
}

pub struct Tracker {
    config: TrackerConfig,
    filters: FilterKind,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<i64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig, filters: FilterKind) -> Result<Self> {
        config.validate()?;
        Ok(Tracker { config, filters, tracks: Vec::new(), next_id: 1, last_frame: None })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Advance one frame. `detections` may be empty; `embeddings`, when
    /// given, must pair 1:1 with `detections`.
    pub fn step(
        &mut self,
        frame: i64,
        detections: &[BoundingBox],
        embeddings: Option<&[Embedding]>,
        cmc: Option<&AffineTransform>,
    ) -> Result<FrameOutput> {
        if let Some(prev) = self.last_frame {
            if frame <= prev {
                return Err(Error::NonIncreasingFrames { prev, frame });
            }
        }
        if let Some(embs) = embeddings {
            if embs.len() != detections.len() {
                return Err(Error::EmbeddingCountMismatch {
                    frame,
                    detections: detections.len(),
                    embeddings: embs.len(),
                });
            }
        }

        // 1. Camera alignment. Both the buffered history and any filter
        // state move into this frame's coordinates before prediction.
        if self.config.use_cmc {
            if let Some(t) = cmc {
                if !t.is_identity() {
                    for track in &mut self.tracks {
                        track.buffer.align_to_camera(t);
                        track.filter.apply_camera_motion(t);
                    }
                }
            }
        }

        // 2. Partition detections. The hard floor drops a detection and its
        // embedding together, keeping input indices intact.
        let mut high: Vec<Detection> = Vec::new();
        let mut low: Vec<Detection> = Vec::new();
        for (index, bbox) in detections.iter().enumerate() {
            if bbox.confidence < MIN_DETECTION_CONFIDENCE {
                continue;
            }
            let embedding = match embeddings {
                Some(embs) => Some(embs[index].normalized()?),
                None => None,
            };
            let det = Detection { index, bbox: *bbox, embedding };
            if bbox.confidence >= self.config.detection_confidence_threshold {
                high.push(det);
            } else {
                low.push(det);
            }
        }

        // 3. Per-track forecasts for this frame. Horizons cap at the
        // filter's limit; a longer occlusion keeps using the final step.
        for track in &mut self.tracks {
            let wanted = track.frames_since_seen + 1;
            let m = match track.filter.max_horizon() {
                Some(cap) => wanted.min(cap),
                None => wanted,
            };
            let boxes = track.filter.predict(&mut track.buffer, m)?;
            track.predicted_box = *boxes.last().expect("m >= 1 predictions");
            track.predicted_conf = track.confidence.predict();
        }

        let mut matched_det: Vec<Option<usize>> = vec![None; self.tracks.len()];
        let mut det_taken_high: Vec<bool> = vec![false; high.len()];
        let mut matches: Vec<(u64, usize)> = Vec::new();

        // 4. High cascade: every live track vs high-confidence detections.
        let all_tracks: Vec<usize> = (0..self.tracks.len()).collect();
        let high_idx: Vec<usize> = (0..high.len()).collect();
        let ha = self.cascade(&all_tracks, &high, &high_idx, self.config.ha, true)?;
        for (ti, di) in ha {
            matched_det[ti] = Some(high[di].index);
            det_taken_high[di] = true;
            matches.push((self.tracks[ti].id, high[di].index));
        }

        // 5. Low cascade: unmatched active/lost tracks vs low-confidence
        // detections. No appearance term here.
        let la_tracks: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| matched_det[i].is_none() && self.tracks[i].status != TrackStatus::New)
            .collect();
        let low_idx: Vec<usize> = (0..low.len()).collect();
        let la = self.cascade(&la_tracks, &low, &low_idx, self.config.la, false)?;
        for (ti, di) in la {
            matched_det[ti] = Some(low[di].index);
            matches.push((self.tracks[ti].id, low[di].index));
        }

        // 6. New-track cascade: unmatched new tracks vs the high-confidence
        // leftovers, then spawns from what remains.
        let na_tracks: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| matched_det[i].is_none() && self.tracks[i].status == TrackStatus::New)
            .collect();
        let na_dets: Vec<usize> = (0..high.len()).filter(|&i| !det_taken_high[i]).collect();
        let na = self.cascade(&na_tracks, &high, &na_dets, self.config.na, false)?;
        for (ti, di) in na {
            matched_det[ti] = Some(high[di].index);
            det_taken_high[di] = true;
            matches.push((self.tracks[ti].id, high[di].index));
        }

        // 7./8. Lifecycle: absorb matches, age misses.
        let mut dead: Vec<usize> = Vec::new();
        let det_by_index: HashMap<usize, &Detection> =
            high.iter().chain(low.iter()).map(|d| (d.index, d)).collect();
        for (ti, track) in self.tracks.iter_mut().enumerate() {
            match matched_det[ti] {
                Some(index) => {
                    let det = det_by_index[&index];
                    let obs = TimedBox::new(frame, det.bbox);
                    let filtered = track.filter.filter(&mut track.buffer, &obs)?;
                    let stored = if self.config.apply_noise_filtering { filtered } else { det.bbox };
                    track.buffer.update(frame, Some(TimedBox::new(frame, stored)));
                    track.confidence.update(det.bbox.confidence);
                    if let Some(e) = &det.embedding {
                        track.embedding = Some(association::update_track_embedding(
                            track.embedding.as_ref(),
                            e,
                            self.config.appearance_alpha,
                        )?);
                    }
                    track.consecutive_hits += 1;
                    track.frames_since_seen = 0;
                    track.status = match track.status {
                        TrackStatus::New if track.consecutive_hits >= self.config.track_init_time => {
                            TrackStatus::Active
                        }
                        TrackStatus::New => TrackStatus::New,
                        _ => TrackStatus::Active,
                    };
                }
                None => {
                    track.buffer.update(frame, None);
                    track.frames_since_seen += 1;
                    track.consecutive_hits = 0;
                    match track.status {
                        TrackStatus::New => dead.push(ti),
                        TrackStatus::Active => track.status = TrackStatus::Lost,
                        TrackStatus::Lost => {
                            if track.frames_since_seen > self.config.track_max_time_lost {
                                dead.push(ti);
                            }
                        }
                    }
                }
            }
        }

        // Spawns: leftover high-confidence detections above the
        // initialization bar, in input order so ids are deterministic.
        for (di, det) in high.iter().enumerate() {
            if det_taken_high[di] || det.bbox.confidence < self.config.track_init_confidence {
                continue;
            }
            let obs = TimedBox::new(frame, det.bbox);
            let mut buffer = MeasurementBuffer::new(self.config.buffer);
            buffer.update(frame, Some(obs));
            let status =
                if self.config.track_init_time <= 1 { TrackStatus::Active } else { TrackStatus::New };
            self.tracks.push(Track {
                id: self.next_id,
                status,
                buffer,
                filter: self.filters.spawn(&obs),
                confidence: ConfidenceKalman::new(det.bbox.confidence, self.config.confidence_sigma),
                embedding: det.embedding.clone(),
                frames_since_seen: 0,
                consecutive_hits: 1,
                birth_frame: frame,
                predicted_box: det.bbox,
                predicted_conf: det.bbox.confidence,
            });
            self.next_id += 1;
        }

        // 9. Duplicate removal: heavily overlapping active/lost pairs keep
        // the longer-existing track.
        if self.config.duplicate_iou_threshold <= 1.0 {
            let eligible: Vec<usize> = (0..self.tracks.len())
                .filter(|&i| !dead.contains(&i) && self.tracks[i].status != TrackStatus::New)
                .collect();
            let boxes: Vec<BoundingBox> = {
                let mut out = Vec::with_capacity(eligible.len());
                for &i in &eligible {
                    out.push(self.tracks[i].current_box());
                }
                out
            };
            for a in 0..eligible.len() {
                for b in (a + 1)..eligible.len() {
                    let (ia, ib) = (eligible[a], eligible[b]);
                    if dead.contains(&ia) || dead.contains(&ib) {
                        continue;
                    }
                    if iou(&boxes[a], &boxes[b]) >= self.config.duplicate_iou_threshold {
                        let ta = &self.tracks[ia];
                        let tb = &self.tracks[ib];
                        let younger = if (tb.birth_frame, tb.id) > (ta.birth_frame, ta.id) { ib } else { ia };
                        dead.push(younger);
                    }
                }
            }
        }

        if !dead.is_empty() {
            let mut keep = vec![true; self.tracks.len()];
            for i in dead {
                keep[i] = false;
            }
            let mut it = keep.iter();
            self.tracks.retain(|_| *it.next().expect("keep mask aligned"));
        }

        // 10. Emit every active track's current box.
        let mut emitted = Vec::new();
        for track in &mut self.tracks {
            if track.status == TrackStatus::Active {
                let bbox = track.buffer.last().expect("active tracks were matched this frame").bbox;
                emitted.push(EmittedTrack { id: track.id, bbox });
            }
        }

        self.last_frame = Some(frame);
        Ok(FrameOutput { emitted, matches })
    }

    /// Run one cascade: gate + weighted costs, then the assignment. Returns
    /// (track index, detection index) pairs into the *subset* arrays mapped
    /// back through `track_idx` / `det_idx`.
    fn cascade(
        &self,
        track_idx: &[usize],
        dets: &[Detection],
        det_idx: &[usize],
        cfg: CascadeConfig,
        use_appearance: bool,
    ) -> Result<Vec<(usize, usize)>> {
        if track_idx.is_empty() || det_idx.is_empty() {
            return Ok(Vec::new());
        }
        let (rows, cols) = (track_idx.len(), det_idx.len());
        let gate = CostMatrix::from_fn(rows, cols, |r, c| {
            let track = &self.tracks[track_idx[r]];
            let det = &dets[det_idx[c]];
            dtiou_cost(&track.predicted_box, &det.bbox, track.frames_since_seen as i64, &cfg.gate)
        });

        let mut components = Vec::new();
        if cfg.hpc_weight > 0.0 {
            let mut values = Vec::with_capacity(rows * cols);
            for &ti in track_idx {
                let track = &self.tracks[ti];
                for &di in det_idx {
                    values.push(Some(association::hpc_cost(
                        &track.predicted_box,
                        &dets[di].bbox,
                        cfg.hpc_height_weight,
                        cfg.hpc_vertical_weight,
                    )));
                }
            }
            components.push(ComponentCosts { weight: cfg.hpc_weight, values });
        }
        if cfg.atcm_weight > 0.0 {
            let mut values = Vec::with_capacity(rows * cols);
            for &ti in track_idx {
                let track = &self.tracks[ti];
                for &di in det_idx {
                    values.push(Some(atcm_cost(track.predicted_conf, dets[di].bbox.confidence)));
                }
            }
            components.push(ComponentCosts { weight: cfg.atcm_weight, values });
        }
        if use_appearance && cfg.appearance_weight > 0.0 {
            let mut values = Vec::with_capacity(rows * cols);
            for &ti in track_idx {
                let track = &self.tracks[ti];
                for &di in det_idx {
                    values.push(match (&track.embedding, &dets[di].embedding) {
                        (Some(t), Some(d)) => Some(appearance_cost(t, d)?),
                        _ => None,
                    });
                }
            }
            components.push(ComponentCosts { weight: cfg.appearance_weight, values });
        }

        let fused = association::fuse(&gate, cfg.overlap_weight, &components)?;
        let assignment = solve(&fused);
        Ok(assignment
            .matches
            .into_iter()
            .map(|(r, c)| (track_idx[r], det_idx[c]))
            .collect())
    }
}

/// Frame-aligned inputs for one sequence, in pixel coordinates.
pub struct SequenceData {
    /// Detections per 0-based frame, in detector output order.
    pub detections: BTreeMap<i64, Vec<BoundingBox>>,
    /// Appearance vectors keyed by (frame, in-frame ordinal). When present,
    /// every detection must have one.
    pub embeddings: Option<HashMap<(i64, usize), Embedding>>,
    /// Camera transforms per frame (previous frame's pixels into this
    /// frame's). Missing frames mean no camera motion.
    pub cmc: Option<HashMap<i64, AffineTransform>>,
    pub image_width: f64,
    pub image_height: f64,
    /// Frames 0..num_frames are stepped, including detection-free ones.
    pub num_frames: i64,
}

impl SequenceData {
    pub fn validate(&self) -> Result<()> {
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(Error::Config("image dimensions must be positive".into()));
        }
        if self.num_frames < 0 {
            return Err(Error::Config("frame count must be non-negative".into()));
        }
        if let Some((&frame, _)) = self.detections.iter().next_back() {
            if frame >= self.num_frames {
                return Err(Error::Config(format!(
                    "detections at frame {frame} but the sequence has only {} frames",
                    self.num_frames
                )));
            }
        }
        Ok(())
    }
}

/// Fold [`Tracker::step`] over a whole sequence. Inputs are normalized to
/// image fractions for the tracker and results are denormalized back to
/// pixels.
pub fn run_sequence(
    config: &TrackerConfig,
    filters: FilterKind,
    data: &SequenceData,
) -> Result<Vec<MotRecord>> {
    data.validate()?;
    let (sx, sy) = (1.0 / data.image_width, 1.0 / data.image_height);
    let mut tracker = Tracker::new(config.clone(), filters)?;
    let mut records = Vec::new();
    let empty: Vec<BoundingBox> = Vec::new();
    for frame in 0..data.num_frames {
        let dets_px = data.detections.get(&frame).unwrap_or(&empty);
        let dets: Vec<BoundingBox> = dets_px.iter().map(|b| b.scaled(sx, sy)).collect();
        let embs: Option<Vec<Embedding>> = match &data.embeddings {
            Some(map) => {
                let mut row = Vec::with_capacity(dets.len());
                for ordinal in 0..dets.len() {
                    let e = map.get(&(frame, ordinal)).ok_or_else(|| {
                        Error::Config(format!("no embedding for frame {frame}, detection {ordinal}"))
                    })?;
                    row.push(e.clone());
                }
                Some(row)
            }
            None => None,
        };
        let cmc = data
            .cmc
            .as_ref()
            .and_then(|map| map.get(&frame))
            .map(|t| t.rescaled(sx, sy));
        let out = tracker.step(frame, &dets, embs.as_deref(), cmc.as_ref())?;
        for e in out.emitted {
            records.push(MotRecord {
                frame,
                id: e.id as i64,
                bbox: e.bbox.scaled(data.image_width, data.image_height),
            });
        }
    }
    Ok(records)
}
