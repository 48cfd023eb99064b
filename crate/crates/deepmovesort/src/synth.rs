//! Synthetic sequence generator.
//!
//! A scenario file (TOML) describes objects with parametric motion, optional
//! occlusion windows, detector noise, appearance embeddings, and optional
//! camera motion. Generation is fully determined by the scenario plus a
//! seed: every noise source draws from its own keyed RNG stream
//! ([`crate::rng::substream`]), advanced once per frame per object whether
//! or not a detection is emitted, so edits to one object never reshuffle
//! another's noise.
//!
//! Ground truth keeps every frame; occlusion windows only suppress the
//! *detections*, which is what makes the scenarios useful for testing
//! re-identification.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Deserialize;

use crate::association::Embedding;
use crate::error::{Error, Result};
use crate::geometry::{iou, AffineTransform, BoundingBox};
use crate::io::cmc::write_cmc;
use crate::io::embeddings::{write_embeddings, EmbeddingRecord};
use crate::io::mot::{write_mot_file, MotRecord};
use crate::io::seqinfo::{write_seqinfo, SeqInfo};
use crate::rng::substream;

const STREAM_DET_NOISE: u64 = 10;
const STREAM_CONFIDENCE: u64 = 11;
const STREAM_EMB_NOISE: u64 = 12;
const STREAM_EMB_BASE: u64 = 13;

/// Detector confidence distribution when the object is clearly visible.
const CONF_CLEAR: (f64, f64) = (0.95, 0.02);
/// ... and when another object overlaps it by more than [`OVERLAP_IOU`].
const CONF_OVERLAPPED: (f64, f64) = (0.4, 0.05);
const OVERLAP_IOU: f64 = 0.1;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    /// Constant velocity: `p(t) = start + velocity * t`.
    Linear { velocity: [f64; 2] },
    /// Constant drift plus `amplitude * sin(2*pi*t/period)` on one axis.
    Sinusoidal { velocity: [f64; 2], amplitude: f64, period: f64, axis: Axis },
    /// Constant speed whose sign flips every `switch_period` frames.
    DirectionSwitch { velocity: [f64; 2], switch_period: u32 },
    /// Circle through `start`, centered `radius` to its left:
    /// `p(t) = center + radius * (cos(w*t), sin(w*t))`.
    Circular { radius: f64, angular_velocity: f64 },
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// Frames `[from, until)` in which the object's detections are dropped.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OcclusionWindow {
    pub from: i64,
    pub until: i64,
}

fn default_breathing_amplitude() -> f64 {
    0.03
}

fn default_breathing_period() -> f64 {
    40.0
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    /// Box center at t = 0, pixels.
    pub start: [f64; 2],
    pub width: f64,
    pub height: f64,
    pub motion: Motion,
    #[serde(default)]
    pub occlusions: Vec<OcclusionWindow>,
    /// Relative size oscillation; keeps box dimensions from being constant,
    /// which real footage never produces.
    #[serde(default = "default_breathing_amplitude")]
    pub breathing_amplitude: f64,
    #[serde(default = "default_breathing_period")]
    pub breathing_period: f64,
}

/// Optional per-frame camera motion: every frame the image pans by
/// `pan` pixels and zooms about the image center by `zoom`.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    #[serde(default)]
    pub pan: [f64; 2],
    #[serde(default = "default_zoom")]
    pub zoom: f64,
}

fn default_zoom() -> f64 {
    1.0
}

fn default_width() -> u32 {
    1280
}

fn default_height() -> u32 {
    720
}

fn default_detection_noise() -> f64 {
    0.01
}

fn default_embedding_dim() -> usize {
    16
}

fn default_embedding_noise() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    pub num_frames: i64,
    #[serde(default)]
    pub seed: u64,
    /// Detection noise std as a fraction of the box dimensions.
    #[serde(default = "default_detection_noise")]
    pub detection_noise: f64,
    /// 0 disables embedding output.
    #[serde(default = "default_embedding_dim")]
    pub embedding_dim: usize,
    #[serde(default = "default_embedding_noise")]
    pub embedding_noise: f64,
    /// All objects share one base appearance vector (ambiguous appearance).
    #[serde(default)]
    pub shared_embeddings: bool,
    pub camera: Option<CameraSpec>,
    pub objects: Vec<ObjectSpec>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_frames < 1 {
            return Err(Error::Config("num_frames must be at least 1".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("image dimensions must be positive".into()));
        }
        if self.objects.is_empty() {
            return Err(Error::Config("a scenario needs at least one object".into()));
        }
        if !(self.detection_noise >= 0.0) || !(self.embedding_noise >= 0.0) {
            return Err(Error::Config("noise scales must be non-negative".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !(o.width > 0.0 && o.height > 0.0) {
                return Err(Error::Config(format!("object {i}: non-positive size")));
            }
            if !(o.breathing_amplitude >= 0.0 && o.breathing_amplitude < 1.0) {
                return Err(Error::Config(format!("object {i}: breathing amplitude must be in [0, 1)")));
            }
            if o.breathing_period <= 0.0 {
                return Err(Error::Config(format!("object {i}: breathing period must be positive")));
            }
            match &o.motion {
                Motion::Sinusoidal { period, .. } if *period <= 0.0 => {
                    return Err(Error::Config(format!("object {i}: sinusoid period must be positive")));
                }
                Motion::DirectionSwitch { switch_period, .. } if *switch_period == 0 => {
                    return Err(Error::Config(format!("object {i}: switch period must be positive")));
                }
                Motion::Circular { radius, .. } if *radius <= 0.0 => {
                    return Err(Error::Config(format!("object {i}: radius must be positive")));
                }
                _ => {}
            }
            for w in &o.occlusions {
                if w.from < 0 || w.until <= w.from {
                    return Err(Error::Config(format!(
                        "object {i}: occlusion window {}..{} is empty or negative",
                        w.from, w.until
                    )));
                }
            }
        }
        if let Some(cam) = &self.camera {
            if !(cam.zoom.is_finite() && cam.zoom > 0.0) {
                return Err(Error::Config("camera zoom must be positive".into()));
            }
        }
        Ok(())
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("scenario file: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text)
}

/// Ground-truth center position in world coordinates at frame `t`.
fn center_at(spec: &ObjectSpec, t: i64) -> [f64; 2] {
    let tf = t as f64;
    match &spec.motion {
        Motion::Linear { velocity } => {
            [spec.start[0] + velocity[0] * tf, spec.start[1] + velocity[1] * tf]
        }
        Motion::Sinusoidal { velocity, amplitude, period, axis } => {
            let wob = amplitude * (2.0 * std::f64::consts::PI * tf / period).sin();
            let mut p = [spec.start[0] + velocity[0] * tf, spec.start[1] + velocity[1] * tf];
            match axis {
                Axis::X => p[0] += wob,
                Axis::Y => p[1] += wob,
            }
            p
        }
        Motion::DirectionSwitch { velocity, switch_period } => {
            // Incremental: each elapsed frame k contributes sign(k) * v.
            let mut p = spec.start;
            for k in 0..t {
                let sign = if (k / *switch_period as i64) % 2 == 0 { 1.0 } else { -1.0 };
                p[0] += sign * velocity[0];
                p[1] += sign * velocity[1];
            }
            p
        }
        Motion::Circular { radius, angular_velocity } => {
            let center = [spec.start[0] - radius, spec.start[1]];
            let a = angular_velocity * tf;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
        }
    }
}

/// Box dimensions at frame `t`: anti-phase oscillation of width and height
/// with a per-object phase offset.
fn size_at(spec: &ObjectSpec, object_index: usize, t: i64) -> (f64, f64) {
    let phase = 0.7 * object_index as f64;
    let arg = 2.0 * std::f64::consts::PI * t as f64 / spec.breathing_period + phase;
    let w = spec.width * (1.0 + spec.breathing_amplitude * arg.sin());
    let h = spec.height * (1.0 + spec.breathing_amplitude * arg.cos());
    (w, h)
}

fn occluded(spec: &ObjectSpec, t: i64) -> bool {
    spec.occlusions.iter().any(|w| w.from <= t && t < w.until)
}

/// One synthesized sequence, ready to write or to feed to a tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSequence {
    pub info: SeqInfo,
    /// Every object, every frame, ids 1-based per object order.
    pub gt: Vec<MotRecord>,
    /// Noisy detector output (id -1), occlusion windows removed.
    pub detections: Vec<MotRecord>,
    /// One per detection, keyed (frame, in-frame ordinal); empty when the
    /// scenario disables embeddings.
    pub embeddings: Vec<EmbeddingRecord>,
    pub embedding_dim: usize,
    /// Per-frame camera increments (frame t maps frame t-1 coords into t).
    pub cmc: Vec<(i64, AffineTransform)>,
}

impl GeneratedSequence {
    /// Repackage as direct tracker input, skipping the disk round trip.
    pub fn tracker_input(&self) -> Result<crate::tracker::SequenceData> {
        let mut detections: BTreeMap<i64, Vec<BoundingBox>> = BTreeMap::new();
        for r in &self.detections {
            detections.entry(r.frame).or_default().push(r.bbox);
        }
        let embeddings = if self.embeddings.is_empty() {
            None
        } else {
            let mut map = HashMap::new();
            for rec in &self.embeddings {
                let raw: Vec<f64> = rec.values.iter().map(|&v| v as f64).collect();
                map.insert((rec.frame, rec.ordinal), Embedding(raw).normalized()?);
            }
            Some(map)
        };
        let cmc = if self.cmc.is_empty() {
            None
        } else {
            Some(self.cmc.iter().copied().collect())
        };
        Ok(crate::tracker::SequenceData {
            detections,
            embeddings,
            cmc,
            image_width: self.info.image_width as f64,
            image_height: self.info.image_height as f64,
            num_frames: self.info.seq_length as i64,
        })
    }
}

fn sample_normal<R: Rng>(rng: &mut R, mean: f64, std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + std * z
}

/// Unit-norm base appearance vector for one object.
fn base_embedding(seed: u64, object_index: usize, dim: usize) -> Vec<f64> {
    let mut rng = substream(seed, STREAM_EMB_BASE, object_index as u64);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let v: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn generate(config: &ScenarioConfig) -> Result<GeneratedSequence> {
    config.validate()?;
    let n_obj = config.objects.len();
    let seed = config.seed;

    // The camera accumulates: image coords at frame t are C_t(world),
    // C_t = step ∘ C_{t-1}.
    let camera_step = config.camera.map(|cam| {
        let center = [config.width as f64 / 2.0, config.height as f64 / 2.0];
        let z = cam.zoom;
        // Zoom about the image center, then pan: x' = z*(x-c)+c - pan.
        AffineTransform {
            m: [[z, 0.0], [0.0, z]],
            t: [center[0] * (1.0 - z) - cam.pan[0], center[1] * (1.0 - z) - cam.pan[1]],
        }
    });

    let mut det_rngs: Vec<_> =
        (0..n_obj).map(|i| substream(seed, STREAM_DET_NOISE, i as u64)).collect();
    let mut conf_rngs: Vec<_> =
        (0..n_obj).map(|i| substream(seed, STREAM_CONFIDENCE, i as u64)).collect();
    let mut emb_rngs: Vec<_> =
        (0..n_obj).map(|i| substream(seed, STREAM_EMB_NOISE, i as u64)).collect();
    let bases: Vec<Vec<f64>> = (0..n_obj)
        .map(|i| {
            let which = if config.shared_embeddings { 0 } else { i };
            base_embedding(seed, which, config.embedding_dim.max(1))
        })
        .collect();

    let mut gt = Vec::new();
    let mut detections = Vec::new();
    let mut embeddings = Vec::new();
    let mut cmc = Vec::new();
    let mut camera_now = AffineTransform::IDENTITY;

    for t in 0..config.num_frames {
        if let Some(step) = &camera_step {
            if t > 0 {
                camera_now = AffineTransform::compose(step, &camera_now);
                cmc.push((t, *step));
            }
        }

        // Ground truth in image coordinates for every object.
        let mut frame_boxes = Vec::with_capacity(n_obj);
        for (i, spec) in config.objects.iter().enumerate() {
            let c = center_at(spec, t);
            let (w, h) = size_at(spec, i, t);
            let world = BoundingBox::xywh(c[0] - w / 2.0, c[1] - h / 2.0, w, h);
            let image = if camera_step.is_some() { camera_now.apply_box(&world) } else { world };
            frame_boxes.push(image);
            gt.push(MotRecord { frame: t, id: (i + 1) as i64, bbox: image });
        }

        // Detector output: per-object noise, confidence, and embedding are
        // drawn every frame so occlusion never shifts later draws.
        let mut ordinal = 0usize;
        for (i, spec) in config.objects.iter().enumerate() {
            let b = frame_boxes[i];
            let s = config.detection_noise;
            let (dx, dy, dw, dh) = {
                let r = &mut det_rngs[i];
                (
                    sample_normal(r, 0.0, s * b.w),
                    sample_normal(r, 0.0, s * b.h),
                    sample_normal(r, 0.0, s * b.w),
                    sample_normal(r, 0.0, s * b.h),
                )
            };
            let crowded = frame_boxes
                .iter()
                .enumerate()
                .any(|(j, other)| j != i && iou(&b, other) > OVERLAP_IOU);
            let (mean, std) = if crowded { CONF_OVERLAPPED } else { CONF_CLEAR };
            let conf = sample_normal(&mut conf_rngs[i], mean, std).clamp(0.0, 1.0);
            let noise: Vec<f64> = {
                let r = &mut emb_rngs[i];
                (0..config.embedding_dim).map(|_| sample_normal(r, 0.0, config.embedding_noise)).collect()
            };

            if occluded(spec, t) {
                continue;
            }
            let det = BoundingBox {
                x: b.x + dx,
                y: b.y + dy,
                w: (b.w + dw).max(1e-3),
                h: (b.h + dh).max(1e-3),
                confidence: conf,
            };
            detections.push(MotRecord { frame: t, id: -1, bbox: det });
            if config.embedding_dim > 0 {
                let mut v: Vec<f64> =
                    bases[i].iter().zip(&noise).map(|(b, n)| b + n).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.iter_mut().for_each(|x| *x /= norm);
                embeddings.push(EmbeddingRecord {
                    frame: t,
                    ordinal,
                    values: v.into_iter().map(|x| x as f32).collect(),
                });
            }
            ordinal += 1;
        }
    }

    Ok(GeneratedSequence {
        info: SeqInfo {
            name: config.name.clone(),
            image_width: config.width,
            image_height: config.height,
            seq_length: config.num_frames as u32,
        },
        gt,
        detections,
        embeddings,
        embedding_dim: config.embedding_dim,
        cmc,
    })
}

/// Write the sequence in the on-disk layout the CLI consumes:
/// `<dir>/gt/gt.txt`, `<dir>/det/det.txt`, `<dir>/seqinfo.ini`, plus
/// `embeddings.bin` and `cmc.txt` when the scenario produced them.
pub fn write_sequence(dir: &Path, seq: &GeneratedSequence) -> Result<()> {
    let gt_dir = dir.join("gt");
    let det_dir = dir.join("det");
    std::fs::create_dir_all(&gt_dir).map_err(|e| Error::io(&gt_dir, e))?;
    std::fs::create_dir_all(&det_dir).map_err(|e| Error::io(&det_dir, e))?;
    write_mot_file(&gt_dir.join("gt.txt"), &seq.gt)?;
    write_mot_file(&det_dir.join("det.txt"), &seq.detections)?;
    write_seqinfo(&dir.join("seqinfo.ini"), &seq.info)?;
    if !seq.embeddings.is_empty() {
        write_embeddings(&dir.join("embeddings.bin"), seq.embedding_dim, &seq.embeddings)?;
    }
    if !seq.cmc.is_empty() {
        write_cmc(&dir.join("cmc.txt"), &seq.cmc)?;
    }
    Ok(())
}
