//! Train a small transformer motion filter, then pit it against the Kalman
//! filter twice: raw multi-step prediction on a held-out trajectory, and
//! end-to-end tracking through an occlusion with ambiguous appearance.
//!
//!     cargo run --release --example compare_filters

use std::sync::Arc;

use deepmovesort::buffer::{BufferConfig, MeasurementBuffer};
use deepmovesort::eval::{ade, evaluate};
use deepmovesort::features::TimedBox;
use deepmovesort::filter::{
    KalmanTrackFilter, TrackFilter, TransFilterHyper, TransFilterModel, TransFilterTrack,
};
use deepmovesort::io::mot::tracks_by_id;
use deepmovesort::rng::substream;
use deepmovesort::synth::{generate, Motion, ObjectSpec, OcclusionWindow, ScenarioConfig};
use deepmovesort::tracker::{run_sequence, FilterKind, TrackerConfig};
use deepmovesort::training::{fit_window_stats, make_training_set, train, TrainConfig};
use deepmovesort::Result;

fn switcher(start: [f64; 2], period: u32, occlusions: Vec<OcclusionWindow>) -> ObjectSpec {
    ObjectSpec {
        start,
        width: 70.0,
        height: 170.0,
        motion: Motion::DirectionSwitch { velocity: [5.0, 1.0], switch_period: period },
        occlusions,
        breathing_amplitude: 0.03,
        breathing_period: 40.0,
    }
}

fn scenario(name: &str, seed: u64, occluded: bool) -> ScenarioConfig {
    let occ = if occluded { vec![OcclusionWindow { from: 70, until: 92 }] } else { vec![] };
    // Short switch periods put a turn inside every prediction horizon; a
    // constant-velocity extrapolation is wrong somewhere in every window.
    ScenarioConfig {
        name: name.into(),
        width: 1280,
        height: 720,
        num_frames: 160,
        seed,
        detection_noise: 0.01,
        embedding_dim: 16,
        embedding_noise: 0.05,
        // Appearance cannot disambiguate: everyone shares a base vector.
        shared_embeddings: true,
        camera: None,
        objects: vec![
            switcher([300.0, 300.0], 10, occ),
            switcher([800.0, 420.0], 14, vec![]),
        ],
    }
}

/// Normalized ground-truth tracks of several training scenarios.
fn training_tracks() -> Result<Vec<Vec<TimedBox>>> {
    let mut tracks = Vec::new();
    for seed in 100..108u64 {
        let sc = scenario("train", seed, false);
        let seq = generate(&sc)?;
        let (sx, sy) = (1.0 / sc.width as f64, 1.0 / sc.height as f64);
        tracks.extend(tracks_by_id(&seq.gt)?.into_values().map(|t| {
            t.into_iter()
                .map(|b| TimedBox::new(b.frame, b.bbox.scaled(sx, sy)))
                .collect::<Vec<_>>()
        }));
    }
    Ok(tracks)
}

fn main() -> Result<()> {
    let arch =
        TransFilterHyper { d_model: 32, n_heads: 4, n_layers: 2, history_len: 10, m_max: 12 };
    let cfg = TrainConfig::default();

    let tracks = training_tracks()?;
    let windows = make_training_set(&tracks, arch.history_len, arch.m_max, cfg.stride);
    let stats = fit_window_stats(&windows)?;
    let mut model = TransFilterModel::new(arch, stats, &mut substream(cfg.seed, 0, 0))?;
    let report = train(&mut model, &windows, &cfg)?;
    println!(
        "trained on {} windows: loss {:.5} -> {:.5}",
        report.windows,
        report.epoch_losses.first().unwrap(),
        report.epoch_losses.last().unwrap()
    );
    let model = Arc::new(model);

    // --- Raw prediction: feed a held-out prefix, predict 8 steps blind. ---
    let held_out = &training_tracks_for_eval()?[0];
    let horizon = 8;
    let split = 40;
    let prefix = &held_out[split - 12..split];
    let truth: Vec<_> = held_out[split..split + horizon].iter().map(|tb| tb.bbox).collect();

    let buffer_cfg = BufferConfig::default();
    let mut kalman: Box<dyn TrackFilter> = Box::new(KalmanTrackFilter::new(&prefix[0]));
    let mut transformer: Box<dyn TrackFilter> = Box::new(TransFilterTrack::new(Arc::clone(&model)));
    let mut buf_k = MeasurementBuffer::new(buffer_cfg);
    let mut buf_t = MeasurementBuffer::new(buffer_cfg);
    for tb in prefix {
        buf_k.update(tb.frame, Some(*tb));
        buf_t.update(tb.frame, Some(*tb));
        kalman.filter(&mut buf_k, tb)?;
    }
    let pred_k = kalman.predict(&mut buf_k, horizon)?;
    let pred_t = transformer.predict(&mut buf_t, horizon)?;
    println!("{horizon}-step prediction error (mean per-channel displacement):");
    println!("  kalman      {:.5}", ade(&truth, &pred_k)?);
    println!("  transformer {:.5}", ade(&truth, &pred_t)?);

    // --- Full tracking through an occlusion. ---
    let seq = generate(&scenario("occluded", 999, true))?;
    let data = seq.tracker_input()?;
    let tc = TrackerConfig::default();
    for (label, kind) in [
        ("kalman", FilterKind::Kalman),
        ("transformer", FilterKind::Transformer(Arc::clone(&model))),
    ] {
        let records = run_sequence(&tc, kind, &data)?;
        let counts = evaluate(&seq.gt, &records)?;
        println!(
            "{label:<12} MOTA {:.4}  IDF1 {:.4}  switches {}",
            counts.mota(),
            counts.idf1(),
            counts.id_switches
        );
    }
    Ok(())
}

/// A realization unseen during training (different seed range).
fn training_tracks_for_eval() -> Result<Vec<Vec<TimedBox>>> {
    let sc = scenario("eval", 555, false);
    let seq = generate(&sc)?;
    let (sx, sy) = (1.0 / sc.width as f64, 1.0 / sc.height as f64);
    Ok(tracks_by_id(&seq.gt)?
        .into_values()
        .map(|t| t.into_iter().map(|b| TimedBox::new(b.frame, b.bbox.scaled(sx, sy))).collect())
        .collect())
}
