//! Train a small transformer motion filter on synthetic trajectories, save
//! it, and read it back.
//!
//!     cargo run --release --example train_filter

use deepmovesort::features::TimedBox;
use deepmovesort::filter::{TransFilterHyper, TransFilterModel};
use deepmovesort::io::model_file::{inspect_model, save_model};
use deepmovesort::io::mot::tracks_by_id;
use deepmovesort::rng::substream;
use deepmovesort::synth::{generate, Motion, ObjectSpec, ScenarioConfig};
use deepmovesort::training::{fit_window_stats, make_training_set, train, TrainConfig};
use deepmovesort::Result;

/// Ground-truth tracks of one scenario, normalized to [0, 1] coordinates.
fn gt_tracks(scenario: &ScenarioConfig) -> Result<Vec<Vec<TimedBox>>> {
    let seq = generate(scenario)?;
    let (sx, sy) = (1.0 / scenario.width as f64, 1.0 / scenario.height as f64);
    Ok(tracks_by_id(&seq.gt)?
        .into_values()
        .map(|t| t.into_iter().map(|b| TimedBox::new(b.frame, b.bbox.scaled(sx, sy))).collect())
        .collect())
}

fn main() -> Result<()> {
    // A mix of motion patterns; each seed yields a different realization.
    let mut tracks = Vec::new();
    for seed in 0..6u64 {
        let scenario = ScenarioConfig {
            name: format!("train-{seed}"),
            width: 1280,
            height: 720,
            num_frames: 150,
            seed,
            detection_noise: 0.0,
            embedding_dim: 0,
            embedding_noise: 0.0,
            shared_embeddings: false,
            camera: None,
            objects: vec![
                ObjectSpec {
                    start: [200.0 + 40.0 * seed as f64, 330.0],
                    width: 70.0,
                    height: 170.0,
                    motion: Motion::DirectionSwitch {
                        velocity: [4.0, 0.5],
                        switch_period: 20 + 4 * seed as u32,
                    },
                    occlusions: vec![],
                    breathing_amplitude: 0.03,
                    breathing_period: 40.0,
                },
                ObjectSpec {
                    start: [900.0, 400.0],
                    width: 66.0,
                    height: 162.0,
                    motion: Motion::Sinusoidal {
                        velocity: [-2.5, 0.0],
                        amplitude: 50.0 + 10.0 * seed as f64,
                        period: 40.0,
                        axis: deepmovesort::synth::Axis::Y,
                    },
                    occlusions: vec![],
                    breathing_amplitude: 0.03,
                    breathing_period: 40.0,
                },
            ],
        };
        tracks.extend(gt_tracks(&scenario)?);
    }

    let arch = TransFilterHyper {
        d_model: 32,
        n_heads: 4,
        n_layers: 2,
        history_len: 10,
        m_max: 12,
    };
    let cfg = TrainConfig { epochs: 6, ..TrainConfig::default() };

    let windows = make_training_set(&tracks, arch.history_len, arch.m_max, cfg.stride);
    let stats = fit_window_stats(&windows)?;
    println!("{} tracks -> {} training windows", tracks.len(), windows.len());

    let mut model = TransFilterModel::new(arch, stats, &mut substream(cfg.seed, 0, 0))?;
    let report = train(&mut model, &windows, &cfg)?;
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        println!("epoch {:>2}: loss {loss:.5}", i + 1);
    }
    let first = report.epoch_losses.first().copied().unwrap_or(f64::NAN);
    let last = report.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!("loss {first:.5} -> {last:.5}");

    let path = std::env::temp_dir().join("deepmovesort_example_model.tfm");
    save_model(&path, &model)?;
    let info = inspect_model(&path)?;
    println!(
        "saved {} ({} tensors, {} parameters, layout {})",
        path.display(),
        info.tensors.len(),
        info.param_count(),
        info.feature_layout
    );
    Ok(())
}
