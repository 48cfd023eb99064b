//! Run the full tracker (Kalman motion filter) over a synthetic crossing
//! scene and score the result against ground truth.
//!
//!     cargo run --example track_kalman

use deepmovesort::eval::evaluate;
use deepmovesort::synth::{generate, Motion, ObjectSpec, ScenarioConfig};
use deepmovesort::tracker::{run_sequence, FilterKind, TrackerConfig};
use deepmovesort::Result;

fn object(start: [f64; 2], motion: Motion) -> ObjectSpec {
    ObjectSpec {
        start,
        width: 70.0,
        height: 170.0,
        motion,
        occlusions: vec![],
        breathing_amplitude: 0.03,
        breathing_period: 40.0,
    }
}

fn main() -> Result<()> {
    let scenario = ScenarioConfig {
        name: "crossing".into(),
        width: 1280,
        height: 720,
        num_frames: 180,
        seed: 7,
        detection_noise: 0.015,
        embedding_dim: 16,
        embedding_noise: 0.05,
        shared_embeddings: false,
        camera: None,
        objects: vec![
            object([140.0, 360.0], Motion::Linear { velocity: [6.0, 0.0] }),
            object([1140.0, 382.0], Motion::Linear { velocity: [-6.0, 0.0] }),
            object([640.0, 300.0], Motion::Sinusoidal {
                velocity: [0.0, 1.0],
                amplitude: 90.0,
                period: 60.0,
                axis: deepmovesort::synth::Axis::X,
            }),
        ],
    };
    let seq = generate(&scenario)?;

    let config = TrackerConfig::default();
    let records = run_sequence(&config, FilterKind::Kalman, &seq.tracker_input()?)?;
    println!(
        "tracked {} frames: {} output rows, {} distinct ids",
        seq.info.seq_length,
        records.len(),
        {
            let mut ids: Vec<i64> = records.iter().map(|r| r.id).collect();
            ids.sort_unstable();
            ids.dedup();
            ids.len()
        }
    );

    let counts = evaluate(&seq.gt, &records)?;
    println!("MOTA            {:>8.4}", counts.mota());
    println!("IDF1            {:>8.4}", counts.idf1());
    println!("id switches     {:>8}", counts.id_switches);
    println!("false positives {:>8}", counts.false_positives);
    println!("false negatives {:>8}", counts.false_negatives);
    println!("mean match IoU  {:>8.4}", counts.mean_matched_iou());
    Ok(())
}
