//! Acceptance gate: eleven end-to-end checks, one per release criterion.
//!
//! Each test prints `ACCEPTANCE <n> <name>: PASS` on success so the suite
//! output doubles as a checklist. Every tolerance and budget is pinned as a
//! constant next to the test that uses it; a failing criterion fails its
//! test with the measured numbers in the panic message.
//!
//!  1. assignment-oracle            solver vs exhaustive search, exact costs
//!  2. formula-fixtures             hand-computed association cost values
//!  3. buffering-invariants         retention rules + staleness comparison
//!  4. alignment-path-independence  eager vs composed camera realignment
//!  5. reversed-positional-encoding reversal oracle + suffix stability
//!  6. gradient-check               analytic vs finite-difference gradients
//!  7. learned-filter-vs-kalman     prediction + tracking on turn-heavy scenes
//!  8. noise-filtering-ablation     corrected boxes vs raw noisy detections
//!  9. metrics-oracle               exact MOTA/IDF1 on known inputs
//! 10. sort-reduction               degenerate config equals reference SORT
//! 11. track-determinism            byte-identical CLI output across runs

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use deepmovesort::association::{
    appearance_cost, atcm_cost, dtiou_cost, fuse, hpc_cost, solve, ComponentCosts, Cost,
    CostMatrix, DtIouParams, Embedding,
};
use deepmovesort::buffer::{BufferConfig, BufferPolicy, MeasurementBuffer};
use deepmovesort::eval::{ade, evaluate, EvalCounts};
use deepmovesort::features::TimedBox;
use deepmovesort::filter::{
    recency_encoding, sinusoidal_position, BoxKalman, KalmanTrackFilter, TrackFilter,
    TransFilterHyper, TransFilterModel, TransFilterTrack,
};
use deepmovesort::geometry::{iou, AffineTransform, BoundingBox};
use deepmovesort::io::model_file::save_model;
use deepmovesort::io::mot::{tracks_by_id, MotRecord};
use deepmovesort::rng::substream;
use deepmovesort::synth::{
    generate, write_sequence, Axis, CameraSpec, Motion, ObjectSpec, OcclusionWindow,
    ScenarioConfig,
};
use deepmovesort::tracker::{
    run_sequence, CascadeConfig, FilterKind, Tracker, TrackerConfig,
};
use deepmovesort::training::{
    fit_window_stats, gradient_check, huber, make_training_set, prepare_window, train,
    TrainConfig,
};
use deepmovesort::Result;
use rand::seq::SliceRandom;
use rand::Rng;

// ---------------------------------------------------------------------------
// Shared oracle: exhaustive assignment search.
// ---------------------------------------------------------------------------

/// Exhaustive search over all partial matchings with the production
/// objective: maximize the number of matched pairs over non-gated cells,
/// then minimize the summed cost, then take the lexicographically smallest
/// (row, column) pair list. Exponential, which is fine at oracle sizes.
fn exhaustive_assignment(costs: &[Vec<Option<f64>>]) -> (Vec<(usize, usize)>, f64) {
    fn go(
        costs: &[Vec<Option<f64>>],
        row: usize,
        used: &mut [bool],
        current: &mut Vec<(usize, usize)>,
        cost: f64,
        best: &mut (usize, f64, Vec<(usize, usize)>),
    ) {
        if row == costs.len() {
            let better = current.len() > best.0
                || (current.len() == best.0 && cost < best.1)
                || (current.len() == best.0 && cost == best.1 && current.as_slice() < best.2.as_slice());
            if better {
                *best = (current.len(), cost, current.clone());
            }
            return;
        }
        go(costs, row + 1, used, current, cost, best);
        for c in 0..used.len() {
            if used[c] {
                continue;
            }
            if let Some(v) = costs[row][c] {
                used[c] = true;
                current.push((row, c));
                go(costs, row + 1, used, current, cost + v, best);
                current.pop();
                used[c] = false;
            }
        }
    }

    let cols = costs.first().map_or(0, |r| r.len());
    let mut best = (0usize, 0.0f64, Vec::new());
    go(costs, 0, &mut vec![false; cols], &mut Vec::new(), 0.0, &mut best);
    (best.2, best.1)
}

// ---------------------------------------------------------------------------
// 1. Assignment oracle.
// ---------------------------------------------------------------------------

const ORACLE_MATRICES: usize = 1000;
const ORACLE_MAX_DIM: usize = 7;
const ORACLE_TIME_BUDGET: Duration = Duration::from_secs(10);

#[test]
fn acceptance_01_assignment_oracle() {
    let start = Instant::now();
    let mut rng = substream(101, 0, 0);
    for case in 0..ORACLE_MATRICES {
        let rows = rng.gen_range(1..=ORACLE_MAX_DIM);
        let cols = rng.gen_range(1..=ORACLE_MAX_DIM);
        // Costs are multiples of 1/64, so every candidate sum is exact in
        // f64 and the optimum comparison is exact equality, not a tolerance.
        // The coarse grid also produces genuine cost ties, exercising the
        // lexicographic tie-break.
        let cells: Vec<Vec<Option<f64>>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| {
                        if rng.gen_bool(0.25) {
                            None
                        } else {
                            Some(rng.gen_range(0..=64) as f64 / 64.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let matrix = CostMatrix::from_fn(rows, cols, |r, c| match cells[r][c] {
            Some(v) => Cost::Finite(v),
            None => Cost::Gated,
        });

        let got = solve(&matrix);
        let (want_matches, want_cost) = exhaustive_assignment(&cells);
        assert_eq!(
            got.matches.len(),
            want_matches.len(),
            "case {case} ({rows}x{cols}): solver matched {} pairs, optimum is {}",
            got.matches.len(),
            want_matches.len()
        );
        assert_eq!(
            got.total_cost, want_cost,
            "case {case} ({rows}x{cols}): solver cost {} vs optimum {}",
            got.total_cost, want_cost
        );
        assert_eq!(
            got.matches, want_matches,
            "case {case} ({rows}x{cols}): matching differs from the tie-broken optimum"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed < ORACLE_TIME_BUDGET, "oracle sweep took {elapsed:?}");
    println!("ACCEPTANCE 1 assignment-oracle: PASS ({ORACLE_MATRICES} matrices in {elapsed:?})");
}

// ---------------------------------------------------------------------------
// 2. Formula fixtures.
// ---------------------------------------------------------------------------

const FORMULA_TOL: f64 = 1e-9;

fn assert_close(got: f64, want: f64, what: &str) {
    assert!(
        (got - want).abs() <= FORMULA_TOL,
        "{what}: got {got}, want {want} (tolerance {FORMULA_TOL})"
    );
}

#[test]
fn acceptance_02_formula_fixtures() -> Result<()> {
    // Decaying gate threshold: upper 0.5, lower 0.25, decay 0.2 per
    // occluded frame. 0 frames -> 0.5, 1 -> 0.3, 10 -> clamped at 0.25.
    let gate = DtIouParams {
        threshold_upper: 0.5,
        threshold_lower: 0.25,
        decay: 0.2,
        expansion_rate: 0.0,
        fuse_score: false,
    };
    assert_close(gate.threshold_at(0), 0.5, "gate threshold at 0 occluded frames");
    assert_close(gate.threshold_at(1), 0.3, "gate threshold at 1 occluded frame");
    assert_close(gate.threshold_at(10), 0.25, "gate threshold at 10 occluded frames");

    // Height/vertical-position cost, unit weights: heights 0.25 vs 0.225
    // and bottom edges 0.80 vs 0.82 give |0.025| + |0.02| = 0.045.
    let hpc_track = BoundingBox::xywh(0.30, 0.55, 0.10, 0.25);
    let hpc_det = BoundingBox::xywh(0.32, 0.595, 0.12, 0.225);
    assert_close(hpc_cost(&hpc_track, &hpc_det, 1.0, 1.0), 0.045, "height/position cost");

    // Symmetric Huber with delta 0.5: quadratic branch 0.5 * 0.1^2 = 0.005,
    // linear branch 0.5 * (2.0 - 0.25) = 0.875.
    assert_close(huber(0.1, 0.5), 0.005, "huber quadratic branch");
    assert_close(huber(2.0, 0.5), 0.875, "huber linear branch");

    // Fused 1x1 matrix. Unit squares offset by 0.25 in x overlap with
    // IoU 0.75/1.25 = 0.6, so the overlap cost is 0.4. Weighted sum:
    //   1.0 * 0.4  +  2.0 * 0.045  +  1.5 * |0.9 - 0.6|  +  2.0 * (1 - 0.8)
    // = 0.4 + 0.09 + 0.45 + 0.4 = 1.34.
    let track_box = BoundingBox::xywh(0.0, 0.0, 1.0, 1.0);
    let det_box = BoundingBox::xywh(0.25, 0.0, 1.0, 1.0);
    let gate_matrix = CostMatrix::from_fn(1, 1, |_, _| {
        dtiou_cost(&track_box, &det_box, 0, &DtIouParams::fixed(0.3))
    });
    let components = vec![
        ComponentCosts { weight: 2.0, values: vec![Some(hpc_cost(&hpc_track, &hpc_det, 1.0, 1.0))] },
        ComponentCosts { weight: 1.5, values: vec![Some(atcm_cost(0.9, 0.6))] },
        ComponentCosts {
            weight: 2.0,
            values: vec![Some(appearance_cost(
                &Embedding(vec![1.0, 0.0]),
                &Embedding(vec![0.8, 0.6]),
            )?)],
        },
    ];
    let fused = fuse(&gate_matrix, 1.0, &components)?;
    match fused.at(0, 0) {
        Cost::Finite(v) => assert_close(v, 1.34, "fused 1x1 cost"),
        Cost::Gated => panic!("fused 1x1 example must not be gated"),
    }

    println!("ACCEPTANCE 2 formula-fixtures: PASS");
    Ok(())
}

// ---------------------------------------------------------------------------
// 3. Buffering invariants and staleness comparison.
// ---------------------------------------------------------------------------

const BUFFER_SEQUENCES: usize = 10_000;

fn random_box(rng: &mut impl Rng) -> BoundingBox {
    BoundingBox::xywh(
        rng.gen_range(0.0..1200.0),
        rng.gen_range(0.0..600.0),
        rng.gen_range(20.0..80.0),
        rng.gen_range(40.0..160.0),
    )
}

#[test]
fn acceptance_03_buffering_invariants() {
    // Purge-on-observation policy: freshness after every observation, and
    // no size change across misses.
    let mut rng = substream(103, 0, 0);
    for _ in 0..BUFFER_SEQUENCES {
        let t_max = rng.gen_range(1..=40);
        let cfg = BufferConfig {
            policy: BufferPolicy::DeepMoveSort,
            t_max,
            l_min: 3,
            lazy_alignment: false,
        };
        let mut buf = MeasurementBuffer::new(cfg);
        let mut t = 0i64;
        for _ in 0..40 {
            t += rng.gen_range(1..=4);
            if rng.gen_bool(0.6) {
                let b = random_box(&mut rng);
                buf.update(t, Some(TimedBox::new(t, b)));
                let first = buf.first_frame().expect("buffer nonempty after an observation");
                assert!(
                    t - first < t_max,
                    "freshness violated: t {t}, first frame {first}, t_max {t_max}"
                );
            } else {
                let before = buf.len();
                buf.update(t, None);
                assert_eq!(buf.len(), before, "a miss changed the buffer size");
            }
        }
    }

    // Single-eviction policy: size never drops below min(size before the
    // update, the floor).
    let mut rng = substream(103, 1, 0);
    for _ in 0..BUFFER_SEQUENCES {
        let t_max = rng.gen_range(1..=40);
        let l_min = rng.gen_range(1..=5);
        let cfg =
            BufferConfig { policy: BufferPolicy::MoveSort, t_max, l_min, lazy_alignment: false };
        let mut buf = MeasurementBuffer::new(cfg);
        let mut t = 0i64;
        for _ in 0..40 {
            t += rng.gen_range(1..=4);
            let before = buf.len();
            let measurement = if rng.gen_bool(0.6) {
                Some(TimedBox::new(t, random_box(&mut rng)))
            } else {
                None
            };
            buf.update(t, measurement);
            assert!(
                buf.len() >= before.min(l_min),
                "floor violated: {} entries after update, {before} before, floor {l_min}",
                buf.len()
            );
        }
    }

    // Comparison harness. Staleness is measured where the filter actually
    // consumes the buffer: at observation frames, when fresh data arrives
    // and the cached encoding is invalidated. On occlusion-heavy traces the
    // purge-on-observation rule leaves strictly fewer stale entries than
    // single eviction, which needs many frames to drain a backlog.
    let t_max = 30;
    let mut rng = substream(103, 2, 0);
    let mut stale_single = 0usize;
    let mut stale_purge = 0usize;
    for _ in 0..200 {
        let mut single = MeasurementBuffer::new(BufferConfig {
            policy: BufferPolicy::MoveSort,
            t_max,
            l_min: 3,
            lazy_alignment: false,
        });
        let mut purge = MeasurementBuffer::new(BufferConfig {
            policy: BufferPolicy::DeepMoveSort,
            t_max,
            l_min: 3,
            lazy_alignment: false,
        });
        let mut t = 0i64;
        for _cycle in 0..6 {
            for _ in 0..rng.gen_range(8..=20) {
                t += 1;
                let tb = TimedBox::new(t, random_box(&mut rng));
                single.update(t, Some(tb));
                purge.update(t, Some(tb));
                stale_single += single.stale_count(t);
                stale_purge += purge.stale_count(t);
            }
            for _ in 0..rng.gen_range(35..=75) {
                t += 1;
                single.update(t, None);
                purge.update(t, None);
            }
        }
    }
    assert!(stale_single > 0, "trace family produced no stale history at all");
    assert!(
        stale_purge < stale_single,
        "purge-on-observation saw {stale_purge} stale entries, single eviction {stale_single}"
    );

    println!(
        "ACCEPTANCE 3 buffering-invariants: PASS (stale at observations: single-eviction {stale_single}, purge-on-observation {stale_purge})"
    );
}

// ---------------------------------------------------------------------------
// 4. Camera alignment path independence.
// ---------------------------------------------------------------------------

const ALIGN_TOL_PX: f64 = 1e-6;
const ALIGN_CHAINS: usize = 100;
const ALIGN_CHAIN_LEN: usize = 50;

/// One frame-to-frame camera move: mild anisotropic zoom, tiny
/// rotation/shear, a few pixels of pan. In this near-identity regime the
/// mapped corners keep their ordering, so box mapping composes.
fn camera_step(rng: &mut impl Rng) -> AffineTransform {
    AffineTransform::new(
        rng.gen_range(0.99..1.01),
        rng.gen_range(-0.002..0.002),
        rng.gen_range(-8.0..8.0),
        rng.gen_range(-0.002..0.002),
        rng.gen_range(0.99..1.01),
        rng.gen_range(-8.0..8.0),
    )
    .expect("near-identity transform is non-singular")
}

#[test]
fn acceptance_04_alignment_path_independence() {
    let mut rng = substream(104, 0, 0);
    for chain in 0..ALIGN_CHAINS {
        let mut eager = MeasurementBuffer::new(BufferConfig { lazy_alignment: false, ..BufferConfig::default() });
        let mut lazy = MeasurementBuffer::new(BufferConfig { lazy_alignment: true, ..BufferConfig::default() });
        for f in 0..8i64 {
            let tb = TimedBox::new(
                f,
                BoundingBox::xywh(
                    rng.gen_range(100.0..900.0),
                    rng.gen_range(100.0..600.0),
                    rng.gen_range(40.0..80.0),
                    rng.gen_range(40.0..80.0),
                ),
            );
            eager.update(f, Some(tb));
            lazy.update(f, Some(tb));
        }
        for _ in 0..ALIGN_CHAIN_LEN {
            let t = camera_step(&mut rng);
            eager.align_to_camera(&t);
            lazy.align_to_camera(&t);
        }
        let per_step: Vec<TimedBox> = eager.history().to_vec();
        let composed: Vec<TimedBox> = lazy.history().to_vec();
        assert_eq!(per_step.len(), composed.len());
        for (e, l) in per_step.iter().zip(&composed) {
            for (label, a, b) in [
                ("x", e.bbox.x, l.bbox.x),
                ("y", e.bbox.y, l.bbox.y),
                ("w", e.bbox.w, l.bbox.w),
                ("h", e.bbox.h, l.bbox.h),
            ] {
                assert!(
                    (a - b).abs() <= ALIGN_TOL_PX,
                    "chain {chain}: {label} diverged, eager {a} vs composed {b}"
                );
            }
        }
    }
    println!(
        "ACCEPTANCE 4 alignment-path-independence: PASS ({ALIGN_CHAINS} chains of {ALIGN_CHAIN_LEN})"
    );
}

// ---------------------------------------------------------------------------
// 5. Reversed positional encoding.
// ---------------------------------------------------------------------------

#[test]
fn acceptance_05_reversed_positional_encoding() {
    for d in [4usize, 16] {
        let anchor = recency_encoding(1, d);
        for n in 1..=64usize {
            let enc = recency_encoding(n, d);
            // Oracle: the standard forward encoding with its rows reversed.
            // Equality is bitwise, not approximate.
            let standard: Vec<Vec<f64>> = (0..n).map(|p| sinusoidal_position(p, d)).collect();
            for r in 0..n {
                assert_eq!(
                    enc.row(r),
                    standard[n - 1 - r].as_slice(),
                    "n {n}, d {d}: row {r} differs from reversed standard encoding"
                );
            }
            // Suffix stability: growing the history shifts codes backward
            // while every trailing row keeps a bit-identical code. In
            // particular the newest observation always gets the same code.
            if n > 1 {
                let prev = recency_encoding(n - 1, d);
                for r in 0..n - 1 {
                    assert_eq!(
                        enc.row(r + 1),
                        prev.row(r),
                        "n {n}, d {d}: suffix row {r} changed when history grew"
                    );
                }
            }
            assert_eq!(enc.row(n - 1), anchor.row(0), "n {n}, d {d}: newest-entry code moved");
        }
    }
    println!("ACCEPTANCE 5 reversed-positional-encoding: PASS");
}

// ---------------------------------------------------------------------------
// 6. Gradient check.
// ---------------------------------------------------------------------------

const GRAD_REL_TOL: f64 = 1e-3;
const GRAD_TIME_BUDGET: Duration = Duration::from_secs(60);

#[test]
fn acceptance_06_gradient_check() -> Result<()> {
    let start = Instant::now();
    // Tracks with drift and size breathing so no feature channel is
    // constant; a constant channel floors its fitted std and standardized
    // residuals on it would dominate the loss.
    let tracks: Vec<Vec<TimedBox>> = (0..3)
        .map(|i| {
            let i = i as f64;
            (0..14i64)
                .map(|f| {
                    let t = f as f64;
                    let w = 0.10 * (1.0 + 0.04 * (0.6 * t + i).sin());
                    let h = 0.22 * (1.0 + 0.04 * (0.4 * t).cos());
                    TimedBox::new(
                        f,
                        BoundingBox::xywh(0.1 + (0.004 + 0.002 * i) * t, 0.1 + 0.07 * i + 0.003 * t, w, h),
                    )
                })
                .collect()
        })
        .collect();

    let hyper = TransFilterHyper { d_model: 8, n_heads: 2, n_layers: 1, history_len: 4, m_max: 4 };
    let windows = make_training_set(&tracks, hyper.history_len, hyper.m_max, 1);
    let stats = fit_window_stats(&windows)?;
    let mut model = TransFilterModel::new(hyper, stats.clone(), &mut substream(106, 0, 0))?;
    let window = windows
        .iter()
        .find(|w| w.history.len() == 4 && w.future.len() == 4)
        .expect("corpus contains a full window");
    let prep = prepare_window(window, &stats, 4, None)?;

    let worst = gradient_check(&mut model, &prep, 0.5)?;
    assert!(
        worst < GRAD_REL_TOL,
        "worst relative gradient error {worst} exceeds {GRAD_REL_TOL}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed < GRAD_TIME_BUDGET, "gradient check took {elapsed:?}");
    println!("ACCEPTANCE 6 gradient-check: PASS (worst relative error {worst:.2e} in {elapsed:?})");
    Ok(())
}

// ---------------------------------------------------------------------------
// 7. Learned filter vs Kalman on turn-heavy trajectories.
// ---------------------------------------------------------------------------

/// The learned filter must reach at most this fraction of the Kalman
/// filter's mean prediction error on held-out tracks.
const ADE_RATIO_BOUND: f64 = 0.8;
const BENCH_TRIALS: u64 = 5;
const BENCH_MIN_PASSES: usize = 4;
const TRAIN_TIME_BUDGET: Duration = Duration::from_secs(600);
const BENCH_TRAIN_SEQUENCES: u64 = 20;
const BENCH_HELD_OUT_SEQUENCES: u64 = 5;

fn switcher(
    start: [f64; 2],
    velocity: [f64; 2],
    period: u32,
    occlusions: Vec<OcclusionWindow>,
) -> ObjectSpec {
    ObjectSpec {
        start,
        width: 70.0,
        height: 170.0,
        motion: Motion::DirectionSwitch { velocity, switch_period: period },
        occlusions,
        breathing_amplitude: 0.03,
        breathing_period: 40.0,
    }
}

fn weaver(start: [f64; 2], velocity_x: f64, amplitude: f64, period: f64) -> ObjectSpec {
    ObjectSpec {
        start,
        width: 60.0,
        height: 150.0,
        motion: Motion::Sinusoidal {
            velocity: [velocity_x, 0.0],
            amplitude,
            period,
            axis: Axis::Y,
        },
        occlusions: vec![],
        breathing_amplitude: 0.03,
        breathing_period: 40.0,
    }
}

/// Turn-heavy benchmark scene: two direction switchers plus a sinusoidal
/// weaver. Most geometry (starts, velocities, switch periods, weave shape)
/// is drawn from the seed so distinct seeds give genuinely distinct
/// trajectories and held-out realizations are actually unseen. Switch
/// periods sit at or below the 12-step evaluation horizon, so every
/// prediction window contains at least one turn — the regime where
/// constant-velocity extrapolation is consistently wrong.
///
/// The first switcher keeps a pinned switch period of 14 with flips on
/// multiples of 14. When it is occluded over frames 70..92 the constant-
/// velocity baseline has locked onto the pre-occlusion leg (frames 56..69)
/// and extrapolates ~126 px ahead, while the object actually turns twice
/// behind the occluder and reappears ~33 px behind its vanishing point.
/// All objects share an appearance base, so only motion can recover the
/// identity.
fn bench_scenario(name: &str, seed: u64, occluded: bool) -> ScenarioConfig {
    let mut r = substream(seed, 9, 0);
    let start_a = [300.0 + r.gen_range(-40.0..40.0), 300.0 + r.gen_range(-40.0..40.0)];
    let start_b = [800.0 + r.gen_range(-40.0..40.0), 420.0 + r.gen_range(-40.0..40.0)];
    let velocity_b = [r.gen_range(4.0..6.0), r.gen_range(0.5..1.5)];
    let period_b = r.gen_range(9..=15u32);
    let weave_start = [200.0 + r.gen_range(-40.0..40.0), 550.0 + r.gen_range(-20.0..20.0)];
    let weave_vx = r.gen_range(1.0..1.5);
    let weave_amplitude = r.gen_range(45.0..60.0);
    let weave_period = r.gen_range(16.0..22.0);

    let occ = if occluded { vec![OcclusionWindow { from: 70, until: 92 }] } else { vec![] };
    ScenarioConfig {
        name: name.into(),
        width: 1280,
        height: 720,
        num_frames: 160,
        seed,
        detection_noise: 0.01,
        embedding_dim: 16,
        embedding_noise: 0.05,
        shared_embeddings: true,
        camera: None,
        objects: vec![
            switcher(start_a, [5.5, 0.8], 14, occ),
            switcher(start_b, velocity_b, period_b, vec![]),
            weaver(weave_start, weave_vx, weave_amplitude, weave_period),
        ],
    }
}

/// Ground-truth tracks of the given scenario seeds, in image fractions.
fn normalized_tracks(seeds: std::ops::Range<u64>, occluded: bool) -> Result<Vec<Vec<TimedBox>>> {
    let mut tracks = Vec::new();
    for seed in seeds {
        let sc = bench_scenario("bench", seed, occluded);
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

/// Mean 12-step blind prediction error of both filters over (track, anchor)
/// pairs: warm each filter on a 12-observation prefix, then predict with no
/// further input. Returns (kalman, learned).
fn mean_prediction_errors(
    model: &Arc<TransFilterModel>,
    tracks: &[Vec<TimedBox>],
) -> Result<(f64, f64)> {
    const PREFIX: usize = 12;
    const HORIZON: usize = 12;
    const ANCHORS: [usize; 4] = [30, 60, 90, 120];
    let (mut sum_kf, mut sum_tf, mut n) = (0.0f64, 0.0f64, 0usize);
    for track in tracks {
        for &anchor in &ANCHORS {
            if anchor < PREFIX || anchor + HORIZON > track.len() {
                continue;
            }
            let prefix = &track[anchor - PREFIX..anchor];
            let truth: Vec<BoundingBox> =
                track[anchor..anchor + HORIZON].iter().map(|tb| tb.bbox).collect();
            let mut kalman = KalmanTrackFilter::new(&prefix[0]);
            let mut learned = TransFilterTrack::new(Arc::clone(model));
            let mut buf_k = MeasurementBuffer::new(BufferConfig::default());
            let mut buf_t = MeasurementBuffer::new(BufferConfig::default());
            for (i, tb) in prefix.iter().enumerate() {
                buf_k.update(tb.frame, Some(*tb));
                buf_t.update(tb.frame, Some(*tb));
                if i > 0 {
                    kalman.filter(&mut buf_k, tb)?;
                }
            }
            sum_kf += ade(&truth, &kalman.predict(&mut buf_k, HORIZON)?)?;
            sum_tf += ade(&truth, &learned.predict(&mut buf_t, HORIZON)?)?;
            n += 1;
        }
    }
    assert!(n > 0, "no (track, anchor) pairs to evaluate");
    Ok((sum_kf / n as f64, sum_tf / n as f64))
}

#[test]
fn acceptance_07_learned_filter_vs_kalman() -> Result<()> {
    let mut passes = 0usize;
    for trial in 0..BENCH_TRIALS {
        let base = 1000 * trial;
        let arch =
            TransFilterHyper { d_model: 32, n_heads: 4, n_layers: 2, history_len: 12, m_max: 12 };
        let cfg = TrainConfig { seed: trial, epochs: 14, ..TrainConfig::default() };

        let train_tracks = normalized_tracks(base..base + BENCH_TRAIN_SEQUENCES, false)?;
        let windows = make_training_set(&train_tracks, arch.history_len, arch.m_max, cfg.stride);
        let stats = fit_window_stats(&windows)?;
        let mut model = TransFilterModel::new(arch, stats, &mut substream(trial, 0, 0))?;
        let train_start = Instant::now();
        train(&mut model, &windows, &cfg)?;
        let train_time = train_start.elapsed();
        assert!(train_time < TRAIN_TIME_BUDGET, "trial {trial}: training took {train_time:?}");
        let model = Arc::new(model);

        // Blind multi-step prediction on held-out realizations.
        let held_out =
            normalized_tracks(base + 500..base + 500 + BENCH_HELD_OUT_SEQUENCES, false)?;
        let (ade_kf, ade_tf) = mean_prediction_errors(&model, &held_out)?;

        // Full pipeline through an occlusion with ambiguous appearance.
        let seq = generate(&bench_scenario("crossing", base + 900, true))?;
        let data = seq.tracker_input()?;
        let tracker_cfg = TrackerConfig::default();
        let idf1_kf =
            evaluate(&seq.gt, &run_sequence(&tracker_cfg, FilterKind::Kalman, &data)?)?.idf1();
        let idf1_tf = evaluate(
            &seq.gt,
            &run_sequence(&tracker_cfg, FilterKind::Transformer(Arc::clone(&model)), &data)?,
        )?
        .idf1();

        let ade_ok = ade_tf <= ADE_RATIO_BOUND * ade_kf;
        let idf1_ok = idf1_tf >= idf1_kf;
        println!(
            "  trial {trial}: prediction error {ade_tf:.5} vs kalman {ade_kf:.5} ({}), \
             IDF1 {idf1_tf:.4} vs kalman {idf1_kf:.4} ({}), trained {} windows in {train_time:.1?}",
            if ade_ok { "ok" } else { "MISS" },
            if idf1_ok { "ok" } else { "MISS" },
            windows.len(),
        );
        if ade_ok && idf1_ok {
            passes += 1;
        }
    }
    assert!(
        passes >= BENCH_MIN_PASSES,
        "only {passes}/{BENCH_TRIALS} trials met both bounds (need {BENCH_MIN_PASSES})"
    );
    println!("ACCEPTANCE 7 learned-filter-vs-kalman: PASS ({passes}/{BENCH_TRIALS} trials)");
    Ok(())
}

// ---------------------------------------------------------------------------
// 8. Noise-filtering ablation.
// ---------------------------------------------------------------------------

const NOISE_NEUTRAL_EPS: f64 = 0.01;

/// Four linear walkers with constant box sizes. Sizes are held constant so
/// the zero-noise arm isolates the correction transient instead of chasing
/// size oscillation.
fn ablation_scenario(seed: u64, detection_noise: f64) -> ScenarioConfig {
    let walker = |start: [f64; 2], velocity: [f64; 2]| ObjectSpec {
        start,
        width: 70.0,
        height: 170.0,
        motion: Motion::Linear { velocity },
        occlusions: vec![],
        breathing_amplitude: 0.0,
        breathing_period: 40.0,
    };
    ScenarioConfig {
        name: "ablation".into(),
        width: 1280,
        height: 720,
        num_frames: 150,
        seed,
        detection_noise,
        embedding_dim: 16,
        embedding_noise: 0.05,
        shared_embeddings: false,
        camera: None,
        objects: vec![
            walker([200.0, 200.0], [4.0, 1.0]),
            walker([900.0, 250.0], [-3.0, 1.2]),
            walker([300.0, 550.0], [3.5, 0.3]),
            walker([1050.0, 530.0], [-3.0, -0.2]),
        ],
    }
}

/// Merged scores over three seeds with the given noise level, with the
/// correction toggle on or off. The stored/emitted box is the only thing the
/// toggle changes, so any metric delta is localization quality.
fn ablation_counts(filtering: bool, detection_noise: f64) -> Result<EvalCounts> {
    let mut total = EvalCounts::default();
    for seed in [11u64, 12, 13] {
        let seq = generate(&ablation_scenario(seed, detection_noise))?;
        let data = seq.tracker_input()?;
        let cfg = TrackerConfig { apply_noise_filtering: filtering, ..TrackerConfig::default() };
        let records = run_sequence(&cfg, FilterKind::Kalman, &data)?;
        total.merge(&evaluate(&seq.gt, &records)?);
    }
    Ok(total)
}

#[test]
fn acceptance_08_noise_filtering_ablation() -> Result<()> {
    let raw = ablation_counts(false, 0.1)?;
    let corrected = ablation_counts(true, 0.1)?;
    assert!(
        corrected.mean_matched_iou() > raw.mean_matched_iou(),
        "at noise 0.1 correction must improve matched overlap: {} vs {}",
        corrected.mean_matched_iou(),
        raw.mean_matched_iou()
    );

    let raw_clean = ablation_counts(false, 0.0)?;
    let corrected_clean = ablation_counts(true, 0.0)?;
    let delta = (corrected_clean.mean_matched_iou() - raw_clean.mean_matched_iou()).abs();
    assert!(
        delta < NOISE_NEUTRAL_EPS,
        "at noise 0.0 correction must be near-neutral, matched overlap moved by {delta}"
    );

    println!(
        "ACCEPTANCE 8 noise-filtering-ablation: PASS (noisy {:.4} -> {:.4}, clean delta {:.5})",
        raw.mean_matched_iou(),
        corrected.mean_matched_iou(),
        delta
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// 9. Metrics oracle.
// ---------------------------------------------------------------------------

const METRIC_EXACT: f64 = 1e-12;

fn rec(frame: i64, id: i64, x: f64, y: f64) -> MotRecord {
    MotRecord { frame, id, bbox: BoundingBox::xywh(x, y, 10.0, 10.0) }
}

#[test]
fn acceptance_09_metrics_oracle() -> Result<()> {
    // A tracker that emits the ground truth (with relabeled ids; the
    // metrics are invariant to a consistent relabeling) scores perfectly.
    let seq = generate(&bench_scenario("oracle", 42, true))?;
    let perfect: Vec<MotRecord> = seq
        .gt
        .iter()
        .map(|r| MotRecord { frame: r.frame, id: r.id + 7, bbox: r.bbox })
        .collect();
    let counts = evaluate(&seq.gt, &perfect)?;
    assert_eq!(counts.false_negatives, 0);
    assert_eq!(counts.false_positives, 0);
    assert_eq!(counts.id_switches, 0);
    assert_eq!(counts.idtp, counts.gt_total);
    assert_eq!(counts.mota(), 1.0, "identity tracker MOTA must be exactly 1");
    assert_eq!(counts.idf1(), 1.0, "identity tracker IDF1 must be exactly 1");

    // Hand-built fixture: 2 ground-truth tracks over 5 frames = 10 boxes.
    // Predictions carry one identity hand-over (id 1 -> 9 on track 1 at
    // frame 3), one missing box (track 2, frame 4) and one spurious box.
    // MOTA = 1 - (1 + 1 + 1)/10 = 0.7. The best identity pairing keeps
    // id 1 for track 1 (3 frames) and id 2 for track 2 (4 frames), so
    // IDF1 = 2 * 7 / (10 + 10) = 0.7 as well.
    let mut gt = Vec::new();
    let mut pred = Vec::new();
    for f in 0..5i64 {
        gt.push(rec(f, 1, 0.0, 0.0));
        gt.push(rec(f, 2, 100.0, 0.0));
        pred.push(rec(f, if f < 3 { 1 } else { 9 }, 0.0, 0.0));
        if f < 4 {
            pred.push(rec(f, 2, 100.0, 0.0));
        }
    }
    pred.push(rec(0, 99, 500.0, 500.0));

    let counts = evaluate(&gt, &pred)?;
    assert_eq!(counts.gt_total, 10);
    assert_eq!(counts.pred_total, 10);
    assert_eq!(counts.false_negatives, 1);
    assert_eq!(counts.false_positives, 1);
    assert_eq!(counts.id_switches, 1);
    assert_eq!(counts.idtp, 7);
    assert!(
        (counts.mota() - 0.7).abs() <= METRIC_EXACT,
        "fixture MOTA {} != 0.7",
        counts.mota()
    );
    assert!(
        (counts.idf1() - 0.7).abs() <= METRIC_EXACT,
        "fixture IDF1 {} != 0.7",
        counts.idf1()
    );

    println!("ACCEPTANCE 9 metrics-oracle: PASS");
    Ok(())
}

// ---------------------------------------------------------------------------
// 10. Reduction to SORT under the degenerate configuration.
// ---------------------------------------------------------------------------

const SORT_SCENES: usize = 100;
const SORT_FRAMES: i64 = 30;
const SORT_GATE: f64 = 0.3;
const SORT_MAX_AGE: usize = 3;

/// Minimal reference tracker: constant-velocity Kalman prediction, plain
/// IoU gating at a fixed threshold, exhaustive optimal assignment, ids in
/// spawn order, tracks dropped after `SORT_MAX_AGE` consecutive misses.
struct ReferenceSort {
    tracks: Vec<(u64, BoxKalman, usize)>, // (id, state, consecutive misses)
    next_id: u64,
}

impl ReferenceSort {
    fn new() -> Self {
        ReferenceSort { tracks: Vec::new(), next_id: 1 }
    }

    fn step(&mut self, frame: i64, dets: &[BoundingBox]) -> Vec<(u64, usize)> {
        let costs: Vec<Vec<Option<f64>>> = self
            .tracks
            .iter()
            .map(|(_, kf, _)| {
                let mut probe = kf.clone();
                for _ in 0..(frame - probe.frame()) {
                    probe.predict_step();
                }
                let predicted = probe.mean_box();
                dets.iter()
                    .map(|d| {
                        let overlap = iou(&predicted, d);
                        if overlap < SORT_GATE {
                            None
                        } else {
                            Some(1.0 - overlap)
                        }
                    })
                    .collect()
            })
            .collect();
        let (matches, _) = exhaustive_assignment(&costs);

        let mut track_matched = vec![false; self.tracks.len()];
        let mut det_matched = vec![false; dets.len()];
        let mut out = Vec::with_capacity(matches.len());
        for &(row, col) in &matches {
            let (id, kf, misses) = &mut self.tracks[row];
            kf.absorb(&TimedBox::new(frame, dets[col]));
            *misses = 0;
            track_matched[row] = true;
            det_matched[col] = true;
            out.push((*id, col));
        }
        let mut keep = track_matched.iter().copied();
        self.tracks.retain_mut(|(_, _, misses)| {
            if keep.next().expect("mask aligned") {
                true
            } else {
                *misses += 1;
                *misses <= SORT_MAX_AGE
            }
        });
        for (col, det) in dets.iter().enumerate() {
            if !det_matched[col] {
                self.tracks.push((
                    self.next_id,
                    BoxKalman::new(&TimedBox::new(frame, *det)),
                    0,
                ));
                self.next_id += 1;
            }
        }
        out
    }
}

/// Everything off except one cascade of plain IoU at a fixed gate: no decay,
/// no expansion, no confidence fusion, no auxiliary costs, instant track
/// activation, no duplicate suppression (threshold 1.0 never fires on
/// continuous data), no stored-box correction.
fn degenerate_config() -> TrackerConfig {
    let plain_iou = CascadeConfig {
        gate: DtIouParams::fixed(SORT_GATE),
        overlap_weight: 1.0,
        appearance_weight: 0.0,
        atcm_weight: 0.0,
        hpc_weight: 0.0,
        hpc_height_weight: 0.0,
        hpc_vertical_weight: 0.0,
    };
    TrackerConfig {
        detection_confidence_threshold: 0.0,
        track_max_time_lost: SORT_MAX_AGE,
        track_init_time: 1,
        track_init_confidence: 0.0,
        duplicate_iou_threshold: 1.0,
        apply_noise_filtering: false,
        use_cmc: false,
        ha: plain_iou,
        la: plain_iou,
        na: plain_iou,
        ..TrackerConfig::default()
    }
}

struct SceneObject {
    start: [f64; 2],
    velocity: [f64; 2],
    size: [f64; 2],
    visible: std::ops::Range<i64>,
}

fn random_scene(rng: &mut impl Rng) -> Vec<SceneObject> {
    let n = rng.gen_range(1..=6);
    (0..n)
        .map(|_| SceneObject {
            start: [rng.gen_range(100.0..1100.0), rng.gen_range(150.0..550.0)],
            velocity: [rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)],
            size: [rng.gen_range(30.0..80.0), rng.gen_range(60.0..160.0)],
            visible: rng.gen_range(0..=8)..rng.gen_range(22..=SORT_FRAMES),
        })
        .collect()
}

fn scene_detections(objects: &[SceneObject], frame: i64, rng: &mut impl Rng) -> Vec<BoundingBox> {
    let mut dets = Vec::new();
    for o in objects {
        if !o.visible.contains(&frame) || rng.gen_bool(0.15) {
            continue;
        }
        let t = frame as f64;
        let w = (o.size[0] + rng.gen_range(-1.0..1.0)).max(5.0);
        let h = (o.size[1] + rng.gen_range(-1.0..1.0)).max(5.0);
        let cx = o.start[0] + o.velocity[0] * t + rng.gen_range(-2.0..2.0);
        let cy = o.start[1] + o.velocity[1] * t + rng.gen_range(-2.0..2.0);
        dets.push(BoundingBox::xywh(cx - w / 2.0, cy - h / 2.0, w, h));
    }
    dets.shuffle(rng);
    dets
}

#[test]
fn acceptance_10_sort_reduction() -> Result<()> {
    let mut rng = substream(110, 0, 0);
    for scene in 0..SORT_SCENES {
        let objects = random_scene(&mut rng);
        let mut tracker = Tracker::new(degenerate_config(), FilterKind::Kalman)?;
        let mut reference = ReferenceSort::new();
        for frame in 0..SORT_FRAMES {
            let dets = scene_detections(&objects, frame, &mut rng);
            let mut got = tracker.step(frame, &dets, None, None)?.matches;
            let mut want = reference.step(frame, &dets);
            got.sort_unstable();
            want.sort_unstable();
            assert_eq!(
                got, want,
                "scene {scene}, frame {frame}: matchings diverged ({} detections)",
                dets.len()
            );
        }
    }
    println!("ACCEPTANCE 10 sort-reduction: PASS ({SORT_SCENES} scenes, frame-by-frame)");
    Ok(())
}

// ---------------------------------------------------------------------------
// 11. Byte-identical tracking runs.
// ---------------------------------------------------------------------------

fn determinism_scenarios() -> Vec<ScenarioConfig> {
    let linear = |start: [f64; 2], velocity: [f64; 2]| ObjectSpec {
        start,
        width: 70.0,
        height: 170.0,
        motion: Motion::Linear { velocity },
        occlusions: vec![],
        breathing_amplitude: 0.03,
        breathing_period: 40.0,
    };
    vec![
        ScenarioConfig {
            name: "alpha".into(),
            width: 1280,
            height: 720,
            num_frames: 120,
            seed: 5,
            detection_noise: 0.01,
            embedding_dim: 16,
            embedding_noise: 0.05,
            shared_embeddings: false,
            camera: None,
            objects: vec![
                linear([250.0, 250.0], [4.0, 1.0]),
                linear([950.0, 300.0], [-3.0, 1.0]),
                weaver([300.0, 550.0], 1.2, 50.0, 28.0),
            ],
        },
        bench_scenario("bravo", 6, true),
        ScenarioConfig {
            name: "charlie".into(),
            width: 1280,
            height: 720,
            num_frames: 120,
            seed: 7,
            detection_noise: 0.01,
            embedding_dim: 16,
            embedding_noise: 0.05,
            shared_embeddings: false,
            camera: Some(CameraSpec { pan: [1.5, 0.2], zoom: 1.0005 }),
            objects: vec![linear([400.0, 300.0], [2.0, 0.5]), linear([800.0, 450.0], [-2.0, 0.3])],
        },
    ]
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output directory exists")
        .map(|e| {
            let e = e.expect("directory entry");
            let name = e.file_name().to_string_lossy().into_owned();
            let bytes = std::fs::read(e.path()).expect("output file readable");
            (name, bytes)
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn acceptance_11_track_determinism() -> Result<()> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path().join("seqs");

    let scenarios = determinism_scenarios();
    for sc in &scenarios {
        let seq = generate(sc)?;
        write_sequence(&root.join(&sc.name), &seq)?;
    }

    // A small trained model so the full learned path (model load, encoder
    // caching, multi-step prediction) is part of what must be reproducible.
    let first = generate(&scenarios[0])?;
    let (sx, sy) = (1.0 / 1280.0, 1.0 / 720.0);
    let tracks: Vec<Vec<TimedBox>> = tracks_by_id(&first.gt)?
        .into_values()
        .map(|t| t.into_iter().map(|b| TimedBox::new(b.frame, b.bbox.scaled(sx, sy))).collect())
        .collect();
    let hyper = TransFilterHyper { d_model: 16, n_heads: 2, n_layers: 1, history_len: 6, m_max: 6 };
    let windows = make_training_set(&tracks, hyper.history_len, hyper.m_max, 1);
    let stats = fit_window_stats(&windows)?;
    let mut model = TransFilterModel::new(hyper, stats, &mut substream(9, 0, 0))?;
    train(&mut model, &windows, &TrainConfig { epochs: 2, ..TrainConfig::default() })?;
    let model_path = tmp.path().join("model.bin");
    save_model(&model_path, &model)?;

    // Directory input runs the sequences through the thread pool, so this
    // also pins that parallel scheduling cannot leak into the output.
    let out_a = tmp.path().join("out_a");
    let out_b = tmp.path().join("out_b");
    for out in [&out_a, &out_b] {
        deepmovesort::cli::run_from([
            "deepmovesort",
            "track",
            "--dets",
            root.to_str().expect("utf-8 temp path"),
            "--model",
            model_path.to_str().expect("utf-8 temp path"),
            "--out",
            out.to_str().expect("utf-8 temp path"),
        ])?;
    }

    let got_a = dir_contents(&out_a);
    let got_b = dir_contents(&out_b);
    assert_eq!(got_a.len(), scenarios.len(), "one result file per sequence");
    for ((name_a, bytes_a), (name_b, bytes_b)) in got_a.iter().zip(&got_b) {
        assert_eq!(name_a, name_b);
        assert!(!bytes_a.is_empty(), "{name_a} is empty");
        assert_eq!(bytes_a, bytes_b, "{name_a} differs between runs");
    }

    println!("ACCEPTANCE 11 track-determinism: PASS ({} sequences, 2 runs)", scenarios.len());
    Ok(())
}
