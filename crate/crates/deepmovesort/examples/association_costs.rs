//! Walk through the association building blocks on hand-made boxes: the
//! decaying-threshold IoU gate, box expansion, height/position and
//! confidence-trend penalties, cost fusion, and the optimal assignment.
//!
//!     cargo run --example association_costs

use deepmovesort::association::{
    atcm_cost, dtiou_cost, fuse, hpc_cost, solve, ComponentCosts, Cost, CostMatrix, DtIouParams,
};
use deepmovesort::geometry::BoundingBox;
use deepmovesort::Result;

fn show(cost: Cost) -> String {
    match cost {
        Cost::Finite(v) => format!("{v:.3}"),
        Cost::Gated => "gated".into(),
    }
}

fn main() -> Result<()> {
    let params = DtIouParams {
        threshold_upper: 0.5,
        threshold_lower: 0.25,
        decay: 0.05,
        expansion_rate: 0.0,
        fuse_score: false,
    };

    // A track prediction and a detection that overlap only moderately.
    let track = BoundingBox::xywh(0.40, 0.40, 0.10, 0.20);
    let det = BoundingBox::xywh(0.445, 0.40, 0.10, 0.20);

    println!("gate threshold decays while a track stays unseen:");
    for t_occluded in [0, 2, 4, 6, 8] {
        let threshold =
            (params.threshold_upper - params.decay * t_occluded as f64).max(params.threshold_lower);
        println!(
            "  unseen {t_occluded} frames  threshold {threshold:.2}  cost {}",
            show(dtiou_cost(&track, &det, t_occluded, &params))
        );
    }

    println!("\nbox expansion admits a fast mover the plain gate rejects:");
    let runner = BoundingBox::xywh(0.47, 0.40, 0.10, 0.20); // barely touches the track
    for rate in [0.0, 0.35, 0.7] {
        let p = DtIouParams { expansion_rate: rate, ..params };
        println!("  expansion {rate:.2}  cost {}", show(dtiou_cost(&track, &runner, 4, &p)));
    }

    println!("\nheight/position penalty separates look-alike candidates:");
    let same_row = BoundingBox::xywh(0.46, 0.40, 0.10, 0.20);
    let taller = BoundingBox::xywh(0.46, 0.37, 0.10, 0.26);
    println!("  same height, same feet: {:.4}", hpc_cost(&track, &same_row, 1.0, 1.0));
    println!("  taller, feet shifted:   {:.4}", hpc_cost(&track, &taller, 1.0, 1.0));

    println!("\nconfidence-trend penalty (predicted track confidence vs detection):");
    for (pred, det_conf) in [(0.9, 0.85), (0.9, 0.4), (0.35, 0.4)] {
        println!("  predicted {pred:.2} vs detection {det_conf:.2}: {:.3}", atcm_cost(pred, det_conf));
    }

    // Two tracks, two detections where overlap alone picks one pairing and
    // the height cue overrules it: the short track sits nearer the tall
    // detection, but heights say the pairing should swap.
    println!("\noverlap-only vs fused assignment:");
    let short_track = BoundingBox::xywh(0.40, 0.40, 0.10, 0.20);
    let tall_track = BoundingBox::xywh(0.48, 0.34, 0.10, 0.26);
    let tall_det = BoundingBox::xywh(0.43, 0.34, 0.10, 0.26);
    let short_det = BoundingBox::xywh(0.46, 0.40, 0.10, 0.20);
    let tracks = [short_track, tall_track];
    let dets = [tall_det, short_det];
    let open = DtIouParams::fixed(0.2);
    let gate = CostMatrix::from_fn(2, 2, |r, c| dtiou_cost(&tracks[r], &dets[c], 0, &open));

    let overlap_only = solve(&gate);
    for (r, c) in &overlap_only.matches {
        println!("  overlap only: track {r} -> detection {c}");
    }

    let hpc = ComponentCosts {
        weight: 4.0,
        values: (0..4)
            .map(|i| Some(hpc_cost(&tracks[i / 2], &dets[i % 2], 1.0, 1.0)))
            .collect(),
    };
    let fused_assignment = solve(&fuse(&gate, 1.0, &[hpc])?);
    for (r, c) in &fused_assignment.matches {
        println!("  with heights: track {r} -> detection {c}");
    }
    Ok(())
}
