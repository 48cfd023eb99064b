//! Sinusoidal positional encoding indexed by recency.

use crate::nn::Mat;

/// Standard sinusoidal encoding of one position: channel pair `2i / 2i+1`
/// holds sin and cos of `pos / 10000^(2i/d)`.
pub fn sinusoidal_position(pos: usize, d: usize) -> Vec<f64> {
    let mut row = vec![0.0; d];
    for i in 0..d / 2 {
        let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
        row[2 * i] = angle.sin();
        row[2 * i + 1] = angle.cos();
    }
    row
}

/// Encoding matrix for `n` history rows where the final (newest) row gets
/// position 0 and positions grow toward the past. Anchoring on recency keeps
/// each observation's encoding stable as the history behind it grows.
pub fn recency_encoding(n: usize, d: usize) -> Mat {
    let mut m = Mat::zeros(n, d);
    for r in 0..n {
        m.row_mut(r).copy_from_slice(&sinusoidal_position(n - 1 - r, d));
    }
    m
}
