//! Training objective: Huber penalties on both readers of the encoding.

use crate::error::{Error, Result};
use crate::nn::Mat;

/// Huber penalty: quadratic core for |r| <= delta, linear tails.
pub fn huber(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

pub fn huber_derivative(r: f64, delta: f64) -> f64 {
    if r.abs() <= delta {
        r
    } else {
        delta * r.signum()
    }
}

pub struct LossOutput {
    pub loss: f64,
    /// Gradient w.r.t. the head output, 1 x (m_max * 4); zero at invalid steps.
    pub d_head: Mat,
    /// Gradient w.r.t. the decoder output, k x 4.
    pub d_dec: Mat,
}

/// Mean over valid horizon steps of the per-coordinate mean Huber of the
/// one-shot prediction residual plus the same for the filtered observation.
/// Residuals are `target - output` in standardized offset space; gradients
/// are w.r.t. the outputs.
pub fn e2e_loss(
    head_out: &Mat,
    dec_out: &Mat,
    targets: &Mat,
    valid: &[bool],
    delta: f64,
) -> Result<LossOutput> {
    let m_max = targets.rows();
    assert_eq!(valid.len(), m_max, "one validity flag per horizon step");
    assert_eq!(head_out.cols(), m_max * 4, "head emits 4 coords per step");
    let k = valid.iter().filter(|v| **v).count();
    if k == 0 {
        return Err(Error::AllStepsMasked);
    }
    assert_eq!(dec_out.rows(), k, "one decoder row per valid step");
    let mut loss = 0.0;
    let mut d_head = Mat::zeros(1, m_max * 4);
    let mut d_dec = Mat::zeros(k, 4);
    let norm = 1.0 / (k as f64 * 4.0);
    let mut row = 0usize;
    for (j, &is_valid) in valid.iter().enumerate() {
        if !is_valid {
            continue;
        }
        for c in 0..4 {
            let t = targets.at(j, c);
            let rp = t - head_out.at(0, 4 * j + c);
            loss += huber(rp, delta) * norm;
            *d_head.at_mut(0, 4 * j + c) = -huber_derivative(rp, delta) * norm;
            let rf = t - dec_out.at(row, c);
            loss += huber(rf, delta) * norm;
            *d_dec.at_mut(row, c) = -huber_derivative(rf, delta) * norm;
        }
        row += 1;
    }
    Ok(LossOutput { loss, d_head, d_dec })
}
