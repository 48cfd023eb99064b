//! Scalar Kalman filter over detection confidence.
//!
//! Tracks carry one of these so the association stage can compare a
//! detection's confidence against where the track's confidence was heading,
//! not just its last value. Measurement noise shrinks as the observed
//! confidence grows: confident detections pin the estimate, shaky ones
//! barely move it.

use nalgebra::{Matrix2, Vector2};

/// Constant-velocity model on `(confidence, confidence_rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceKalman {
    mean: Vector2<f64>,
    cov: Matrix2<f64>,
    sigma: f64,
}

const Q_CONF_STD: f64 = 1e-2;
const Q_RATE_STD: f64 = 1e-3;

impl ConfidenceKalman {
    /// `sigma` scales measurement noise; see [`ConfidenceKalman::update`].
    pub fn new(first_confidence: f64, sigma: f64) -> Self {
        ConfidenceKalman {
            mean: Vector2::new(first_confidence, 0.0),
            cov: Matrix2::from_diagonal(&Vector2::new(1e-2, 1e-4)),
            sigma,
        }
    }

    /// Advance one frame and return the projected confidence, clamped to
    /// [0, 1] as association expects.
    pub fn predict(&mut self) -> f64 {
        let f = Matrix2::new(1.0, 1.0, 0.0, 1.0);
        let q = Matrix2::from_diagonal(&Vector2::new(Q_CONF_STD * Q_CONF_STD, Q_RATE_STD * Q_RATE_STD));
        self.mean = f * self.mean;
        self.cov = f * self.cov * f.transpose() + q;
        self.predicted()
    }

    /// Current estimate clamped to [0, 1], without advancing.
    pub fn predicted(&self) -> f64 {
        self.mean[0].clamp(0.0, 1.0)
    }

    /// Fold in an observed confidence with noise `(sigma * (1 - value))^2`:
    /// a observation at 1.0 has zero noise and is adopted exactly.
    pub fn update(&mut self, confidence: f64) {
        let r = (self.sigma * (1.0 - confidence)).powi(2);
        let h = Vector2::new(1.0, 0.0);
        let s = (h.transpose() * self.cov * h)[(0, 0)] + r;
        let k = self.cov * h / s;
        self.mean += k * (confidence - self.mean[0]);
        let i_kh = Matrix2::identity() - k * h.transpose();
        self.cov = i_kh * self.cov * i_kh.transpose() + k * r * k.transpose();
        if r == 0.0 {
            self.mean[0] = confidence;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_gain_cross_check() {
        let mut kf = ConfidenceKalman::new(0.8, 0.2);
        kf.predict();
        // Hand numbers: P = FPF' + Q with P = diag(1e-2, 1e-4) gives
        // P00 = 1e-2 + 1e-4 + 1e-4 = 0.0102.
        let obs = 0.6;
        let r = (0.2f64 * 0.4).powi(2);
        let p00 = 0.0102;
        let gain = p00 / (p00 + r);
        let expected = 0.8 + gain * (obs - 0.8);
        kf.update(obs);
        assert!((kf.predicted() - expected.clamp(0.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn perfect_confidence_is_adopted_exactly() {
        let mut kf = ConfidenceKalman::new(0.3, 0.2);
        kf.predict();
        kf.update(1.0);
        assert_eq!(kf.predicted(), 1.0);
    }

    #[test]
    fn prediction_extrapolates_trend() {
        let mut kf = ConfidenceKalman::new(0.9, 0.2);
        for i in 1..=8 {
            kf.predict();
            kf.update(0.9 - 0.05 * i as f64);
        }
        let now = kf.predicted();
        let next = kf.predict();
        assert!(next < now, "downward trend must continue: {next} vs {now}");
    }

    #[test]
    fn estimate_stays_clamped() {
        let mut kf = ConfidenceKalman::new(0.98, 0.2);
        for _ in 0..50 {
            kf.predict();
            kf.update(0.99);
        }
        let p = kf.predict();
        assert!((0.0..=1.0).contains(&p));
    }
}
