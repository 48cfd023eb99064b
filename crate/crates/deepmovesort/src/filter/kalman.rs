//! Constant-velocity Kalman filter over box center, width and height.

use nalgebra::{SMatrix, SVector};

use crate::buffer::MeasurementBuffer;
use crate::error::Result;
use crate::features::TimedBox;
use crate::geometry::{AffineTransform, BoundingBox};

use super::TrackFilter;

type V4 = SVector<f64, 4>;
type V8 = SVector<f64, 8>;
type M4 = SMatrix<f64, 4, 4>;
type M8 = SMatrix<f64, 8, 8>;
type M48 = SMatrix<f64, 4, 8>;

/// Process/measurement noise scales as a fraction of box height.
const POS_STD_FACTOR: f64 = 1.0 / 20.0;
const VEL_STD_FACTOR: f64 = 1.0 / 160.0;

fn measurement(b: &BoundingBox) -> V4 {
    V4::new(b.x + b.w / 2.0, b.y + b.h / 2.0, b.w, b.h)
}

/// State is `(cx, cy, w, h, vcx, vcy, vw, vh)` with unit-time velocities.
/// All noise magnitudes derive from the current height, so the filter is
/// scale-adaptive: distant small boxes get proportionally tighter noise.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxKalman {
    mean: V8,
    cov: M8,
    frame: i64,
}

impl BoxKalman {
    pub fn new(obs: &TimedBox) -> Self {
        let mut mean = V8::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(&measurement(&obs.bbox));
        let pos = 2.0 * obs.bbox.h * POS_STD_FACTOR;
        let vel = 10.0 * obs.bbox.h * VEL_STD_FACTOR;
        let stds = [pos, pos, pos, pos, vel, vel, vel, vel];
        let cov = M8::from_diagonal(&V8::from_column_slice(&stds).map(|s| s * s));
        BoxKalman { mean, cov, frame: obs.frame }
    }

    pub fn frame(&self) -> i64 {
        self.frame
    }

    /// Advance one frame. Does not touch `frame`; multi-step lookahead runs
    /// on a clone while the committed state stays at its last update.
    pub fn predict_step(&mut self) {
        let h = self.mean[3];
        let mut f = M8::identity();
        for i in 0..4 {
            f[(i, i + 4)] = 1.0;
        }
        let pos = h * POS_STD_FACTOR;
        let vel = h * VEL_STD_FACTOR;
        let stds = [pos, pos, pos, pos, vel, vel, vel, vel];
        let q = M8::from_diagonal(&V8::from_column_slice(&stds).map(|s| s * s));
        self.mean = f * self.mean;
        self.cov = f * self.cov * f.transpose() + q;
    }

    /// Joseph-form measurement update; keeps the covariance symmetric
    /// positive-definite under long predict chains.
    pub fn update(&mut self, b: &BoundingBox) {
        let r_std = self.mean[3] * POS_STD_FACTOR;
        let r = M4::from_diagonal(&V4::from_element(r_std * r_std));
        let mut h = M48::zeros();
        for i in 0..4 {
            h[(i, i)] = 1.0;
        }
        let s = h * self.cov * h.transpose() + r;
        let k = self.cov * h.transpose() * s.try_inverse().expect("innovation covariance is invertible");
        self.mean += k * (measurement(b) - h * self.mean);
        let i_kh = M8::identity() - k * h;
        self.cov = i_kh * self.cov * i_kh.transpose() + k * r * k.transpose();
    }

    /// Advance to the observation's frame and fold it in.
    pub fn absorb(&mut self, obs: &TimedBox) {
        debug_assert!(obs.frame > self.frame, "observations must advance in time");
        for _ in 0..(obs.frame - self.frame) {
            self.predict_step();
        }
        self.update(&obs.bbox);
        self.frame = obs.frame;
    }

    /// Rotate/scale the full state and translate the position, mirroring how
    /// the camera transform acts on boxes. The 2x2 linear part applies to
    /// each of the four state pairs, the translation to the center only.
    pub fn apply_camera_motion(&mut self, t: &AffineTransform) {
        let mut r8 = M8::zeros();
        for blk in 0..4 {
            for i in 0..2 {
                for j in 0..2 {
                    r8[(2 * blk + i, 2 * blk + j)] = t.m[i][j];
                }
            }
        }
        self.mean = r8 * self.mean;
        self.mean[0] += t.t[0];
        self.mean[1] += t.t[1];
        self.cov = r8 * self.cov * r8.transpose();
    }

    pub fn mean_box(&self) -> BoundingBox {
        let w = self.mean[2].max(1e-6);
        let h = self.mean[3].max(1e-6);
        BoundingBox { x: self.mean[0] - w / 2.0, y: self.mean[1] - h / 2.0, w, h, confidence: 1.0 }
    }

    #[cfg(test)]
    pub(crate) fn covariance(&self) -> &M8 {
        &self.cov
    }
}

/// `TrackFilter` wrapper. Lookahead is recomputed from the committed state on
/// every call; only `filter` advances it.
#[derive(Debug, Clone)]
pub struct KalmanTrackFilter {
    state: BoxKalman,
}

impl KalmanTrackFilter {
    pub fn new(first: &TimedBox) -> Self {
        KalmanTrackFilter { state: BoxKalman::new(first) }
    }
}

impl TrackFilter for KalmanTrackFilter {
    fn predict(&mut self, _buffer: &mut MeasurementBuffer, m: usize) -> Result<Vec<BoundingBox>> {
        let mut probe = self.state.clone();
        let mut out = Vec::with_capacity(m);
        for _ in 0..m {
            probe.predict_step();
            out.push(probe.mean_box());
        }
        Ok(out)
    }

    fn filter(&mut self, _buffer: &mut MeasurementBuffer, obs: &TimedBox) -> Result<BoundingBox> {
        self.state.absorb(obs);
        let mut b = self.state.mean_box();
        b.confidence = obs.bbox.confidence;
        Ok(b)
    }

    fn apply_camera_motion(&mut self, transform: &AffineTransform) {
        self.state.apply_camera_motion(transform);
    }

    fn max_horizon(&self) -> Option<usize> {
        None
    }
}
