//! Per-track motion filters.
//!
//! A filter owns whatever state it needs to extrapolate a track's box
//! several frames ahead and to denoise a matched observation. The tracker
//! drives filters through [`TrackFilter`] so the motion model is swappable
//! per run: a constant-velocity Kalman filter or the transformer model.

mod confidence;
mod kalman;
mod rpe;
mod transfilter;

pub use confidence::ConfidenceKalman;
pub use kalman::{BoxKalman, KalmanTrackFilter};
pub use rpe::{recency_encoding, sinusoidal_position};
pub use transfilter::{
    DecodeForward, Decoder, EncodeForward, EncoderLayer, HeadForward, PredictionHead, TokenEmbed,
    TransFilterHyper, TransFilterModel, TransFilterParams, TransFilterTrack,
};

use crate::buffer::MeasurementBuffer;
use crate::error::Result;
use crate::features::TimedBox;
use crate::geometry::{AffineTransform, BoundingBox};

pub trait TrackFilter: Send {
    /// Boxes for the next `m` frames after the last absorbed observation.
    /// The buffer is the one the tracker maintains for this track; filters
    /// that encode it may consume its dirty flag.
    fn predict(&mut self, buffer: &mut MeasurementBuffer, m: usize) -> Result<Vec<BoundingBox>>;

    /// Absorb a matched observation and return its denoised version. The
    /// returned box carries the observation's confidence.
    fn filter(&mut self, buffer: &mut MeasurementBuffer, obs: &TimedBox) -> Result<BoundingBox>;

    /// Realign internal state after a camera move. Filters whose state lives
    /// entirely in the already realigned buffer do nothing here.
    fn apply_camera_motion(&mut self, transform: &AffineTransform);

    /// Longest supported prediction horizon, if bounded.
    fn max_horizon(&self) -> Option<usize>;

    /// Encoder invocations so far, for filters that cache an encoding of the
    /// buffer. `None` for filters without such a pass.
    fn encoder_passes(&self) -> Option<usize> {
        None
    }
}
