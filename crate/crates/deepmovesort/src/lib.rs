//! Multi-object tracking by detection with learned motion prediction.
//!
//! The crate provides the full pipeline: detection I/O, measurement
//! buffering, Kalman and transformer motion filters, cascaded association
//! with decaying-IoU gating, confidence and appearance cues, CLEAR/identity
//! metrics, and a synthetic scenario generator for end-to-end checks.
//!
//! Start with [`tracker::Tracker`] for online tracking, or the runnable
//! programs under `examples/`.

pub mod error;
pub mod association;
pub mod buffer;
pub mod cli;
pub mod eval;
pub mod features;
pub mod filter;
pub mod geometry;
pub mod io;
pub mod nn;
pub mod rng;
pub mod synth;
pub mod tracker;
pub mod training;

pub use error::{Error, Result};
