//! Minimal dense neural network primitives.
//!
//! Everything here is f64 and single-threaded on purpose: the motion model
//! is small (tens of thousands of parameters) and determinism matters more
//! than throughput. Layers carry hand-derived backward passes; gradient
//! containers reuse the layer structs themselves via `zeros_like`.

mod layers;
mod mat;

pub use layers::{
    silu, silu_backward, silu_derivative, silu_forward, softmax_backward, softmax_rows,
    FeedForward, FeedForwardCache, LayerNorm, LayerNormCache, Linear, LinearCache, MhaCache,
    MultiHeadAttention, SiluCache,
};
pub use mat::Mat;
