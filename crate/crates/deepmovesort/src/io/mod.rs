//! File formats: detection/result tables, sequence metadata, camera
//! transforms, appearance embeddings, and trained model weights.

pub mod cmc;
pub mod config;
pub mod embeddings;
pub mod model_file;
pub mod mot;
pub mod seqinfo;
