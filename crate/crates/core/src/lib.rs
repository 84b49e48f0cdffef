//! Epileptic seizure prediction from scalp EEG.
//!
//! The pipeline segments multi-channel recordings into 8-minute chunks,
//! denoises each chunk with multiscale PCA, extracts wavelet-packet band
//! statistics per 8-second segment, and classifies segments with a Rotation
//! Forest. Chunk-level majority votes feed a 3-in-a-row alarm rule.
//!
//! Signal processing and ensemble training run as jobs on a small MapReduce
//! runtime with serial, thread-pool and TCP master/worker executors that are
//! required to produce byte-identical output.

pub mod cli;
pub mod error;
pub mod features;
pub mod mapreduce;
pub mod mspca;
pub mod pipeline;
pub mod rotforest;
pub mod signal;
pub mod wavelet;

pub use error::{Error, Result};
