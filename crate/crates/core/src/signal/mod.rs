//! EEG recordings, ingestion, synthetic generation and chunk segmentation.

mod csv;
mod recording;
mod segment;
mod synth;

pub use csv::{load_csv, save_csv};
pub use recording::{build_preictal, sample_training_window, split_at_onset, Phase, Recording};
pub use segment::{segment, SegmentMatrix};
pub use synth::{synthesize_eeg, Oscillator, PreictalSignature, SynthConfig};

/// Sampling rate of the source database.
pub const SAMPLE_RATE_HZ: u32 = 256;
/// One classification segment: 8 s at 256 Hz.
pub const SEGMENT_LENGTH: usize = 2048;
/// Segments per chunk: 60 × 8 s = 8 min.
pub const SEGMENTS_PER_CHUNK: usize = 60;
/// Length of the constructed preictal period preceding onset.
pub const PREICTAL_MINUTES: usize = 48;
/// Channels used per recording.
pub const CHANNEL_COUNT: usize = 3;
