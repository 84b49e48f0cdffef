//! Training and testing orchestration around the MapReduce jobs, plus the
//! chunk-majority alarm rule and the benchmark harness.

mod alarm;
mod bench;
mod dataset;
mod run;

pub use alarm::{alarm_scan, classify_chunk, AlarmScanner, AlarmTimeline, ChunkPrediction, ALARM_RUN, CHUNK_THRESHOLD};
pub use bench::{benchmark, median, BenchReport};
pub use dataset::{Dataset, SeizureEvent, SyntheticPatient, MANIFEST};
pub use run::{
    extract_features, interictal_chunks, preictal_chunks, test_pipeline, train_model, train_pipeline,
    InterictalSampling, RunReport, TrainConfig, PHASE_CV, PHASE_INTERICTAL, PHASE_PREICTAL, PHASE_TEST, PHASE_TOTAL,
    PHASE_TRAIN,
};
