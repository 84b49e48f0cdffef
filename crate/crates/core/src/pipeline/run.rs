use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::alarm::{classify_chunk, AlarmScanner, AlarmTimeline, ChunkPrediction};
use super::dataset::Dataset;
use crate::error::IoContext;
use crate::features::{feature_names, Class, FeatureConfig, FeatureTable};
use crate::mapreduce::jobs::{assemble_model, ensemble_job, signal_job, table_from_output, write_ensemble_splits};
use crate::mapreduce::{Executor, Registry};
use crate::rotforest::{cross_validate, RotationForestConfig, RotationForestModel};
use crate::signal::{
    build_preictal, sample_training_window, segment, Recording, SegmentMatrix, PREICTAL_MINUTES, SEGMENTS_PER_CHUNK,
    SEGMENT_LENGTH,
};
use crate::{Error, Result};

/// How much of each interictal hour goes into training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InterictalSampling {
    /// One randomly placed 10-minute window per hour.
    #[default]
    TenMinutes,
    /// The hour tiled into six 10-minute windows.
    FullHour,
}

impl InterictalSampling {
    pub fn from_minutes(minutes: usize) -> Result<Self> {
        match minutes {
            10 => Ok(InterictalSampling::TenMinutes),
            60 => Ok(InterictalSampling::FullHour),
            m => Err(Error::Parameter(format!("interictal minutes must be 10 or 60, got {m}"))),
        }
    }
}

const WINDOW_MINUTES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub features: FeatureConfig,
    pub forest: RotationForestConfig,
    pub sampling: InterictalSampling,
    /// `0` skips cross-validation.
    pub cv_folds: usize,
    pub seed: u64,
    /// Scratch space for job inputs; must be visible to every worker.
    pub work_dir: PathBuf,
}

impl TrainConfig {
    pub fn new(work_dir: impl Into<PathBuf>) -> Self {
        TrainConfig {
            features: FeatureConfig::default(),
            forest: RotationForestConfig::default(),
            sampling: InterictalSampling::default(),
            cv_folds: 10,
            seed: 0,
            work_dir: work_dir.into(),
        }
    }
}

/// Wall times and outcomes of one pipeline run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub executor: String,
    /// `(phase, seconds)` in execution order.
    pub phases: Vec<(String, f64)>,
    pub cv_accuracy: Option<f64>,
    pub training_rows: usize,
    pub alarms: Vec<usize>,
    pub lead_time_min: Option<f64>,
}

pub const PHASE_INTERICTAL: &str = "interictal processing";
pub const PHASE_PREICTAL: &str = "preictal processing";
pub const PHASE_CV: &str = "cross-validation";
pub const PHASE_TRAIN: &str = "model training";
pub const PHASE_TOTAL: &str = "total";
pub const PHASE_TEST: &str = "test";

impl RunReport {
    pub fn seconds(&self, phase: &str) -> Option<f64> {
        self.phases.iter().find(|(p, _)| p == phase).map(|&(_, s)| s)
    }

    /// `phase,executor,seconds`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,executor,seconds\n");
        for (phase, s) in &self.phases {
            writeln!(out, "{phase},{},{s:.6}", self.executor).unwrap();
        }
        out
    }

    pub fn to_table(&self) -> String {
        let width = self.phases.iter().map(|(p, _)| p.len()).max().unwrap_or(0).max(5);
        let mut out = format!("{:<width$}  {:>12}\n", "phase", format!("{} (s)", self.executor));
        for (phase, s) in &self.phases {
            writeln!(out, "{phase:<width$}  {s:>12.3}").unwrap();
        }
        if let Some(acc) = self.cv_accuracy {
            writeln!(out, "cv accuracy: {acc:.4}").unwrap();
        }
        if !self.alarms.is_empty() || self.lead_time_min.is_some() {
            writeln!(out, "alarms at chunks: {:?}", self.alarms).unwrap();
        }
        match self.lead_time_min {
            Some(lead) => writeln!(out, "lead time: {lead:.1} min").unwrap(),
            None => writeln!(out, "lead time: n/a").unwrap(),
        }
        out
    }
}

/// Training chunks from interictal hours. Each hour contributes one sampled
/// window (or six tiled ones); each window yields its whole chunks.
pub fn interictal_chunks(data: &Dataset, sampling: InterictalSampling, seed: u64) -> Result<Vec<SegmentMatrix>> {
    let mut chunks = Vec::new();
    let mut hour_index = 0u64;
    for rec in data.interictal() {
        let hour = 60 * rec.samples_per_minute();
        for h in 0..rec.len() / hour {
            let hour_rec = rec.slice(h * hour, (h + 1) * hour)?;
            let windows = match sampling {
                InterictalSampling::TenMinutes => {
                    vec![sample_training_window(&hour_rec, WINDOW_MINUTES, seed ^ hour_index)?]
                }
                InterictalSampling::FullHour => {
                    let w = WINDOW_MINUTES * rec.samples_per_minute();
                    (0..60 / WINDOW_MINUTES)
                        .map(|k| hour_rec.slice(k * w, (k + 1) * w))
                        .collect::<Result<_>>()?
                }
            };
            for w in windows {
                chunks.extend(segment(&w, SEGMENT_LENGTH, SEGMENTS_PER_CHUNK)?);
            }
            hour_index += 1;
        }
    }
    Ok(chunks)
}

/// Training chunks from the final 48 preictal minutes of each seizure
/// (plus whole chunks reaching into the seizure).
pub fn preictal_chunks(data: &Dataset) -> Result<Vec<SegmentMatrix>> {
    let mut chunks = Vec::new();
    for event in data.seizures()? {
        let joined = build_preictal(&event.preictal, &event.ictal)?;
        chunks.extend(segment(&joined, SEGMENT_LENGTH, SEGMENTS_PER_CHUNK)?);
    }
    Ok(chunks)
}

fn write_chunks(dir: &Path, chunks: &[SegmentMatrix]) -> Result<Vec<PathBuf>> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).ctx(|| format!("clearing {}", dir.display()))?;
    }
    std::fs::create_dir_all(dir).ctx(|| format!("creating {}", dir.display()))?;
    chunks
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let p = dir.join(format!("chunk-{i:06}.seg"));
            c.write_file(&p)?;
            Ok(p)
        })
        .collect()
}

/// Feature table of `chunks` computed by the signal job.
pub fn extract_features(
    job_id: &str,
    chunks: &[SegmentMatrix],
    cfg: &FeatureConfig,
    work_dir: &Path,
    executor: &Executor<'_>,
    registry: &Registry,
) -> Result<FeatureTable> {
    let Some(first) = chunks.first() else {
        return Err(Error::InsufficientData(format!("{job_id}: no whole chunks to process")));
    };
    let files = write_chunks(&work_dir.join("splits").join(job_id), chunks)?;
    let records = executor.run(&signal_job(job_id, files, cfg), registry)?;
    table_from_output(&records, feature_names(first.channel_count, cfg.level))
}

fn timed<T>(phases: &mut Vec<(String, f64)>, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    phases.push((name.to_string(), start.elapsed().as_secs_f64()));
    Ok(out)
}

/// Train a model via the ensemble job.
pub fn train_model(
    table: &FeatureTable,
    forest: &RotationForestConfig,
    work_dir: &Path,
    executor: &Executor<'_>,
    registry: &Registry,
) -> Result<RotationForestModel> {
    forest.validate()?;
    let dir = work_dir.join("splits").join("ensemble");
    // one member per task, so the split layout never depends on the executor
    let splits = write_ensemble_splits(&dir, table, forest.ensemble_size, forest.ensemble_size)?;
    let records = executor.run(&ensemble_job("ensemble", splits, forest), registry)?;
    assemble_model(&records, table.names().to_vec(), forest)
}

/// Build the training table with the signal job, cross-validate, then
/// train the final model with the ensemble job.
pub fn train_pipeline(
    data: &Dataset,
    cfg: &TrainConfig,
    executor: &Executor<'_>,
    registry: &Registry,
) -> Result<(RotationForestModel, FeatureTable, RunReport)> {
    let inter = interictal_chunks(data, cfg.sampling, cfg.seed)?;
    let pre = preictal_chunks(data)?;
    if inter.is_empty() {
        return Err(Error::InsufficientData("no interictal hour long enough to train on".into()));
    }
    if pre.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no seizure with {PREICTAL_MINUTES} preictal minutes to train on"
        )));
    }
    let start = Instant::now();
    let mut phases = Vec::new();
    let mut table = timed(&mut phases, PHASE_INTERICTAL, || {
        extract_features("interictal", &inter, &cfg.features, &cfg.work_dir, executor, registry)
    })?;
    let pre_table = timed(&mut phases, PHASE_PREICTAL, || {
        extract_features("preictal", &pre, &cfg.features, &cfg.work_dir, executor, registry)
    })?;
    table.append(pre_table)?;

    let cv_accuracy = if cfg.cv_folds > 0 {
        let report = timed(&mut phases, PHASE_CV, || cross_validate(&table, &cfg.forest, cfg.cv_folds))?;
        Some(report.mean_accuracy)
    } else {
        None
    };
    let model = timed(&mut phases, PHASE_TRAIN, || {
        train_model(&table, &cfg.forest, &cfg.work_dir, executor, registry)
    })?;
    phases.push((PHASE_TOTAL.to_string(), start.elapsed().as_secs_f64()));
    let report = RunReport {
        executor: executor.label(),
        phases,
        cv_accuracy,
        training_rows: table.len(),
        ..RunReport::default()
    };
    Ok((model, table, report))
}

/// Run a trained model over a stream of recordings in temporal order.
/// Each recording is cut into whole chunks; a trailing partial chunk is
/// dropped. Offsets accumulate across recordings, and the first recording
/// with an onset index supplies the ground-truth onset.
pub fn test_pipeline(
    model: &RotationForestModel,
    stream: &[Recording],
    features: &FeatureConfig,
    work_dir: &Path,
    executor: &Executor<'_>,
    registry: &Registry,
) -> Result<(AlarmTimeline, RunReport)> {
    let first = stream.first().ok_or_else(|| Error::InsufficientData("empty test stream".into()))?;
    let expected = feature_names(first.channel_count(), features.level);
    if model.feature_names != expected {
        return Err(Error::Shape(format!(
            "model expects {} features ({}…), extractor produces {} ({}…)",
            model.feature_names.len(),
            model.feature_names.first().map_or("", String::as_str),
            expected.len(),
            expected[0]
        )));
    }
    let start = Instant::now();
    let mut chunks = Vec::new();
    let mut offsets = Vec::new();
    let mut elapsed_min = 0.0;
    let mut onset_min = None;
    for rec in stream {
        if rec.sample_rate_hz() != first.sample_rate_hz() || rec.channel_count() != first.channel_count() {
            return Err(Error::Shape("test stream recordings differ in rate or channel count".into()));
        }
        if let (None, Some(onset)) = (onset_min, rec.onset_index()) {
            onset_min = Some(elapsed_min + onset as f64 / rec.samples_per_minute() as f64);
        }
        for c in segment(rec, SEGMENT_LENGTH, SEGMENTS_PER_CHUNK)? {
            offsets.push(elapsed_min + (c.chunk_index * SEGMENT_LENGTH * SEGMENTS_PER_CHUNK) as f64 / rec.samples_per_minute() as f64);
            chunks.push(c);
        }
        elapsed_min += rec.duration_min();
    }
    let table = extract_features("test", &chunks, features, work_dir, executor, registry)?;

    let mut scanner = AlarmScanner::new();
    let mut timeline = AlarmTimeline {
        seizure_onset_min: onset_min,
        chunk_minutes: (SEGMENT_LENGTH * SEGMENTS_PER_CHUNK) as f64 / first.samples_per_minute() as f64,
        ..AlarmTimeline::default()
    };
    for (k, rows) in table.rows().chunks(SEGMENTS_PER_CHUNK).enumerate() {
        let labels = rows.iter().map(|r| Ok(model.predict(r)?.0)).collect::<Result<Vec<Class>>>()?;
        let ChunkPrediction { positive_fraction, chunk_label, .. } = classify_chunk(&labels)?;
        timeline.predictions.push(ChunkPrediction {
            chunk_index: k,
            positive_fraction,
            chunk_label,
            wall_clock_offset_min: offsets[k],
        });
        timeline.alarms.extend(scanner.push(chunk_label));
    }
    let report = RunReport {
        executor: executor.label(),
        phases: vec![(PHASE_TEST.to_string(), start.elapsed().as_secs_f64())],
        alarms: timeline.alarms.clone(),
        lead_time_min: timeline.lead_time_min(),
        ..RunReport::default()
    };
    Ok((timeline, report))
}
