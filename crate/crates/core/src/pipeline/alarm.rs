use std::fmt::Write as _;

use crate::features::Class;
use crate::signal::SEGMENTS_PER_CHUNK;
use crate::{Error, Result};

/// Strictly more than this fraction of preictal segments makes a preictal
/// chunk; exactly half stays interictal.
pub const CHUNK_THRESHOLD: f64 = 0.5;

/// Consecutive preictal chunks needed to raise an alarm.
pub const ALARM_RUN: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkPrediction {
    pub chunk_index: usize,
    pub positive_fraction: f64,
    pub chunk_label: Class,
    /// Chunk start, minutes from the start of the stream.
    pub wall_clock_offset_min: f64,
}

/// Collapse one chunk's segment labels into a chunk decision.
pub fn classify_chunk(segment_labels: &[Class]) -> Result<ChunkPrediction> {
    if segment_labels.len() != SEGMENTS_PER_CHUNK {
        return Err(Error::Shape(format!(
            "a chunk has {SEGMENTS_PER_CHUNK} segment labels, got {}",
            segment_labels.len()
        )));
    }
    let positives = segment_labels.iter().filter(|&&c| c == Class::Preictal).count();
    let positive_fraction = positives as f64 / segment_labels.len() as f64;
    let chunk_label = if positive_fraction > CHUNK_THRESHOLD { Class::Preictal } else { Class::Interictal };
    Ok(ChunkPrediction { chunk_index: 0, positive_fraction, chunk_label, wall_clock_offset_min: 0.0 })
}

/// Incremental alarm rule: fires on the third consecutive preictal chunk,
/// then stays quiet until an interictal chunk breaks the run.
#[derive(Debug, Clone, Default)]
pub struct AlarmScanner {
    run: usize,
    index: usize,
}

impl AlarmScanner {
    pub fn new() -> Self {
        AlarmScanner::default()
    }

    /// Feed the next chunk label; returns its index if the alarm fires here.
    pub fn push(&mut self, label: Class) -> Option<usize> {
        let i = self.index;
        self.index += 1;
        match label {
            Class::Interictal => {
                self.run = 0;
                None
            }
            Class::Preictal => {
                self.run += 1;
                (self.run == ALARM_RUN).then_some(i)
            }
        }
    }
}

pub fn alarm_scan(labels: &[Class]) -> Vec<usize> {
    let mut scanner = AlarmScanner::new();
    labels.iter().filter_map(|&l| scanner.push(l)).collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlarmTimeline {
    pub predictions: Vec<ChunkPrediction>,
    pub alarms: Vec<usize>,
    pub seizure_onset_min: Option<f64>,
    /// Minutes covered by one chunk.
    pub chunk_minutes: f64,
}

impl AlarmTimeline {
    /// Onset minus the end of the first alarming chunk. Absent without an
    /// onset or without an alarm; negative when the first alarm came late.
    pub fn lead_time_min(&self) -> Option<f64> {
        let onset = self.seizure_onset_min?;
        let first = *self.alarms.first()?;
        let p = self.predictions.iter().find(|p| p.chunk_index == first)?;
        Some(onset - (p.wall_clock_offset_min + self.chunk_minutes))
    }

    /// Alarms whose chunk ends at or before `minute`.
    pub fn alarms_before(&self, minute: f64) -> usize {
        self.alarms
            .iter()
            .filter(|&&a| self.predictions[a].wall_clock_offset_min + self.chunk_minutes <= minute)
            .count()
    }

    /// `chunk_index,offset_min,positive_fraction,label,alarm`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("chunk_index,offset_min,positive_fraction,label,alarm\n");
        for p in &self.predictions {
            let alarm = u8::from(self.alarms.contains(&p.chunk_index));
            writeln!(
                out,
                "{},{},{},{},{}",
                p.chunk_index, p.wall_clock_offset_min, p.positive_fraction, p.chunk_label, alarm
            )
            .unwrap();
        }
        out
    }
}
