use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PREICTAL_MINUTES, SEGMENT_LENGTH};
use crate::{Error, Result};

/// Clinical phase of a recording or a chunk cut from one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Interictal,
    Preictal,
    Ictal,
    /// Preictal followed by ictal, with a known onset.
    Mixed,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Interictal => "interictal",
            Phase::Preictal => "preictal",
            Phase::Ictal => "ictal",
            Phase::Mixed => "mixed",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Phase::Interictal => 0,
            Phase::Preictal => 1,
            Phase::Ictal => 2,
            Phase::Mixed => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Phase> {
        Some(match code {
            0 => Phase::Interictal,
            1 => Phase::Preictal,
            2 => Phase::Ictal,
            3 => Phase::Mixed,
            _ => return None,
        })
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interictal" => Ok(Phase::Interictal),
            "preictal" => Ok(Phase::Preictal),
            "ictal" => Ok(Phase::Ictal),
            "mixed" => Ok(Phase::Mixed),
            other => Err(Error::Parameter(format!("unknown phase `{other}`"))),
        }
    }
}

/// Multi-channel EEG with equal-length channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    patient_id: String,
    sample_rate_hz: u32,
    channels: Vec<Vec<f64>>,
    phase: Phase,
    onset_index: Option<usize>,
}

impl Recording {
    pub fn new(
        patient_id: impl Into<String>,
        sample_rate_hz: u32,
        channels: Vec<Vec<f64>>,
        phase: Phase,
        onset_index: Option<usize>,
    ) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        let len = channels
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Data("recording needs at least one channel".into()))?;
        if len == 0 {
            return Err(Error::Data("channels must hold at least one sample".into()));
        }
        if let Some(bad) = channels.iter().position(|c| c.len() != len) {
            return Err(Error::Shape(format!(
                "channel {bad} has {} samples, channel 0 has {len}",
                channels[bad].len()
            )));
        }
        if let Some(onset) = onset_index {
            if onset >= len {
                return Err(Error::Data(format!(
                    "onset index {onset} outside recording of {len} samples"
                )));
            }
        }
        Ok(Recording {
            patient_id: patient_id.into(),
            sample_rate_hz,
            channels,
            phase,
            onset_index,
        })
    }

    pub fn patient_id(&self) -> &str {
        &self.patient_id
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn onset_index(&self) -> Option<usize> {
        self.onset_index
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / f64::from(self.sample_rate_hz)
    }

    pub fn duration_min(&self) -> f64 {
        self.duration_s() / 60.0
    }

    pub fn samples_per_minute(&self) -> usize {
        self.sample_rate_hz as usize * 60
    }

    /// Samples `[start, end)` of every channel. The onset is kept when it
    /// falls inside the window.
    pub fn slice(&self, start: usize, end: usize) -> Result<Recording> {
        if start >= end || end > self.len() {
            return Err(Error::Shape(format!(
                "slice [{start}, {end}) out of range for {} samples",
                self.len()
            )));
        }
        let channels = self.channels.iter().map(|c| c[start..end].to_vec()).collect();
        let onset = self
            .onset_index
            .filter(|&o| o >= start && o < end)
            .map(|o| o - start);
        Recording::new(
            self.patient_id.clone(),
            self.sample_rate_hz,
            channels,
            self.phase,
            onset,
        )
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }
}

/// Keep the final 48 minutes of `preictal` and append the whole `ictal`
/// recording; the onset lands at the join.
pub fn build_preictal(preictal: &Recording, ictal: &Recording) -> Result<Recording> {
    if preictal.sample_rate_hz != ictal.sample_rate_hz {
        return Err(Error::Shape(format!(
            "sample rates differ: {} vs {}",
            preictal.sample_rate_hz, ictal.sample_rate_hz
        )));
    }
    if preictal.channel_count() != ictal.channel_count() {
        return Err(Error::Shape(format!(
            "channel counts differ: {} vs {}",
            preictal.channel_count(),
            ictal.channel_count()
        )));
    }
    let keep = PREICTAL_MINUTES * preictal.samples_per_minute();
    if preictal.len() < keep {
        return Err(Error::InsufficientData(format!(
            "preictal recording has {} samples, {keep} ({PREICTAL_MINUTES} min) required",
            preictal.len()
        )));
    }
    let from = preictal.len() - keep;
    let channels = preictal
        .channels
        .iter()
        .zip(&ictal.channels)
        .map(|(pre, ict)| {
            let mut joined = Vec::with_capacity(keep + ict.len());
            joined.extend_from_slice(&pre[from..]);
            joined.extend_from_slice(ict);
            joined
        })
        .collect();
    Recording::new(
        preictal.patient_id.clone(),
        preictal.sample_rate_hz,
        channels,
        Phase::Mixed,
        Some(keep),
    )
}

/// Split a recording with an onset into its preictal and ictal parts.
pub fn split_at_onset(rec: &Recording) -> Result<(Recording, Recording)> {
    let onset = rec
        .onset_index
        .ok_or_else(|| Error::Data("recording has no onset index".into()))?;
    if onset == 0 {
        return Err(Error::InsufficientData("onset at sample 0 leaves no preictal data".into()));
    }
    let pre = rec.slice(0, onset)?.with_phase(Phase::Preictal);
    let mut ictal = rec.slice(onset, rec.len())?.with_phase(Phase::Ictal);
    ictal.onset_index = Some(0);
    Ok((pre, ictal))
}

/// A contiguous `minutes`-long window whose start is a whole number of
/// segments into `rec`, chosen uniformly from the valid starts.
pub fn sample_training_window(rec: &Recording, minutes: usize, seed: u64) -> Result<Recording> {
    let window = minutes * rec.samples_per_minute();
    if window == 0 {
        return Err(Error::Parameter("window must be at least one minute".into()));
    }
    if window > rec.len() {
        return Err(Error::InsufficientData(format!(
            "{minutes}-minute window needs {window} samples, recording has {}",
            rec.len()
        )));
    }
    let starts = (rec.len() - window) / SEGMENT_LENGTH + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..starts) * SEGMENT_LENGTH;
    rec.slice(start, start + window)
}
