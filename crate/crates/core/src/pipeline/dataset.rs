//! Patient datasets: training sources, test streams and their on-disk form.
//!
//! A dataset directory holds CSV recordings plus `manifest.txt`, which lists
//! the files one per line in temporal order.

use std::path::{Path, PathBuf};

use crate::error::IoContext;
use crate::signal::{
    load_csv, save_csv, split_at_onset, synthesize_eeg, Oscillator, Phase, PreictalSignature, Recording, SynthConfig,
    CHANNEL_COUNT, PREICTAL_MINUTES, SAMPLE_RATE_HZ,
};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.txt";

/// One seizure event: everything recorded before the onset, and the
/// seizure itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SeizureEvent {
    pub preictal: Recording,
    pub ictal: Recording,
}

/// Recordings in temporal order. Interictal recordings and seizure events
/// may interleave.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub recordings: Vec<Recording>,
}

impl Dataset {
    pub fn interictal(&self) -> impl Iterator<Item = &Recording> {
        self.recordings.iter().filter(|r| r.phase() == Phase::Interictal)
    }

    /// Seizure events, pairing each preictal recording with the ictal one
    /// after it. A mixed recording with an onset is split in two.
    pub fn seizures(&self) -> Result<Vec<SeizureEvent>> {
        let mut events = Vec::new();
        let mut pending: Option<&Recording> = None;
        for rec in &self.recordings {
            match rec.phase() {
                Phase::Preictal => pending = Some(rec),
                Phase::Ictal => {
                    let pre = pending
                        .take()
                        .ok_or_else(|| Error::Data("ictal recording without a preceding preictal one".into()))?;
                    events.push(SeizureEvent { preictal: pre.clone(), ictal: rec.clone() });
                }
                Phase::Mixed => {
                    let (preictal, ictal) = split_at_onset(rec)?;
                    events.push(SeizureEvent { preictal, ictal });
                }
                Phase::Interictal => {}
            }
        }
        Ok(events)
    }

    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).ctx(|| format!("creating {}", dir.display()))?;
        let mut names = Vec::new();
        let (mut hours, mut seizures) = (0, 0);
        for rec in &self.recordings {
            let name = match rec.phase() {
                Phase::Interictal => {
                    hours += 1;
                    format!("interictal-{:03}.csv", hours - 1)
                }
                Phase::Preictal => format!("seizure-{seizures:03}-preictal.csv"),
                Phase::Ictal => {
                    seizures += 1;
                    format!("seizure-{:03}-ictal.csv", seizures - 1)
                }
                Phase::Mixed => {
                    seizures += 1;
                    format!("seizure-{:03}-mixed.csv", seizures - 1)
                }
            };
            save_csv(rec, dir.join(&name))?;
            names.push(name);
        }
        let manifest = dir.join(MANIFEST);
        std::fs::write(&manifest, names.join("\n") + "\n").ctx(|| format!("writing {}", manifest.display()))?;
        Ok(names.iter().map(|n| dir.join(n)).collect())
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let manifest = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&manifest).ctx(|| format!("reading {}", manifest.display()))?;
        let recordings = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|name| load_csv(dir.join(name)))
            .collect::<Result<Vec<_>>>()?;
        if recordings.is_empty() {
            return Err(Error::InsufficientData(format!("{} lists no recordings", manifest.display())));
        }
        Ok(Dataset { recordings })
    }
}

/// Parameters of a synthetic patient. Background rhythms plus noise, with a
/// narrow-band rhythm that ramps up linearly over the 48 minutes before each
/// seizure and stays at its peak during the seizure.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPatient {
    pub patient_id: String,
    pub channels: usize,
    pub background: Vec<Oscillator>,
    pub noise_sigma: f64,
    pub signature_hz: f64,
    pub signature_peak: f64,
    /// Signature-free minutes recorded before the ramp starts.
    pub lead_in_minutes: f64,
    pub ictal_minutes: f64,
    pub seed: u64,
}

impl Default for SyntheticPatient {
    fn default() -> Self {
        SyntheticPatient {
            patient_id: "synthetic".into(),
            channels: CHANNEL_COUNT,
            background: vec![
                Oscillator { center_hz: 2.0, amplitude: 1.2 },
                Oscillator { center_hz: 6.0, amplitude: 0.8 },
                Oscillator { center_hz: 10.0, amplitude: 1.0 },
                Oscillator { center_hz: 20.0, amplitude: 0.5 },
            ],
            noise_sigma: 0.5,
            signature_hz: 3.5,
            signature_peak: 6.0,
            lead_in_minutes: 0.0,
            ictal_minutes: 2.0,
            seed: 0,
        }
    }
}

impl SyntheticPatient {
    fn base(&self, duration_s: f64, stream: u64) -> SynthConfig {
        SynthConfig {
            patient_id: self.patient_id.clone(),
            sample_rate_hz: SAMPLE_RATE_HZ,
            channel_count: self.channels,
            duration_s,
            background_bands: self.background.clone(),
            noise_sigma: self.noise_sigma,
            preictal_signature: None,
            // distinct, reproducible noise for every recording
            seed: self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(stream),
        }
    }

    /// One hour without any signature.
    pub fn interictal_hour(&self, index: u64) -> Result<Recording> {
        synthesize_eeg(&self.base(3600.0, index))
    }

    /// Lead-in, 48-minute ramp, then the seizure.
    pub fn seizure(&self, index: u64) -> Result<SeizureEvent> {
        let ramp_s = PREICTAL_MINUTES as f64 * 60.0;
        let onset_s = self.lead_in_minutes * 60.0 + ramp_s;
        let mut cfg = self.base(onset_s + self.ictal_minutes * 60.0, 1 << 32 | index);
        cfg.preictal_signature = Some(PreictalSignature {
            center_hz: self.signature_hz,
            peak_amplitude: self.signature_peak,
            start_s: onset_s - ramp_s,
            onset_s,
        });
        let (preictal, ictal) = split_at_onset(&synthesize_eeg(&cfg)?)?;
        Ok(SeizureEvent { preictal, ictal })
    }

    /// `hours` interictal hours followed by `seizures` events. `first` offsets
    /// the noise streams so train and test sets differ.
    pub fn dataset(&self, hours: usize, seizures: usize, first: u64) -> Result<Dataset> {
        let mut recordings = Vec::with_capacity(hours + 2 * seizures);
        for h in 0..hours as u64 {
            recordings.push(self.interictal_hour(first + h)?);
        }
        for s in 0..seizures as u64 {
            let event = self.seizure(first + s)?;
            recordings.push(event.preictal);
            recordings.push(event.ictal);
        }
        Ok(Dataset { recordings })
    }
}
