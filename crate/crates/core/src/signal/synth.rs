//! Synthetic EEG: a sum of sinusoidal background rhythms, white noise, and an
//! optional preictal marker whose amplitude ramps up linearly towards onset.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Phase, Recording, SAMPLE_RATE_HZ};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oscillator {
    pub center_hz: f64,
    pub amplitude: f64,
}

/// Ramped oscillator injected from `start_s`; reaches `peak_amplitude` at
/// `onset_s` and holds it afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreictalSignature {
    pub center_hz: f64,
    pub peak_amplitude: f64,
    pub start_s: f64,
    pub onset_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub patient_id: String,
    pub sample_rate_hz: u32,
    pub channel_count: usize,
    pub duration_s: f64,
    pub background_bands: Vec<Oscillator>,
    pub noise_sigma: f64,
    pub preictal_signature: Option<PreictalSignature>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            patient_id: "synthetic".into(),
            sample_rate_hz: SAMPLE_RATE_HZ,
            channel_count: 1,
            duration_s: 8.0,
            background_bands: Vec::new(),
            noise_sigma: 0.0,
            preictal_signature: None,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn samples(&self) -> usize {
        (self.duration_s * f64::from(self.sample_rate_hz)).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::Parameter(format!("duration {} s must be positive", self.duration_s)));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Parameter(format!("noise sigma {} must be >= 0", self.noise_sigma)));
        }
        if self.sample_rate_hz == 0 || self.channel_count == 0 {
            return Err(Error::Parameter("sample rate and channel count must be positive".into()));
        }
        if self.samples() == 0 {
            return Err(Error::Parameter("duration shorter than one sample".into()));
        }
        if let Some(sig) = &self.preictal_signature {
            if !(sig.start_s >= 0.0 && sig.start_s < sig.onset_s && sig.onset_s < self.duration_s) {
                return Err(Error::Parameter(format!(
                    "signature must satisfy 0 <= start ({}) < onset ({}) < duration ({})",
                    sig.start_s, sig.onset_s, self.duration_s
                )));
            }
        }
        Ok(())
    }
}

/// Generate a recording. Bitwise deterministic in `config`.
///
/// Channel `c` of `C` runs every oscillator with phase offset `2π·c/C`, so
/// channel 0 of a noise-free single-oscillator config is `A·sin(2πft)`.
/// A configured signature makes the result [`Phase::Mixed`] with the onset
/// index set; otherwise it is [`Phase::Interictal`].
pub fn synthesize_eeg(config: &SynthConfig) -> Result<Recording> {
    config.validate()?;
    let n = config.samples();
    let rate = f64::from(config.sample_rate_hz);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::Parameter(e.to_string()))?;

    let channels = (0..config.channel_count)
        .map(|c| {
            let offset = TAU * c as f64 / config.channel_count as f64;
            (0..n)
                .map(|i| {
                    let t = i as f64 / rate;
                    let mut v: f64 = config
                        .background_bands
                        .iter()
                        .map(|o| o.amplitude * (TAU * o.center_hz * t + offset).sin())
                        .sum();
                    if let Some(sig) = &config.preictal_signature {
                        v += signature_amplitude(sig, t) * (TAU * sig.center_hz * t + offset).sin();
                    }
                    if config.noise_sigma > 0.0 {
                        v += noise.sample(&mut rng);
                    }
                    v
                })
                .collect()
        })
        .collect();

    let (phase, onset) = match &config.preictal_signature {
        Some(sig) => (Phase::Mixed, Some(((sig.onset_s * rate).round() as usize).min(n - 1))),
        None => (Phase::Interictal, None),
    };
    Recording::new(config.patient_id.clone(), config.sample_rate_hz, channels, phase, onset)
}

fn signature_amplitude(sig: &PreictalSignature, t: f64) -> f64 {
    if t < sig.start_s {
        0.0
    } else if t >= sig.onset_s {
        sig.peak_amplitude
    } else {
        sig.peak_amplitude * (t - sig.start_s) / (sig.onset_s - sig.start_s)
    }
}
