//! Wavelet-packet band statistics per 8-second segment, and the labeled
//! feature tables the classifier trains on.
//!
//! Each channel is decomposed to `2^level` packet leaves; every leaf yields
//! four statistics in this order:
//!
//! | name    | value                                               |
//! |---------|-----------------------------------------------------|
//! | `mav`   | mean absolute value                                 |
//! | `power` | mean of squares                                     |
//! | `std`   | population standard deviation                       |
//! | `ratio` | `mav` over the next leaf's `mav` (last wraps to 0); 0 when the denominator is 0 |
//!
//! Vector layout is channel-major, then leaf, then statistic.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::IoContext;
use crate::mspca::{mspca_denoise, MspcaConfig};
use crate::signal::{Phase, SegmentMatrix};
use crate::wavelet::{wpd, FilterPair, DEFAULT_LEVEL};
use crate::{Error, Result};

pub const STATISTICS: [&str; 4] = ["mav", "power", "std", "ratio"];

/// Binary class label. `Interictal` is the non-alarming class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    Interictal = 0,
    Preictal = 1,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::Interictal, Class::Preictal];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Class> {
        match i {
            0 => Some(Class::Interictal),
            1 => Some(Class::Preictal),
            _ => None,
        }
    }

    /// Training label for data cut from a recording of `phase`. Everything
    /// from a preictal/ictal/mixed source counts as preictal.
    pub fn for_phase(phase: Phase) -> Class {
        match phase {
            Phase::Interictal => Class::Interictal,
            Phase::Preictal | Phase::Ictal | Phase::Mixed => Class::Preictal,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Interictal => "interictal",
            Class::Preictal => "preictal",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interictal" => Ok(Class::Interictal),
            "preictal" => Ok(Class::Preictal),
            other => Err(Error::Parameter(format!("unknown class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub filter: FilterPair,
    pub level: usize,
    pub denoise: MspcaConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            filter: FilterPair::db4(),
            level: DEFAULT_LEVEL,
            denoise: MspcaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub names: Vec<String>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn feature_names(channels: usize, level: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(channels * (1 << level) * STATISTICS.len());
    for c in 0..channels {
        for leaf in 0..1usize << level {
            for stat in STATISTICS {
                names.push(format!("ch{c}_leaf{leaf}_{stat}"));
            }
        }
    }
    names
}

fn segment_values(channels: &[Vec<f64>], filter: &FilterPair, level: usize) -> Result<Vec<f64>> {
    let len = channels.first().map(Vec::len).unwrap_or(0);
    if channels.is_empty() || channels.iter().any(|c| c.len() != len) {
        return Err(Error::Shape("segment channels must be non-empty and equal length".into()));
    }
    let leaves = 1usize << level;
    let mut out = Vec::with_capacity(channels.len() * leaves * STATISTICS.len());
    for ch in channels {
        let tree = wpd(ch, filter, level)?;
        let stats: Vec<[f64; 3]> = tree
            .leaves
            .iter()
            .map(|leaf| {
                let n = leaf.len() as f64;
                let mav = leaf.iter().map(|v| v.abs()).sum::<f64>() / n;
                let power = leaf.iter().map(|v| v * v).sum::<f64>() / n;
                let mean = leaf.iter().sum::<f64>() / n;
                let var = leaf.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                [mav, power, var.sqrt()]
            })
            .collect();
        for (i, &[mav, power, std]) in stats.iter().enumerate() {
            let next = stats[(i + 1) % leaves][0];
            let ratio = if next == 0.0 { 0.0 } else { mav / next };
            out.extend_from_slice(&[mav, power, std, ratio]);
        }
    }
    Ok(out)
}

pub fn extract_segment_features(
    channels: &[Vec<f64>],
    filter: &FilterPair,
    level: usize,
) -> Result<FeatureVector> {
    let values = segment_values(channels, filter, level)?;
    Ok(FeatureVector {
        values,
        names: feature_names(channels.len(), level),
    })
}

/// Denoise one chunk and extract one labeled row per segment.
pub fn chunk_features(chunk: &SegmentMatrix, config: &FeatureConfig) -> Result<Vec<(Vec<f64>, Class)>> {
    let denoised = mspca_denoise(chunk.values.view(), &config.denoise)?;
    let label = Class::for_phase(chunk.source_phase);
    (0..chunk.segments_per_chunk)
        .map(|s| {
            let channels: Vec<Vec<f64>> = (0..chunk.channel_count)
                .map(|c| denoised.column(chunk.column_index(c, s)).to_vec())
                .collect();
            Ok((segment_values(&channels, &config.filter, config.level)?, label))
        })
        .collect()
}

/// Rectangular labeled feature rows with a shared schema.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<Class>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        FeatureTable { names, rows: Vec::new(), labels: Vec::new() }
    }

    pub fn from_rows(names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<Class>) -> Result<Self> {
        let mut t = FeatureTable::new(names);
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        for (r, l) in rows.into_iter().zip(labels) {
            t.push(r, l)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, row: Vec<f64>, label: Class) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::Shape(format!(
                "row has {} values, table has {} features",
                row.len(),
                self.names.len()
            )));
        }
        self.rows.push(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn append(&mut self, other: FeatureTable) -> Result<()> {
        if self.names.is_empty() && self.rows.is_empty() {
            self.names = other.names;
        } else if other.names != self.names && !other.rows.is_empty() {
            return Err(Error::Shape("feature tables have different schemas".into()));
        }
        self.rows.extend(other.rows);
        self.labels.extend(other.labels);
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureTable {
        FeatureTable {
            names: self.names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// CSV: feature names plus a trailing `label` column.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).ctx(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(format!("writing {}", path.display()), e);
        let mut line = self.names.join(",");
        if !line.is_empty() {
            line.push(',');
        }
        line.push_str("label\n");
        out.write_all(line.as_bytes()).map_err(io)?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            line.clear();
            for v in row {
                line.push_str(&v.to_string());
                line.push(',');
            }
            line.push_str(label.as_str());
            line.push('\n');
            out.write_all(line.as_bytes()).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<FeatureTable> {
        let file = File::open(path).ctx(|| format!("opening {}", path.display()))?;
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty file".into()))?
            .ctx(|| format!("reading {}", path.display()))?;
        let mut names: Vec<String> = header.split(',').map(str::to_string).collect();
        if names.pop().as_deref() != Some("label") {
            return Err(parse_err(1, "last column must be `label`".into()));
        }
        let mut table = FeatureTable::new(names);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.ctx(|| format!("reading {}", path.display()))?;
            let mut cells: Vec<&str> = line.split(',').collect();
            let label = cells.pop().unwrap_or_default();
            let label = label.parse::<Class>().map_err(|e| parse_err(lineno, e.to_string()))?;
            let row = cells
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| parse_err(lineno, format!("non-numeric cell `{c}`"))))
                .collect::<Result<Vec<_>>>()?;
            table.push(row, label).map_err(|e| parse_err(lineno, e.to_string()))?;
        }
        Ok(table)
    }
}

/// MSPCA-denoise every chunk and extract its segment rows, in chunk then
/// segment order.
pub fn build_feature_table(chunks: &[SegmentMatrix], config: &FeatureConfig) -> Result<FeatureTable> {
    let Some(first) = chunks.first() else {
        return Ok(FeatureTable::default());
    };
    let geometry = |m: &SegmentMatrix| (m.segment_length, m.segments_per_chunk, m.channel_count);
    if chunks.iter().any(|m| geometry(m) != geometry(first)) {
        return Err(Error::Shape("chunks do not share geometry".into()));
    }
    let mut table = FeatureTable::new(feature_names(first.channel_count, config.level));
    for chunk in chunks {
        for (row, label) in chunk_features(chunk, config)? {
            table.push(row, label)?;
        }
    }
    Ok(table)
}

/// Compact binary form of one labeled row (label byte, then LE `f64`s).
pub fn encode_row(row: &[f64], label: Class) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + row.len() * 8);
    out.push(label as u8);
    for v in row {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_row(bytes: &[u8]) -> Result<(Vec<f64>, Class)> {
    let (&tag, body) = bytes
        .split_first()
        .ok_or_else(|| Error::Data("empty feature row".into()))?;
    let label = Class::from_index(tag as usize).ok_or_else(|| Error::Data(format!("bad label byte {tag}")))?;
    if body.len() % 8 != 0 {
        return Err(Error::Data("truncated feature row".into()));
    }
    let row = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    Ok((row, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{segment, synthesize_eeg, Oscillator, Recording, SynthConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_segment(channels: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..channels).map(|_| (0..2048).map(|_| rng.random_range(-5.0..5.0)).collect()).collect()
    }

    #[test]
    fn vector_length_three_channels_level_four() {
        let fv = extract_segment_features(&random_segment(3, 0), &FilterPair::db4(), 4).unwrap();
        assert_eq!(fv.len(), 192);
        assert_eq!(fv.names.len(), 192);
        assert_eq!(fv.names[0], "ch0_leaf0_mav");
        assert_eq!(fv.names[191], "ch2_leaf15_ratio");
    }

    #[test]
    fn zero_segment_gives_zero_features() {
        let fv = extract_segment_features(&vec![vec![0.0; 2048]; 2], &FilterPair::db4(), 4).unwrap();
        assert!(fv.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_length_is_shape_error() {
        let bad = vec![vec![0.0; 2048], vec![0.0; 2000]];
        assert!(matches!(extract_segment_features(&bad, &FilterPair::db4(), 4), Err(Error::Shape(_))));
        assert!(extract_segment_features(&[vec![0.0; 1000]], &FilterPair::db4(), 4).is_err());
    }

    /// Band containing a tone, located from the DFT magnitude spectrum and
    /// mapped to natural packet order (Gray code of the frequency-ordered band).
    fn dominant_leaf_by_dft(x: &[f64], rate: f64, level: usize) -> usize {
        let n = x.len();
        let (mut best_k, mut best_mag) = (0, 0.0);
        for k in 0..=n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let w = std::f64::consts::TAU * (k * t) as f64 / n as f64;
                re += v * w.cos();
                im -= v * w.sin();
            }
            let mag = re.hypot(im);
            if mag > best_mag {
                best_mag = mag;
                best_k = k;
            }
        }
        let freq = best_k as f64 * rate / n as f64;
        let band_width = rate / 2.0 / (1 << level) as f64;
        let band = (freq / band_width) as usize;
        band ^ (band >> 1)
    }

    #[test]
    fn tone_power_lands_in_its_band() {
        for hz in [100.0, 10.0, 37.0, 60.0] {
            let cfg = SynthConfig {
                background_bands: vec![Oscillator { center_hz: hz, amplitude: 1.0 }],
                ..SynthConfig::default()
            };
            let x = synthesize_eeg(&cfg).unwrap().channels()[0].clone();
            let expected = dominant_leaf_by_dft(&x, 256.0, 4);
            let fv = extract_segment_features(&[x], &FilterPair::db4(), 4).unwrap();
            let power: Vec<f64> = (0..16).map(|l| fv.values[l * 4 + 1]).collect();
            let best = (0..16).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap();
            assert_eq!(best, expected, "{hz} Hz");
        }
    }

    #[test]
    fn homogeneous_under_positive_scaling() {
        let seg = random_segment(2, 9);
        let c = 3.5;
        let scaled: Vec<Vec<f64>> = seg.iter().map(|ch| ch.iter().map(|v| v * c).collect()).collect();
        let a = extract_segment_features(&seg, &FilterPair::db4(), 4).unwrap().values;
        let b = extract_segment_features(&scaled, &FilterPair::db4(), 4).unwrap().values;
        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
            let want = match i % 4 {
                0 | 2 => x * c,
                1 => x * c * c,
                _ => *x,
            };
            assert!((y - want).abs() <= 1e-10 * want.abs().max(1.0), "feature {i}");
        }
    }

    fn interictal_chunk() -> SegmentMatrix {
        let cfg = SynthConfig {
            channel_count: 3,
            duration_s: 8.0 * 60.0,
            noise_sigma: 1.0,
            background_bands: vec![Oscillator { center_hz: 10.0, amplitude: 2.0 }],
            seed: 3,
            ..SynthConfig::default()
        };
        segment(&synthesize_eeg(&cfg).unwrap(), 2048, 60).unwrap().remove(0)
    }

    #[test]
    fn one_interictal_chunk_gives_sixty_rows() {
        let chunk = interictal_chunk();
        assert_eq!(chunk.values.dim(), (2048, 180));
        let table = build_feature_table(std::slice::from_ref(&chunk), &FeatureConfig::default()).unwrap();
        assert_eq!(table.len(), 60);
        assert_eq!(table.n_features(), 192);
        assert!(table.labels().iter().all(|&l| l == Class::Interictal));
        let again = build_feature_table(&[chunk], &FeatureConfig::default()).unwrap();
        assert_eq!(table, again);
    }

    #[test]
    fn empty_chunks_empty_table() {
        let t = build_feature_table(&[], &FeatureConfig::default()).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn mixed_phase_rows_are_preictal() {
        let rec = Recording::new("p", 256, vec![vec![0.5; 64]; 2], Phase::Mixed, Some(10)).unwrap();
        let chunk = segment(&rec, 16, 4).unwrap().remove(0);
        let cfg = FeatureConfig { level: 2, ..FeatureConfig::default() };
        let cfg = FeatureConfig { denoise: MspcaConfig { levels: 2, ..cfg.denoise.clone() }, ..cfg };
        let table = build_feature_table(&[chunk], &cfg).unwrap();
        assert!(table.labels().iter().all(|&l| l == Class::Preictal));
    }

    #[test]
    fn csv_and_row_codec_round_trip() {
        let names = feature_names(1, 1);
        let rows = vec![vec![0.1, 1e-300, -3.0, 7.25, 0.0, 1.0 / 3.0, 2.0, 5.0]; 3];
        let t = FeatureTable::from_rows(names, rows, vec![Class::Preictal, Class::Interictal, Class::Preictal]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        t.write_csv(&p).unwrap();
        assert_eq!(FeatureTable::read_csv(&p).unwrap(), t);
        let (row, label) = decode_row(&encode_row(&t.rows()[1], t.labels()[1])).unwrap();
        assert_eq!((row.as_slice(), label), (t.rows()[1].as_slice(), Class::Interictal));
    }
}
