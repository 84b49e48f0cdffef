use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{Phase, Recording};
use crate::error::IoContext;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"SEGMAT01";
const HEADER_LEN: usize = 8 + 4 + 4 + 4 + 8 + 1;

/// One chunk of a recording laid out as `segment_length` rows by
/// `segments_per_chunk × channel_count` columns.
///
/// Columns are channel-major: column `c·segments_per_chunk + s` holds
/// segment `s` of channel `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMatrix {
    pub values: Array2<f64>,
    pub segment_length: usize,
    pub segments_per_chunk: usize,
    pub channel_count: usize,
    pub chunk_index: usize,
    pub source_phase: Phase,
}

impl SegmentMatrix {
    pub fn column_index(&self, channel: usize, segment: usize) -> usize {
        channel * self.segments_per_chunk + segment
    }

    /// Per-channel samples of one segment.
    pub fn segment_channels(&self, segment: usize) -> Vec<Vec<f64>> {
        (0..self.channel_count)
            .map(|c| self.values.column(self.column_index(c, segment)).to_vec())
            .collect()
    }

    /// Little-endian binary encoding used for MapReduce splits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.values.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.segment_length as u32).to_le_bytes());
        out.extend_from_slice(&(self.segments_per_chunk as u32).to_le_bytes());
        out.extend_from_slice(&(self.channel_count as u32).to_le_bytes());
        out.extend_from_slice(&(self.chunk_index as u64).to_le_bytes());
        out.push(self.source_phase.code());
        for v in self.values.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SegmentMatrix> {
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(Error::Data("not a segment matrix file".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let segment_length = u32_at(8);
        let segments_per_chunk = u32_at(12);
        let channel_count = u32_at(16);
        let chunk_index = u64::from_le_bytes(bytes[20..28].try_into().unwrap()) as usize;
        let source_phase = Phase::from_code(bytes[28])
            .ok_or_else(|| Error::Data(format!("bad phase code {}", bytes[28])))?;
        let cols = segments_per_chunk * channel_count;
        let body = &bytes[HEADER_LEN..];
        if body.len() != segment_length * cols * 8 {
            return Err(Error::Data(format!(
                "segment matrix body has {} bytes, expected {}",
                body.len(),
                segment_length * cols * 8
            )));
        }
        let data = body
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let values = Array2::from_shape_vec((segment_length, cols), data)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(SegmentMatrix {
            values,
            segment_length,
            segments_per_chunk,
            channel_count,
            chunk_index,
            source_phase,
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).ctx(|| format!("writing {}", path.display()))
    }

    pub fn read_file(path: &Path) -> Result<SegmentMatrix> {
        let bytes = fs::read(path).ctx(|| format!("reading {}", path.display()))?;
        SegmentMatrix::from_bytes(&bytes)
    }
}

/// Cut `rec` into whole chunks of `segments_per_chunk` segments. Trailing
/// samples that do not fill a chunk are dropped.
pub fn segment(
    rec: &Recording,
    segment_length: usize,
    segments_per_chunk: usize,
) -> Result<Vec<SegmentMatrix>> {
    if segment_length == 0 || segments_per_chunk == 0 {
        return Err(Error::Parameter("segment geometry must be positive".into()));
    }
    let chunk_len = segment_length * segments_per_chunk;
    let chunks = rec.len() / chunk_len;
    let channels = rec.channel_count();
    let cols = segments_per_chunk * channels;

    let matrices = (0..chunks)
        .map(|k| {
            let base = k * chunk_len;
            let values = Array2::from_shape_fn((segment_length, cols), |(r, col)| {
                let (c, s) = (col / segments_per_chunk, col % segments_per_chunk);
                rec.channels()[c][base + s * segment_length + r]
            });
            SegmentMatrix {
                values,
                segment_length,
                segments_per_chunk,
                channel_count: channels,
                chunk_index: k,
                source_phase: rec.phase(),
            }
        })
        .collect();
    Ok(matrices)
}
