//! Plain-text recording format.
//!
//! ```text
//! sample_rate_hz=256,channels=3,phase=mixed,onset_index=737280,patient=chb03
//! 12.5,-3.25,0.125
//! ...
//! ```
//!
//! `onset_index` and `patient` are optional; body rows hold one decimal per
//! channel. Values are written in shortest round-trip form so a save/load
//! cycle is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Phase, Recording};
use crate::error::IoContext;
use crate::{Error, Result};

pub fn load_csv(path: impl AsRef<Path>) -> Result<Recording> {
    let path = path.as_ref();
    let file = File::open(path).ctx(|| format!("opening {}", path.display()))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(line) => line.ctx(|| format!("reading {}", path.display()))?,
        None => return Err(parse_err(1, "empty file, header expected".into())),
    };

    let mut rate = None;
    let mut channel_count = None;
    let mut phase = None;
    let mut onset = None;
    let mut patient = String::new();
    for field in header.trim_end_matches('\r').split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(1, format!("header field `{field}` is not key=value")))?;
        let bad = |what: &str| parse_err(1, format!("bad {what} `{value}`"));
        match key {
            "sample_rate_hz" => rate = Some(value.parse::<u32>().map_err(|_| bad("sample rate"))?),
            "channels" => channel_count = Some(value.parse::<usize>().map_err(|_| bad("channel count"))?),
            "phase" => phase = Some(value.parse::<Phase>().map_err(|_| bad("phase"))?),
            "onset_index" => onset = Some(value.parse::<usize>().map_err(|_| bad("onset index"))?),
            "patient" => patient = value.to_string(),
            other => return Err(parse_err(1, format!("unknown header field `{other}`"))),
        }
    }
    let rate = rate.ok_or_else(|| parse_err(1, "missing sample_rate_hz".into()))?;
    let channel_count = channel_count.ok_or_else(|| parse_err(1, "missing channels".into()))?;
    let phase = phase.ok_or_else(|| parse_err(1, "missing phase".into()))?;
    if channel_count == 0 {
        return Err(parse_err(1, "channels must be at least 1".into()));
    }

    let mut channels = vec![Vec::new(); channel_count];
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.ctx(|| format!("reading {}", path.display()))?;
        let line = line.trim_end_matches('\r');
        let mut cells = 0;
        for (c, cell) in line.split(',').enumerate() {
            if c >= channel_count {
                cells = c + 1;
                continue;
            }
            let value = cell
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(lineno, format!("non-numeric cell `{cell}` in column {}", c + 1)))?;
            channels[c].push(value);
            cells = c + 1;
        }
        if cells != channel_count {
            return Err(parse_err(
                lineno,
                format!("expected {channel_count} cells, found {cells}"),
            ));
        }
    }

    Recording::new(patient, rate, channels, phase, onset).map_err(|e| parse_err(1, e.to_string()))
}

pub fn save_csv(rec: &Recording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if rec.patient_id().contains([',', '\n', '\r']) {
        return Err(Error::Parameter(format!(
            "patient id `{}` cannot be stored in a CSV header",
            rec.patient_id()
        )));
    }
    let file = File::create(path).ctx(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(format!("writing {}", path.display()), e);

    write!(
        out,
        "sample_rate_hz={},channels={},phase={}",
        rec.sample_rate_hz(),
        rec.channel_count(),
        rec.phase()
    )
    .map_err(io)?;
    if let Some(onset) = rec.onset_index() {
        write!(out, ",onset_index={onset}").map_err(io)?;
    }
    if !rec.patient_id().is_empty() {
        write!(out, ",patient={}", rec.patient_id()).map_err(io)?;
    }
    out.write_all(b"\n").map_err(io)?;

    let mut row = String::new();
    for i in 0..rec.len() {
        row.clear();
        for (c, ch) in rec.channels().iter().enumerate() {
            if c > 0 {
                row.push(',');
            }
            row.push_str(&ch[i].to_string());
        }
        row.push('\n');
        out.write_all(row.as_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}
