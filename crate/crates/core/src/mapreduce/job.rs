use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// One intermediate or output pair.
pub type Record = (String, Vec<u8>);

/// Free-form job configuration handed to every map and reduce call.
pub type Params = BTreeMap<String, String>;

/// Map: `(split index, split path, params) → records` in emission order.
pub type MapFn = fn(usize, &Path, &Params) -> Result<Vec<Record>>;

/// Reduce: `(key, values in shuffle order, params) → output value`.
pub type ReduceFn = fn(&str, &[Vec<u8>], &Params) -> Result<Vec<u8>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub job_id: String,
    pub map_fn: String,
    pub reduce_fn: String,
    pub input_splits: Vec<PathBuf>,
    pub params: Params,
}

impl Job {
    pub fn new(job_id: impl Into<String>, map_fn: &str, reduce_fn: &str, input_splits: Vec<PathBuf>) -> Self {
        Job {
            job_id: job_id.into(),
            map_fn: map_fn.to_string(),
            reduce_fn: reduce_fn.to_string(),
            input_splits,
            params: Params::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn param<T: std::str::FromStr>(params: &Params, key: &str) -> Result<T> {
        let raw = params
            .get(key)
            .ok_or_else(|| Error::Parameter(format!("job parameter `{key}` missing")))?;
        raw.parse()
            .map_err(|_| Error::Parameter(format!("job parameter `{key}` has bad value `{raw}`")))
    }

    /// `key=value` lines: `job_id`, `map_fn`, `reduce_fn`, one `split` per
    /// input in order, and `param.<name>` entries.
    pub fn to_text(&self) -> String {
        let mut out = format!("job_id={}\nmap_fn={}\nreduce_fn={}\n", self.job_id, self.map_fn, self.reduce_fn);
        for s in &self.input_splits {
            out.push_str(&format!("split={}\n", s.display()));
        }
        for (k, v) in &self.params {
            out.push_str(&format!("param.{k}={v}\n"));
        }
        out
    }

    /// Inverse of [`Job::to_text`]. Relative split paths resolve against
    /// `base`. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, base: &Path) -> Result<Job> {
        let mut job = Job::new("", "", "", Vec::new());
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("job file line {}: expected key=value", i + 1)))?;
            match k {
                "job_id" => job.job_id = v.to_string(),
                "map_fn" => job.map_fn = v.to_string(),
                "reduce_fn" => job.reduce_fn = v.to_string(),
                "split" => job.input_splits.push(base.join(v)),
                _ => match k.strip_prefix("param.") {
                    Some(name) => {
                        job.params.insert(name.to_string(), v.to_string());
                    }
                    None => return Err(Error::Parameter(format!("job file line {}: unknown key `{k}`", i + 1))),
                },
            }
        }
        Ok(job)
    }

    pub fn validate(&self, registry: &super::Registry) -> Result<()> {
        let valid_id = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
        if !valid_id(&self.job_id) {
            return Err(Error::Parameter(format!("job id `{}` must be [A-Za-z0-9._-]+", self.job_id)));
        }
        if self.input_splits.is_empty() {
            return Err(Error::Parameter(format!("job {} has no input splits", self.job_id)));
        }
        registry.map_fn(&self.map_fn)?;
        registry.reduce_fn(&self.reduce_fn)?;
        for (k, v) in &self.params {
            if k.contains(['=', '\n', '\t']) || v.contains(['\n', '\t']) {
                return Err(Error::Parameter(format!("job parameter `{k}` has reserved characters")));
            }
        }
        Ok(())
    }
}

/// Length-prefixed record stream: `u32 key_len, key, u32 value_len, value`,
/// little-endian. Used for intermediate files and as the canonical byte form
/// of job output.
pub fn encode_records(records: &[Record]) -> Vec<u8> {
    let mut out = Vec::new();
    for (k, v) in records {
        out.extend_from_slice(&(k.len() as u32).to_le_bytes());
        out.extend_from_slice(k.as_bytes());
        out.extend_from_slice(&(v.len() as u32).to_le_bytes());
        out.extend_from_slice(v);
    }
    out
}

pub fn decode_records(mut bytes: &[u8]) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    let truncated = || Error::Data("truncated record stream".into());
    let take = |bytes: &mut &[u8]| -> Result<Vec<u8>> {
        if bytes.len() < 4 {
            return Err(truncated());
        }
        let (len, rest) = bytes.split_at(4);
        let len = u32::from_le_bytes(len.try_into().unwrap()) as usize;
        if rest.len() < len {
            return Err(truncated());
        }
        let (field, rest) = rest.split_at(len);
        *bytes = rest;
        Ok(field.to_vec())
    };
    while !bytes.is_empty() {
        let key = String::from_utf8(take(&mut bytes)?).map_err(|_| Error::Data("record key is not UTF-8".into()))?;
        let value = take(&mut bytes)?;
        out.push((key, value));
    }
    Ok(out)
}

/// Group map outputs by key. Keys come out ascending; values keep map-task
/// order, then emission order.
pub fn shuffle<I>(map_outputs: I) -> BTreeMap<String, Vec<Vec<u8>>>
where
    I: IntoIterator<Item = Vec<Record>>,
{
    let mut groups: BTreeMap<String, Vec<Vec<u8>>> = BTreeMap::new();
    for output in map_outputs {
        for (k, v) in output {
            groups.entry(k).or_default().push(v);
        }
    }
    groups
}

/// Reduce partition for `key` among `partitions` (FNV-1a, stable across
/// processes and platforms).
pub fn partition_of(key: &str, partitions: usize) -> usize {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    (hash % partitions.max(1) as u64) as usize
}
