//! The registered jobs: a word-count toy, per-chunk feature extraction and
//! per-member ensemble training.

use std::path::{Path, PathBuf};

use super::job::{Job, Params, Record};
use super::Registry;
use crate::error::IoContext;
use crate::features::{chunk_features, decode_row, encode_row, FeatureConfig, FeatureTable};
use crate::mspca::MspcaConfig;
use crate::rotforest::{member_from_str, member_to_string, train_member, RotationForestConfig, RotationForestModel, TreeParams};
use crate::signal::SegmentMatrix;
use crate::wavelet::FilterPair;
use crate::{Error, Result};

pub const WORDCOUNT_MAP: &str = "wordcount.map";
pub const WORDCOUNT_REDUCE: &str = "wordcount.sum";
pub const SIGNAL_MAP: &str = "signal.features";
pub const SIGNAL_REDUCE: &str = "signal.concat";
pub const ENSEMBLE_MAP: &str = "ensemble.members";
pub const ENSEMBLE_REDUCE: &str = "ensemble.collect";

pub(super) fn register_jobs(r: &mut Registry) {
    r.register_map(SIGNAL_MAP, signal_map);
    r.register_reduce(SIGNAL_REDUCE, signal_reduce);
    r.register_map(ENSEMBLE_MAP, ensemble_map);
    r.register_reduce(ENSEMBLE_REDUCE, ensemble_reduce);
}

fn read_split(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).ctx(|| format!("reading split {}", path.display()))
}

pub fn wordcount_map(_index: usize, split: &Path, _params: &Params) -> Result<Vec<Record>> {
    let text = read_split(split)?;
    let text = String::from_utf8_lossy(&text);
    Ok(text.split_whitespace().map(|w| (w.to_string(), b"1".to_vec())).collect())
}

pub fn wordcount_reduce(key: &str, values: &[Vec<u8>], _params: &Params) -> Result<Vec<u8>> {
    let mut total: u64 = 0;
    for v in values {
        let n: u64 = std::str::from_utf8(v)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Data(format!("count for `{key}` is not a number")))?;
        total += n;
    }
    Ok(total.to_string().into_bytes())
}

// ---- signal features ------------------------------------------------------

pub fn feature_config_params(cfg: &FeatureConfig) -> Params {
    let mut p = Params::new();
    p.insert("wavelet".into(), cfg.filter.name().to_string());
    p.insert("level".into(), cfg.level.to_string());
    p.insert("mspca.wavelet".into(), cfg.denoise.filter.name().to_string());
    p.insert("mspca.levels".into(), cfg.denoise.levels.to_string());
    p.insert("mspca.policy".into(), cfg.denoise.policy.to_string());
    p
}

pub fn feature_config_from_params(params: &Params) -> Result<FeatureConfig> {
    Ok(FeatureConfig {
        filter: FilterPair::by_name(&Job::param::<String>(params, "wavelet")?)?,
        level: Job::param(params, "level")?,
        denoise: MspcaConfig {
            filter: FilterPair::by_name(&Job::param::<String>(params, "mspca.wavelet")?)?,
            levels: Job::param(params, "mspca.levels")?,
            policy: Job::param::<String>(params, "mspca.policy")?.parse()?,
        },
    })
}

/// Feature extraction over chunk files written with
/// [`SegmentMatrix::write_file`]. Output keys are `<split ordinal>/<phase>`,
/// so the key order is the input chunk order.
pub fn signal_job(job_id: &str, chunk_files: Vec<PathBuf>, cfg: &FeatureConfig) -> Job {
    let mut job = Job::new(job_id, SIGNAL_MAP, SIGNAL_REDUCE, chunk_files);
    job.params = feature_config_params(cfg);
    job
}

fn signal_map(index: usize, split: &Path, params: &Params) -> Result<Vec<Record>> {
    let cfg = feature_config_from_params(params)?;
    let chunk = SegmentMatrix::from_bytes(&read_split(split)?)?;
    let key = format!("{index:06}/{}", chunk.source_phase);
    Ok(chunk_features(&chunk, &cfg)?
        .into_iter()
        .map(|(row, label)| (key.clone(), encode_row(&row, label)))
        .collect())
}

/// Concatenate rows into one shard, each prefixed with its byte length.
fn signal_reduce(_key: &str, values: &[Vec<u8>], _params: &Params) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for v in values {
        out.extend_from_slice(&(v.len() as u32).to_le_bytes());
        out.extend_from_slice(v);
    }
    Ok(out)
}

/// Rebuild the feature table from signal-job output.
pub fn table_from_output(records: &[Record], names: Vec<String>) -> Result<FeatureTable> {
    let mut table = FeatureTable::new(names);
    for (key, shard) in records {
        let mut rest = shard.as_slice();
        while !rest.is_empty() {
            if rest.len() < 4 {
                return Err(Error::Data(format!("shard {key} truncated")));
            }
            let len = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
            let row = rest
                .get(4..4 + len)
                .ok_or_else(|| Error::Data(format!("shard {key} truncated")))?;
            let (values, label) = decode_row(row)?;
            table.push(values, label)?;
            rest = &rest[4 + len..];
        }
    }
    Ok(table)
}

// ---- ensemble -------------------------------------------------------------

pub fn forest_config_params(cfg: &RotationForestConfig) -> Params {
    let mut p = Params::new();
    p.insert("rf.ensemble_size".into(), cfg.ensemble_size.to_string());
    p.insert("rf.features_per_subset".into(), cfg.features_per_subset.to_string());
    p.insert("rf.pca_sample_fraction".into(), format!("{:?}", cfg.pca_sample_fraction));
    p.insert("rf.max_depth".into(), cfg.tree.max_depth.map_or("none".into(), |d| d.to_string()));
    p.insert("rf.min_leaf".into(), cfg.tree.min_leaf.to_string());
    p.insert("rf.seed".into(), cfg.seed.to_string());
    p
}

pub fn forest_config_from_params(params: &Params) -> Result<RotationForestConfig> {
    let depth: String = Job::param(params, "rf.max_depth")?;
    let cfg = RotationForestConfig {
        ensemble_size: Job::param(params, "rf.ensemble_size")?,
        features_per_subset: Job::param(params, "rf.features_per_subset")?,
        pca_sample_fraction: Job::param(params, "rf.pca_sample_fraction")?,
        tree: TreeParams {
            max_depth: if depth == "none" { None } else { Some(Job::param(params, "rf.max_depth")?) },
            min_leaf: Job::param(params, "rf.min_leaf")?,
        },
        seed: Job::param(params, "rf.seed")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Write the training table plus `task_count` split files, each naming a
/// contiguous range of member indices. Returns the split paths.
pub fn write_ensemble_splits(
    dir: &Path,
    table: &FeatureTable,
    ensemble_size: usize,
    task_count: usize,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).ctx(|| format!("creating {}", dir.display()))?;
    let table_name = "training-table.csv";
    table.write_csv(&dir.join(table_name))?;
    let tasks = task_count.clamp(1, ensemble_size.max(1));
    let mut splits = Vec::with_capacity(tasks);
    for t in 0..tasks {
        let first = t * ensemble_size / tasks;
        let end = (t + 1) * ensemble_size / tasks;
        let path = dir.join(format!("members-{t:04}.split"));
        std::fs::write(&path, format!("table={table_name}\nfirst={first}\nend={end}\n"))
            .ctx(|| format!("writing {}", path.display()))?;
        splits.push(path);
    }
    Ok(splits)
}

pub fn ensemble_job(job_id: &str, splits: Vec<PathBuf>, cfg: &RotationForestConfig) -> Job {
    let mut job = Job::new(job_id, ENSEMBLE_MAP, ENSEMBLE_REDUCE, splits);
    job.params = forest_config_params(cfg);
    job
}

fn ensemble_map(_index: usize, split: &Path, params: &Params) -> Result<Vec<Record>> {
    let cfg = forest_config_from_params(params)?;
    let text = String::from_utf8(read_split(split)?).map_err(|_| Error::Data("split is not UTF-8".into()))?;
    let mut fields = Params::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            fields.insert(k.to_string(), v.to_string());
        }
    }
    let table_name: String = Job::param(&fields, "table")?;
    let first: usize = Job::param(&fields, "first")?;
    let end: usize = Job::param(&fields, "end")?;
    let base = split.parent().unwrap_or(Path::new("."));
    let table = FeatureTable::read_csv(&base.join(table_name))?;
    let mut out = Vec::with_capacity(end.saturating_sub(first));
    for i in first..end.min(cfg.ensemble_size) {
        let member = train_member(&table, &cfg, i)?;
        out.push((format!("{i:06}"), member_to_string(i, &member).into_bytes()));
    }
    Ok(out)
}

fn ensemble_reduce(key: &str, values: &[Vec<u8>], _params: &Params) -> Result<Vec<u8>> {
    match values {
        [only] => Ok(only.clone()),
        _ => Err(Error::Data(format!("member {key} produced {} times", values.len()))),
    }
}

/// Combine ensemble-job output into a model. Every member index must appear
/// exactly once.
pub fn assemble_model(
    records: &[Record],
    feature_names: Vec<String>,
    config: &RotationForestConfig,
) -> Result<RotationForestModel> {
    if records.len() != config.ensemble_size {
        return Err(Error::Data(format!(
            "ensemble output has {} members, expected {}",
            records.len(),
            config.ensemble_size
        )));
    }
    let p = feature_names.len();
    let mut members = Vec::with_capacity(records.len());
    for (i, (key, value)) in records.iter().enumerate() {
        if *key != format!("{i:06}") {
            return Err(Error::Data(format!("unexpected member key `{key}` at position {i}")));
        }
        let text = std::str::from_utf8(value).map_err(|_| Error::Data(format!("member {i} is not UTF-8")))?;
        members.push(member_from_str(text, i, p)?);
    }
    Ok(RotationForestModel { feature_names, config: config.clone(), members })
}
