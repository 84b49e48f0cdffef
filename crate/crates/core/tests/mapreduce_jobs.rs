use std::path::{Path, PathBuf};

use seizure_core::features::{build_feature_table, feature_names, FeatureConfig};
use seizure_core::mapreduce::jobs::{
    assemble_model, ensemble_job, signal_job, table_from_output, write_ensemble_splits, WORDCOUNT_MAP,
    WORDCOUNT_REDUCE,
};
use seizure_core::mapreduce::{encode_records, run_serial, run_threaded, Job, Registry};
use seizure_core::rotforest::{model_to_string, train, two_gaussian_table, RotationForestConfig};
use seizure_core::signal::{segment, synthesize_eeg, Oscillator, SegmentMatrix, SynthConfig, SEGMENT_LENGTH};

fn chunks(n: usize, seed: u64) -> Vec<SegmentMatrix> {
    let per_chunk = 6;
    let cfg = SynthConfig {
        channel_count: 3,
        duration_s: (n * per_chunk * SEGMENT_LENGTH) as f64 / 256.0,
        background_bands: vec![Oscillator { center_hz: 4.0, amplitude: 1.0 }, Oscillator { center_hz: 11.0, amplitude: 0.6 }],
        noise_sigma: 0.4,
        seed,
        ..SynthConfig::default()
    };
    let out = segment(&synthesize_eeg(&cfg).unwrap(), SEGMENT_LENGTH, per_chunk).unwrap();
    assert_eq!(out.len(), n);
    out
}

fn write_chunks(dir: &Path, chunks: &[SegmentMatrix]) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    chunks
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let p = dir.join(format!("c{i}.seg"));
            c.write_file(&p).unwrap();
            p
        })
        .collect()
}

#[test]
fn signal_job_matches_direct_feature_table() {
    let dir = tempfile::tempdir().unwrap();
    let cs = chunks(3, 11);
    let cfg = FeatureConfig::default();
    let job = signal_job("sig", write_chunks(dir.path(), &cs), &cfg);
    let reg = Registry::standard();
    let serial = run_serial(&job, &reg).unwrap();
    let table = table_from_output(&serial, feature_names(3, cfg.level)).unwrap();
    assert_eq!(table, build_feature_table(&cs, &cfg).unwrap());
    assert_eq!(table.len(), 3 * 6);
    for threads in [1, 2, 4] {
        assert_eq!(encode_records(&run_threaded(&job, &reg, threads).unwrap()), encode_records(&serial));
    }
}

#[test]
fn signal_job_honours_feature_params() {
    let dir = tempfile::tempdir().unwrap();
    let cs = chunks(1, 3);
    let cfg = FeatureConfig { level: 3, filter: seizure_core::wavelet::FilterPair::haar(), ..FeatureConfig::default() };
    let job = signal_job("sig3", write_chunks(dir.path(), &cs), &cfg);
    let out = run_serial(&job, &Registry::standard()).unwrap();
    let table = table_from_output(&out, feature_names(3, 3)).unwrap();
    assert_eq!(table, build_feature_table(&cs, &cfg).unwrap());
}

#[test]
fn ensemble_job_over_two_tasks_equals_in_process_training() {
    let dir = tempfile::tempdir().unwrap();
    let table = two_gaussian_table(120, 5);
    let cfg = RotationForestConfig { ensemble_size: 10, seed: 9, ..RotationForestConfig::default() };
    let splits = write_ensemble_splits(dir.path(), &table, cfg.ensemble_size, 2).unwrap();
    assert_eq!(splits.len(), 2);
    let job = ensemble_job("ens", splits, &cfg);
    let reg = Registry::standard();
    let out = run_serial(&job, &reg).unwrap();
    let model = assemble_model(&out, table.names().to_vec(), &cfg).unwrap();
    let direct = train(&table, &cfg).unwrap();
    assert_eq!(model_to_string(&model), model_to_string(&direct));
    assert_eq!(encode_records(&run_threaded(&job, &reg, 3).unwrap()), encode_records(&out));
}

#[test]
fn single_member_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let table = two_gaussian_table(60, 1);
    let cfg = RotationForestConfig { ensemble_size: 1, seed: 4, ..RotationForestConfig::default() };
    // more tasks than members collapses to one task
    let splits = write_ensemble_splits(dir.path(), &table, 1, 5).unwrap();
    assert_eq!(splits.len(), 1);
    let out = run_serial(&ensemble_job("one", splits, &cfg), &Registry::standard()).unwrap();
    let model = assemble_model(&out, table.names().to_vec(), &cfg).unwrap();
    assert_eq!(model.members.len(), 1);
    assert_eq!(model_to_string(&model), model_to_string(&train(&table, &cfg).unwrap()));
}

#[test]
fn wordcount_toy() {
    let dir = tempfile::tempdir().unwrap();
    let split = dir.path().join("s.txt");
    std::fs::write(&split, "a b a").unwrap();
    let out = run_serial(&Job::new("wc", WORDCOUNT_MAP, WORDCOUNT_REDUCE, vec![split]), &Registry::standard()).unwrap();
    let counts: Vec<(String, String)> =
        out.into_iter().map(|(k, v)| (k, String::from_utf8(v).unwrap())).collect();
    assert_eq!(counts, [("a".to_string(), "2".to_string()), ("b".to_string(), "1".to_string())]);
}

#[test]
fn empty_map_output_gives_empty_result() {
    let dir = tempfile::tempdir().unwrap();
    let splits: Vec<PathBuf> = (0..3)
        .map(|i| {
            let p = dir.path().join(format!("empty{i}.txt"));
            std::fs::write(&p, "  \n").unwrap();
            p
        })
        .collect();
    let job = Job::new("wc-empty", WORDCOUNT_MAP, WORDCOUNT_REDUCE, splits);
    let reg = Registry::standard();
    assert!(run_serial(&job, &reg).unwrap().is_empty());
    assert!(run_threaded(&job, &reg, 4).unwrap().is_empty());
}

#[test]
fn failing_map_names_the_task() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("ok.txt");
    std::fs::write(&good, "x").unwrap();
    let job = Job::new("wc-bad", WORDCOUNT_MAP, WORDCOUNT_REDUCE, vec![good, dir.path().join("missing.txt")]);
    let err = run_serial(&job, &Registry::standard()).unwrap_err().to_string();
    assert!(err.contains("map-00001"), "{err}");
}
