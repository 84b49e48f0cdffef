use std::sync::OnceLock;

use proptest::prelude::*;
use seizure_core::features::{Class, FeatureConfig, FeatureTable};
use seizure_core::mapreduce::{Executor, Registry};
use seizure_core::pipeline::*;
use seizure_core::rotforest::{train, RotationForestConfig, RotationForestModel};
use seizure_core::signal::SEGMENTS_PER_CHUNK;
use seizure_core::Error;

use Class::{Interictal as I, Preictal as P};

fn patient() -> SyntheticPatient {
    SyntheticPatient { channels: 1, seed: 21, ..SyntheticPatient::default() }
}

struct Trained {
    model: RotationForestModel,
    table: FeatureTable,
    report: RunReport,
    _dir: tempfile::TempDir,
}

// one hour tiled plus one seizure; small enough to train once per test binary
fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = TrainConfig::new(dir.path());
        cfg.sampling = InterictalSampling::FullHour;
        cfg.cv_folds = 3;
        cfg.forest.ensemble_size = 4;
        let data = patient().dataset(1, 1, 0).unwrap();
        let (model, table, report) = train_pipeline(&data, &cfg, &Executor::Serial, &Registry::standard()).unwrap();
        Trained { model, table, report, _dir: dir }
    })
}

#[test]
fn training_report_is_complete() {
    let t = trained();
    let acc = t.report.cv_accuracy.unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(t.report.training_rows, t.table.len());
    for phase in [PHASE_INTERICTAL, PHASE_PREICTAL, PHASE_CV, PHASE_TRAIN, PHASE_TOTAL] {
        assert!(t.report.seconds(phase).unwrap() >= 0.0, "{phase}");
    }
    let [inter, pre] = t.table.class_counts();
    assert_eq!(inter, 6 * SEGMENTS_PER_CHUNK);
    assert!(pre >= 6 * SEGMENTS_PER_CHUNK);
    assert!(t.report.to_csv().starts_with("phase,executor,seconds\n"));
}

#[test]
fn full_hour_sampling_gives_six_times_the_rows() {
    let data = patient().dataset(2, 0, 40).unwrap();
    let ten = interictal_chunks(&data, InterictalSampling::TenMinutes, 3).unwrap();
    let full = interictal_chunks(&data, InterictalSampling::FullHour, 3).unwrap();
    assert_eq!(ten.len(), 2);
    assert_eq!(full.len(), 6 * ten.len());

    let dir = tempfile::tempdir().unwrap();
    let reg = Registry::standard();
    let cfg = FeatureConfig::default();
    let rows = |chunks| extract_features("rows", chunks, &cfg, dir.path(), &Executor::Serial, &reg).unwrap().len();
    assert_eq!(rows(&full), 6 * rows(&ten));
}

#[test]
fn missing_sources_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig::new(dir.path());
    let no_seizure = patient().dataset(1, 0, 0).unwrap();
    let err = train_pipeline(&no_seizure, &cfg, &Executor::Serial, &Registry::standard()).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)), "{err}");
}

#[test]
fn interictal_hour_makes_seven_quiet_chunks() {
    let t = trained();
    let dir = tempfile::tempdir().unwrap();
    let stream = vec![patient().interictal_hour(500).unwrap()];
    let (timeline, report) =
        test_pipeline(&t.model, &stream, &FeatureConfig::default(), dir.path(), &Executor::Serial, &Registry::standard())
            .unwrap();
    assert_eq!(timeline.predictions.len(), 7);
    let offsets: Vec<f64> = timeline.predictions.iter().map(|p| p.wall_clock_offset_min).collect();
    assert_eq!(offsets, [0.0, 8.0, 16.0, 24.0, 32.0, 40.0, 48.0]);
    assert!(timeline.alarms.is_empty(), "{}", timeline.to_csv());
    assert_eq!(timeline.lead_time_min(), None);
    assert_eq!(report.lead_time_min, None);
}

#[test]
fn seizure_stream_alarms_before_onset_on_every_executor() {
    let t = trained();
    let reg = Registry::standard();
    let event = patient().seizure(700).unwrap();
    let stream = vec![patient().interictal_hour(701).unwrap(), event.preictal, event.ictal];
    let mut csv = None;
    for exec in [Executor::Serial, Executor::Threaded(1), Executor::Threaded(3)] {
        let dir = tempfile::tempdir().unwrap();
        let (timeline, _) = test_pipeline(&t.model, &stream, &FeatureConfig::default(), dir.path(), &exec, &reg).unwrap();
        let onset = timeline.seizure_onset_min.unwrap();
        assert_eq!(onset, 60.0 + 48.0);
        assert!(timeline.alarms_before(onset) >= 1, "{}", timeline.to_csv());
        assert!(timeline.lead_time_min().unwrap() > 0.0);
        let now = timeline.to_csv();
        assert!(now.lines().skip(1).any(|l| l.ends_with(",1")));
        match &csv {
            None => csv = Some(now),
            Some(reference) => assert_eq!(&now, reference, "{}", exec.label()),
        }
    }
}

#[test]
fn schema_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    // a model trained on three channels cannot score a one-channel stream
    let names = seizure_core::features::feature_names(3, 4);
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64; names.len()]).collect();
    let labels = (0..20).map(|i| if i < 10 { I } else { P }).collect();
    let table = FeatureTable::from_rows(names, rows, labels).unwrap();
    let model = train(&table, &RotationForestConfig { ensemble_size: 2, ..RotationForestConfig::default() }).unwrap();
    let stream = vec![patient().interictal_hour(0).unwrap()];
    let err = test_pipeline(&model, &stream, &FeatureConfig::default(), dir.path(), &Executor::Serial, &Registry::standard())
        .unwrap_err();
    assert!(matches!(err, Error::Shape(_)), "{err}");
}

#[test]
fn alarm_and_threshold_examples() {
    let chunk = |n: usize| {
        let mut v = vec![P; n];
        v.resize(SEGMENTS_PER_CHUNK, I);
        classify_chunk(&v).unwrap()
    };
    assert_eq!(chunk(31).chunk_label, P);
    assert_eq!(chunk(30).chunk_label, I);
    assert_eq!(chunk(0).chunk_label, I);
    assert!(matches!(classify_chunk(&[P; 59]), Err(Error::Shape(_))));

    assert_eq!(alarm_scan(&[I, I, P, P, P]), [4]);
    assert!(alarm_scan(&[P, I, P, I, P]).is_empty());
    assert_eq!(alarm_scan(&[P, P, P, P]), [2]);
}

fn label() -> impl Strategy<Value = Class> {
    prop_oneof![Just(I), Just(P)]
}

// every index i where labels[i-2..=i] are all preictal and i is the third
// element of its run: written out directly rather than via the scanner
fn alarms_by_runs(labels: &[Class]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &l) in labels.iter().enumerate() {
        match (l, start) {
            (P, None) => start = Some(i),
            (I, _) => start = None,
            _ => {}
        }
        if start.is_some_and(|s| i - s == ALARM_RUN - 1) {
            out.push(i);
        }
    }
    out
}

proptest! {
    #[test]
    fn scanner_matches_run_oracle(labels in prop::collection::vec(label(), 0..40)) {
        prop_assert_eq!(alarm_scan(&labels), alarms_by_runs(&labels));
    }

    #[test]
    fn inserting_interictal_between_runs_adds_no_alarm(
        labels in prop::collection::vec(label(), 1..40),
        pick in any::<prop::sample::Index>(),
    ) {
        let gaps: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == I).collect();
        prop_assume!(!gaps.is_empty());
        let at = gaps[pick.index(gaps.len())];
        let mut longer = labels.clone();
        longer.insert(at, I);
        let shifted: Vec<usize> = alarm_scan(&labels).into_iter().map(|a| if a >= at { a + 1 } else { a }).collect();
        prop_assert_eq!(alarm_scan(&longer), shifted);
    }

    #[test]
    fn chunk_decision_ignores_segment_order(
        labels in prop::collection::vec(label(), SEGMENTS_PER_CHUNK),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = labels.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(classify_chunk(&labels).unwrap(), classify_chunk(&shuffled).unwrap());
    }
}
