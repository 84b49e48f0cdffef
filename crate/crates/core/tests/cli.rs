use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;

use seizure_core::mapreduce::jobs::{WORDCOUNT_MAP, WORDCOUNT_REDUCE};
use seizure_core::mapreduce::{encode_records, run_serial, Job, Registry};

const BIN: &str = env!("CARGO_BIN_EXE_seizure");

fn seizure(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = seizure(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn train_dir(&self) -> PathBuf {
        self.dir.path().join("train")
    }
    fn stream_dir(&self) -> PathBuf {
        self.dir.path().join("stream")
    }
    fn model(&self) -> PathBuf {
        self.dir.path().join("serial.model")
    }
}

fn train(data: &Path, out: &Path, executor: &[&str]) {
    let mut args = vec![
        "train", "--data", s(data), "--out", s(out), "--seed", "3", "--interictal-minutes", "60",
        "--ensemble-size", "3", "--cv-folds", "0",
    ];
    args.extend(executor);
    ok(&args);
}

// training and test data plus a serially trained model, shared by the tests
fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let f = Fixture { dir: tempfile::tempdir().unwrap() };
        ok(&["synth", "--out", s(&f.train_dir()), "--hours", "1", "--seizures", "1", "--seed", "5"]);
        ok(&[
            "synth", "--out", s(&f.stream_dir()), "--hours", "1", "--seizures", "1", "--seed", "5",
            "--stream-offset", "50",
        ]);
        train(&f.train_dir(), &f.model(), &["--executor", "serial"]);
        f
    })
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["synth", "--out", s(out), "--hours", "2", "--seizures", "1", "--seed", "7"]);
    }
    let fa = files(&a);
    assert_eq!(fa.len(), 5, "2 hours + preictal + ictal + manifest");
    assert_eq!(fa, files(&b));
}

#[test]
fn distributed_training_writes_identical_model() {
    let f = fixture();
    let dist = f.dir.path().join("dist.model");
    train(&f.train_dir(), &dist, &["--executor", "distributed", "--workers", "2"]);
    assert_eq!(std::fs::read(&dist).unwrap(), std::fs::read(f.model()).unwrap());
}

#[test]
fn predict_reports_an_alarm() {
    let f = fixture();
    let out = f.dir.path().join("timeline.csv");
    let stdout = ok(&["predict", "--model", s(&f.model()), "--stream", s(&f.stream_dir()), "--out", s(&out)]);
    assert!(stdout.contains("alarm"), "{stdout}");
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("chunk_index,offset_min,positive_fraction,label,alarm"));
    let alarms = lines.filter(|l| l.ends_with(",1")).count();
    assert!(alarms >= 1, "{csv}");
}

#[test]
fn help_on_every_subcommand() {
    for sub in ["synth", "train", "predict", "bench", "master", "worker"] {
        let out = seizure(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("--work-dir") || text.contains("--out"), "{sub}: {text}");
    }
    assert_eq!(seizure(&["--help"]).status.code(), Some(0));
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    let out = seizure(&["synth", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert_eq!(seizure(&["train", "--data", "x", "--out", "y", "--interictal-minutes", "30"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    let out = seizure(&["train", "--data", s(&missing), "--out", s(&dir.path().join("m"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("manifest.txt"), "{err}");
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("synth.conf");
    std::fs::write(&conf, "hours = 2\nseizures = 0\nseed = 7\n").unwrap();
    let out = dir.path().join("data");
    ok(&["synth", "--config", s(&conf), "--out", s(&out), "--hours", "1"]);
    // explicit --hours wins over the file
    assert_eq!(files(&out).len(), 2);

    std::fs::write(&conf, "not a pair\n").unwrap();
    assert_eq!(seizure(&["synth", "--config", s(&conf), "--out", s(&out)]).status.code(), Some(1));
}

#[test]
fn master_and_worker_processes_run_a_job_file() {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().join("work");
    let mut splits = Vec::new();
    for i in 0..5 {
        let p = work.join("splits").join(format!("text-{i}.txt"));
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(&p, "to be or not to be ".repeat(i + 1)).unwrap();
        splits.push(p);
    }
    let job = Job::new("words", WORDCOUNT_MAP, WORDCOUNT_REDUCE, splits);
    let job_file = work.join("words.job");
    std::fs::write(&job_file, job.to_text()).unwrap();
    let expected = encode_records(&run_serial(&job, &Registry::standard()).unwrap());

    let mut master = Command::new(BIN)
        .args(["master", "--listen", "127.0.0.1:0", "--work-dir", s(&work), "--workers", "2"])
        .args(["--job", s(&job_file)])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdout = BufReader::new(master.stdout.take().unwrap());
    let mut first = String::new();
    stdout.read_line(&mut first).unwrap();
    let addr = first.trim().strip_prefix("listening on ").unwrap().to_string();
    let workers: Vec<_> = (0..2)
        .map(|i| {
            Command::new(BIN)
                .args(["worker", "--master", &addr, "--work-dir", s(&work), "--name", &format!("w{i}")])
                .spawn()
                .unwrap()
        })
        .collect();
    assert!(master.wait().unwrap().success());
    for mut w in workers {
        assert!(w.wait().unwrap().success());
    }
    assert_eq!(std::fs::read(work.join("output/words/result")).unwrap(), expected);
}
