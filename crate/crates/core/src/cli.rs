//! The `seizure` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::mapreduce::{
    run_worker, Cluster, ClusterConfig, Executor, Job, Registry, WorkerExit, WorkerOptions, FAULT_EXIT_AFTER_ENV,
};
use crate::pipeline::{benchmark, test_pipeline, train_pipeline, Dataset, InterictalSampling, SyntheticPatient, TrainConfig};
use crate::rotforest::{load_model, save_model};
use crate::{Error, Result};

/// Stdout writes that tolerate a closed pipe (`seizure ... | head`).
macro_rules! emit {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
}

macro_rules! emitln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "seizure", version, about = "EEG seizure prediction on a small MapReduce runtime")]
struct Cli {
    /// File of `flag = value` lines supplying defaults for the subcommand's
    /// flags; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Write a synthetic patient: interictal hours plus preictal/ictal pairs.
    Synth(SynthArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Run a model over a recording stream and report alarms.
    Predict(PredictArgs),
    /// Time training and testing under several executors.
    Bench(BenchArgs),
    /// Run job files on a cluster of workers, then shut them down.
    Master(MasterArgs),
    /// Serve tasks for a master until it shuts down.
    Worker(WorkerArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Interictal hours to generate.
    #[arg(long, default_value_t = 1)]
    hours: usize,
    /// Seizure events to generate, each a 48-minute preictal and an ictal file.
    #[arg(long, default_value_t = 1)]
    seizures: usize,
    /// Patient seed; the same seed gives byte-identical files.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Offset for the noise streams, so train and test sets can share a seed.
    #[arg(long, default_value_t = 0)]
    stream_offset: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExecutorKind {
    Serial,
    Threaded,
    Distributed,
}

#[derive(Debug, Args)]
struct ExecArgs {
    /// Where MapReduce jobs run.
    #[arg(long, value_enum, default_value_t = ExecutorKind::Serial)]
    executor: ExecutorKind,
    /// Threads for `threaded`, worker processes for `distributed`.
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// `distributed` only: listen here and wait for external workers instead
    /// of spawning local ones.
    #[arg(long, value_name = "HOST:PORT")]
    master: Option<String>,
    /// Scratch directory shared with workers (default: a fresh temp dir).
    #[arg(long)]
    work_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset directory (with manifest.txt).
    #[arg(long)]
    data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    exec: ExecArgs,
    /// Seed for window sampling and the ensemble.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Interictal minutes used per hour: 10 (one sampled window) or 60.
    #[arg(long, default_value_t = 10, value_parser = parse_interictal_minutes)]
    interictal_minutes: usize,
    /// Trees in the ensemble.
    #[arg(long, default_value_t = 10)]
    ensemble_size: usize,
    /// Cross-validation folds; 0 skips cross-validation.
    #[arg(long, default_value_t = 10)]
    cv_folds: usize,
    /// Also write the timing report as CSV.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Dataset directory whose manifest gives the stream order.
    #[arg(long)]
    stream: PathBuf,
    /// Alarm timeline CSV to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Training dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Test stream directory (default: the training data).
    #[arg(long)]
    stream: Option<PathBuf>,
    /// Comma-separated: serial, threaded:N, distributed:N.
    #[arg(long, default_value = "serial,threaded:4")]
    executors: String,
    /// Runs per executor; the median is reported.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Median timings as `phase,executor,seconds`.
    #[arg(long)]
    out: PathBuf,
    /// Seed for window sampling and the ensemble.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Interictal minutes used per hour: 10 or 60.
    #[arg(long, default_value_t = 10, value_parser = parse_interictal_minutes)]
    interictal_minutes: usize,
    /// Trees in the ensemble.
    #[arg(long, default_value_t = 10)]
    ensemble_size: usize,
    /// Cross-validation folds; 0 skips cross-validation.
    #[arg(long, default_value_t = 0)]
    cv_folds: usize,
    /// Scratch directory (default: a fresh temp dir).
    #[arg(long)]
    work_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MasterArgs {
    /// Address to accept workers on.
    #[arg(long, value_name = "HOST:PORT")]
    listen: String,
    /// Work directory shared with the workers.
    #[arg(long)]
    work_dir: PathBuf,
    /// Job file to run; repeat for several jobs, run in order.
    #[arg(long = "job", required = true)]
    jobs: Vec<PathBuf>,
    /// Workers to wait for before scheduling.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Expected worker heartbeat period; must be below the task timeout.
    #[arg(long, default_value_t = 200)]
    heartbeat_ms: u64,
    /// Silence after which a worker is considered lost.
    #[arg(long, default_value_t = 2000)]
    task_timeout_ms: u64,
    /// How long to wait for workers to register.
    #[arg(long, default_value_t = 60_000)]
    startup_timeout_ms: u64,
}

#[derive(Debug, Args)]
struct WorkerArgs {
    /// Master address.
    #[arg(long, value_name = "HOST:PORT")]
    master: String,
    /// Work directory shared with the master.
    #[arg(long)]
    work_dir: PathBuf,
    /// Name reported to the master (default: worker-<pid>).
    #[arg(long)]
    name: Option<String>,
    /// Heartbeat period in milliseconds.
    #[arg(long, default_value_t = 200)]
    heartbeat_ms: u64,
    /// How long to keep retrying the initial connection.
    #[arg(long, default_value_t = 30_000)]
    connect_timeout_ms: u64,
}

fn parse_interictal_minutes(s: &str) -> std::result::Result<usize, String> {
    match s.parse() {
        Ok(m @ (10 | 60)) => Ok(m),
        _ => Err(format!("`{s}` is not 10 or 60")),
    }
}

/// Append `--key value` for every config-file entry whose flag is not
/// already on the command line.
fn apply_config_file(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        let a = a.to_string_lossy();
        if a == "--config" {
            path = iter.next().map(PathBuf::from);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut out = args;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.clone(),
            line: i + 1,
            message: "expected `flag = value`".into(),
        })?;
        let flag = format!("--{}", k.trim().trim_start_matches("--"));
        let present = out.iter().any(|a| {
            let a = a.to_string_lossy();
            a == flag || a.starts_with(&format!("{flag}="))
        });
        if !present {
            out.push(flag.into());
            out.push(v.trim().into());
        }
    }
    Ok(out)
}

pub fn main<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let args: Vec<OsString> = args.into_iter().collect();
    let args = match apply_config_file(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Synth(a) => synth(a),
        Cmd::Train(a) => train(a),
        Cmd::Predict(a) => predict(a),
        Cmd::Bench(a) => bench(a),
        Cmd::Master(a) => master(a),
        Cmd::Worker(a) => worker(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let patient = SyntheticPatient { seed: a.seed, ..SyntheticPatient::default() };
    let data = patient.dataset(a.hours, a.seizures, a.stream_offset)?;
    let files = data.save(&a.out)?;
    emitln!("wrote {} recordings to {}", files.len(), a.out.display());
    Ok(())
}

/// Scratch directory removed on drop unless the user chose it.
struct WorkDir {
    path: PathBuf,
    owned: bool,
}

impl WorkDir {
    fn new(chosen: Option<PathBuf>) -> Result<WorkDir> {
        let (path, owned) = match chosen {
            Some(p) => (p, false),
            None => {
                let nanos = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.subsec_nanos());
                (std::env::temp_dir().join(format!("seizure-{}-{nanos}", std::process::id())), true)
            }
        };
        std::fs::create_dir_all(&path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        // absolute, so workers with another cwd agree on it
        let path = std::fs::canonicalize(&path).map_err(|e| Error::io(format!("resolving {}", path.display()), e))?;
        Ok(WorkDir { path, owned })
    }
}

impl Drop for WorkDir {
    fn drop(&mut self) {
        if self.owned {
            std::fs::remove_dir_all(&self.path).ok();
        }
    }
}

/// A cluster plus the local worker processes spawned for it.
struct LocalCluster {
    cluster: Cluster,
    children: Vec<Child>,
}

impl LocalCluster {
    fn start(listen: Option<&str>, workers: usize, work_dir: &Path) -> Result<LocalCluster> {
        if workers == 0 {
            return Err(Error::Parameter("distributed executor needs at least one worker".into()));
        }
        let mut cfg = ClusterConfig::new(listen.unwrap_or("127.0.0.1:0"), work_dir);
        cfg.min_workers = workers;
        cfg.startup_timeout = Duration::from_secs(60);
        let cluster = Cluster::start(cfg)?;
        let mut children = Vec::new();
        if listen.is_none() {
            let exe = std::env::current_exe().map_err(|e| Error::io("locating own executable", e))?;
            for i in 0..workers {
                let child = Command::new(&exe)
                    .arg("worker")
                    .arg("--master")
                    .arg(cluster.local_addr().to_string())
                    .arg("--work-dir")
                    .arg(work_dir)
                    .arg("--name")
                    .arg(format!("local-{i}"))
                    .stdin(Stdio::null())
                    .spawn()
                    .map_err(|e| Error::io("spawning worker", e))?;
                children.push(child);
            }
        }
        cluster.wait_for_workers(workers)?;
        Ok(LocalCluster { cluster, children })
    }
}

impl Drop for LocalCluster {
    fn drop(&mut self) {
        self.cluster.shutdown();
        for c in &mut self.children {
            c.wait().ok();
        }
    }
}

fn with_executor<T>(exec: &ExecArgs, work_dir: &Path, f: impl FnOnce(&Executor<'_>) -> Result<T>) -> Result<T> {
    match exec.executor {
        ExecutorKind::Serial => f(&Executor::Serial),
        ExecutorKind::Threaded => {
            if exec.workers == 0 {
                return Err(Error::Parameter("--workers must be at least 1".into()));
            }
            f(&Executor::Threaded(exec.workers))
        }
        ExecutorKind::Distributed => {
            let local = LocalCluster::start(exec.master.as_deref(), exec.workers, work_dir)?;
            f(&Executor::Distributed(&local.cluster))
        }
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let data = Dataset::load(&a.data)?;
    let work = WorkDir::new(a.exec.work_dir.clone())?;
    let mut cfg = TrainConfig::new(&work.path);
    cfg.seed = a.seed;
    cfg.forest.seed = a.seed;
    cfg.forest.ensemble_size = a.ensemble_size;
    cfg.cv_folds = a.cv_folds;
    cfg.sampling = InterictalSampling::from_minutes(a.interictal_minutes)?;
    let registry = Registry::standard();
    let (model, table, report) = with_executor(&a.exec, &work.path, |e| train_pipeline(&data, &cfg, e, &registry))?;
    save_model(&model, &a.out)?;
    emitln!("trained on {} rows ({:?} interictal/preictal)", table.len(), table.class_counts());
    emit!("{}", report.to_table());
    if let Some(path) = &a.report {
        std::fs::write(path, report.to_csv()).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    emitln!("model written to {}", a.out.display());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let stream = Dataset::load(&a.stream)?;
    let work = WorkDir::new(a.exec.work_dir.clone())?;
    let registry = Registry::standard();
    let features = TrainConfig::new(&work.path).features;
    let (timeline, report) = with_executor(&a.exec, &work.path, |e| {
        test_pipeline(&model, &stream.recordings, &features, &work.path, e, &registry)
    })?;
    std::fs::write(&a.out, timeline.to_csv()).map_err(|e| Error::io(format!("writing {}", a.out.display()), e))?;
    emitln!("{} chunks, {} alarm(s)", timeline.predictions.len(), timeline.alarms.len());
    emit!("{}", report.to_table());
    Ok(())
}

enum BenchExecutor {
    Serial,
    Threaded(usize),
    Distributed(usize),
}

fn parse_executor_list(list: &str) -> Result<Vec<BenchExecutor>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (kind, n) = match item.split_once(':') {
                Some((k, n)) => {
                    let n = n
                        .parse()
                        .ok()
                        .filter(|&n: &usize| n > 0)
                        .ok_or_else(|| Error::Parameter(format!("bad worker count in `{item}`")))?;
                    (k, Some(n))
                }
                None => (item, None),
            };
            match (kind, n) {
                ("serial", None) => Ok(BenchExecutor::Serial),
                ("threaded", n) => Ok(BenchExecutor::Threaded(n.unwrap_or(4))),
                ("distributed", n) => Ok(BenchExecutor::Distributed(n.unwrap_or(4))),
                _ => Err(Error::Parameter(format!("unknown executor `{item}`"))),
            }
        })
        .collect()
}

fn bench(a: BenchArgs) -> Result<()> {
    let specs = parse_executor_list(&a.executors)?;
    let train = Dataset::load(&a.data)?;
    let stream = match &a.stream {
        Some(dir) => Dataset::load(dir)?,
        None => train.clone(),
    };
    let work = WorkDir::new(a.work_dir.clone())?;
    let mut cfg = TrainConfig::new(&work.path);
    cfg.seed = a.seed;
    cfg.forest.seed = a.seed;
    cfg.forest.ensemble_size = a.ensemble_size;
    cfg.cv_folds = a.cv_folds;
    cfg.sampling = InterictalSampling::from_minutes(a.interictal_minutes)?;

    let clusters = specs
        .iter()
        .map(|s| match s {
            BenchExecutor::Distributed(n) => LocalCluster::start(None, *n, &work.path).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let executors: Vec<Executor<'_>> = specs
        .iter()
        .zip(&clusters)
        .map(|(s, c)| match (s, c) {
            (BenchExecutor::Serial, _) => Executor::Serial,
            (BenchExecutor::Threaded(n), _) => Executor::Threaded(*n),
            (BenchExecutor::Distributed(_), Some(c)) => Executor::Distributed(&c.cluster),
            (BenchExecutor::Distributed(_), None) => unreachable!("cluster started above"),
        })
        .collect();
    let report = benchmark(&train, &stream, &cfg, &executors, a.repeats, &Registry::standard())?;
    std::fs::write(&a.out, report.to_csv()).map_err(|e| Error::io(format!("writing {}", a.out.display()), e))?;
    emit!("{}", report.to_table());
    Ok(())
}

fn master(a: MasterArgs) -> Result<()> {
    let registry = Registry::standard();
    let jobs = a
        .jobs
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(format!("reading {}", p.display()), e))?;
            let job = Job::parse(&text, p.parent().unwrap_or(Path::new(".")))?;
            job.validate(&registry)?;
            Ok(job)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cfg = ClusterConfig::new(a.listen, &a.work_dir);
    cfg.min_workers = a.workers.max(1);
    cfg.heartbeat_interval = Duration::from_millis(a.heartbeat_ms);
    cfg.task_timeout = Duration::from_millis(a.task_timeout_ms);
    cfg.startup_timeout = Duration::from_millis(a.startup_timeout_ms);
    let cluster = Cluster::start(cfg)?;
    emitln!("listening on {}", cluster.local_addr());
    for job in &jobs {
        let records = cluster.run(job, &registry)?;
        emitln!(
            "job {}: {} records -> {}",
            job.job_id,
            records.len(),
            a.work_dir.join("output").join(&job.job_id).join("result").display()
        );
    }
    let stats = cluster.stats();
    emitln!(
        "tasks assigned {}, requeued {}, stale results {}, workers lost {}",
        stats.tasks_assigned, stats.tasks_requeued, stats.stale_results, stats.workers_lost
    );
    cluster.shutdown();
    Ok(())
}

fn worker(a: WorkerArgs) -> Result<()> {
    let mut opts = WorkerOptions::new(a.master, a.work_dir);
    if let Some(name) = a.name {
        opts.name = name;
    }
    opts.heartbeat_interval = Duration::from_millis(a.heartbeat_ms.max(1));
    opts.connect_timeout = Duration::from_millis(a.connect_timeout_ms);
    if let Ok(v) = std::env::var(FAULT_EXIT_AFTER_ENV) {
        let n = v
            .parse()
            .map_err(|_| Error::Parameter(format!("{FAULT_EXIT_AFTER_ENV}=`{v}` is not a count")))?;
        opts.exit_after = Some(n);
    }
    match run_worker(&opts, &Registry::standard())? {
        WorkerExit::FaultInjected => {
            eprintln!("{}: fault injection, exiting mid-task", opts.name);
            std::process::exit(2);
        }
        WorkerExit::Shutdown | WorkerExit::Disconnected => Ok(()),
    }
}
