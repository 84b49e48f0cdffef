use std::collections::BTreeMap;
use std::io::BufReader;
use std::net::{Shutdown, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::job::{decode_records, encode_records, partition_of, Record};
use super::protocol::{write_atomic, Message, MessageKind, TaskDescriptor, TaskKind};
use super::Registry;
use crate::error::IoContext;
use crate::{Error, Result};

/// Environment variable read by the `worker` subcommand: exit abruptly when
/// handed the task after this many completed ones.
pub const FAULT_EXIT_AFTER_ENV: &str = "SEIZURE_FAULT_EXIT_AFTER";

#[derive(Debug, Clone)]
pub struct WorkerOptions {
    pub master: String,
    pub work_dir: PathBuf,
    pub name: String,
    pub heartbeat_interval: Duration,
    /// Keep retrying the initial connection this long.
    pub connect_timeout: Duration,
    /// Fault injection: after this many completed tasks, drop the connection
    /// on the next assignment without answering it.
    pub exit_after: Option<usize>,
}

impl WorkerOptions {
    pub fn new(master: impl Into<String>, work_dir: impl Into<PathBuf>) -> Self {
        WorkerOptions {
            master: master.into(),
            work_dir: work_dir.into(),
            name: format!("worker-{}", std::process::id()),
            heartbeat_interval: Duration::from_millis(200),
            connect_timeout: Duration::from_secs(10),
            exit_after: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkerExit {
    /// Master sent SHUTDOWN.
    Shutdown,
    /// Master closed the connection.
    Disconnected,
    /// `exit_after` tripped.
    FaultInjected,
}

fn connect(opts: &WorkerOptions) -> Result<TcpStream> {
    let deadline = Instant::now() + opts.connect_timeout;
    loop {
        match TcpStream::connect(&opts.master) {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() >= deadline => {
                return Err(Error::Cluster(format!("cannot reach master at {}: {e}", opts.master)))
            }
            Err(_) => std::thread::sleep(Duration::from_millis(50)),
        }
    }
}

/// Serve tasks until the master shuts us down or goes away.
pub fn run_worker(opts: &WorkerOptions, registry: &Registry) -> Result<WorkerExit> {
    let stream = connect(opts)?;
    stream.set_nodelay(true).ok();
    let writer = Arc::new(Mutex::new(stream.try_clone().ctx(|| "cloning socket".to_string())?));
    Message::new(MessageKind::Register, &opts.name, 0, "-").send(&mut *writer.lock().unwrap())?;

    let stop = Arc::new(AtomicBool::new(false));
    let heartbeat = {
        let writer = Arc::clone(&writer);
        let stop = Arc::clone(&stop);
        let interval = opts.heartbeat_interval;
        std::thread::spawn(move || {
            while !stop.load(Ordering::Relaxed) {
                std::thread::sleep(interval);
                if stop.load(Ordering::Relaxed)
                    || Message::bare(MessageKind::Heartbeat).send(&mut *writer.lock().unwrap()).is_err()
                {
                    break;
                }
            }
        })
    };

    let result = serve(opts, registry, &stream, &writer);
    stop.store(true, Ordering::Relaxed);
    stream.shutdown(Shutdown::Both).ok();
    heartbeat.join().ok();
    result
}

fn serve(opts: &WorkerOptions, registry: &Registry, stream: &TcpStream, writer: &Mutex<TcpStream>) -> Result<WorkerExit> {
    let mut reader = BufReader::new(stream.try_clone().ctx(|| "cloning socket".to_string())?);
    let mut completed = 0usize;
    loop {
        let Some(msg) = Message::receive(&mut reader).or_else(|e| match e {
            // the master vanishing mid-line looks like an I/O error
            Error::Io { .. } => Ok(None),
            e => Err(e),
        })?
        else {
            return Ok(WorkerExit::Disconnected);
        };
        match msg.kind {
            MessageKind::Shutdown => return Ok(WorkerExit::Shutdown),
            MessageKind::Assign => {
                if opts.exit_after.is_some_and(|n| completed >= n) {
                    return Ok(WorkerExit::FaultInjected);
                }
                let reply = match run_assignment(&opts.work_dir, &msg.payload_path, registry) {
                    Ok(output) => Message::new(MessageKind::Result, &msg.task_id, msg.attempt, &output),
                    Err(e) => {
                        let err_path = format!("{}.err", msg.payload_path.trim_end_matches(".task"));
                        write_atomic(&opts.work_dir.join(&err_path), e.to_string().as_bytes())?;
                        Message::new(MessageKind::Failed, &msg.task_id, msg.attempt, &err_path)
                    }
                };
                reply.send(&mut *writer.lock().unwrap())?;
                completed += 1;
            }
            other => return Err(Error::Protocol(format!("worker got unexpected {}", other.as_str()))),
        }
    }
}

fn run_assignment(work_dir: &Path, descriptor: &str, registry: &Registry) -> Result<String> {
    let path = work_dir.join(descriptor);
    let text = std::fs::read_to_string(&path).ctx(|| format!("reading {}", path.display()))?;
    let desc = TaskDescriptor::parse(&text)?;
    execute_task(work_dir, &desc, registry)?;
    Ok(desc.output.display().to_string())
}

/// Map output directory holds one record file per reduce partition.
pub(crate) fn partition_file(dir: &Path, partition: usize) -> PathBuf {
    dir.join(format!("part-{partition:05}"))
}

/// Run one task attempt and commit its output under `desc.output`.
pub fn execute_task(work_dir: &Path, desc: &TaskDescriptor, registry: &Registry) -> Result<()> {
    let output = work_dir.join(&desc.output);
    match &desc.kind {
        TaskKind::Map { index, split } => {
            let map = registry.map_fn(&desc.map_fn)?;
            let records = map(*index, &work_dir.join(split), &desc.params)?;
            let mut parts: Vec<Vec<Record>> = vec![Vec::new(); desc.partitions.max(1)];
            for r in records {
                let p = partition_of(&r.0, parts.len());
                parts[p].push(r);
            }
            let tmp = output.with_extension(format!("tmp-{}", std::process::id()));
            if tmp.exists() {
                std::fs::remove_dir_all(&tmp).ctx(|| format!("clearing {}", tmp.display()))?;
            }
            std::fs::create_dir_all(&tmp).ctx(|| format!("creating {}", tmp.display()))?;
            for (p, records) in parts.iter().enumerate() {
                std::fs::write(partition_file(&tmp, p), encode_records(records))
                    .ctx(|| format!("writing partition {p}"))?;
            }
            if output.exists() {
                std::fs::remove_dir_all(&output).ctx(|| format!("clearing {}", output.display()))?;
            }
            std::fs::rename(&tmp, &output).ctx(|| format!("committing {}", output.display()))
        }
        TaskKind::Reduce { partition, inputs } => {
            let reduce = registry.reduce_fn(&desc.reduce_fn)?;
            let mut groups: BTreeMap<String, Vec<Vec<u8>>> = BTreeMap::new();
            for input in inputs {
                let file = partition_file(&work_dir.join(input), *partition);
                let bytes = std::fs::read(&file).ctx(|| format!("reading {}", file.display()))?;
                for (k, v) in decode_records(&bytes)? {
                    groups.entry(k).or_default().push(v);
                }
            }
            let mut out = Vec::with_capacity(groups.len());
            for (key, values) in groups {
                let value = reduce(&key, &values, &desc.params)?;
                out.push((key, value));
            }
            write_atomic(&output, &encode_records(&out))
        }
    }
}
