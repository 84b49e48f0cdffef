//! Distributed executor: a master that hands tasks to TCP workers sharing a
//! work directory.
//!
//! All scheduling happens on the calling thread. Per-connection reader
//! threads only parse lines and forward them over a channel, so the task
//! table is never shared.
//!
//! Work directory layout:
//!
//! ```text
//! intermediate/<job>/<task>/attempt-<n>.task   descriptor
//! intermediate/<job>/<task>/attempt-<n>/       committed map output
//! intermediate/<job>/<task>/attempt-<n>.out    committed reduce output
//! output/<job>/result                          final records
//! ```

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::BufReader;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::job::{decode_records, encode_records, Job, Record};
use super::local::{map_task_id, reduce_task_id};
use super::protocol::{write_atomic, Message, MessageKind, TaskDescriptor, TaskKind};
use super::Registry;
use crate::error::IoContext;
use crate::{Error, Result};

// ---- scheduler ------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Status {
    Pending,
    Running,
    Done(PathBuf),
}

#[derive(Debug)]
struct TaskState {
    id: String,
    attempt: u32,
    failures: u32,
    status: Status,
}

/// Task table for one phase. Enforces at-most-once acceptance: a result
/// counts only if it names the current attempt of an unfinished task.
#[derive(Debug)]
pub struct Scheduler {
    tasks: Vec<TaskState>,
    index: HashMap<String, usize>,
    queue: VecDeque<usize>,
}

/// Outcome of a reported failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureOutcome {
    Stale,
    Retried { failures: u32 },
}

impl Scheduler {
    pub fn new(ids: Vec<String>) -> Self {
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let tasks = ids
            .into_iter()
            .map(|id| TaskState { id, attempt: 1, failures: 0, status: Status::Pending })
            .collect::<Vec<_>>();
        let queue = (0..tasks.len()).collect();
        Scheduler { tasks, index, queue }
    }

    /// Next pending task as `(position, id, attempt)`, now marked running.
    pub fn next(&mut self) -> Option<(usize, String, u32)> {
        let i = self.queue.pop_front()?;
        let t = &mut self.tasks[i];
        t.status = Status::Running;
        Some((i, t.id.clone(), t.attempt))
    }

    fn current(&self, id: &str, attempt: u32) -> Option<usize> {
        let &i = self.index.get(id)?;
        let t = &self.tasks[i];
        (t.attempt == attempt && t.status == Status::Running).then_some(i)
    }

    /// Record a result. Returns false (and changes nothing) when the result
    /// is stale or a duplicate.
    pub fn accept(&mut self, id: &str, attempt: u32, output: PathBuf) -> bool {
        match self.current(id, attempt) {
            Some(i) => {
                self.tasks[i].status = Status::Done(output);
                true
            }
            None => false,
        }
    }

    /// Put a running task back with a fresh attempt number.
    pub fn requeue(&mut self, id: &str, attempt: u32) -> bool {
        match self.current(id, attempt) {
            Some(i) => {
                self.tasks[i].attempt += 1;
                self.tasks[i].status = Status::Pending;
                self.queue.push_back(i);
                true
            }
            None => false,
        }
    }

    pub fn fail(&mut self, id: &str, attempt: u32) -> FailureOutcome {
        if !self.requeue(id, attempt) {
            return FailureOutcome::Stale;
        }
        let t = &mut self.tasks[self.index[id]];
        t.failures += 1;
        FailureOutcome::Retried { failures: t.failures }
    }

    pub fn is_done(&self) -> bool {
        self.tasks.iter().all(|t| matches!(t.status, Status::Done(_)))
    }

    /// Accepted outputs in task order; `None` until every task is done.
    pub fn outputs(&self) -> Option<Vec<PathBuf>> {
        self.tasks
            .iter()
            .map(|t| match &t.status {
                Status::Done(p) => Some(p.clone()),
                _ => None,
            })
            .collect()
    }
}

// ---- cluster --------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub bind: String,
    pub work_dir: PathBuf,
    /// `run` waits for this many registered workers before scheduling.
    pub min_workers: usize,
    /// Expected worker heartbeat period; also the master's polling tick.
    pub heartbeat_interval: Duration,
    /// Silence longer than this marks a worker lost and requeues its task.
    pub task_timeout: Duration,
    /// How long to wait for workers to appear before giving up.
    pub startup_timeout: Duration,
    /// Reported task failures tolerated before the job fails.
    pub max_failures: u32,
}

impl ClusterConfig {
    pub fn new(bind: impl Into<String>, work_dir: impl Into<PathBuf>) -> Self {
        ClusterConfig {
            bind: bind.into(),
            work_dir: work_dir.into(),
            min_workers: 1,
            heartbeat_interval: Duration::from_millis(200),
            task_timeout: Duration::from_secs(2),
            startup_timeout: Duration::from_secs(30),
            max_failures: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClusterStats {
    pub tasks_assigned: usize,
    pub tasks_requeued: usize,
    pub stale_results: usize,
    pub workers_lost: usize,
}

enum Event {
    Connected(usize, TcpStream),
    Message(usize, Message),
    Garbage(usize),
    Closed(usize),
}

struct WorkerState {
    name: String,
    stream: TcpStream,
    registered: bool,
    lost: bool,
    last_seen: Instant,
    current: Option<(String, u32)>,
}

impl WorkerState {
    fn available(&self) -> bool {
        self.registered && !self.lost
    }
}


struct State {
    events: Receiver<Event>,
    workers: BTreeMap<usize, WorkerState>,
    /// In-flight tasks of workers that went away, awaiting requeue.
    orphans: Vec<(String, u32)>,
    stats: ClusterStats,
    runs: usize,
    shut_down: bool,
}

impl State {
    fn available(&self) -> usize {
        self.workers.values().filter(|w| w.available()).count()
    }

    fn drop_worker(&mut self, id: usize) {
        if let Some(w) = self.workers.remove(&id) {
            w.stream.shutdown(Shutdown::Both).ok();
            if w.available() {
                self.stats.workers_lost += 1;
            }
            self.orphans.extend(w.current);
        }
    }
}

/// Scheduler plus identity of the phase being run.
struct Phase<'a> {
    job_id: &'a str,
    sched: Scheduler,
}

/// A master with its connected workers. Workers persist across jobs until
/// [`Cluster::shutdown`] (or drop).
pub struct Cluster {
    config: ClusterConfig,
    addr: SocketAddr,
    stopping: Arc<AtomicBool>,
    state: Mutex<State>,
}

fn spawn_reader(id: usize, stream: TcpStream, tx: Sender<Event>) {
    std::thread::spawn(move || {
        let mut reader = BufReader::new(stream);
        loop {
            let event = match Message::receive(&mut reader) {
                Ok(Some(m)) => Event::Message(id, m),
                Ok(None) | Err(Error::Io { .. }) => Event::Closed(id),
                Err(_) => Event::Garbage(id),
            };
            let last = !matches!(event, Event::Message(..));
            if tx.send(event).is_err() || last {
                break;
            }
        }
    });
}

impl Cluster {
    /// Bind and start accepting workers. Use port 0 to pick a free port.
    pub fn start(config: ClusterConfig) -> Result<Cluster> {
        if config.min_workers == 0 {
            return Err(Error::Parameter("cluster needs at least one worker".into()));
        }
        if config.heartbeat_interval.is_zero() || config.task_timeout <= config.heartbeat_interval {
            return Err(Error::Parameter(format!(
                "need task timeout ({:?}) > heartbeat interval ({:?}) > 0",
                config.task_timeout, config.heartbeat_interval
            )));
        }
        std::fs::create_dir_all(&config.work_dir).ctx(|| format!("creating {}", config.work_dir.display()))?;
        let listener = TcpListener::bind(&config.bind).ctx(|| format!("binding {}", config.bind))?;
        let addr = listener.local_addr().ctx(|| "reading bound address".to_string())?;
        let (tx, rx) = channel();
        let stopping = Arc::new(AtomicBool::new(false));
        {
            let stopping = Arc::clone(&stopping);
            std::thread::spawn(move || {
                for (id, stream) in listener.incoming().enumerate() {
                    if stopping.load(Ordering::Relaxed) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    stream.set_nodelay(true).ok();
                    let Ok(reader) = stream.try_clone() else { continue };
                    if tx.send(Event::Connected(id, stream)).is_err() {
                        break;
                    }
                    spawn_reader(id, reader, tx.clone());
                }
            });
        }
        Ok(Cluster {
            config,
            addr,
            stopping,
            state: Mutex::new(State {
                events: rx,
                workers: BTreeMap::new(),
                orphans: Vec::new(),
                stats: ClusterStats::default(),
                runs: 0,
                shut_down: false,
            }),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn work_dir(&self) -> &Path {
        &self.config.work_dir
    }

    pub fn stats(&self) -> ClusterStats {
        let mut st = self.state.lock().unwrap();
        self.drain(&mut st);
        st.stats
    }

    /// Registered workers not currently considered lost.
    pub fn live_workers(&self) -> usize {
        let mut st = self.state.lock().unwrap();
        self.drain(&mut st);
        st.available()
    }

    /// Block until `n` workers are registered or the startup timeout passes.
    /// Returns the live count; errors only if there are none.
    pub fn wait_for_workers(&self, n: usize) -> Result<usize> {
        let mut st = self.state.lock().unwrap();
        self.await_workers(&mut st, n)
    }

    /// Tell every worker to exit and stop accepting connections.
    pub fn shutdown(&self) {
        let mut st = self.state.lock().unwrap();
        if st.shut_down {
            return;
        }
        st.shut_down = true;
        for w in st.workers.values_mut() {
            Message::bare(MessageKind::Shutdown).send(&mut w.stream).ok();
            w.stream.shutdown(Shutdown::Both).ok();
        }
        st.workers.clear();
        self.stopping.store(true, Ordering::Relaxed);
        // wake the accept loop so it sees the flag
        TcpStream::connect(self.addr).ok();
    }

    fn drain(&self, st: &mut State) {
        while let Ok(event) = st.events.try_recv() {
            self.absorb(st, event, None).ok();
        }
        st.orphans.clear();
    }

    fn await_workers(&self, st: &mut State, n: usize) -> Result<usize> {
        let deadline = Instant::now() + self.config.startup_timeout;
        loop {
            self.drain(st);
            let live = st.available();
            let now = Instant::now();
            if live >= n || (now >= deadline && live > 0) {
                return Ok(live);
            }
            if now >= deadline {
                return Err(Error::Cluster(format!(
                    "no workers registered within {:?}",
                    self.config.startup_timeout
                )));
            }
            match st.events.recv_timeout(deadline - now) {
                Ok(event) => self.absorb(st, event, None)?,
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => return Err(Error::Cluster("listener stopped".into())),
            }
        }
    }

    /// Apply one event. Results and failures go to `phase` when one is
    /// running; otherwise they are stale by definition.
    fn absorb(&self, st: &mut State, event: Event, mut phase: Option<&mut Phase<'_>>) -> Result<()> {
        let outcome = self.apply(st, event, phase.as_deref_mut());
        if let Some(phase) = phase {
            for (task, attempt) in std::mem::take(&mut st.orphans) {
                if phase.sched.requeue(&task, attempt) {
                    st.stats.tasks_requeued += 1;
                }
            }
        }
        outcome
    }

    fn apply(&self, st: &mut State, event: Event, phase: Option<&mut Phase<'_>>) -> Result<()> {
        let (id, msg) = match event {
            Event::Connected(id, stream) => {
                let w = WorkerState {
                    name: String::new(),
                    stream,
                    registered: false,
                    lost: false,
                    last_seen: Instant::now(),
                    current: None,
                };
                st.workers.insert(id, w);
                return Ok(());
            }
            Event::Closed(id) | Event::Garbage(id) => {
                st.drop_worker(id);
                return Ok(());
            }
            Event::Message(id, msg) => (id, msg),
        };
        let Some(w) = st.workers.get_mut(&id) else { return Ok(()) };
        w.last_seen = Instant::now();
        w.lost = false;
        match msg.kind {
            MessageKind::Register => {
                w.registered = true;
                w.name = msg.task_id;
            }
            MessageKind::Heartbeat => {}
            MessageKind::Result | MessageKind::Failed => {
                if w.current.as_ref().is_some_and(|(t, a)| *t == msg.task_id && *a == msg.attempt) {
                    w.current = None;
                }
                let Some(phase) = phase else {
                    st.stats.stale_results += 1;
                    return Ok(());
                };
                if msg.kind == MessageKind::Result {
                    if !phase.sched.accept(&msg.task_id, msg.attempt, PathBuf::from(&msg.payload_path)) {
                        st.stats.stale_results += 1;
                    }
                    return Ok(());
                }
                match phase.sched.fail(&msg.task_id, msg.attempt) {
                    FailureOutcome::Stale => st.stats.stale_results += 1,
                    FailureOutcome::Retried { failures } => {
                        st.stats.tasks_requeued += 1;
                        if failures >= self.config.max_failures {
                            let detail = std::fs::read_to_string(self.config.work_dir.join(&msg.payload_path))
                                .unwrap_or_else(|_| "worker reported failure".into());
                            return Err(Error::Job {
                                job: phase.job_id.to_string(),
                                task: msg.task_id,
                                message: format!("failed {failures} times; last error: {detail}"),
                            });
                        }
                    }
                }
            }
            // only the master sends these; a worker doing so is broken
            MessageKind::Assign | MessageKind::Shutdown => st.drop_worker(id),
        }
        Ok(())
    }

    fn poll_interval(&self) -> Duration {
        self.config.heartbeat_interval.min(self.config.task_timeout / 4).max(Duration::from_millis(1))
    }

    /// Drive one phase to completion and return accepted outputs in task
    /// order.
    fn run_phase(
        &self,
        st: &mut State,
        phase: &mut Phase<'_>,
        describe: &dyn Fn(usize, u32) -> TaskDescriptor,
    ) -> Result<Vec<PathBuf>> {
        let mut starved_since: Option<Instant> = None;
        loop {
            if let Some(outputs) = phase.sched.outputs() {
                return Ok(outputs);
            }

            let idle: Vec<usize> = st
                .workers
                .iter()
                .filter(|(_, w)| w.available() && w.current.is_none())
                .map(|(&id, _)| id)
                .collect();
            for id in idle {
                let Some((pos, task, attempt)) = phase.sched.next() else { break };
                let desc = describe(pos, attempt);
                let desc_path = format!("{}.task", desc.output.display());
                write_atomic(&self.config.work_dir.join(&desc_path), desc.to_text().as_bytes())?;
                let w = st.workers.get_mut(&id).expect("listed above");
                if Message::new(MessageKind::Assign, &task, attempt, &desc_path).send(&mut w.stream).is_ok() {
                    w.current = Some((task, attempt));
                    st.stats.tasks_assigned += 1;
                } else {
                    phase.sched.requeue(&task, attempt);
                    st.drop_worker(id);
                    st.orphans.clear();
                }
            }

            if st.available() == 0 {
                let since = *starved_since.get_or_insert_with(Instant::now);
                if since.elapsed() > self.config.startup_timeout {
                    return Err(Error::Cluster(format!("job {}: no live workers", phase.job_id)));
                }
            } else {
                starved_since = None;
            }

            match st.events.recv_timeout(self.poll_interval()) {
                Ok(event) => self.absorb(st, event, Some(&mut *phase))?,
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => return Err(Error::Cluster("listener stopped".into())),
            }

            let now = Instant::now();
            for w in st.workers.values_mut() {
                if w.available() && now.duration_since(w.last_seen) > self.config.task_timeout {
                    w.lost = true;
                    st.stats.workers_lost += 1;
                    if let Some((task, attempt)) = w.current.take() {
                        if phase.sched.requeue(&task, attempt) {
                            st.stats.tasks_requeued += 1;
                        }
                    }
                }
            }
        }
    }

    /// Run a job on the connected workers. Output is identical to
    /// [`run_serial`](super::run_serial) on the same job.
    pub fn run(&self, job: &Job, registry: &Registry) -> Result<Vec<Record>> {
        job.validate(registry)?;
        let mut st = self.state.lock().unwrap();
        if st.shut_down {
            return Err(Error::Cluster("cluster has been shut down".into()));
        }
        let partitions = self.await_workers(&mut st, self.config.min_workers)?;
        st.runs += 1;
        let run_tag = format!("{}.r{}", job.job_id, st.runs);
        let job_dir = PathBuf::from("intermediate").join(&job.job_id).join(format!("run-{}", st.runs));
        let abs_job_dir = self.config.work_dir.join(&job_dir);
        if abs_job_dir.exists() {
            std::fs::remove_dir_all(&abs_job_dir).ctx(|| format!("clearing {}", abs_job_dir.display()))?;
        }
        let splits: Vec<PathBuf> = job.input_splits.iter().map(|p| self.relative(p)).collect();

        let base = |task: &str, attempt: u32, kind: TaskKind, out_suffix: &str| TaskDescriptor {
            job_id: job.job_id.clone(),
            task_id: format!("{run_tag}.{task}"),
            attempt,
            kind,
            map_fn: job.map_fn.clone(),
            reduce_fn: job.reduce_fn.clone(),
            partitions,
            output: job_dir.join(task).join(format!("attempt-{attempt}{out_suffix}")),
            params: job.params.clone(),
        };

        let map_ids = (0..splits.len()).map(|i| format!("{run_tag}.{}", map_task_id(i))).collect();
        let mut phase = Phase { job_id: &job.job_id, sched: Scheduler::new(map_ids) };
        let map_outputs = self.run_phase(&mut st, &mut phase, &|i, attempt| {
            base(&map_task_id(i), attempt, TaskKind::Map { index: i, split: splits[i].clone() }, "")
        })?;

        let reduce_ids = (0..partitions).map(|r| format!("{run_tag}.{}", reduce_task_id(r))).collect();
        let mut phase = Phase { job_id: &job.job_id, sched: Scheduler::new(reduce_ids) };
        let reduce_outputs = self.run_phase(&mut st, &mut phase, &|r, attempt| {
            let kind = TaskKind::Reduce { partition: r, inputs: map_outputs.clone() };
            base(&reduce_task_id(r), attempt, kind, ".out")
        })?;
        drop(st);

        let mut records = Vec::new();
        for out in reduce_outputs {
            let path = self.config.work_dir.join(out);
            let bytes = std::fs::read(&path).ctx(|| format!("reading {}", path.display()))?;
            records.extend(decode_records(&bytes)?);
        }
        // keys are unique across partitions, so this is the serial order
        records.sort_by(|a, b| a.0.cmp(&b.0));
        let result = self.config.work_dir.join("output").join(&job.job_id).join("result");
        write_atomic(&result, &encode_records(&records))?;
        Ok(records)
    }

    /// Paths inside the work dir travel relative to it.
    fn relative(&self, p: &Path) -> PathBuf {
        p.strip_prefix(&self.config.work_dir).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf())
    }
}

impl Drop for Cluster {
    fn drop(&mut self) {
        self.shutdown();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i}")).collect()
    }

    #[test]
    fn accepts_only_current_attempt_once() {
        let mut s = Scheduler::new(ids(1));
        let (_, id, attempt) = s.next().unwrap();
        assert_eq!(attempt, 1);
        assert!(s.requeue(&id, 1));
        // the timed-out attempt finishing late is discarded
        assert!(!s.accept(&id, 1, "old".into()));
        let (_, _, attempt) = s.next().unwrap();
        assert_eq!(attempt, 2);
        assert!(s.accept(&id, 2, "new".into()));
        // duplicate delivery of the winning result is discarded too
        assert!(!s.accept(&id, 2, "dup".into()));
        assert_eq!(s.outputs().unwrap(), vec![PathBuf::from("new")]);
    }

    #[test]
    fn pending_task_cannot_be_accepted() {
        let mut s = Scheduler::new(ids(2));
        assert!(!s.accept("t1", 1, "x".into()));
        assert!(!s.accept("nope", 1, "x".into()));
        assert!(s.outputs().is_none());
    }

    #[test]
    fn failures_count_per_task() {
        let mut s = Scheduler::new(ids(1));
        for expected in 1..=3 {
            let (_, id, attempt) = s.next().unwrap();
            assert_eq!(s.fail(&id, attempt), FailureOutcome::Retried { failures: expected });
            assert_eq!(s.fail(&id, attempt), FailureOutcome::Stale);
        }
    }

    #[test]
    fn queue_preserves_task_order() {
        let mut s = Scheduler::new(ids(3));
        let order: Vec<String> = std::iter::from_fn(|| s.next().map(|t| t.1)).collect();
        assert_eq!(order, ids(3));
    }
}
