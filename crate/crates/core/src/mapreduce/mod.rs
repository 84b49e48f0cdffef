//! A small MapReduce runtime with three interchangeable executors.
//!
//! * [`run_serial`] defines the semantics: map splits in order, group by key
//!   (keys ascending, values in map-task then emission order), reduce each
//!   key.
//! * [`run_threaded`] spreads the same calls over a thread pool.
//! * [`Cluster`] runs them on worker processes over TCP, sharing a work
//!   directory, and survives worker loss by re-executing tasks.
//!
//! For a given job all three produce byte-identical [`encode_records`]
//! output.

mod job;
pub mod jobs;
mod local;
mod master;
pub mod protocol;
mod registry;
mod worker;

pub use job::{decode_records, encode_records, partition_of, shuffle, Job, MapFn, Params, Record, ReduceFn};
pub use local::{run_serial, run_threaded};
pub use master::{Cluster, ClusterConfig, ClusterStats, FailureOutcome, Scheduler};
pub use registry::Registry;
pub use worker::{execute_task, run_worker, WorkerExit, WorkerOptions, FAULT_EXIT_AFTER_ENV};

use crate::Result;

/// Where a job runs.
#[derive(Clone, Copy)]
pub enum Executor<'a> {
    Serial,
    Threaded(usize),
    Distributed(&'a Cluster),
}

impl Executor<'_> {
    pub fn run(&self, job: &Job, registry: &Registry) -> Result<Vec<Record>> {
        match self {
            Executor::Serial => run_serial(job, registry),
            Executor::Threaded(n) => run_threaded(job, registry, *n),
            Executor::Distributed(cluster) => cluster.run(job, registry),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Executor::Serial => "serial".into(),
            Executor::Threaded(n) => format!("threaded({n})"),
            Executor::Distributed(c) => format!("distributed({})", c.live_workers()),
        }
    }
}
