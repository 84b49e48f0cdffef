use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::job::{shuffle, Job, Record};
use super::Registry;
use crate::{Error, Result};

pub(crate) fn map_task_id(i: usize) -> String {
    format!("map-{i:05}")
}

pub(crate) fn reduce_task_id(i: usize) -> String {
    format!("reduce-{i:05}")
}

fn task_error(job: &Job, task: String, e: Error) -> Error {
    match e {
        e @ Error::Job { .. } => e,
        other => Error::Job { job: job.job_id.clone(), task, message: other.to_string() },
    }
}

/// Reference semantics: map every split in order, shuffle, reduce every key
/// in ascending order. All other executors must match this byte for byte.
pub fn run_serial(job: &Job, registry: &Registry) -> Result<Vec<Record>> {
    job.validate(registry)?;
    let map = registry.map_fn(&job.map_fn)?;
    let reduce = registry.reduce_fn(&job.reduce_fn)?;
    let mut outputs = Vec::with_capacity(job.input_splits.len());
    for (i, split) in job.input_splits.iter().enumerate() {
        outputs.push(map(i, split, &job.params).map_err(|e| task_error(job, map_task_id(i), e))?);
    }
    shuffle(outputs)
        .into_iter()
        .map(|(key, values)| {
            let value = reduce(&key, &values, &job.params)
                .map_err(|e| task_error(job, format!("reduce `{key}`"), e))?;
            Ok((key, value))
        })
        .collect()
}

/// Apply `f` to every item on `threads` scoped threads pulling from a shared
/// index; results keep input order.
pub(crate) fn pool_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Same semantics as [`run_serial`] with map and reduce calls spread over a
/// fixed pool of `threads`.
pub fn run_threaded(job: &Job, registry: &Registry, threads: usize) -> Result<Vec<Record>> {
    if threads == 0 {
        return Err(Error::Parameter("thread count must be at least 1".into()));
    }
    job.validate(registry)?;
    let map = registry.map_fn(&job.map_fn)?;
    let reduce = registry.reduce_fn(&job.reduce_fn)?;
    let outputs = pool_map(&job.input_splits, threads, |i, split| {
        map(i, split, &job.params).map_err(|e| task_error(job, map_task_id(i), e))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let groups: Vec<(String, Vec<Vec<u8>>)> = shuffle(outputs).into_iter().collect();
    pool_map(&groups, threads, |_, (key, values)| {
        let value = reduce(key, values, &job.params).map_err(|e| task_error(job, format!("reduce `{key}`"), e))?;
        Ok((key.clone(), value))
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapreduce::encode_records;

    fn corpus(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
        let texts = ["the cat sat", "on the mat the end", "", "cat cat"];
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let p = dir.join(format!("s{i}.txt"));
                std::fs::write(&p, t).unwrap();
                p
            })
            .collect()
    }

    #[test]
    fn wordcount_serial() {
        let dir = tempfile::tempdir().unwrap();
        let job = Job::new("wc", super::super::jobs::WORDCOUNT_MAP, super::super::jobs::WORDCOUNT_REDUCE, corpus(dir.path()));
        let out = run_serial(&job, &Registry::standard()).unwrap();
        let pretty: Vec<(String, String)> =
            out.into_iter().map(|(k, v)| (k, String::from_utf8(v).unwrap())).collect();
        let want = [("cat", "3"), ("end", "1"), ("mat", "1"), ("on", "1"), ("sat", "1"), ("the", "3")];
        assert_eq!(pretty, want.map(|(k, v)| (k.to_string(), v.to_string())));
    }

    #[test]
    fn threaded_matches_serial() {
        let dir = tempfile::tempdir().unwrap();
        let job = Job::new("wc", super::super::jobs::WORDCOUNT_MAP, super::super::jobs::WORDCOUNT_REDUCE, corpus(dir.path()));
        let reg = Registry::standard();
        let serial = encode_records(&run_serial(&job, &reg).unwrap());
        for threads in [1, 2, 3, 8] {
            assert_eq!(encode_records(&run_threaded(&job, &reg, threads).unwrap()), serial);
        }
    }

    #[test]
    fn missing_split_is_a_job_error() {
        let job = Job::new(
            "wc",
            super::super::jobs::WORDCOUNT_MAP,
            super::super::jobs::WORDCOUNT_REDUCE,
            vec!["/nonexistent/split".into()],
        );
        match run_threaded(&job, &Registry::standard(), 2) {
            Err(Error::Job { task, .. }) => assert_eq!(task, "map-00000"),
            other => panic!("expected job error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_function_rejected() {
        let job = Job::new("wc", "nope", super::super::jobs::WORDCOUNT_REDUCE, vec!["x".into()]);
        assert!(matches!(run_serial(&job, &Registry::standard()), Err(Error::Parameter(_))));
    }
}
