use std::collections::BTreeMap;

use super::job::{MapFn, ReduceFn};
use super::jobs;
use crate::{Error, Result};

/// Named map and reduce functions. Every process in a cluster builds the
/// same registry, so jobs refer to functions by name only.
///
/// Registered functions must be pure over their file inputs and safe to call
/// from several threads at once.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    maps: BTreeMap<String, MapFn>,
    reduces: BTreeMap<String, ReduceFn>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// The word-count toy plus the two production jobs.
    pub fn standard() -> Self {
        let mut r = Registry::new();
        r.register_map(jobs::WORDCOUNT_MAP, jobs::wordcount_map);
        r.register_reduce(jobs::WORDCOUNT_REDUCE, jobs::wordcount_reduce);
        jobs::register_jobs(&mut r);
        r
    }

    pub fn register_map(&mut self, name: &str, f: MapFn) {
        self.maps.insert(name.to_string(), f);
    }

    pub fn register_reduce(&mut self, name: &str, f: ReduceFn) {
        self.reduces.insert(name.to_string(), f);
    }

    pub fn map_fn(&self, name: &str) -> Result<MapFn> {
        self.maps
            .get(name)
            .copied()
            .ok_or_else(|| Error::Parameter(format!("no map function `{name}` registered")))
    }

    pub fn reduce_fn(&self, name: &str) -> Result<ReduceFn> {
        self.reduces
            .get(name)
            .copied()
            .ok_or_else(|| Error::Parameter(format!("no reduce function `{name}` registered")))
    }
}
