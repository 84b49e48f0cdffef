use std::fmt::Write as _;

use super::dataset::Dataset;
use super::run::{test_pipeline, train_pipeline, TrainConfig, PHASE_TEST, PHASE_TOTAL};
use crate::mapreduce::{Executor, Registry};
use crate::rotforest::model_to_string;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub executors: Vec<String>,
    /// Phase names in first-seen order.
    pub phases: Vec<String>,
    /// `seconds[e][p]`: median over repeats for executor `e`, phase `p`.
    pub seconds: Vec<Vec<f64>>,
    /// Every executor produced the same model bytes and alarm timeline.
    pub outputs_identical: bool,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => values[n / 2],
        _ => (values[n / 2 - 1] + values[n / 2]) / 2.0,
    }
}

/// Train on `train` and test on `stream` with every executor, `repeats`
/// times each; report median wall time per phase.
pub fn benchmark(
    train: &Dataset,
    stream: &Dataset,
    cfg: &TrainConfig,
    executors: &[Executor<'_>],
    repeats: usize,
    registry: &Registry,
) -> Result<BenchReport> {
    if repeats == 0 || executors.is_empty() {
        return Err(Error::Parameter("benchmark needs at least one executor and one repeat".into()));
    }
    let mut phases: Vec<String> = Vec::new();
    let mut seconds: Vec<Vec<f64>> = Vec::new();
    let mut reference: Option<(String, String)> = None;
    let mut outputs_identical = true;
    let mut labels = Vec::new();
    for executor in executors {
        labels.push(executor.label());
        let mut samples: Vec<Vec<f64>> = Vec::new();
        for _ in 0..repeats {
            let (model, _, train_report) = train_pipeline(train, cfg, executor, registry)?;
            let (timeline, test_report) =
                test_pipeline(&model, &stream.recordings, &cfg.features, &cfg.work_dir, executor, registry)?;
            let outputs = (model_to_string(&model), timeline.to_csv());
            match &reference {
                None => reference = Some(outputs),
                Some(r) => outputs_identical &= *r == outputs,
            }
            for (phase, s) in train_report.phases.iter().chain(&test_report.phases) {
                let p = match phases.iter().position(|x| x == phase) {
                    Some(p) => p,
                    None => {
                        phases.push(phase.clone());
                        phases.len() - 1
                    }
                };
                if samples.len() <= p {
                    samples.resize(p + 1, Vec::new());
                }
                samples[p].push(*s);
            }
        }
        seconds.push(samples.iter_mut().map(|v| median(v)).collect());
    }
    for row in &mut seconds {
        row.resize(phases.len(), f64::NAN);
    }
    Ok(BenchReport { executors: labels, phases, seconds, outputs_identical })
}

impl BenchReport {
    pub fn get(&self, executor: usize, phase: &str) -> Option<f64> {
        let p = self.phases.iter().position(|x| x == phase)?;
        self.seconds.get(executor)?.get(p).copied()
    }

    /// `phase,executor,seconds`, medians.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,executor,seconds\n");
        for (e, label) in self.executors.iter().enumerate() {
            for (p, phase) in self.phases.iter().enumerate() {
                writeln!(out, "{phase},{label},{:.6}", self.seconds[e][p]).unwrap();
            }
        }
        out
    }

    /// Phases down, executors across, then total and test time of each
    /// executor relative to the first.
    pub fn to_table(&self) -> String {
        let label_w = self.phases.iter().map(String::len).max().unwrap_or(0).max(16);
        let col_w = self.executors.iter().map(String::len).max().unwrap_or(0).max(10);
        let mut out = format!("{:<label_w$}", "phase (median s)");
        for e in &self.executors {
            write!(out, "  {e:>col_w$}").unwrap();
        }
        out.push('\n');
        for (p, phase) in self.phases.iter().enumerate() {
            write!(out, "{phase:<label_w$}").unwrap();
            for row in &self.seconds {
                write!(out, "  {:>col_w$.3}", row[p]).unwrap();
            }
            out.push('\n');
        }
        for phase in [PHASE_TOTAL, PHASE_TEST] {
            let Some(base) = self.get(0, phase) else { continue };
            write!(out, "{:<label_w$}", format!("{phase} ratio")).unwrap();
            for e in 0..self.executors.len() {
                let r = self.get(e, phase).map_or(f64::NAN, |s| s / base);
                write!(out, "  {r:>col_w$.3}").unwrap();
            }
            out.push('\n');
        }
        writeln!(out, "outputs identical across executors: {}", self.outputs_identical).unwrap();
        out
    }
}
