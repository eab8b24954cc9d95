//! Incremental runs and their metrics.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmConfig, Learner};
use crate::stream::{ScenarioSpec, SplitStream, StepBatch};
use crate::{Error, Result};

/// Whether a run used the real stream or a simulated continuation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Real,
    Simulated,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Real => "real",
            Source::Simulated => "simulated",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "real" => Ok(Source::Real),
            "simulated" | "sim" => Ok(Source::Simulated),
            _ => Err(Error::InvalidArgument(alloc::format!("unknown source `{s}`"))),
        }
    }
}

/// Outcome of one incremental run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub dataset: String,
    pub source: Source,
    pub scenario: ScenarioSpec,
    /// `q_1..q_T`, accuracy after each step on all classes seen so far.
    pub step_accuracies: Vec<f64>,
    pub average_incremental_accuracy: f64,
    /// Stored values after each step.
    pub memory_trace: Vec<u64>,
    pub seed: u64,
}

impl RunRecord {
    pub fn total_steps(&self) -> usize {
        self.step_accuracies.len()
    }
}

/// Mean of the per-step accuracies.
pub fn average_incremental_accuracy(q: &[f64]) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::Empty("step accuracies"));
    }
    if let Some(bad) = q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(alloc::format!(
            "step accuracy {bad} outside [0, 1]"
        )));
    }
    Ok(q.iter().sum::<f64>() / q.len() as f64)
}

/// Micro-averaged top-1 accuracy of `learner` over the rows of `tests`.
///
/// Every test label must be a class the learner has seen.
pub fn step_accuracy(learner: &Learner, tests: &[StepBatch]) -> Result<f64> {
    let seen = learner.seen_classes();
    let mut correct = 0usize;
    let mut total = 0usize;
    for batch in tests {
        if batch.dimension() != learner.dimension() {
            return Err(Error::DimensionMismatch {
                expected: learner.dimension(),
                found: batch.dimension(),
            });
        }
        for (x, label) in batch.samples() {
            if !seen.contains(&label) {
                return Err(Error::UnseenClass(label));
            }
            total += 1;
            if learner.predict_one(x) == label {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Empty("test rows"));
    }
    Ok(correct as f64 / total as f64)
}

/// Trains `config` over `stream.train` step by step, measuring accuracy on
/// the cumulative test set after each step.
///
/// Epoch counts of the linear head are resolved for `scenario` unless the
/// config overrides them.
pub fn run_experiment(
    config: &AlgorithmConfig,
    stream: &SplitStream,
    scenario: &ScenarioSpec,
    dataset: &str,
    source: Source,
    seed: u64,
) -> Result<RunRecord> {
    scenario.validate()?;
    if stream.train.len() != scenario.total_steps {
        return Err(Error::InvalidArgument(alloc::format!(
            "stream has {} steps, scenario {} expects {}",
            stream.train.len(),
            scenario,
            scenario.total_steps
        )));
    }
    let mut config = config.clone();
    config.optimizer.resolve_for(scenario);

    let steps = stream.train.steps();
    let tests = stream.test.steps();
    let mut learner = Learner::init(&config, &steps[0], seed)?;
    let mut q = Vec::with_capacity(steps.len());
    let mut memory = Vec::with_capacity(steps.len());
    q.push(step_accuracy(&learner, &tests[..1])?);
    memory.push(learner.memory_footprint());
    for i in 1..steps.len() {
        learner.update(&steps[i])?;
        q.push(step_accuracy(&learner, &tests[..=i])?);
        memory.push(learner.memory_footprint());
    }
    let aa = average_incremental_accuracy(&q)?;
    Ok(RunRecord {
        algorithm: config.display_name(),
        dataset: dataset.into(),
        source,
        scenario: *scenario,
        step_accuracies: q,
        average_incremental_accuracy: aa,
        memory_trace: memory,
        seed,
    })
}
