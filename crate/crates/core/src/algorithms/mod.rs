//! The candidate portfolio of feature-space DFCIL learners.
//!
//! Every learner is initialized on step 1, then updated with one batch of
//! new classes at a time. An update only sees the new batch and the
//! learner's own aggregate statistics; earlier batches are never reachable.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::stream::{ScenarioSpec, StepBatch};
use crate::{ClassId, Error, Result};

mod fecam;
mod fetril;
mod linear_bsm;
mod ncm;
mod shrink;
mod slda;
mod svm;

pub use fecam::Fecam;
pub use fetril::{translate_features, Fetril};
pub use linear_bsm::{balanced_logits, LinearBsm};
pub use ncm::Ncm;
pub use shrink::shrink_covariance;
pub use slda::Slda;
pub use svm::{fit_hinge, hinge_objective, train_linear_ovr, LinearModel, SvmParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Ncm,
    Slda,
    Fecam,
    Fetril,
    LinearBsm,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 5] = [
        AlgorithmKind::Ncm,
        AlgorithmKind::Slda,
        AlgorithmKind::Fecam,
        AlgorithmKind::Fetril,
        AlgorithmKind::LinearBsm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Ncm => "NCM",
            AlgorithmKind::Slda => "SLDA",
            AlgorithmKind::Fecam => "FECAM",
            AlgorithmKind::Fetril => "FETRIL",
            AlgorithmKind::LinearBsm => "LINEAR_BSM",
        }
    }

    /// Values stored at inference time with `classes_seen` classes of
    /// dimension `dimension`.
    pub fn memory_footprint(self, dimension: u64, classes_seen: u64) -> u64 {
        let d = dimension;
        let n = classes_seen;
        match self {
            AlgorithmKind::Ncm => d * n,
            AlgorithmKind::Slda | AlgorithmKind::Fecam => d * n + d * d,
            // linear classifiers plus the prototypes used for pseudo-features
            AlgorithmKind::Fetril => (d + 1) * n + d * n,
            AlgorithmKind::LinearBsm => (d + 1) * n,
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let folded: String = s.chars().filter(|c| *c != '_' && *c != '-').collect::<String>();
        match folded.to_ascii_lowercase().as_str() {
            "ncm" => Ok(AlgorithmKind::Ncm),
            "slda" | "dslda" => Ok(AlgorithmKind::Slda),
            "fecam" => Ok(AlgorithmKind::Fecam),
            "fetril" => Ok(AlgorithmKind::Fetril),
            "linearbsm" => Ok(AlgorithmKind::LinearBsm),
            _ => Err(Error::InvalidArgument(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// SGD settings of the linear softmax head.
///
/// The learning rate is multiplied by `decay_factor` after one third and
/// again after two thirds of the epochs of each step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "defaults::learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "defaults::momentum")]
    pub momentum: f64,
    #[serde(default = "defaults::weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::decay_factor")]
    pub decay_factor: f64,
    /// Overrides the scenario-family schedule for step 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_epochs: Option<usize>,
    /// Overrides the scenario-family schedule for steps 2..T.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incremental_epochs: Option<usize>,
    #[serde(default = "defaults::epoch_scale")]
    pub epoch_scale: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: defaults::learning_rate(),
            momentum: defaults::momentum(),
            weight_decay: defaults::weight_decay(),
            batch_size: defaults::batch_size(),
            decay_factor: defaults::decay_factor(),
            initial_epochs: None,
            incremental_epochs: None,
            epoch_scale: defaults::epoch_scale(),
        }
    }
}

impl OptimizerConfig {
    /// `(initial, incremental)` epochs for a scenario.
    ///
    /// Scenarios that start with at least half of all classes train for
    /// 120 then 90 epochs, scenarios with 50 or more steps for 60 then 50,
    /// everything else for 90 then 60. The result is multiplied by
    /// `epoch_scale` and never drops below one epoch.
    pub fn epochs_for(&self, spec: &ScenarioSpec) -> (usize, usize) {
        let (init, inc) = if 2 * spec.initial_classes >= spec.total_classes() {
            (120, 90)
        } else if spec.total_steps >= 50 {
            (60, 50)
        } else {
            (90, 60)
        };
        let scale = |e: usize| ((e as f64 * self.epoch_scale) + 0.5).max(1.0) as usize;
        (
            self.initial_epochs.unwrap_or_else(|| scale(init)),
            self.incremental_epochs.unwrap_or_else(|| scale(inc)),
        )
    }

    /// Freezes the epoch counts for `spec` into the overrides.
    pub fn resolve_for(&mut self, spec: &ScenarioSpec) {
        let (i, n) = self.epochs_for(spec);
        self.initial_epochs = Some(i);
        self.incremental_epochs = Some(n);
    }
}

/// Hyperparameters of one candidate algorithm. Every field but `kind` has a
/// default and can be overridden by key in a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    /// Display name; defaults to the kind's name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "defaults::slda_shrinkage")]
    pub slda_shrinkage: f64,
    #[serde(default = "defaults::fecam_gamma_initial")]
    pub fecam_gamma1_initial: f64,
    #[serde(default = "defaults::fecam_gamma_initial")]
    pub fecam_gamma2_initial: f64,
    #[serde(default)]
    pub fecam_gamma1_incremental: f64,
    #[serde(default)]
    pub fecam_gamma2_incremental: f64,
    #[serde(default = "defaults::svc_regularization")]
    pub svc_regularization: f64,
    #[serde(default = "defaults::svc_tolerance")]
    pub svc_tolerance: f64,
    #[serde(default = "defaults::svc_max_epochs")]
    pub svc_max_epochs: usize,
    #[serde(default = "defaults::bsm_past_fraction")]
    pub bsm_past_fraction: f64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

mod defaults {
    pub fn learning_rate() -> f64 {
        0.1
    }
    pub fn momentum() -> f64 {
        0.9
    }
    pub fn weight_decay() -> f64 {
        1e-4
    }
    pub fn batch_size() -> usize {
        128
    }
    pub fn decay_factor() -> f64 {
        0.1
    }
    pub fn epoch_scale() -> f64 {
        1.0
    }
    pub fn slda_shrinkage() -> f64 {
        1e-4
    }
    pub fn fecam_gamma_initial() -> f64 {
        10.0
    }
    pub fn svc_regularization() -> f64 {
        1.0
    }
    pub fn svc_tolerance() -> f64 {
        1e-4
    }
    pub fn svc_max_epochs() -> usize {
        1000
    }
    pub fn bsm_past_fraction() -> f64 {
        0.03
    }
}

impl AlgorithmConfig {
    pub fn new(kind: AlgorithmKind) -> Self {
        Self {
            kind,
            name: None,
            slda_shrinkage: defaults::slda_shrinkage(),
            fecam_gamma1_initial: defaults::fecam_gamma_initial(),
            fecam_gamma2_initial: defaults::fecam_gamma_initial(),
            fecam_gamma1_incremental: 0.0,
            fecam_gamma2_incremental: 0.0,
            svc_regularization: defaults::svc_regularization(),
            svc_tolerance: defaults::svc_tolerance(),
            svc_max_epochs: defaults::svc_max_epochs(),
            bsm_past_fraction: defaults::bsm_past_fraction(),
            optimizer: OptimizerConfig::default(),
        }
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.name().into())
    }

    /// Range checks; each violation is reported as `(key, message)`.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut check = |ok: bool, key: &'static str, msg: &str| {
            if !ok {
                out.push((key, String::from(msg)));
            }
        };
        check(self.slda_shrinkage >= 0.0 && self.slda_shrinkage <= 1.0, "slda_shrinkage", "must lie in [0, 1]");
        check(self.fecam_gamma1_initial >= 0.0, "fecam_gamma1_initial", "must be non-negative");
        check(self.fecam_gamma2_initial >= 0.0, "fecam_gamma2_initial", "must be non-negative");
        check(self.fecam_gamma1_incremental >= 0.0, "fecam_gamma1_incremental", "must be non-negative");
        check(self.fecam_gamma2_incremental >= 0.0, "fecam_gamma2_incremental", "must be non-negative");
        check(self.svc_regularization > 0.0, "svc_regularization", "must be positive");
        check(self.svc_tolerance > 0.0, "svc_tolerance", "must be positive");
        check(self.svc_max_epochs >= 1, "svc_max_epochs", "must be at least 1");
        check(
            self.bsm_past_fraction > 0.0 && self.bsm_past_fraction <= 1.0,
            "bsm_past_fraction",
            "must lie in (0, 1]",
        );
        let o = &self.optimizer;
        check(o.learning_rate > 0.0, "optimizer.learning_rate", "must be positive");
        check((0.0..1.0).contains(&o.momentum), "optimizer.momentum", "must lie in [0, 1)");
        check(o.weight_decay >= 0.0, "optimizer.weight_decay", "must be non-negative");
        check(o.batch_size >= 1, "optimizer.batch_size", "must be at least 1");
        check(o.decay_factor > 0.0 && o.decay_factor <= 1.0, "optimizer.decay_factor", "must lie in (0, 1]");
        check(o.epoch_scale > 0.0, "optimizer.epoch_scale", "must be positive");
        check(o.initial_epochs != Some(0), "optimizer.initial_epochs", "must be at least 1");
        check(o.incremental_epochs != Some(0), "optimizer.incremental_epochs", "must be at least 1");
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().first() {
            None => Ok(()),
            Some((key, msg)) => Err(Error::InvalidArgument(format!("{key} {msg}"))),
        }
    }

    pub(crate) fn svm_params(&self, seed: u64) -> SvmParams {
        SvmParams {
            regularization: self.svc_regularization,
            tolerance: self.svc_tolerance,
            max_epochs: self.svc_max_epochs,
            seed,
        }
    }
}

/// Class prototypes (per-class means) with sample counts, in the order the
/// classes were learned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prototypes {
    pub ids: Vec<ClassId>,
    pub means: Matrix,
    pub counts: Vec<usize>,
}

impl Prototypes {
    pub fn new(dimension: usize) -> Self {
        Self {
            ids: Vec::new(),
            means: Matrix::with_cols(dimension),
            counts: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.means.cols()
    }

    pub fn position(&self, id: ClassId) -> Option<usize> {
        self.ids.iter().position(|&c| c == id)
    }

    pub fn push(&mut self, id: ClassId, mean: &[f64], count: usize) -> Result<()> {
        self.means.push_row(mean)?;
        self.ids.push(id);
        self.counts.push(count);
        Ok(())
    }

    /// Appends the sample means of every class of `batch`.
    pub fn append_batch(&mut self, batch: &StepBatch) -> Result<()> {
        let means = batch.class_means()?;
        for ((id, mean), n) in batch.class_ids().iter().zip(means.iter_rows()).zip(batch.class_counts()) {
            self.push(*id, mean, n)?;
        }
        Ok(())
    }
}

/// Rejects a batch whose dimension differs, that reuses a learned class, or
/// that lists a class without rows.
pub(crate) fn check_batch(known: &[ClassId], dimension: usize, batch: &StepBatch) -> Result<()> {
    if batch.dimension() != dimension {
        return Err(Error::DimensionMismatch {
            expected: dimension,
            found: batch.dimension(),
        });
    }
    if let Some(c) = batch.class_ids().iter().find(|c| known.contains(c)) {
        return Err(Error::RepeatedClass(*c));
    }
    if let Some(k) = batch.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(batch.class_ids()[k]));
    }
    if batch.is_empty() {
        return Err(Error::Empty("step batch"));
    }
    Ok(())
}

/// Index of the best score. Ties go to the lowest class id; NaN never wins.
pub(crate) fn best_index(ids: &[ClassId], scores: impl IntoIterator<Item = f64>, maximize: bool) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in scores.into_iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        best = match best {
            None => Some((k, s)),
            Some((bk, bs)) => {
                let better = if maximize { s > bs } else { s < bs };
                if better || (s == bs && ids[k] < ids[bk]) {
                    Some((k, s))
                } else {
                    Some((bk, bs))
                }
            }
        };
    }
    best.map_or(0, |(k, _)| k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LearnerState {
    Ncm(Ncm),
    Slda(Slda),
    Fecam(Fecam),
    Fetril(Fetril),
    LinearBsm(LinearBsm),
}

/// One incremental learner: its configuration and its current state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    config: AlgorithmConfig,
    state: LearnerState,
}

impl Learner {
    /// Trains on the first step. `seed` drives the stochastic learners
    /// (solver visiting order, mini-batch shuffling).
    pub fn init(config: &AlgorithmConfig, step1: &StepBatch, seed: u64) -> Result<Self> {
        config.validate()?;
        check_batch(&[], step1.dimension(), step1)?;
        let state = match config.kind {
            AlgorithmKind::Ncm => LearnerState::Ncm(Ncm::init(step1)?),
            AlgorithmKind::Slda => LearnerState::Slda(Slda::init(step1, config.slda_shrinkage)?),
            AlgorithmKind::Fecam => LearnerState::Fecam(Fecam::init(step1, config)?),
            AlgorithmKind::Fetril => LearnerState::Fetril(Fetril::init(step1, config.svm_params(seed))?),
            AlgorithmKind::LinearBsm => LearnerState::LinearBsm(LinearBsm::init(step1, config, seed)?),
        };
        Ok(Self {
            config: config.clone(),
            state,
        })
    }

    /// Learns the new classes of `batch`.
    pub fn update(&mut self, batch: &StepBatch) -> Result<()> {
        check_batch(self.seen_classes(), self.dimension(), batch)?;
        match &mut self.state {
            LearnerState::Ncm(s) => s.update(batch),
            LearnerState::Slda(s) => s.update(batch),
            LearnerState::Fecam(s) => s.update(batch),
            LearnerState::Fetril(s) => s.update(batch),
            LearnerState::LinearBsm(s) => s.update(batch),
        }
    }

    pub fn predict_one(&self, x: &[f64]) -> ClassId {
        match &self.state {
            LearnerState::Ncm(s) => s.predict_one(x),
            LearnerState::Slda(s) => s.predict_one(x),
            LearnerState::Fecam(s) => s.predict_one(x),
            LearnerState::Fetril(s) => s.predict_one(x),
            LearnerState::LinearBsm(s) => s.predict_one(x),
        }
    }

    pub fn predict(&self, features: &Matrix) -> Result<Vec<ClassId>> {
        if self.seen_classes().is_empty() {
            return Err(Error::EmptyState);
        }
        if features.cols() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: features.cols(),
            });
        }
        Ok(features.iter_rows().map(|x| self.predict_one(x)).collect())
    }

    pub fn seen_classes(&self) -> &[ClassId] {
        &self.prototypes().ids
    }

    pub fn prototypes(&self) -> &Prototypes {
        match &self.state {
            LearnerState::Ncm(s) => &s.prototypes,
            LearnerState::Slda(s) => &s.prototypes,
            LearnerState::Fecam(s) => &s.prototypes,
            LearnerState::Fetril(s) => &s.prototypes,
            LearnerState::LinearBsm(s) => &s.prototypes,
        }
    }

    pub fn dimension(&self) -> usize {
        self.prototypes().dimension()
    }

    pub fn kind(&self) -> AlgorithmKind {
        self.config.kind
    }

    pub fn config(&self) -> &AlgorithmConfig {
        &self.config
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn memory_footprint(&self) -> u64 {
        self.config
            .kind
            .memory_footprint(self.dimension() as u64, self.seen_classes().len() as u64)
    }
}
