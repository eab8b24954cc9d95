//! Incremental data model and feature-space stream generation.
//!
//! A [`FeatureStream`] is an ordered list of [`StepBatch`]es whose class sets
//! are pairwise disjoint. Streams come either from a seeded Gaussian
//! [`DomainModel`] ([`draw_stream`]) or from an externally extracted
//! [`LabeledDataset`] ([`split_into_scenario`]). [`simulate_future`] keeps
//! the first step of a real stream and invents the remaining steps from a
//! possibly perturbed copy of the domain.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{ClassId, Error, Result};

/// The incremental protocol: `initial_classes` in step 1, then
/// `classes_per_step` fresh classes in each of the remaining
/// `total_steps - 1` steps, `samples_per_class` training rows per class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub initial_classes: usize,
    pub classes_per_step: usize,
    pub total_steps: usize,
    pub samples_per_class: usize,
}

impl ScenarioSpec {
    pub fn new(
        initial_classes: usize,
        classes_per_step: usize,
        total_steps: usize,
        samples_per_class: usize,
    ) -> Result<Self> {
        let spec = Self {
            initial_classes,
            classes_per_step,
            total_steps,
            samples_per_class,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("initial_classes", self.initial_classes),
            ("classes_per_step", self.classes_per_step),
            ("total_steps", self.total_steps),
            ("samples_per_class", self.samples_per_class),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    pub fn total_classes(&self) -> usize {
        self.initial_classes + (self.total_steps - 1) * self.classes_per_step
    }

    /// Number of classes introduced at 1-based step `step`.
    pub fn classes_in_step(&self, step: usize) -> usize {
        if step == 1 {
            self.initial_classes
        } else {
            self.classes_per_step
        }
    }

    /// Held-out rows per class: `⌈samples_per_class / 5⌉`.
    pub fn test_rows_per_class(&self) -> usize {
        self.samples_per_class.div_ceil(5)
    }

    /// `⌈T/2⌉`, the horizon of the half-stream greedy strategy.
    pub fn half_horizon(&self) -> usize {
        self.total_steps.div_ceil(2)
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}-{}-{}",
            self.initial_classes, self.classes_per_step, self.total_steps, self.samples_per_class
        )
    }
}

impl FromStr for ScenarioSpec {
    type Err = Error;

    /// Parses the `initial-per_step-steps-samples` form produced by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "scenario `{s}` is not of the form initial-per_step-steps-samples"
            )));
        }
        let mut v = [0usize; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("scenario `{s}`: `{p}` is not a count")))?;
        }
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// One increment: the labeled rows of a set of new classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepBatch {
    step_index: usize,
    class_ids: Vec<ClassId>,
    features: Matrix,
    labels: Vec<ClassId>,
}

impl StepBatch {
    /// `class_ids` are stored sorted; every label must be one of them and
    /// every feature must be finite.
    pub fn new(
        step_index: usize,
        mut class_ids: Vec<ClassId>,
        features: Matrix,
        labels: Vec<ClassId>,
    ) -> Result<Self> {
        if step_index == 0 {
            return Err(Error::InvalidArgument("step_index is 1-based".into()));
        }
        class_ids.sort_unstable();
        if let Some(w) = class_ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("class {} listed twice", w[0])));
        }
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                found: labels.len(),
            });
        }
        if let Some(l) = labels.iter().find(|l| class_ids.binary_search(l).is_err()) {
            return Err(Error::UnknownLabel(*l));
        }
        if let Some(row) = features.iter_rows().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { row });
        }
        Ok(Self {
            step_index,
            class_ids,
            features,
            labels,
        })
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn dimension(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows and labels together.
    pub fn samples(&self) -> impl Iterator<Item = (&[f64], ClassId)> + '_ {
        self.features.iter_rows().zip(self.labels.iter().copied())
    }

    /// Row count per class, in `class_ids` order.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; self.class_ids.len()];
        for l in &self.labels {
            let k = self.class_ids.binary_search(l).expect("validated label");
            counts[k] += 1;
        }
        counts
    }

    /// Per-class sample means in `class_ids` order. Classes without rows get
    /// an [`Error::EmptyClass`].
    pub fn class_means(&self) -> Result<Matrix> {
        let d = self.dimension();
        let mut sums = Matrix::zeros(self.class_ids.len(), d);
        let counts = self.class_counts();
        for (row, label) in self.samples() {
            let k = self.class_ids.binary_search(&label).expect("validated label");
            for (s, v) in sums.row_mut(k).iter_mut().zip(row) {
                *s += v;
            }
        }
        for (k, &n) in counts.iter().enumerate() {
            if n == 0 {
                return Err(Error::EmptyClass(self.class_ids[k]));
            }
            for s in sums.row_mut(k) {
                *s /= n as f64;
            }
        }
        Ok(sums)
    }
}

/// Ordered step batches with pairwise disjoint class sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStream {
    dimension: usize,
    steps: Vec<StepBatch>,
}

impl FeatureStream {
    pub fn new(dimension: usize, steps: Vec<StepBatch>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        for (i, step) in steps.iter().enumerate() {
            if step.dimension() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: step.dimension(),
                });
            }
            if step.step_index() != i + 1 {
                return Err(Error::InvalidArgument(format!(
                    "step at position {} carries index {}",
                    i + 1,
                    step.step_index()
                )));
            }
            for &c in step.class_ids() {
                if !seen.insert(c) {
                    return Err(Error::OverlappingSteps(c));
                }
            }
        }
        Ok(Self { dimension, steps })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn steps(&self) -> &[StepBatch] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Checks the stream against a scenario: step count, classes per step
    /// and, when `rows_per_class` is given, the row count of every class.
    pub fn check_shape(&self, spec: &ScenarioSpec, rows_per_class: Option<usize>) -> Result<()> {
        if self.steps.len() != spec.total_steps {
            return Err(Error::InvalidArgument(format!(
                "stream has {} steps, scenario {} expects {}",
                self.steps.len(),
                spec,
                spec.total_steps
            )));
        }
        for step in &self.steps {
            let want = spec.classes_in_step(step.step_index());
            if step.class_ids().len() != want {
                return Err(Error::InvalidArgument(format!(
                    "step {} has {} classes, scenario {} expects {}",
                    step.step_index(),
                    step.class_ids().len(),
                    spec,
                    want
                )));
            }
            if let Some(n) = rows_per_class {
                if let Some(pos) = step.class_counts().iter().position(|&c| c != n) {
                    return Err(Error::InvalidArgument(format!(
                        "class {} of step {} has {} rows, expected {}",
                        step.class_ids()[pos],
                        step.step_index(),
                        step.class_counts()[pos],
                        n
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A training stream together with its held-out test stream (same step and
/// class structure, disjoint rows).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStream {
    pub train: FeatureStream,
    pub test: FeatureStream,
}

impl SplitStream {
    pub fn new(train: FeatureStream, test: FeatureStream) -> Result<Self> {
        if train.len() != test.len() || train.dimension() != test.dimension() {
            return Err(Error::InvalidArgument(
                "train and test streams differ in shape".into(),
            ));
        }
        for (a, b) in train.steps().iter().zip(test.steps()) {
            if a.class_ids() != b.class_ids() {
                return Err(Error::InvalidArgument(format!(
                    "train and test class sets differ at step {}",
                    a.step_index()
                )));
            }
        }
        Ok(Self { train, test })
    }
}

/// Seeded Gaussian feature-space domain.
///
/// Class prototypes are drawn as `center + between · z` and class samples as
/// `prototype + within · z`, with `z` standard normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainModel {
    pub dimension: usize,
    pub prototype_center: Vec<f64>,
    pub between_class_scale: f64,
    pub within_class_scale: f64,
    pub seed: u64,
}

/// Builds a [`DomainModel`]. The prototype center is itself drawn from
/// `N(0, between²·I)` under `seed`, so two domains with different seeds sit
/// in different regions of feature space.
///
/// `within` may be zero (every sample equals its class prototype).
pub fn generate_domain(dimension: usize, between: f64, within: f64, seed: u64) -> Result<DomainModel> {
    if dimension == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if !(between > 0.0) || !between.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "between-class scale must be positive, got {between}"
        )));
    }
    if !(within >= 0.0) || !within.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "within-class scale must be non-negative, got {within}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, CENTER_TAG));
    let prototype_center = (0..dimension)
        .map(|_| between * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(DomainModel {
        dimension,
        prototype_center,
        between_class_scale: between,
        within_class_scale: within,
        seed,
    })
}

const CENTER_TAG: u64 = 0x6365_6e74_6572;
const PERTURB_TAG: u64 = 0x7065_7274_7572_62;

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a combined word
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

impl DomainModel {
    /// Random source for one class of the stream drawn under `stream_seed`.
    /// Each class owns an independent ChaCha stream, so a class's draws do
    /// not depend on the scenario shape.
    fn class_rng(&self, stream_seed: u64, class: ClassId) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, stream_seed));
        rng.set_stream(class as u64);
        rng
    }

    fn draw_prototype(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.prototype_center
            .iter()
            .map(|c| c + self.between_class_scale * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn draw_rows(&self, rng: &mut ChaCha8Rng, prototype: &[f64], rows: usize, out: &mut Matrix) {
        let mut row = alloc::vec![0.0; self.dimension];
        for _ in 0..rows {
            for (r, p) in row.iter_mut().zip(prototype) {
                *r = p + self.within_class_scale * rng.sample::<f64, _>(StandardNormal);
            }
            out.push_row(&row).expect("row has domain dimension");
        }
    }

    /// Moment-matched domain for a labeled batch: the center is the mean of
    /// the class means, the between-class scale their root-mean-square
    /// spread per coordinate, and the within-class scale the pooled
    /// per-coordinate standard deviation.
    pub fn fit(batch: &StepBatch, seed: u64) -> Result<Self> {
        let d = batch.dimension();
        let means = batch.class_means()?;
        let k = means.rows();
        if k < 2 {
            return Err(Error::InvalidArgument(
                "fitting a domain needs at least two classes".into(),
            ));
        }
        let mut center = alloc::vec![0.0; d];
        for row in means.iter_rows() {
            for (c, v) in center.iter_mut().zip(row) {
                *c += v / k as f64;
            }
        }
        let spread: f64 = means
            .iter_rows()
            .flat_map(|row| row.iter().zip(&center).map(|(v, c)| (v - c) * (v - c)))
            .sum::<f64>()
            / (k * d) as f64;
        let mut pooled = 0.0;
        for (row, label) in batch.samples() {
            let mu = means.row(batch.class_ids.binary_search(&label).expect("validated label"));
            pooled += row.iter().zip(mu).map(|(v, m)| (v - m) * (v - m)).sum::<f64>();
        }
        let pooled = pooled / (batch.len() * d) as f64;
        let between = libm::sqrt(spread);
        if !(between > 0.0) {
            return Err(Error::InvalidArgument(
                "class means coincide; between-class scale is zero".into(),
            ));
        }
        Ok(Self {
            dimension: d,
            prototype_center: center,
            between_class_scale: between,
            within_class_scale: libm::sqrt(pooled),
            seed,
        })
    }

    /// Prototype of `class` in the stream drawn under `stream_seed`.
    pub fn prototype(&self, stream_seed: u64, class: ClassId) -> Vec<f64> {
        self.draw_prototype(&mut self.class_rng(stream_seed, class))
    }

    /// `rows` samples of `class` in the stream drawn under `stream_seed`.
    pub fn sample_class(&self, stream_seed: u64, class: ClassId, rows: usize) -> Matrix {
        let mut rng = self.class_rng(stream_seed, class);
        let proto = self.draw_prototype(&mut rng);
        let mut out = Matrix::with_cols(self.dimension);
        self.draw_rows(&mut rng, &proto, rows, &mut out);
        out
    }
}

/// Generator for one class: its prototype offset plus the shared draw order
/// (prototype, training rows, test rows).
struct ClassPlan {
    id: ClassId,
    offset: Option<Vec<f64>>,
}

fn build_streams(
    domain: &DomainModel,
    spec: &ScenarioSpec,
    stream_seed: u64,
    steps: &[Vec<ClassPlan>],
    first_step: Option<(&StepBatch, &StepBatch)>,
) -> Result<SplitStream> {
    let d = domain.dimension;
    let n = spec.samples_per_class;
    let m = spec.test_rows_per_class();
    let mut train_steps = Vec::with_capacity(steps.len() + 1);
    let mut test_steps = Vec::with_capacity(steps.len() + 1);
    if let Some((train, test)) = first_step {
        train_steps.push(train.clone());
        test_steps.push(test.clone());
    }
    for plans in steps {
        let index = train_steps.len() + 1;
        let mut train = Matrix::with_cols(d);
        let mut test = Matrix::with_cols(d);
        let mut train_labels = Vec::new();
        let mut test_labels = Vec::new();
        for plan in plans {
            let mut rng = domain.class_rng(stream_seed, plan.id);
            let mut proto = domain.draw_prototype(&mut rng);
            if let Some(off) = &plan.offset {
                for (p, o) in proto.iter_mut().zip(off) {
                    *p += o;
                }
            }
            domain.draw_rows(&mut rng, &proto, n, &mut train);
            domain.draw_rows(&mut rng, &proto, m, &mut test);
            train_labels.extend(core::iter::repeat_n(plan.id, n));
            test_labels.extend(core::iter::repeat_n(plan.id, m));
        }
        let ids: Vec<ClassId> = plans.iter().map(|p| p.id).collect();
        train_steps.push(StepBatch::new(index, ids.clone(), train, train_labels)?);
        test_steps.push(StepBatch::new(index, ids, test, test_labels)?);
    }
    SplitStream::new(FeatureStream::new(d, train_steps)?, FeatureStream::new(d, test_steps)?)
}

/// Draws a full scenario from `domain`. Class ids are dense and assigned in
/// generation order (`0..total_classes`).
pub fn draw_stream(domain: &DomainModel, spec: &ScenarioSpec, seed: u64) -> Result<SplitStream> {
    spec.validate()?;
    let mut next: ClassId = 0;
    let steps: Vec<Vec<ClassPlan>> = (1..=spec.total_steps)
        .map(|s| {
            (0..spec.classes_in_step(s))
                .map(|_| {
                    let id = next;
                    next += 1;
                    ClassPlan { id, offset: None }
                })
                .collect()
        })
        .collect();
    build_streams(domain, spec, seed, &steps, None)
}

/// Builds a simulated stream that starts with the real first step
/// (`prefix`, `prefix_test`) and continues with `total_steps - 1` invented
/// steps of `classes_per_step` classes each.
///
/// Invented prototypes are true domain draws shifted by
/// `(1 - fidelity) · between · (δ + ε_c)`, where `δ` is one domain-level
/// standard normal vector and `ε_c` a per-class one. With `fidelity = 1`
/// and `seed` equal to the seed of a real [`draw_stream`], the continuation
/// reproduces the real one exactly.
pub fn simulate_future(
    prefix: &StepBatch,
    prefix_test: &StepBatch,
    domain: &DomainModel,
    spec: &ScenarioSpec,
    fidelity: f64,
    seed: u64,
) -> Result<SplitStream> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::InvalidArgument(format!(
            "fidelity must lie in [0, 1], got {fidelity}"
        )));
    }
    if prefix.step_index() != 1 || prefix_test.step_index() != 1 {
        return Err(Error::InvalidArgument("prefix must be step 1".into()));
    }
    if prefix.dimension() != domain.dimension {
        return Err(Error::DimensionMismatch {
            expected: domain.dimension,
            found: prefix.dimension(),
        });
    }
    if prefix.class_ids() != prefix_test.class_ids() {
        return Err(Error::InvalidArgument(
            "prefix train and test class sets differ".into(),
        ));
    }
    let d = domain.dimension;
    let strength = (1.0 - fidelity) * domain.between_class_scale;
    let perturb_seed = mix(mix(domain.seed, seed), PERTURB_TAG);
    let shift = {
        let mut rng = ChaCha8Rng::seed_from_u64(perturb_seed);
        rng.set_stream(u64::MAX);
        standard_normal_vec(&mut rng, d)
    };
    let mut next: ClassId = prefix.class_ids().last().map_or(0, |c| c + 1);
    let steps: Vec<Vec<ClassPlan>> = (2..=spec.total_steps)
        .map(|_| {
            (0..spec.classes_per_step)
                .map(|_| {
                    let id = next;
                    next += 1;
                    let offset = (strength > 0.0).then(|| {
                        let mut rng = ChaCha8Rng::seed_from_u64(perturb_seed);
                        rng.set_stream(id as u64);
                        let eps = standard_normal_vec(&mut rng, d);
                        shift.iter().zip(&eps).map(|(s, e)| strength * (s + e)).collect()
                    });
                    ClassPlan { id, offset }
                })
                .collect()
        })
        .collect();
    build_streams(domain, spec, seed, &steps, Some((prefix, prefix_test)))
}

/// A real stream and its simulated counterpart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamPair {
    pub real: SplitStream,
    pub simulated: SplitStream,
    pub fidelity: f64,
}

impl StreamPair {
    /// Checks that the simulated stream starts with exactly the real first
    /// step and that its later classes avoid the real first-step classes.
    pub fn new(real: SplitStream, simulated: SplitStream, fidelity: f64) -> Result<Self> {
        let (Some(r1), Some(s1)) = (real.train.steps().first(), simulated.train.steps().first()) else {
            return Err(Error::Empty("stream"));
        };
        let same = r1.labels() == s1.labels()
            && r1.class_ids() == s1.class_ids()
            && r1
                .features()
                .as_slice()
                .iter()
                .zip(s1.features().as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && r1.features().rows() == s1.features().rows();
        if !same {
            return Err(Error::InvalidArgument(
                "simulated step 1 differs from the real step 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&fidelity) {
            return Err(Error::InvalidArgument(format!(
                "fidelity must lie in [0, 1], got {fidelity}"
            )));
        }
        // FeatureStream already guarantees disjointness within the simulated
        // stream, which covers overlap with its own (real) first step.
        Ok(Self {
            real,
            simulated,
            fidelity,
        })
    }

    /// Draws the simulated continuation of `real` (see [`simulate_future`]).
    pub fn simulate(
        real: SplitStream,
        domain: &DomainModel,
        spec: &ScenarioSpec,
        fidelity: f64,
        seed: u64,
    ) -> Result<Self> {
        let (Some(p), Some(pt)) = (real.train.steps().first(), real.test.steps().first()) else {
            return Err(Error::Empty("stream"));
        };
        let simulated = simulate_future(p, pt, domain, spec, fidelity, seed)?;
        Self::new(real, simulated, fidelity)
    }
}

/// Per-class feature rows of an externally extracted dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassData {
    pub id: ClassId,
    pub name: String,
    pub features: Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub dimension: usize,
    pub classes: Vec<ClassData>,
}

impl LabeledDataset {
    pub fn total_rows(&self) -> usize {
        self.classes.iter().map(|c| c.features.rows()).sum()
    }

    pub fn class(&self, id: ClassId) -> Option<&ClassData> {
        self.classes.iter().find(|c| c.id == id)
    }
}

/// Shuffles the classes of `dataset` under `seed`, assigns them to steps
/// following `spec`, and splits each class's shuffled rows into
/// `samples_per_class` training rows and `⌈samples_per_class/5⌉` test rows.
pub fn split_into_scenario(dataset: &LabeledDataset, spec: &ScenarioSpec, seed: u64) -> Result<SplitStream> {
    spec.validate()?;
    let needed = spec.total_classes();
    if dataset.classes.len() < needed {
        return Err(Error::Capacity {
            what: "classes".to_string(),
            required: needed,
            available: dataset.classes.len(),
        });
    }
    let n = spec.samples_per_class;
    let m = spec.test_rows_per_class();
    let d = dataset.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dataset.classes.len()).collect();
    order.shuffle(&mut rng);

    let mut train_steps = Vec::new();
    let mut test_steps = Vec::new();
    let mut cursor = 0;
    for step in 1..=spec.total_steps {
        let count = spec.classes_in_step(step);
        let mut train = Matrix::with_cols(d);
        let mut test = Matrix::with_cols(d);
        let mut train_labels = Vec::new();
        let mut test_labels = Vec::new();
        let mut ids = Vec::with_capacity(count);
        for &ci in &order[cursor..cursor + count] {
            let class = &dataset.classes[ci];
            if class.features.cols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: class.features.cols(),
                });
            }
            if class.features.rows() < n + m {
                return Err(Error::Capacity {
                    what: format!("rows in class {}", class.id),
                    required: n + m,
                    available: class.features.rows(),
                });
            }
            let mut rows: Vec<usize> = (0..class.features.rows()).collect();
            rows.shuffle(&mut rng);
            for &r in &rows[..n] {
                train.push_row(class.features.row(r))?;
                train_labels.push(class.id);
            }
            for &r in &rows[n..n + m] {
                test.push_row(class.features.row(r))?;
                test_labels.push(class.id);
            }
            ids.push(class.id);
        }
        cursor += count;
        train_steps.push(StepBatch::new(step, ids.clone(), train, train_labels)?);
        test_steps.push(StepBatch::new(step, ids, test, test_labels)?);
    }
    SplitStream::new(FeatureStream::new(d, train_steps)?, FeatureStream::new(d, test_steps)?)
}
