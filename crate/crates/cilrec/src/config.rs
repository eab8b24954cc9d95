//! Run configuration: TOML (or JSON for `.json` files) with every problem
//! reported against its key path.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use cilrec_core::algorithms::AlgorithmConfig;
use cilrec_core::recommend::Strategy;
use cilrec_core::stream::ScenarioSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::store::FeatureStore;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    Parse,
    Unknown,
    Missing,
    Range,
    DanglingPath,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::Parse => "parse error",
            Problem::Unknown => "unknown key",
            Problem::Missing => "missing key",
            Problem::Range => "out of range",
            Problem::DanglingPath => "dangling path",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    /// Dotted key path such as `scenarios[0].samples_per_class`; empty for
    /// the document root.
    pub path: String,
    pub problem: Problem,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "<root>" } else { &self.path };
        write!(f, "{path}: {}: {}", self.problem, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {} problem(s)\n{}", file.display(), diagnostics.len(), render(diagnostics))]
    Invalid { file: PathBuf, diagnostics: Vec<Diagnostic> },
}

impl ConfigError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ConfigError::Io { .. } => &[],
            ConfigError::Invalid { diagnostics, .. } => diagnostics,
        }
    }
}

fn render(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub name: String,
    pub dimension: usize,
    #[serde(default = "default_between")]
    pub between: f64,
    #[serde(default = "default_within")]
    pub within: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Strict mirror of [`ScenarioSpec`] so that misspelled keys are reported.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioEntry {
    initial_classes: usize,
    classes_per_step: usize,
    total_steps: usize,
    samples_per_class: usize,
}

impl From<ScenarioEntry> for ScenarioSpec {
    fn from(e: ScenarioEntry) -> Self {
        ScenarioSpec {
            initial_classes: e.initial_classes,
            classes_per_step: e.classes_per_step,
            total_steps: e.total_steps,
            samples_per_class: e.samples_per_class,
        }
    }
}

fn default_between() -> f64 {
    1.0
}

fn default_within() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    /// Feature-store manifest; relative paths are resolved against the
    /// directory of the config file.
    pub manifest: PathBuf,
}

/// A validated run configuration. Paths are absolute or relative to the
/// working directory after [`RunConfig::load`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Multiplies every algorithm's own `optimizer.epoch_scale`.
    pub epoch_scale: f64,
    /// Quality of the simulated continuation, in `[0, 1]`.
    pub fidelity: f64,
    #[serde(serialize_with = "strategies_as_strings")]
    pub strategies: Vec<Strategy>,
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub domains: Vec<DomainConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub datasets: Vec<DatasetConfig>,
    pub algorithms: Vec<AlgorithmConfig>,
}

fn strategies_as_strings<S: serde::Serializer>(v: &[Strategy], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(ToString::to_string))
}

const KEYS: [&str; 10] = [
    "out",
    "seeds",
    "workers",
    "epoch_scale",
    "fidelity",
    "strategies",
    "scenarios",
    "domains",
    "datasets",
    "algorithms",
];

/// Data sources of a run, in declaration order: domains, then datasets.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceConfig<'a> {
    Domain(&'a DomainConfig),
    Dataset(&'a DatasetConfig),
}

impl SourceConfig<'_> {
    pub fn name(&self) -> &str {
        match self {
            SourceConfig::Domain(d) => &d.name,
            SourceConfig::Dataset(d) => &d.name,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parent = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let base = std::path::absolute(parent).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, json, &base).map_err(|diagnostics| ConfigError::Invalid {
            file: path.to_path_buf(),
            diagnostics,
        })
    }

    /// Parses and validates `text`, resolving relative paths against `base`.
    pub fn parse(text: &str, json: bool, base: &Path) -> Result<Self, Vec<Diagnostic>> {
        let root: Value = if json {
            serde_json::from_str(text).map_err(|e| vec![diag("", Problem::Parse, e.to_string())])?
        } else {
            let t: toml::Table = toml::from_str(text).map_err(|e| vec![diag("", Problem::Parse, e.to_string())])?;
            serde_json::to_value(t).map_err(|e| vec![diag("", Problem::Parse, e.to_string())])?
        };
        let Value::Object(root) = root else {
            return Err(vec![diag("", Problem::Parse, "top level must be a table".into())]);
        };
        let mut errs = Vec::new();
        for key in root.keys() {
            if !KEYS.contains(&key.as_str()) {
                errs.push(diag(key, Problem::Unknown, format!("expected one of {}", KEYS.join(", "))));
            }
        }
        let out: PathBuf = field(&root, "out", &mut errs).unwrap_or_else(|| PathBuf::from("out"));
        let seeds: Vec<u64> = list(&root, "seeds", &mut errs).unwrap_or_default();
        let workers: Option<usize> = field(&root, "workers", &mut errs);
        let epoch_scale: f64 = field(&root, "epoch_scale", &mut errs).unwrap_or(1.0);
        let fidelity: f64 = field(&root, "fidelity", &mut errs).unwrap_or(1.0);
        let strategy_text: Option<Vec<String>> = list(&root, "strategies", &mut errs);
        let scenarios: Vec<ScenarioSpec> = list::<ScenarioEntry>(&root, "scenarios", &mut errs)
            .unwrap_or_default()
            .into_iter()
            .map(ScenarioSpec::from)
            .collect();
        let domains: Vec<DomainConfig> = list(&root, "domains", &mut errs).unwrap_or_default();
        let datasets: Vec<DatasetConfig> = list(&root, "datasets", &mut errs).unwrap_or_default();
        let algorithms: Vec<AlgorithmConfig> = list(&root, "algorithms", &mut errs).unwrap_or_default();

        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let mut strategies = Vec::new();
        if let Some(texts) = &strategy_text {
            for (i, s) in texts.iter().enumerate() {
                match s.parse::<Strategy>() {
                    Ok(st) => strategies.push(st),
                    Err(e) => errs.push(diag(&format!("strategies[{i}]"), Problem::Parse, e.to_string())),
                }
            }
        }
        let mut cfg = RunConfig {
            out: resolve(&out),
            seeds,
            workers,
            epoch_scale,
            fidelity,
            strategies,
            scenarios,
            domains,
            datasets: datasets
                .into_iter()
                .map(|d| DatasetConfig {
                    manifest: resolve(&d.manifest),
                    ..d
                })
                .collect(),
            algorithms,
        };
        if strategy_text.is_none() {
            cfg.strategies = cfg.default_strategies();
        }
        // Type errors make range checks on the same keys meaningless.
        if errs.is_empty() {
            errs.extend(cfg.violations());
        }
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(errs)
        }
    }

    /// Full and half horizon, plus `t = 3` (capped by the shortest
    /// scenario) for the truncated and pruning strategies.
    pub fn default_strategies(&self) -> Vec<Strategy> {
        let shortest = self.scenarios.iter().map(|s| s.total_steps).min().unwrap_or(3);
        let t = shortest.clamp(1, 3);
        vec![
            Strategy::GreedyFull,
            Strategy::GreedyHalf,
            Strategy::TGreedy { t },
            Strategy::ExplorePrune { t, t_max: None },
        ]
    }

    pub fn violations(&self) -> Vec<Diagnostic> {
        let mut errs = Vec::new();
        let mut range = |path: String, msg: &str| errs.push(diag(&path, Problem::Range, msg.to_string()));
        if self.seeds.is_empty() {
            range("seeds".into(), "at least one seed is required");
        }
        let mut seen = BTreeSet::new();
        for (i, s) in self.seeds.iter().enumerate() {
            if *s > i64::MAX as u64 {
                range(format!("seeds[{i}]"), "must fit in a signed 64-bit integer");
            }
            if !seen.insert(*s) {
                range(format!("seeds[{i}]"), "duplicate seed");
            }
        }
        if self.workers == Some(0) {
            range("workers".into(), "must be at least 1");
        }
        if !(self.epoch_scale > 0.0 && self.epoch_scale.is_finite()) {
            range("epoch_scale".into(), "must be a positive number");
        }
        if !(0.0..=1.0).contains(&self.fidelity) {
            range("fidelity".into(), "must lie in [0, 1]");
        }
        if self.scenarios.is_empty() {
            range("scenarios".into(), "at least one scenario is required");
        }
        for (i, s) in self.scenarios.iter().enumerate() {
            for (key, v) in [
                ("initial_classes", s.initial_classes),
                ("classes_per_step", s.classes_per_step),
                ("total_steps", s.total_steps),
                ("samples_per_class", s.samples_per_class),
            ] {
                if v == 0 {
                    range(format!("scenarios[{i}].{key}"), "must be at least 1");
                }
            }
            if self.scenarios[..i].contains(s) {
                range(format!("scenarios[{i}]"), "duplicate scenario");
            }
        }
        let shortest = self.scenarios.iter().map(|s| s.total_steps).filter(|t| *t > 0).min();
        for (i, st) in self.strategies.iter().enumerate() {
            let (t, m) = match st {
                Strategy::TGreedy { t } => (*t, None),
                Strategy::ExplorePrune { t, t_max } => (*t, *t_max),
                _ => continue,
            };
            let path = format!("strategies[{i}]");
            if t == 0 {
                range(path.clone(), "t must be at least 1");
            }
            if m.is_some_and(|m| m < t) {
                range(path.clone(), "t_max must be at least t");
            }
            if let Some(short) = shortest {
                if t.max(m.unwrap_or(0)) > short {
                    range(path, &format!("horizon exceeds the shortest scenario ({short} steps)"));
                }
            }
        }
        if self.strategies.is_empty() {
            range("strategies".into(), "at least one strategy is required");
        }
        if self.domains.is_empty() && self.datasets.is_empty() {
            range("domains".into(), "at least one domain or dataset is required");
        }
        let mut names = BTreeSet::new();
        for (i, d) in self.domains.iter().enumerate() {
            let p = |k: &str| format!("domains[{i}].{k}");
            if d.dimension == 0 {
                range(p("dimension"), "must be at least 1");
            }
            if !(d.between > 0.0 && d.between.is_finite()) {
                range(p("between"), "must be a positive number");
            }
            if !(d.within >= 0.0 && d.within.is_finite()) {
                range(p("within"), "must be a non-negative number");
            }
            if d.seed > i64::MAX as u64 {
                range(p("seed"), "must fit in a signed 64-bit integer");
            }
            if d.name.is_empty() || !names.insert(d.name.clone()) {
                range(p("name"), "must be non-empty and unique among domains and datasets");
            }
        }
        let mut dangling = Vec::new();
        for (i, d) in self.datasets.iter().enumerate() {
            if d.name.is_empty() || !names.insert(d.name.clone()) {
                range(format!("datasets[{i}].name"), "must be non-empty and unique among domains and datasets");
            }
            if !d.manifest.is_file() {
                dangling.push(diag(
                    &format!("datasets[{i}].manifest"),
                    Problem::DanglingPath,
                    format!("{} does not exist", d.manifest.display()),
                ));
            } else if let Err(e) = FeatureStore::open(&d.manifest) {
                dangling.push(diag(&format!("datasets[{i}].manifest"), Problem::Parse, e.to_string()));
            }
        }
        if self.algorithms.is_empty() {
            range("algorithms".into(), "at least one algorithm is required");
        }
        let mut algs = BTreeSet::new();
        for (i, a) in self.algorithms.iter().enumerate() {
            for (key, msg) in a.violations() {
                range(format!("algorithms[{i}].{key}"), &msg);
            }
            if !algs.insert(a.display_name()) {
                range(format!("algorithms[{i}].name"), "algorithm names must be unique; set `name` to tell variants apart");
            }
        }
        errs.extend(dangling);
        errs
    }

    pub fn sources(&self) -> Vec<SourceConfig<'_>> {
        self.domains
            .iter()
            .map(SourceConfig::Domain)
            .chain(self.datasets.iter().map(SourceConfig::Dataset))
            .collect()
    }

    pub fn candidate_names(&self) -> Vec<String> {
        self.algorithms.iter().map(AlgorithmConfig::display_name).collect()
    }

    /// Algorithm settings with the run-level epoch multiplier applied.
    pub fn effective_algorithms(&self) -> Vec<AlgorithmConfig> {
        self.algorithms
            .iter()
            .map(|a| {
                let mut a = a.clone();
                a.optimizer.epoch_scale *= self.epoch_scale;
                a
            })
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("validated configs serialize")
    }
}

fn diag(path: &str, problem: Problem, message: String) -> Diagnostic {
    Diagnostic {
        path: path.to_string(),
        problem,
        message,
    }
}

fn join(prefix: &str, inner: &serde_path_to_error::Path) -> String {
    let inner = inner.to_string();
    if inner == "." || inner.is_empty() {
        prefix.to_string()
    } else if inner.starts_with('[') {
        format!("{prefix}{inner}")
    } else {
        format!("{prefix}.{inner}")
    }
}

fn decode<T: DeserializeOwned>(v: &Value, path: &str, errs: &mut Vec<Diagnostic>) -> Option<T> {
    match serde_path_to_error::deserialize::<_, T>(v) {
        Ok(t) => Some(t),
        Err(e) => {
            let msg = e.inner().to_string();
            let problem = if msg.starts_with("unknown field") {
                Problem::Unknown
            } else if msg.starts_with("missing field") {
                Problem::Missing
            } else if msg.starts_with("invalid value") {
                Problem::Range
            } else {
                Problem::Parse
            };
            errs.push(diag(&join(path, e.path()), problem, msg));
            None
        }
    }
}

fn field<T: DeserializeOwned>(root: &Map<String, Value>, key: &str, errs: &mut Vec<Diagnostic>) -> Option<T> {
    root.get(key).and_then(|v| decode(v, key, errs))
}

/// Decodes an array element by element so that every bad element is
/// reported, not just the first.
fn list<T: DeserializeOwned>(root: &Map<String, Value>, key: &str, errs: &mut Vec<Diagnostic>) -> Option<Vec<T>> {
    let v = root.get(key)?;
    let Value::Array(items) = v else {
        errs.push(diag(key, Problem::Parse, "expected an array".into()));
        return None;
    };
    let before = errs.len();
    let out: Vec<T> = items
        .iter()
        .enumerate()
        .filter_map(|(i, item)| decode(item, &format!("{key}[{i}]"), errs))
        .collect();
    (errs.len() == before).then_some(out)
}
