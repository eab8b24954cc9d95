//! Experiment grid: every (source, scenario, algorithm, seed) cell is run
//! on the real stream and on its simulated continuation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cilrec_core::algorithms::AlgorithmConfig;
use cilrec_core::eval::{run_experiment, RunRecord, Source};
use cilrec_core::stream::{
    draw_stream, generate_domain, simulate_future, split_into_scenario, DomainModel, LabeledDataset, ScenarioSpec,
    StreamPair,
};
use log::{error, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SourceConfig};
use crate::report;
use crate::store::FeatureStore;

/// Offset between the seed of a real stream and the seed of its simulated
/// continuation. A simulated stream drawn with the real seed at fidelity 1
/// would replay the real stream exactly.
pub const SIMULATION_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn simulation_seed(seed: u64) -> u64 {
    seed.wrapping_add(SIMULATION_SEED_OFFSET)
}

/// The grid layout, written to `grid.json` so that reports can be rebuilt
/// from an output directory alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPlan {
    pub datasets: Vec<String>,
    pub scenarios: Vec<ScenarioSpec>,
    pub candidates: Vec<String>,
    pub seeds: Vec<u64>,
    pub strategies: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub dataset: usize,
    pub scenario: usize,
    pub algorithm: usize,
    pub seed: u64,
    pub source: Source,
}

impl GridPlan {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            datasets: cfg.sources().iter().map(|s| s.name().to_string()).collect(),
            scenarios: cfg.scenarios.clone(),
            candidates: cfg.candidate_names(),
            seeds: cfg.seeds.clone(),
            strategies: cfg.strategies.iter().map(ToString::to_string).collect(),
        }
    }

    pub fn load(out: &Path) -> anyhow::Result<Self> {
        let path = out.join("grid.json");
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Cells in a fixed order: dataset, scenario, algorithm, seed, source.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for dataset in 0..self.datasets.len() {
            for scenario in 0..self.scenarios.len() {
                for algorithm in 0..self.candidates.len() {
                    for &seed in &self.seeds {
                        for source in [Source::Real, Source::Simulated] {
                            out.push(Cell {
                                dataset,
                                scenario,
                                algorithm,
                                seed,
                                source,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// File name stem of a cell's record files.
    pub fn stem(&self, cell: &Cell) -> String {
        format!(
            "{}__{}__{}__{}__s{}",
            sanitize(&self.datasets[cell.dataset]),
            self.scenarios[cell.scenario],
            sanitize(&self.candidates[cell.algorithm]),
            cell.source,
            cell.seed
        )
    }

    pub fn describe(&self, cell: &Cell) -> String {
        format!(
            "{} {} {} {} seed {}",
            self.datasets[cell.dataset], self.scenarios[cell.scenario], self.candidates[cell.algorithm], cell.source, cell.seed
        )
    }
}

/// Keeps ASCII letters, digits, `-`, `_` and `.`; everything else becomes `_`.
pub fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

pub fn records_dir(out: &Path) -> PathBuf {
    out.join("records")
}

/// Reads a finished cell; `None` if it was never completed.
pub fn read_record(out: &Path, plan: &GridPlan, cell: &Cell) -> Option<RunRecord> {
    let path = records_dir(out).join(format!("{}.json", plan.stem(cell)));
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Writes the per-step CSV, then the JSON summary. The summary is renamed
/// into place last, so its presence marks the cell as finished.
pub fn write_record(out: &Path, plan: &GridPlan, cell: &Cell, record: &RunRecord) -> anyhow::Result<()> {
    let dir = records_dir(out);
    let stem = plan.stem(cell);
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    w.write_record(["dataset", "scenario", "algorithm", "seed", "step", "q"])?;
    for (i, q) in record.step_accuracies.iter().enumerate() {
        w.write_record([
            record.dataset.clone(),
            record.scenario.to_string(),
            record.algorithm.clone(),
            record.seed.to_string(),
            (i + 1).to_string(),
            format!("{q:.6}"),
        ])?;
    }
    w.flush()?;
    let tmp = dir.join(format!("{stem}.json.partial"));
    let json = serde_json::to_string_pretty(record)? + "\n";
    fs::write(&tmp, json).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, dir.join(format!("{stem}.json")))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub cell: String,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GridReport {
    pub cells: usize,
    pub computed: usize,
    pub resumed: usize,
    pub failures: Vec<Failure>,
}

impl GridReport {
    pub fn complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A loaded data source.
pub enum Prepared {
    Domain(DomainModel),
    Dataset(LabeledDataset),
}

pub fn prepare(source: &SourceConfig<'_>) -> anyhow::Result<Prepared> {
    Ok(match source {
        SourceConfig::Domain(d) => Prepared::Domain(generate_domain(d.dimension, d.between, d.within, d.seed)?),
        SourceConfig::Dataset(d) => Prepared::Dataset(FeatureStore::open(&d.manifest)?.load_all()?),
    })
}

/// Real stream and simulated continuation for one (source, scenario, seed).
pub fn build_pair(source: &Prepared, spec: &ScenarioSpec, seed: u64, fidelity: f64) -> anyhow::Result<StreamPair> {
    let sim_seed = simulation_seed(seed);
    Ok(match source {
        Prepared::Domain(domain) => {
            let real = draw_stream(domain, spec, seed)?;
            StreamPair::simulate(real, domain, spec, fidelity, sim_seed)?
        }
        Prepared::Dataset(data) => {
            let real = split_into_scenario(data, spec, seed)?;
            let (train, test) = (&real.train.steps()[0], &real.test.steps()[0]);
            // The simulator only sees the first step, as a user would.
            let domain = DomainModel::fit(train, seed)?;
            let simulated = simulate_future(train, test, &domain, spec, fidelity, sim_seed)?;
            StreamPair::new(real, simulated, fidelity)?
        }
    })
}

/// Streams for every (source, scenario, seed) of `cfg`, keyed by indices.
pub fn build_pairs(cfg: &RunConfig) -> anyhow::Result<Vec<((usize, usize, u64), StreamPair)>> {
    let mut out = Vec::new();
    for (di, source) in cfg.sources().iter().enumerate() {
        let prepared = prepare(source).with_context(|| format!("loading {}", source.name()))?;
        for (si, spec) in cfg.scenarios.iter().enumerate() {
            for &seed in &cfg.seeds {
                let pair = build_pair(&prepared, spec, seed, cfg.fidelity)
                    .with_context(|| format!("{} {spec} seed {seed}", source.name()))?;
                out.push(((di, si, seed), pair));
            }
        }
    }
    Ok(out)
}

pub struct GridOptions {
    pub workers: usize,
}

pub fn thread_pool(workers: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?)
}

/// Runs every unfinished cell of `cfg`, then writes recommendations and
/// aggregates when the grid is complete. Cells whose summary already exists
/// under `cfg.out` are reused.
pub fn run_grid(cfg: &RunConfig, opts: &GridOptions) -> anyhow::Result<GridReport> {
    let out = &cfg.out;
    fs::create_dir_all(records_dir(out)).with_context(|| format!("creating {}", out.display()))?;
    let plan = GridPlan::from_config(cfg);
    if let Ok(previous) = GridPlan::load(out) {
        let same_cells = GridPlan {
            strategies: plan.strategies.clone(),
            ..previous
        } == plan;
        if !same_cells {
            bail!(
                "{} holds a different grid; choose another output directory",
                out.display()
            );
        }
    }
    fs::write(out.join("grid.json"), serde_json::to_string_pretty(&plan)? + "\n")?;

    let cells = plan.cells();
    let pending: Vec<&Cell> = cells.iter().filter(|c| read_record(out, &plan, c).is_none()).collect();
    let resumed = cells.len() - pending.len();
    if resumed > 0 {
        info!("resuming: {resumed} of {} cells already finished", cells.len());
    }
    let algorithms = cfg.effective_algorithms();
    let sources = cfg.sources();
    let pool = thread_pool(opts.workers)?;

    let failures: Vec<Failure> = pool.install(|| {
        // Sources are loaded once; a failing source fails all of its cells.
        let prepared: Vec<anyhow::Result<Prepared>> = sources
            .par_iter()
            .map(|s| prepare(s).with_context(|| format!("loading {}", s.name())))
            .collect();
        let mut groups: BTreeMap<(usize, usize, u64), Vec<&Cell>> = BTreeMap::new();
        for c in &pending {
            groups.entry((c.dataset, c.scenario, c.seed)).or_default().push(c);
        }
        let keys: Vec<(usize, usize, u64)> = groups.keys().copied().collect();
        let pairs: BTreeMap<(usize, usize, u64), Result<StreamPair, String>> = keys
            .par_iter()
            .map(|&(d, s, seed)| {
                let pair = match &prepared[d] {
                    Ok(p) => build_pair(p, &cfg.scenarios[s], seed, cfg.fidelity).map_err(|e| format!("{e:#}")),
                    Err(e) => Err(format!("{e:#}")),
                };
                ((d, s, seed), pair)
            })
            .collect();
        let results: Vec<Option<Failure>> = pending
            .par_iter()
            .map(|cell| {
                let outcome = match &pairs[&(cell.dataset, cell.scenario, cell.seed)] {
                    Ok(pair) => run_cell(out, &plan, cell, &algorithms[cell.algorithm], pair),
                    Err(e) => Err(anyhow::anyhow!("stream construction failed: {e}")),
                };
                match outcome {
                    Ok(()) => {
                        info!("finished {}", plan.describe(cell));
                        None
                    }
                    Err(e) => {
                        error!("{} failed: {e:#}", plan.describe(cell));
                        Some(Failure {
                            cell: plan.describe(cell),
                            error: format!("{e:#}"),
                        })
                    }
                }
            })
            .collect();
        results.into_iter().flatten().collect()
    });

    fs::write(out.join("failures.json"), serde_json::to_string_pretty(&failures)? + "\n")?;
    let report = GridReport {
        cells: cells.len(),
        computed: pending.len() - failures.len(),
        resumed,
        failures,
    };
    if report.complete() {
        report::write_reports(out, &plan, &cfg.strategies)?;
    } else {
        warn!(
            "{} of {} cells failed; recommendations and aggregates were not written",
            report.failures.len(),
            report.cells
        );
    }
    Ok(report)
}

fn run_cell(out: &Path, plan: &GridPlan, cell: &Cell, alg: &AlgorithmConfig, pair: &StreamPair) -> anyhow::Result<()> {
    let stream = match cell.source {
        Source::Real => &pair.real,
        Source::Simulated => &pair.simulated,
    };
    let spec = &plan.scenarios[cell.scenario];
    let record = run_experiment(alg, stream, spec, &plan.datasets[cell.dataset], cell.source, cell.seed)?;
    write_record(out, plan, cell, &record)
}
