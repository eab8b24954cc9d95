use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use cilrec::config::RunConfig;
use cilrec::grid::{self, sanitize, GridOptions, GridPlan};
use cilrec::report::{self, Direction};
use cilrec::store::{write_feature_store, FeatureStore};
use cilrec_core::linalg::Matrix;
use cilrec_core::recommend::Strategy;
use cilrec_core::stream::{ClassData, FeatureStream, LabeledDataset};
use clap::{Args, Parser, Subcommand};
use log::{error, info};

#[derive(Parser)]
#[command(name = "cilrec", version, about = "Recommend a data-free class-incremental learning algorithm from simulated streams")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML, or JSON when the file ends in `.json`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for grid cells.
    #[arg(long, global = true, env = "CILREC_WORKERS")]
    workers: Option<usize>,
    /// Multiplies every algorithm's epoch count.
    #[arg(long, global = true, allow_negative_numbers = true)]
    epoch_scale: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the real and simulated streams and store them as feature stores.
    Simulate,
    /// Run the experiment grid, then write recommendations and aggregates.
    Run,
    /// Apply recommendation strategies to the records of a finished grid.
    Recommend {
        /// Strategy such as `greedy`, `greedy_half`, `t_greedy(3)` or
        /// `explore_prune(3)`; repeatable. Defaults to the grid's strategies.
        #[arg(long = "strategy")]
        strategies: Vec<String>,
    },
    /// Compare class-name embeddings of a simulated and a real class set.
    AnalyzeEmbeddings {
        /// Feature-store manifest with one row per real class name.
        #[arg(long)]
        real: PathBuf,
        /// Feature-store manifest with one row per simulated class name.
        #[arg(long)]
        simulated: PathBuf,
        /// Ascending cosine-distance thresholds.
        #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.2, 0.4])]
        thresholds: Vec<f64>,
        /// Tabulate mean distances per simulated label instead of per real label.
        #[arg(long)]
        per_simulated: bool,
    },
    /// Recompute the published aggregates from the embedded results grid.
    ReproduceTables,
    /// Rebuild recommendation and aggregate files from finished records.
    Report,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Run => run(&cli.common),
        Command::Simulate => simulate(&cli.common),
        Command::Recommend { strategies } => recommend(&cli.common, strategies),
        Command::Report => rebuild_reports(&cli.common),
        Command::ReproduceTables => reproduce(&cli.common),
        Command::AnalyzeEmbeddings {
            real,
            simulated,
            thresholds,
            per_simulated,
        } => {
            let out = cli.common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let real = FeatureStore::open(real)?.load_embeddings()?;
            let simulated = FeatureStore::open(simulated)?.load_embeddings()?;
            let direction = if *per_simulated {
                Direction::PerSimulated
            } else {
                Direction::PerReal
            };
            let dir = report::write_embedding_reports(&out, &real, &simulated, thresholds, direction)?;
            info!("embedding reports written to {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_config(common: &Common) -> anyhow::Result<RunConfig> {
    let Some(path) = &common.config else {
        bail!("this command needs --config <path>");
    };
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(scale) = common.epoch_scale {
        cfg.epoch_scale = scale;
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    let problems = cfg.violations();
    if !problems.is_empty() {
        let lines: Vec<String> = problems.iter().map(|d| format!("  {d}")).collect();
        bail!("invalid settings after command-line overrides:\n{}", lines.join("\n"));
    }
    Ok(cfg)
}

fn workers(cfg: &RunConfig) -> usize {
    cfg.workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run(common: &Common) -> anyhow::Result<ExitCode> {
    let cfg = load_config(common)?;
    let report = grid::run_grid(&cfg, &GridOptions { workers: workers(&cfg) })?;
    info!(
        "{} cells: {} computed, {} resumed, {} failed",
        report.cells,
        report.computed,
        report.resumed,
        report.failures.len()
    );
    if report.complete() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &report.failures {
            error!("failed cell {}: {}", f.cell, f.error);
        }
        Ok(ExitCode::FAILURE)
    }
}

/// Output directory and plan of an existing grid.
fn existing_grid(common: &Common) -> anyhow::Result<(PathBuf, GridPlan)> {
    let out = match (&common.out, &common.config) {
        (Some(out), _) => out.clone(),
        (None, Some(_)) => load_config(common)?.out,
        (None, None) => bail!("pass --out <dir> or --config <path>"),
    };
    let plan = GridPlan::load(&out)?;
    Ok((out, plan))
}

fn recommend(common: &Common, requested: &[String]) -> anyhow::Result<ExitCode> {
    let (out, plan) = existing_grid(common)?;
    let texts = if requested.is_empty() { &plan.strategies } else { requested };
    let strategies: Vec<Strategy> = report::parse_strategies(texts)?;
    let table = report::results_table(&out, &plan)?;
    let outcomes = report::recommendations(&table, &strategies)?;
    report::write_recommendations(&out, &outcomes)?;
    info!("wrote {} recommendations to {}", outcomes.len(), out.join("recommendations").display());
    Ok(ExitCode::SUCCESS)
}

fn rebuild_reports(common: &Common) -> anyhow::Result<ExitCode> {
    let (out, plan) = existing_grid(common)?;
    let strategies = report::parse_strategies(&plan.strategies)?;
    report::write_reports(&out, &plan, &strategies)?;
    Ok(ExitCode::SUCCESS)
}

fn reproduce(common: &Common) -> anyhow::Result<ExitCode> {
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let report = report::write_fixture_reports(&out)?;
    use cilrec::fixtures::Status;
    info!(
        "{} values pass, {} fail, {} need unpublished simulated curves",
        report.count(Status::Pass),
        report.count(Status::Fail),
        report.count(Status::NotDerivable)
    );
    for note in &report.notes {
        info!("note: {note}");
    }
    for f in report.failures() {
        error!(
            "{} {} {}: published {}, computed {:?}",
            f.table, f.row, f.column, f.published, f.computed
        );
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

/// Classes of a stream as a dataset; names carry the step index.
fn stream_dataset(stream: &FeatureStream) -> anyhow::Result<LabeledDataset> {
    let mut classes = Vec::new();
    for step in stream.steps() {
        for &id in step.class_ids() {
            let mut features = Matrix::with_cols(stream.dimension());
            for (row, label) in step.samples() {
                if label == id {
                    features.push_row(row)?;
                }
            }
            classes.push(ClassData {
                id,
                name: format!("step{}_class{id}", step.step_index()),
                features,
            });
        }
    }
    Ok(LabeledDataset {
        dimension: stream.dimension(),
        classes,
    })
}

fn simulate(common: &Common) -> anyhow::Result<ExitCode> {
    let cfg = load_config(common)?;
    let names: Vec<String> = cfg.sources().iter().map(|s| s.name().to_string()).collect();
    let pairs = grid::thread_pool(workers(&cfg))?.install(|| grid::build_pairs(&cfg))?;
    for ((d, s, seed), pair) in &pairs {
        let dir: &Path = &cfg.out.join("streams").join(format!(
            "{}__{}__s{seed}",
            sanitize(&names[*d]),
            cfg.scenarios[*s]
        ));
        for (part, stream) in [
            ("real_train", &pair.real.train),
            ("real_test", &pair.real.test),
            ("simulated_train", &pair.simulated.train),
            ("simulated_test", &pair.simulated.test),
        ] {
            write_feature_store(dir.join(part), &stream_dataset(stream)?)
                .with_context(|| format!("writing {}", dir.join(part).display()))?;
        }
        info!("wrote {}", dir.display());
    }
    Ok(ExitCode::SUCCESS)
}
