//! Recommendation and aggregate files built from finished grid records,
//! plus the fixture and embedding reports.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cilrec_core::embedding::{mean_distance_distribution, name_overlap, nn_threshold_table, EmbeddingSet};
use cilrec_core::eval::{RunRecord, Source};
use cilrec_core::recommend::{aggregate, CellKey, RecommendationOutcome, ResultsTable, Strategy};
use log::info;

use crate::fixtures::{self, ComparisonReport, Recorded};
use crate::grid::{read_record, sanitize, GridPlan};

/// Fixed-point text without a negative zero.
pub fn fixed(v: f64, digits: usize) -> String {
    let s = format!("{v:.digits$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// All records of the grid in plan order; fails listing the missing cells.
pub fn load_records(out: &Path, plan: &GridPlan) -> anyhow::Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    let mut missing = Vec::new();
    for cell in plan.cells() {
        match read_record(out, plan, &cell) {
            Some(r) => records.push(r),
            None => missing.push(plan.describe(&cell)),
        }
    }
    if !missing.is_empty() {
        bail!("{} unfinished cells:\n  {}", missing.len(), missing.join("\n  "));
    }
    Ok(records)
}

/// Seed-averaged accuracies in percent.
pub fn results_table(out: &Path, plan: &GridPlan) -> anyhow::Result<ResultsTable> {
    let records = load_records(out, plan)?;
    let table = ResultsTable::from_records(&records, plan.candidates.clone(), 100.0)?;
    table.validate()?;
    Ok(table)
}

pub fn parse_strategies(texts: &[String]) -> anyhow::Result<Vec<Strategy>> {
    texts
        .iter()
        .map(|s| s.parse::<Strategy>().map_err(|e| anyhow::anyhow!("{e}")))
        .collect()
}

/// One outcome per (cell, strategy), with the dynamics trace attached.
pub fn recommendations(table: &ResultsTable, strategies: &[Strategy]) -> anyhow::Result<Vec<RecommendationOutcome>> {
    let mut out = Vec::new();
    for key in table.keys() {
        for st in strategies {
            let mut o = table.recommend(key, *st).with_context(|| format!("{key} {st}"))?;
            o.trace = Some(table.dynamics_trace(key, *st)?);
            out.push(o);
        }
    }
    Ok(out)
}

pub fn write_recommendations(out: &Path, outcomes: &[RecommendationOutcome]) -> anyhow::Result<()> {
    let dir = out.join("recommendations");
    fs::create_dir_all(&dir)?;
    for o in outcomes {
        let name = format!(
            "{}__{}__{}.json",
            sanitize(&o.dataset),
            sanitize(&o.scenario),
            sanitize(&o.strategy)
        );
        write_json(&dir.join(name), o)?;
    }
    Ok(())
}

/// Rows of a summary table: per-scenario means, per-dataset means and the
/// overall mean, one column per value function.
fn summary_rows(keys: &[CellKey], columns: &[Vec<f64>]) -> anyhow::Result<Vec<Vec<String>>> {
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (c, values) in columns.iter().enumerate() {
        let cells: Vec<(CellKey, f64)> = keys.iter().cloned().zip(values.iter().copied()).collect();
        let agg = aggregate(&cells)?;
        let mut labelled: Vec<(String, f64)> = agg.by_scenario;
        labelled.extend(agg.by_dataset);
        labelled.push(("Average".into(), agg.overall));
        if c == 0 {
            rows = labelled.iter().map(|(l, _)| vec![l.clone()]).collect();
        }
        for (row, (_, v)) in rows.iter_mut().zip(&labelled) {
            row.push(fixed(*v, 2));
        }
    }
    Ok(rows)
}

/// Summary, ablation, dynamics and ranking CSVs under `out/aggregates`.
pub fn write_aggregates(
    out: &Path,
    table: &ResultsTable,
    strategies: &[Strategy],
    outcomes: &[RecommendationOutcome],
) -> anyhow::Result<()> {
    let dir = out.join("aggregates");
    fs::create_dir_all(&dir)?;
    let keys = table.keys().to_vec();
    let candidates = table.candidates().to_vec();

    let mut header = vec!["group".to_string(), "rho_ref".to_string()];
    header.extend(strategies.iter().map(ToString::to_string));
    header.extend(candidates.iter().map(|c| format!("delta_{c}")));
    let mut columns = Vec::new();
    let mut rho = Vec::new();
    let mut per_alg = vec![Vec::new(); candidates.len()];
    for key in &keys {
        let aa = table.averages(key, Source::Real)?;
        rho.push(aa[table.oracle(key)?]);
        for (i, v) in per_alg.iter_mut().enumerate() {
            v.push(table.gap(key, i)?);
        }
    }
    columns.push(rho);
    for st in strategies {
        let tag = st.to_string();
        columns.push(outcomes.iter().filter(|o| o.strategy == tag).map(|o| o.gap).collect());
    }
    columns.extend(per_alg);
    write_csv(&dir.join("summary.csv"), &header, &summary_rows(&keys, &columns)?)?;

    let mut header = strings(&["k", "subsets", "rho_ref"]);
    header.extend(strategies.iter().map(ToString::to_string));
    let mut rows = Vec::new();
    for k in 1..=candidates.len() {
        let ab = table.subset_ablation(k, strategies)?;
        let mut row = vec![k.to_string(), ab.subsets.to_string(), fixed(ab.mean_best, 2)];
        row.extend(ab.mean_gaps.iter().map(|(_, g)| fixed(*g, 2)));
        rows.push(row);
    }
    write_csv(&dir.join("ablation.csv"), &header, &rows)?;

    let mut rows = Vec::new();
    for o in outcomes {
        for (t, g) in o.trace.iter().flatten().enumerate() {
            rows.push(vec![
                o.dataset.clone(),
                o.scenario.clone(),
                o.strategy.clone(),
                (t + 1).to_string(),
                fixed(*g, 6),
            ]);
        }
    }
    write_csv(&dir.join("dynamics.csv"), &strings(&["dataset", "scenario", "strategy", "t", "gap"]), &rows)?;

    let mut rows = Vec::new();
    if candidates.len() >= 2 {
        for key in &keys {
            for source in [Source::Real, Source::Simulated] {
                let aa = table.averages(key, source)?;
                let order = table.rank_descending(key, source)?;
                let (second, worst) = table.rank_extremes(key, source)?;
                rows.push(vec![
                    key.dataset.clone(),
                    key.scenario.clone(),
                    source.to_string(),
                    candidates[order[0]].clone(),
                    candidates[second].clone(),
                    fixed(aa[second], 6),
                    candidates[worst].clone(),
                    fixed(aa[worst], 6),
                ]);
            }
        }
    }
    write_csv(
        &dir.join("extremes.csv"),
        &strings(&["dataset", "scenario", "source", "best", "second_best", "second_best_aa", "worst", "worst_aa"]),
        &rows,
    )?;
    Ok(())
}

/// Recommendations and aggregates for a finished grid under `out`.
pub fn write_reports(out: &Path, plan: &GridPlan, strategies: &[Strategy]) -> anyhow::Result<()> {
    let table = results_table(out, plan)?;
    let outcomes = recommendations(&table, strategies)?;
    write_recommendations(out, &outcomes)?;
    write_aggregates(out, &table, strategies, &outcomes)?;
    info!("wrote {} recommendations and aggregates under {}", outcomes.len(), out.display());
    Ok(())
}

/// Comparison CSV, the recomputed summary table and the recorded
/// recommendations of the embedded fixtures.
pub fn write_fixture_reports(out: &Path) -> anyhow::Result<ComparisonReport> {
    let report = fixtures::reproduce_paper_tables();
    let agg = out.join("aggregates");
    fs::create_dir_all(&agg)?;
    let rows: Vec<Vec<String>> = report
        .entries
        .iter()
        .map(|e| {
            vec![
                e.table.to_string(),
                e.row.clone(),
                e.column.clone(),
                fixed(e.published, 2),
                e.computed.map(|c| fixed(c, 4)).unwrap_or_default(),
                e.difference().map(|d| fixed(d, 4)).unwrap_or_default(),
                e.status.name().to_string(),
            ]
        })
        .collect();
    write_csv(
        &agg.join("paper_comparison.csv"),
        &strings(&["table", "row", "column", "published", "computed", "abs_difference", "status"]),
        &rows,
    )?;

    // Recomputed values in the published row/column layout; blank where the
    // value needs unpublished simulated curves.
    let mut header = vec!["group".to_string()];
    header.extend(fixtures::TABLE1_COLUMNS.iter().map(|s| s.to_string()));
    let rows: Vec<Vec<String>> = fixtures::SUMMARY_ROWS
        .iter()
        .map(|label| {
            let mut row = vec![label.to_string()];
            for col in fixtures::TABLE1_COLUMNS {
                let v = report
                    .table("table1")
                    .find(|e| e.row == *label && e.column == col)
                    .and_then(|e| e.computed);
                row.push(v.map(|v| fixed(v, 2)).unwrap_or_default());
            }
            row
        })
        .collect();
    write_csv(&agg.join("fixture_summary.csv"), &header, &rows)?;

    let mut outcomes = Vec::new();
    for which in [Recorded::Generated, Recorded::Proxy, Recorded::Advisor] {
        outcomes.extend(fixtures::recorded_outcomes(which).map_err(anyhow::Error::msg)?);
    }
    let dir = out.join("recommendations");
    fs::create_dir_all(&dir)?;
    for o in &outcomes {
        let name = format!(
            "fixture__{}__{}__{}.json",
            sanitize(&o.dataset),
            sanitize(&o.scenario),
            sanitize(&o.strategy)
        );
        write_json(&dir.join(name), o)?;
    }
    Ok(report)
}

/// Which side of the mean-distance distribution is tabulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// For each real label, the mean distance to all simulated labels.
    PerReal,
    /// For each simulated label, the mean distance to all real labels.
    PerSimulated,
}

/// Writes the embedding diagnostics under `out/embeddings` and returns the
/// directory.
pub fn write_embedding_reports(
    out: &Path,
    real: &EmbeddingSet,
    simulated: &EmbeddingSet,
    thresholds: &[f64],
    direction: Direction,
) -> anyhow::Result<PathBuf> {
    let dir = out.join("embeddings");
    fs::create_dir_all(&dir)?;
    let dist = match direction {
        Direction::PerReal => mean_distance_distribution(real, simulated)?,
        Direction::PerSimulated => mean_distance_distribution(simulated, real)?,
    };
    let rows: Vec<Vec<String>> = dist.iter().map(|(l, d)| vec![l.clone(), fixed(*d, 6)]).collect();
    write_csv(&dir.join("mean_distances.csv"), &strings(&["label", "mean_distance"]), &rows)?;
    let table = nn_threshold_table(simulated, real, thresholds)?;
    let rows: Vec<Vec<String>> = table.iter().map(|(t, p)| vec![t.to_string(), fixed(*p, 2)]).collect();
    write_csv(&dir.join("nn_thresholds.csv"), &strings(&["threshold", "percentage"]), &rows)?;
    let overlap = name_overlap(simulated.labels(), real.labels());
    write_csv(
        &dir.join("name_overlap.csv"),
        &strings(&["exact_percentage", "substring_percentage"]),
        &[vec![fixed(overlap.exact, 2), fixed(overlap.substring, 2)]],
    )?;
    Ok(dir)
}
