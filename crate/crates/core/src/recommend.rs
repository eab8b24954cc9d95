//! Oracle, recommendation strategies, gaps and their aggregation.
//!
//! Candidates are identified by their position in the table's candidate
//! list; "lowest id" means earliest in that list. Accuracies are taken as
//! they are stored (the CLI stores percentages so gaps read as percentage
//! points).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::eval::{RunRecord, Source};
use crate::{Error, Result};

/// A (dataset, scenario) cell.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub dataset: String,
    pub scenario: String,
}

impl CellKey {
    pub fn new(dataset: impl Into<String>, scenario: impl Into<String>) -> Self {
        Self {
            dataset: dataset.into(),
            scenario: scenario.into(),
        }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.dataset, self.scenario)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct Cell {
    real: Vec<Option<Vec<f64>>>,
    simulated: Vec<Option<Vec<f64>>>,
}

/// Accuracy curves per (cell, source, candidate).
///
/// A curve is the list of step accuracies; a curve of length one may also
/// stand for a bare average accuracy when only summaries are known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    candidates: Vec<String>,
    keys: Vec<CellKey>,
    cells: BTreeMap<CellKey, Cell>,
}

/// How an algorithm is recommended from simulated runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Argmax of the full simulated average accuracy.
    GreedyFull,
    /// Argmax over the first `⌈T/2⌉` simulated steps.
    GreedyHalf,
    /// All candidates run `t` steps; argmax of their mean accuracy.
    TGreedy { t: usize },
    /// All candidates run `t` steps, then the worst running mean is dropped
    /// before each further step until `t_max` (default `T`) or a single
    /// survivor.
    ExplorePrune { t: usize, t_max: Option<usize> },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::GreedyFull => f.write_str("greedy"),
            Strategy::GreedyHalf => f.write_str("greedy_half"),
            Strategy::TGreedy { t } => write!(f, "t_greedy({t})"),
            Strategy::ExplorePrune { t, t_max: None } => write!(f, "explore_prune({t})"),
            Strategy::ExplorePrune { t, t_max: Some(m) } => write!(f, "explore_prune({t},{m})"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// Parses the [`Display`](fmt::Display) form.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown strategy `{s}`"));
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], Some(&s[i + 1..s.len() - 1])),
            Some(_) => return Err(bad()),
            None => (s, None),
        };
        let nums: Vec<usize> = match args {
            Some(a) => a
                .split(',')
                .map(|p| p.trim().parse().map_err(|_| bad()))
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        match (name.to_ascii_lowercase().replace('-', "_").as_str(), nums.as_slice()) {
            ("greedy", []) => Ok(Strategy::GreedyFull),
            ("greedy_half", []) => Ok(Strategy::GreedyHalf),
            ("t_greedy", [t]) => Ok(Strategy::TGreedy { t: *t }),
            ("explore_prune", [t]) => Ok(Strategy::ExplorePrune { t: *t, t_max: None }),
            ("explore_prune", [t, m]) => Ok(Strategy::ExplorePrune { t: *t, t_max: Some(*m) }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendationOutcome {
    pub dataset: String,
    pub scenario: String,
    pub strategy: String,
    pub chosen: String,
    pub gap: f64,
    pub steps_consumed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

/// Group means of a complete (dataset × scenario) grid, groups in order of
/// first appearance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub by_scenario: Vec<(String, f64)>,
    pub by_dataset: Vec<(String, f64)>,
    pub overall: f64,
}

/// Subset-of-k ablation summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub k: usize,
    pub subsets: usize,
    /// Mean over subsets and cells of the best real average accuracy.
    pub mean_best: f64,
    /// Mean gap per requested strategy.
    pub mean_gaps: Vec<(Strategy, f64)>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Greedy choice over `curves` (one per candidate) truncated to `horizon`
/// steps. Returns the chosen index and the executed (algorithm, step) cells.
pub fn select_greedy(curves: &[&[f64]], horizon: usize) -> Result<(usize, u64)> {
    let steps = check_curves(curves)?;
    if horizon == 0 || horizon > steps {
        return Err(Error::Horizon { horizon, steps });
    }
    let scores: Vec<f64> = curves.iter().map(|c| mean(&c[..horizon])).collect();
    Ok((argmax_lowest(&scores), (curves.len() * horizon) as u64))
}

/// Explore-then-prune choice over `curves`; see [`Strategy::ExplorePrune`].
///
/// Before each step `s` in `t+1..=t_max`, if more than one candidate
/// survives, the one with the lowest mean over steps `1..s-1` is removed
/// (ties remove the highest index); survivors then run step `s`. The
/// recommendation is the survivor with the best mean over the executed
/// steps.
pub fn select_explore_prune(curves: &[&[f64]], t: usize, t_max: usize) -> Result<(usize, u64)> {
    let steps = check_curves(curves)?;
    if t == 0 || t > t_max {
        return Err(Error::InvalidArgument(format!(
            "explore-then-prune needs 1 <= t <= t_max, got t={t}, t_max={t_max}"
        )));
    }
    if t_max > steps {
        return Err(Error::Horizon { horizon: t_max, steps });
    }
    let mut alive: Vec<usize> = (0..curves.len()).collect();
    let mut consumed = (curves.len() * t) as u64;
    let mut done = t;
    while done < t_max && alive.len() > 1 {
        let mut worst = 0;
        for k in 1..alive.len() {
            let (a, w) = (mean(&curves[alive[k]][..done]), mean(&curves[alive[worst]][..done]));
            if a <= w {
                worst = k;
            }
        }
        alive.remove(worst);
        done += 1;
        consumed += alive.len() as u64;
    }
    let scores: Vec<f64> = alive.iter().map(|&i| mean(&curves[i][..done])).collect();
    Ok((alive[argmax_lowest(&scores)], consumed))
}

fn check_curves(curves: &[&[f64]]) -> Result<usize> {
    let Some(first) = curves.first() else {
        return Err(Error::Empty("candidate set"));
    };
    let steps = first.len();
    if steps == 0 || curves.iter().any(|c| c.len() != steps) {
        return Err(Error::InvalidArgument(
            "candidate curves must be non-empty and of equal length".into(),
        ));
    }
    Ok(steps)
}

/// Means of a complete (dataset × scenario) grid.
///
/// Every dataset must have a value for every scenario; otherwise the missing
/// cells are listed in the error.
pub fn aggregate(cells: &[(CellKey, f64)]) -> Result<Aggregate> {
    if cells.is_empty() {
        return Err(Error::Empty("gap grid"));
    }
    let mut datasets: Vec<&str> = Vec::new();
    let mut scenarios: Vec<&str> = Vec::new();
    let mut values: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for (k, v) in cells {
        if !datasets.contains(&k.dataset.as_str()) {
            datasets.push(&k.dataset);
        }
        if !scenarios.contains(&k.scenario.as_str()) {
            scenarios.push(&k.scenario);
        }
        if values.insert((&k.dataset, &k.scenario), *v).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate cell {k}")));
        }
    }
    let mut missing = Vec::new();
    for d in &datasets {
        for s in &scenarios {
            if !values.contains_key(&(*d, *s)) {
                missing.push(format!("{d} {s}"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteGrid(missing));
    }
    let by_scenario = scenarios
        .iter()
        .map(|s| {
            let v: Vec<f64> = datasets.iter().map(|d| values[&(*d, *s)]).collect();
            (s.to_string(), mean(&v))
        })
        .collect();
    let by_dataset = datasets
        .iter()
        .map(|d| {
            let v: Vec<f64> = scenarios.iter().map(|s| values[&(*d, *s)]).collect();
            (d.to_string(), mean(&v))
        })
        .collect();
    let all: Vec<f64> = values.values().copied().collect();
    Ok(Aggregate {
        by_scenario,
        by_dataset,
        overall: mean(&all),
    })
}

/// Number of `k`-subsets of `n` items.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

impl ResultsTable {
    pub fn new(candidates: Vec<String>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Empty("candidate set"));
        }
        for (i, c) in candidates.iter().enumerate() {
            if candidates[..i].contains(c) {
                return Err(Error::InvalidArgument(format!("duplicate candidate `{c}`")));
            }
        }
        Ok(Self {
            candidates,
            keys: Vec::new(),
            cells: BTreeMap::new(),
        })
    }

    /// Groups run records by cell, source and algorithm, averaging the step
    /// accuracies of repeated seeds and multiplying them by `scale` (100
    /// turns fractions into percentages).
    pub fn from_records(records: &[RunRecord], candidates: Vec<String>, scale: f64) -> Result<Self> {
        let mut table = Self::new(candidates)?;
        let mut sums: BTreeMap<(CellKey, Source, usize), (Vec<f64>, usize)> = BTreeMap::new();
        let mut order = Vec::new();
        for r in records {
            let key = CellKey::new(r.dataset.clone(), r.scenario.to_string());
            let alg = table.index_of(&r.algorithm)?;
            let entry = sums.entry((key.clone(), r.source, alg)).or_insert_with(|| {
                order.push(key);
                (vec![0.0; r.step_accuracies.len()], 0)
            });
            if entry.0.len() != r.step_accuracies.len() {
                return Err(Error::InvalidArgument(format!(
                    "records of {} {} {} differ in step count",
                    r.dataset, r.scenario, r.algorithm
                )));
            }
            for (s, q) in entry.0.iter_mut().zip(&r.step_accuracies) {
                *s += q;
            }
            entry.1 += 1;
        }
        for key in order {
            table.touch(&key);
        }
        for ((key, source, alg), (sum, n)) in sums {
            let curve = sum.iter().map(|s| s / n as f64 * scale).collect();
            let name = table.candidates[alg].clone();
            table.insert(&key, source, &name, curve)?;
        }
        Ok(table)
    }

    fn touch(&mut self, key: &CellKey) {
        if !self.cells.contains_key(key) {
            let n = self.candidates.len();
            self.keys.push(key.clone());
            self.cells.insert(
                key.clone(),
                Cell {
                    real: vec![None; n],
                    simulated: vec![None; n],
                },
            );
        }
    }

    /// Stores one curve. Curves of the same cell and source must have equal
    /// lengths.
    pub fn insert(&mut self, key: &CellKey, source: Source, algorithm: &str, curve: Vec<f64>) -> Result<()> {
        let alg = self.index_of(algorithm)?;
        if curve.is_empty() {
            return Err(Error::Empty("accuracy curve"));
        }
        if curve.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite accuracy for {key} {algorithm}"
            )));
        }
        self.touch(key);
        let cell = self.cells.get_mut(key).expect("touched");
        let slot = match source {
            Source::Real => &mut cell.real,
            Source::Simulated => &mut cell.simulated,
        };
        if let Some(other) = slot.iter().flatten().next() {
            if other.len() != curve.len() {
                return Err(Error::InvalidArgument(format!(
                    "{key} {source}: curve of {algorithm} has {} steps, others {}",
                    curve.len(),
                    other.len()
                )));
            }
        }
        if slot[alg].is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate {source} curve for {key} {algorithm}"
            )));
        }
        slot[alg] = Some(curve);
        Ok(())
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    /// Cells in insertion order.
    pub fn keys(&self) -> &[CellKey] {
        &self.keys
    }

    pub fn index_of(&self, algorithm: &str) -> Result<usize> {
        self.candidates
            .iter()
            .position(|c| c == algorithm)
            .ok_or_else(|| Error::InvalidArgument(format!("`{algorithm}` is not a candidate")))
    }

    /// Checks that every cell holds a real curve for every candidate and,
    /// if it holds any simulated curve, one for every candidate.
    pub fn validate(&self) -> Result<()> {
        let mut missing = Vec::new();
        for key in &self.keys {
            let cell = &self.cells[key];
            for (i, c) in self.candidates.iter().enumerate() {
                if cell.real[i].is_none() {
                    missing.push(format!("{key} real {c}"));
                }
            }
            if cell.simulated.iter().any(Option::is_some) {
                for (i, c) in self.candidates.iter().enumerate() {
                    if cell.simulated[i].is_none() {
                        missing.push(format!("{key} simulated {c}"));
                    }
                }
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompleteGrid(missing))
        }
    }

    fn curves(&self, key: &CellKey, source: Source) -> Result<Vec<&[f64]>> {
        let cell = self
            .cells
            .get(key)
            .ok_or_else(|| Error::MissingRecord(format!("{key}")))?;
        let slot = match source {
            Source::Real => &cell.real,
            Source::Simulated => &cell.simulated,
        };
        slot.iter()
            .zip(&self.candidates)
            .map(|(c, name)| {
                c.as_deref()
                    .ok_or_else(|| Error::MissingRecord(format!("{key} {source} {name}")))
            })
            .collect()
    }

    /// Average accuracy of every candidate on `source`.
    pub fn averages(&self, key: &CellKey, source: Source) -> Result<Vec<f64>> {
        Ok(self.curves(key, source)?.iter().map(|c| mean(c)).collect())
    }

    /// Number of simulated steps in `key`.
    pub fn simulated_steps(&self, key: &CellKey) -> Result<usize> {
        Ok(self.curves(key, Source::Simulated)?[0].len())
    }

    /// Candidate with the best real average accuracy (lowest index on ties).
    pub fn oracle(&self, key: &CellKey) -> Result<usize> {
        Ok(argmax_lowest(&self.averages(key, Source::Real)?))
    }

    /// Real average accuracy of `chosen` minus that of the oracle.
    pub fn gap(&self, key: &CellKey, chosen: usize) -> Result<f64> {
        let aa = self.averages(key, Source::Real)?;
        let best = aa[argmax_lowest(&aa)];
        let v = aa
            .get(chosen)
            .ok_or_else(|| Error::InvalidArgument(format!("candidate index {chosen} out of range")))?;
        Ok(v - best)
    }

    /// Greedy choice on the first `horizon` simulated steps.
    pub fn greedy(&self, key: &CellKey, horizon: usize) -> Result<(usize, u64)> {
        select_greedy(&self.curves(key, Source::Simulated)?, horizon)
    }

    pub fn t_greedy(&self, key: &CellKey, t: usize) -> Result<(usize, u64)> {
        self.greedy(key, t)
    }

    pub fn explore_then_prune(&self, key: &CellKey, t: usize, t_max: usize) -> Result<(usize, u64)> {
        select_explore_prune(&self.curves(key, Source::Simulated)?, t, t_max)
    }

    /// Chosen index and consumed steps of `strategy` when at most `limit`
    /// simulated steps are available (`None` for all of them).
    fn choose(&self, key: &CellKey, strategy: Strategy, limit: Option<usize>) -> Result<(usize, u64)> {
        let steps = self.simulated_steps(key)?;
        let cap = |h: usize| limit.map_or(h, |l| h.min(l));
        match strategy {
            Strategy::GreedyFull => self.greedy(key, cap(steps)),
            Strategy::GreedyHalf => self.greedy(key, cap(steps.div_ceil(2))),
            Strategy::TGreedy { t } => self.t_greedy(key, cap(t)),
            Strategy::ExplorePrune { t, t_max } => {
                let m = t_max.unwrap_or(steps);
                if t > m {
                    return Err(Error::InvalidArgument(format!(
                        "explore-then-prune needs t <= t_max, got t={t}, t_max={m}"
                    )));
                }
                self.explore_then_prune(key, cap(t), cap(m))
            }
        }
    }

    pub fn recommend(&self, key: &CellKey, strategy: Strategy) -> Result<RecommendationOutcome> {
        let (chosen, steps_consumed) = self.choose(key, strategy, None)?;
        Ok(RecommendationOutcome {
            dataset: key.dataset.clone(),
            scenario: key.scenario.clone(),
            strategy: strategy.to_string(),
            chosen: self.candidates[chosen].clone(),
            gap: self.gap(key, chosen)?,
            steps_consumed,
            trace: None,
        })
    }

    /// Gap of `strategy` when only `t = 1..T` simulated steps are available.
    pub fn dynamics_trace(&self, key: &CellKey, strategy: Strategy) -> Result<Vec<f64>> {
        let steps = self.simulated_steps(key)?;
        (1..=steps)
            .map(|t| {
                let (c, _) = self.choose(key, strategy, Some(t))?;
                self.gap(key, c)
            })
            .collect()
    }

    /// Candidates sorted by decreasing average accuracy on `source`; equal
    /// values keep the lower index first.
    pub fn rank_descending(&self, key: &CellKey, source: Source) -> Result<Vec<usize>> {
        let aa = self.averages(key, source)?;
        let mut order: Vec<usize> = (0..aa.len()).collect();
        order.sort_by(|&a, &b| aa[b].total_cmp(&aa[a]).then(a.cmp(&b)));
        Ok(order)
    }

    /// `(second best, worst)` on `source`.
    pub fn rank_extremes(&self, key: &CellKey, source: Source) -> Result<(usize, usize)> {
        if self.candidates.len() < 2 {
            return Err(Error::InvalidArgument("ranking needs at least two candidates".into()));
        }
        let order = self.rank_descending(key, source)?;
        Ok((order[1], order[order.len() - 1]))
    }

    /// The table restricted to the candidates at `indices` (in that order).
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Self::new(
            indices
                .iter()
                .map(|&i| {
                    self.candidates
                        .get(i)
                        .cloned()
                        .ok_or_else(|| Error::InvalidArgument(format!("candidate index {i} out of range")))
                })
                .collect::<Result<_>>()?,
        )?;
        out.keys = self.keys.clone();
        out.cells = self
            .cells
            .iter()
            .map(|(k, c)| {
                let pick = |v: &Vec<Option<Vec<f64>>>| indices.iter().map(|&i| v[i].clone()).collect();
                (
                    k.clone(),
                    Cell {
                        real: pick(&c.real),
                        simulated: pick(&c.simulated),
                    },
                )
            })
            .collect();
        Ok(out)
    }

    /// Averages, over all `k`-subsets of the candidates and all cells, the
    /// best real average accuracy and the gap of each strategy recomputed
    /// inside the subset.
    pub fn subset_ablation(&self, k: usize, strategies: &[Strategy]) -> Result<Ablation> {
        let n = self.candidates.len();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!(
                "subset size must lie in 1..={n}, got {k}"
            )));
        }
        let all = subsets(n, k);
        let mut best = Vec::new();
        let mut gaps = vec![Vec::new(); strategies.len()];
        for s in &all {
            let sub = self.restrict(s)?;
            for key in &self.keys {
                let aa = sub.averages(key, Source::Real)?;
                best.push(aa[argmax_lowest(&aa)]);
                for (g, st) in gaps.iter_mut().zip(strategies) {
                    g.push(sub.recommend(key, *st)?.gap);
                }
            }
        }
        if best.is_empty() {
            return Err(Error::Empty("results table"));
        }
        Ok(Ablation {
            k,
            subsets: all.len(),
            mean_best: mean(&best),
            mean_gaps: strategies.iter().copied().zip(gaps.iter().map(|g| mean(g))).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(real: &[&[f64]], sim: &[&[f64]]) -> (ResultsTable, CellKey) {
        let names: Vec<String> = (0..real.len()).map(|i| format!("a{i}")).collect();
        let mut t = ResultsTable::new(names.clone()).unwrap();
        let key = CellKey::new("d", "s");
        for (i, c) in real.iter().enumerate() {
            t.insert(&key, Source::Real, &names[i], c.to_vec()).unwrap();
        }
        for (i, c) in sim.iter().enumerate() {
            t.insert(&key, Source::Simulated, &names[i], c.to_vec()).unwrap();
        }
        (t, key)
    }

    #[test]
    fn oracle_ties_keep_lowest() {
        let (t, k) = table(&[&[0.5], &[0.7], &[0.7]], &[]);
        assert_eq!(t.oracle(&k).unwrap(), 1);
        assert_eq!(t.gap(&k, 0).unwrap(), 0.5 - 0.7);
        assert_eq!(t.gap(&k, 2).unwrap(), 0.0);
    }

    #[test]
    fn prune_ties_remove_highest() {
        let c: &[&[f64]] = &[&[0.5, 0.9, 0.1], &[0.5, 0.1, 0.9], &[0.5, 0.5, 0.5]];
        // after step 1 all tie; index 2 is dropped, then index 1 (lower mean)
        let (chosen, consumed) = select_explore_prune(c, 1, 3).unwrap();
        assert_eq!(chosen, 0);
        assert_eq!(consumed, 3 + 2 + 1);
    }

    #[test]
    fn prune_stops_with_single_survivor() {
        let c: &[&[f64]] = &[&[0.9, 0.9, 0.9, 0.9], &[0.1, 0.1, 0.1, 0.1]];
        let (chosen, consumed) = select_explore_prune(c, 1, 4).unwrap();
        assert_eq!(chosen, 0);
        assert_eq!(consumed, 2 + 1);
    }

    #[test]
    fn horizon_checks() {
        let c: &[&[f64]] = &[&[0.9, 0.1], &[0.2, 0.3]];
        assert_eq!(select_greedy(c, 1).unwrap(), (0, 2));
        assert!(matches!(select_greedy(c, 3), Err(Error::Horizon { horizon: 3, steps: 2 })));
        assert!(select_greedy(c, 0).is_err());
        assert!(select_explore_prune(c, 2, 1).is_err());
    }

    #[test]
    fn strategy_round_trips_through_text() {
        for s in [
            Strategy::GreedyFull,
            Strategy::GreedyHalf,
            Strategy::TGreedy { t: 3 },
            Strategy::ExplorePrune { t: 3, t_max: None },
            Strategy::ExplorePrune { t: 2, t_max: Some(7) },
        ] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("greedy(3)".parse::<Strategy>().is_err());
    }

    #[test]
    fn incomplete_grid_lists_missing_cells() {
        let cells = vec![
            (CellKey::new("A", "x"), 1.0),
            (CellKey::new("A", "y"), 2.0),
            (CellKey::new("B", "x"), 3.0),
        ];
        match aggregate(&cells) {
            Err(Error::IncompleteGrid(m)) => assert_eq!(m, vec!["B y".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn aggregate_groups_in_first_seen_order() {
        let cells = vec![
            (CellKey::new("A", "y"), 1.0),
            (CellKey::new("A", "x"), 3.0),
            (CellKey::new("B", "y"), 5.0),
            (CellKey::new("B", "x"), 7.0),
        ];
        let a = aggregate(&cells).unwrap();
        assert_eq!(a.by_scenario, vec![("y".into(), 3.0), ("x".into(), 5.0)]);
        assert_eq!(a.by_dataset, vec![("A".into(), 2.0), ("B".into(), 6.0)]);
        assert_eq!(a.overall, 4.0);
    }

    #[test]
    fn subset_enumeration() {
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(6, 3).len(), binomial(6, 3));
        assert_eq!(subsets(3, 3), vec![vec![0, 1, 2]]);
        assert!(subsets(3, 4).is_empty());
    }

    #[test]
    fn trace_ends_at_full_greedy_gap() {
        let (t, k) = table(
            &[&[0.8, 0.6, 0.4], &[0.7, 0.7, 0.7]],
            &[&[0.9, 0.2, 0.1], &[0.5, 0.6, 0.7]],
        );
        let trace = t.dynamics_trace(&k, Strategy::GreedyFull).unwrap();
        let full = t.recommend(&k, Strategy::GreedyFull).unwrap();
        assert_eq!(*trace.last().unwrap(), full.gap);
        assert_eq!(trace[0], t.gap(&k, 0).unwrap());
    }

    #[test]
    fn rank_extremes_with_two_candidates() {
        let (t, k) = table(&[&[0.3], &[0.6]], &[]);
        assert_eq!(t.rank_extremes(&k, Source::Real).unwrap(), (0, 0));
        let (t1, k1) = table(&[&[0.3]], &[]);
        assert!(t1.rank_extremes(&k1, Source::Real).is_err());
    }
}
