//! Cosine-distance diagnostics between two sets of label embeddings.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, l2_normalized, norm, Matrix};
use crate::{Error, Result};

const NORM_TOLERANCE: f64 = 1e-6;

/// Labeled unit vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    labels: Vec<String>,
    vectors: Matrix,
}

impl EmbeddingSet {
    /// Requires unique labels, one row per label and unit-norm rows.
    pub fn new(labels: Vec<String>, vectors: Matrix) -> Result<Self> {
        if labels.len() != vectors.rows() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} vectors",
                labels.len(),
                vectors.rows()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidArgument(format!("duplicate label `{l}`")));
            }
        }
        for (i, r) in vectors.iter_rows().enumerate() {
            let n = norm(r);
            if !n.is_finite() {
                return Err(Error::NonFinite { row: i });
            }
            if (n - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "embedding `{}` has norm {n}, expected 1",
                    labels[i]
                )));
            }
        }
        Ok(Self { labels, vectors })
    }

    /// Like [`new`](Self::new) but rescales every row to unit norm first.
    pub fn normalized(labels: Vec<String>, raw: &Matrix) -> Result<Self> {
        let rows: Vec<Vec<f64>> = raw.iter_rows().map(l2_normalized).collect();
        Self::new(labels, Matrix::from_rows(raw.cols(), &rows)?)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.vectors.cols()
    }
}

/// `1 - a·b`, clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    (1.0 - dot(a, b)).clamp(0.0, 2.0)
}

fn check_pair(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("embedding set"));
    }
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    Ok(())
}

/// For each label of `anchor`, the mean cosine distance to all vectors of
/// `others`. Call with `(real, simulated)` for the per-real-label view and
/// swapped for the reverse.
pub fn mean_distance_distribution(anchor: &EmbeddingSet, others: &EmbeddingSet) -> Result<Vec<(String, f64)>> {
    check_pair(anchor, others)?;
    Ok(anchor
        .labels
        .iter()
        .zip(anchor.vectors.iter_rows())
        .map(|(l, a)| {
            let total: f64 = others.vectors.iter_rows().map(|b| cosine_distance(a, b)).sum();
            (l.clone(), total / others.len() as f64)
        })
        .collect())
}

/// Cosine distance from each `query` vector to its nearest `reference`
/// vector.
pub fn nearest_distances(query: &EmbeddingSet, reference: &EmbeddingSet) -> Result<Vec<f64>> {
    check_pair(query, reference)?;
    Ok(query
        .vectors
        .iter_rows()
        .map(|q| {
            reference
                .vectors
                .iter_rows()
                .map(|r| cosine_distance(q, r))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// For each threshold `d`, the percentage of `simulated` labels whose
/// nearest `real` label lies within cosine distance `d`.
pub fn nn_threshold_table(
    simulated: &EmbeddingSet,
    real: &EmbeddingSet,
    thresholds: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if thresholds.is_empty() {
        return Err(Error::Empty("threshold list"));
    }
    if thresholds.iter().any(|t| t.is_nan()) || thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("thresholds must be sorted ascending".into()));
    }
    let nearest = nearest_distances(simulated, real)?;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let hits = nearest.iter().filter(|&&d| d <= t).count();
            (t, 100.0 * hits as f64 / nearest.len() as f64)
        })
        .collect())
}

/// Share of labels of `a` that also occur in `b`, in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NameOverlap {
    /// Case-insensitive equality.
    pub exact: f64,
    /// One normalized label contains the other as a whole-word run.
    pub substring: f64,
}

/// Lowercases, maps non-alphanumerics to spaces and collapses whitespace.
pub fn normalize_label(label: &str) -> String {
    let mapped: String = label
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn name_overlap<A: AsRef<str>, B: AsRef<str>>(a: &[A], b: &[B]) -> NameOverlap {
    if a.is_empty() {
        return NameOverlap {
            exact: 0.0,
            substring: 0.0,
        };
    }
    let folded_b: Vec<String> = b.iter().map(|s| s.as_ref().trim().to_lowercase()).collect();
    let padded_b: Vec<String> = b.iter().map(|s| format!(" {} ", normalize_label(s.as_ref()))).collect();
    let mut exact = 0usize;
    let mut sub = 0usize;
    for label in a {
        let folded = label.as_ref().trim().to_lowercase();
        if folded_b.contains(&folded) {
            exact += 1;
        }
        let n = normalize_label(label.as_ref());
        if n.is_empty() {
            continue;
        }
        let padded = format!(" {n} ");
        if padded_b
            .iter()
            .any(|p| p.trim() != "" && (p.contains(padded.as_str()) || padded.contains(p.as_str())))
        {
            sub += 1;
        }
    }
    let pct = |k: usize| 100.0 * k as f64 / a.len() as f64;
    NameOverlap {
        exact: pct(exact),
        substring: pct(sub),
    }
}
