//! Reliability scoring of metrics across seeds, model families and datasets.
//!
//! Verdicts are grouped into cells keyed by `(dataset, family)`. Within a cell
//! each metric gets a seed-agreement score, a readable fraction and an
//! expected-range hit rate; a metric's row is the unweighted mean over cells.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricId;
use crate::optima::{OptimumVerdict, VerdictRecord};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("no ground truth registered for dataset {0:?}")]
    UnknownDataset(String),
    #[error("invalid ground truth for {dataset:?}: {reason}")]
    InvalidTruth { dataset: String, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, EvaluationError>;

/// Plausible topic-count range for a corpus and the range it is scanned over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub dataset: String,
    /// `None` when no range is known; such datasets skip the expected column.
    pub expected: Option<(usize, usize)>,
    pub scan: (usize, usize),
}

impl GroundTruth {
    pub fn new(dataset: impl Into<String>, expected: Option<(usize, usize)>, scan: (usize, usize)) -> Result<Self> {
        let dataset = dataset.into();
        let invalid = |reason: String| EvaluationError::InvalidTruth {
            dataset: dataset.clone(),
            reason,
        };
        if scan.0 > scan.1 {
            return Err(invalid(format!("scan range [{}, {}] is reversed", scan.0, scan.1)));
        }
        if let Some((lo, hi)) = expected {
            if lo > hi {
                return Err(invalid(format!("expected range [{lo}, {hi}] is reversed")));
            }
            if lo < scan.0 || hi > scan.1 {
                return Err(invalid(format!(
                    "expected range [{lo}, {hi}] outside scan range [{}, {}]",
                    scan.0, scan.1
                )));
            }
        }
        Ok(Self { dataset, expected, scan })
    }
}

/// Ground truth by dataset name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    entries: BTreeMap<String, GroundTruth>,
}

impl Registry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry preloaded with the commonly used reference corpora.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        let known = [
            ("WikiRef220", Some((5, 5)), (2, 20)),
            ("20NG", Some((15, 20)), (3, 40)),
            ("Reuters", Some((90, 90)), (5, 150)),
            ("Brown", Some((10, 20)), (5, 25)),
            ("PostNauka", Some((15, 30)), (5, 50)),
            ("StackOverflow", None, (5, 60)),
        ];
        for (name, expected, scan) in known {
            r.register(GroundTruth::new(name, expected, scan).expect("builtin ground truth is consistent"));
        }
        r
    }

    /// Adds or replaces the entry for `truth.dataset`.
    pub fn register(&mut self, truth: GroundTruth) {
        self.entries.insert(truth.dataset.clone(), truth);
    }

    pub fn get(&self, dataset: &str) -> Result<&GroundTruth> {
        self.entries
            .get(dataset)
            .ok_or_else(|| EvaluationError::UnknownDataset(dataset.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundTruth> {
        self.entries.values()
    }
}

/// `|∩| / |∪|` over the bands of seeds whose optimum is off the scan edge.
///
/// Flat curves (empty band) are excluded as well. Returns `None` when fewer
/// than two bands remain.
pub fn seed_agreement<'a>(verdicts: impl IntoIterator<Item = &'a OptimumVerdict>) -> Option<f64> {
    let bands: Vec<&BTreeSet<usize>> = verdicts
        .into_iter()
        .filter(|v| !v.boundary_hit && !v.band.is_empty())
        .map(|v| &v.band)
        .collect();
    if bands.len() < 2 {
        return None;
    }
    let union: BTreeSet<usize> = bands.iter().flat_map(|b| b.iter().copied()).collect();
    let inter = union.iter().filter(|t| bands.iter().all(|b| b.contains(t))).count();
    Some(inter as f64 / union.len() as f64)
}

/// Fraction of verdicts in a readable category; `None` for no verdicts.
pub fn informativity<'a>(verdicts: impl IntoIterator<Item = &'a OptimumVerdict>) -> Option<f64> {
    let (mut readable, mut total) = (0usize, 0usize);
    for v in verdicts {
        total += 1;
        readable += v.category.is_readable() as usize;
    }
    (total > 0).then(|| readable as f64 / total as f64)
}

/// Whether `band` meets the expected range. `None` when the dataset has no
/// known range.
pub fn expected_hit(band: &BTreeSet<usize>, truth: &GroundTruth) -> Option<bool> {
    let (lo, hi) = truth.expected?;
    Some(band.range(lo..=hi).next().is_some())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceRow {
    pub metric: MetricId,
    /// Mean seed agreement over cells where it is defined.
    pub jaccard: Option<f64>,
    pub informativity: f64,
    /// Mean expected-range hit rate over cells with a known range.
    pub expected: Option<f64>,
    pub cells: usize,
    /// Cells left out of `jaccard` because seed agreement was undefined.
    pub skipped_jaccard: usize,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Aggregates verdicts into one row per metric, sorted by metric identifier.
///
/// A verdict counts as an expected-range hit only when it is readable.
/// Datasets missing from `registry` or registered without an expected range
/// do not contribute to the expected column. The result does not depend on the
/// order of `records`; repeated `(dataset, metric, family, seed)` records keep
/// the first occurrence in sorted order.
pub fn performance_table(records: &[VerdictRecord], registry: &Registry) -> Vec<PerformanceRow> {
    let mut sorted: Vec<&VerdictRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (a.metric, &a.dataset, &a.family, a.seed, &a.band, a.category, a.boundary_hit).cmp(&(
            b.metric,
            &b.dataset,
            &b.family,
            b.seed,
            &b.band,
            b.category,
            b.boundary_hit,
        ))
    });
    sorted.dedup_by(|b, a| (a.metric, &a.dataset, &a.family, a.seed) == (b.metric, &b.dataset, &b.family, b.seed));

    let mut cells: BTreeMap<MetricId, BTreeMap<(&str, &str), Vec<OptimumVerdict>>> = BTreeMap::new();
    for r in sorted {
        cells
            .entry(r.metric)
            .or_default()
            .entry((r.dataset.as_str(), r.family.as_str()))
            .or_default()
            .push(r.verdict());
    }

    let mut rows: Vec<PerformanceRow> = cells
        .into_iter()
        .map(|(metric, by_cell)| {
            let (mut jac, mut inf, mut exp) = (Vec::new(), Vec::new(), Vec::new());
            for ((dataset, _), verdicts) in &by_cell {
                if let Some(j) = seed_agreement(verdicts) {
                    jac.push(j);
                }
                inf.push(informativity(verdicts).unwrap_or(0.0));
                if let Some(truth) = registry.get(dataset).ok().filter(|t| t.expected.is_some()) {
                    let hits = verdicts
                        .iter()
                        .filter(|v| v.category.is_readable() && expected_hit(&v.band, truth) == Some(true))
                        .count();
                    exp.push(hits as f64 / verdicts.len() as f64);
                }
            }
            PerformanceRow {
                metric,
                jaccard: mean(&jac),
                informativity: mean(&inf).unwrap_or(0.0),
                expected: mean(&exp),
                cells: by_cell.len(),
                skipped_jaccard: by_cell.len() - jac.len(),
            }
        })
        .collect();
    rows.sort_by_key(|r| r.metric.as_str());
    rows
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with columns `metric,jaccard,informativity,expected`. Values are
/// written at full precision; undefined entries are left empty.
pub fn write_performance_csv<W: io::Write>(rows: &[PerformanceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "jaccard", "informativity", "expected"])?;
    for r in rows {
        w.write_record([
            r.metric.as_str().to_string(),
            cell(r.jaccard),
            cell(Some(r.informativity)),
            cell(r.expected),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text table with aligned columns; undefined entries print as `-`.
pub fn format_performance_table(rows: &[PerformanceRow]) -> String {
    let header = ["metric", "jaccard", "informativity", "expected"];
    let body: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            let dash = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
            [
                r.metric.as_str().to_string(),
                dash(r.jaccard),
                dash(Some(r.informativity)),
                dash(r.expected),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cols: [&str; 4]| {
        let _ = write!(out, "{:<w$}", cols[0], w = widths[0]);
        for i in 1..4 {
            let _ = write!(out, "  {:>w$}", cols[i], w = widths[i]);
        }
        out.push('\n');
    };
    line(header);
    for row in &body {
        line([&row[0], &row[1], &row[2], &row[3]]);
    }
    out
}
