use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{load_uci, train_test_split, Corpus};
use crate::metrics::{evaluate, rpc, DocumentIndex, EvalContext, MetricId, MetricValue};
use crate::stability::{draw_subsamples, instability_over};
use crate::trainer::train;

use super::config::{DatasetEntry, FamilyEntry, ScanConfig};
use super::curves::{read_rows_if_present, scan_curve_path, stability_curve_path, write_rows, CurveRow};
use super::{finish, worker_pool, CliError, Failure, Outcome};

fn load(d: &DatasetEntry) -> Result<Corpus, String> {
    let (corpus, dropped) = load_uci(&d.docword, &d.vocab).map_err(|e| e.to_string())?;
    if !dropped.dropped_doc_ids.is_empty() {
        log::warn!("{}: dropped {} empty documents", d.name, dropped.dropped_doc_ids.len());
    }
    Ok(corpus)
}

#[derive(Debug, Serialize)]
struct DatasetSummary {
    name: String,
    docs: usize,
    vocab: usize,
    tokens: u64,
    dropped_docs: Vec<usize>,
    train_docs: usize,
    test_docs: usize,
}

/// Loads every dataset, checks the train/test split, and writes
/// `datasets.json` with their sizes.
pub fn cmd_ingest(cfg: &ScanConfig) -> Result<Outcome, CliError> {
    let mut failures = Vec::new();
    let mut summaries = Vec::new();
    for d in &cfg.datasets {
        let loaded = load_uci(&d.docword, &d.vocab).and_then(|(corpus, dropped)| {
            let (train, test) = train_test_split(&corpus, cfg.train_fraction)?;
            Ok(DatasetSummary {
                name: d.name.clone(),
                docs: corpus.num_docs(),
                vocab: corpus.vocab_size(),
                tokens: corpus.total_tokens(),
                dropped_docs: dropped.dropped_doc_ids,
                train_docs: train.num_docs(),
                test_docs: test.num_docs(),
            })
        });
        match loaded {
            Ok(s) => {
                println!(
                    "{}: D={} W={} n={} train={} test={} dropped={}",
                    s.name,
                    s.docs,
                    s.vocab,
                    s.tokens,
                    s.train_docs,
                    s.test_docs,
                    s.dropped_docs.len()
                );
                summaries.push(s);
            }
            Err(e) => failures.push(Failure::dataset(&d.name, e)),
        }
    }
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(
        cfg.out.join("datasets.json"),
        serde_json::to_string_pretty(&summaries)? + "\n",
    )?;
    finish(&cfg.out, "ingest", failures)
}

struct Prepared {
    train: Corpus,
    test: Corpus,
    index: DocumentIndex,
}

type CellKey = (String, usize, u64);

fn cell_key(row: &CurveRow) -> CellKey {
    (row.family.clone(), row.topics, row.seed)
}

fn to_row(dataset: &str, family: &str, seed: u64, topics: usize, v: MetricValue<f64>) -> CurveRow {
    CurveRow {
        dataset: dataset.to_string(),
        family: family.to_string(),
        metric: v.metric,
        seed,
        topics,
        value: if v.defined { v.value } else { f64::NAN },
        defined: v.defined as u8,
    }
}

fn run_cell(
    cfg: &ScanConfig,
    dataset: &str,
    data: &Prepared,
    family: &FamilyEntry,
    topics: usize,
    seed: u64,
    metrics: &[MetricId],
) -> Result<Vec<CurveRow>, String> {
    let spec = family.spec(&data.train, topics, seed, cfg.iterations);
    spec.validate().map_err(|e| e.to_string())?;
    let model = train::<f64>(&spec, &data.train).map_err(|e| e.to_string())?;
    let theta = model.infer_theta(&data.test, cfg.fold_in_iterations);
    let ctx = EvalContext {
        model: &model,
        train: &data.train,
        index: &data.index,
        holdout: theta.as_ref().ok().map(|th| (&data.test, th)),
        top_k: cfg.top_k,
    };
    let mut values = evaluate(&ctx, metrics);
    if let Err(e) = &theta {
        for v in values.iter_mut().filter(|v| v.metric == MetricId::HoldoutPerplexity) {
            *v = MetricValue::undefined(v.metric, format!("fold-in failed: {e}"));
        }
    }
    let label = family.label();
    for v in values.iter().filter(|v| !v.diagnostics.is_empty()) {
        log::debug!("{dataset}/{label} T={topics} seed={seed} {}: {}", v.metric, v.diagnostics.join("; "));
    }
    Ok(values
        .into_iter()
        .map(|v| to_row(dataset, &label, seed, topics, v))
        .collect())
}

/// Derives `rpc` rows from held-out perplexity, per `(family, seed)` along
/// increasing `T`. The smallest `T` has no predecessor and is undefined.
fn rpc_rows(rows: &[CurveRow]) -> Vec<CurveRow> {
    let mut series: BTreeMap<(&str, u64), Vec<&CurveRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == MetricId::HoldoutPerplexity) {
        series.entry((&r.family, r.seed)).or_default().push(r);
    }
    let mut out = Vec::new();
    for points in series.values_mut() {
        points.sort_by_key(|r| r.topics);
        for (i, r) in points.iter().enumerate() {
            let value = match i.checked_sub(1).map(|j| points[j]) {
                Some(prev) if prev.is_defined() && r.is_defined() => {
                    rpc(&[(prev.topics, prev.value), (r.topics, r.value)]).ok().map(|v| v[0].1)
                }
                _ => None,
            };
            out.push(CurveRow {
                metric: MetricId::Rpc,
                value: value.unwrap_or(f64::NAN),
                defined: value.is_some() as u8,
                ..(*r).clone()
            });
        }
    }
    out
}

/// Trains every `(family, T, seed)` cell of every dataset on the training
/// split and appends its metrics to `curves/<dataset>.csv`.
///
/// Cells that already have every configured metric are kept unless `force`.
pub fn cmd_scan(cfg: &ScanConfig, force: bool) -> Result<Outcome, CliError> {
    let pool = worker_pool(cfg)?;
    let mut failures = Vec::new();
    for d in &cfg.datasets {
        scan_dataset(cfg, d, force, &pool, &mut failures)?;
    }
    finish(&cfg.out, "scan", failures)
}

fn scan_dataset(
    cfg: &ScanConfig,
    d: &DatasetEntry,
    force: bool,
    pool: &rayon::ThreadPool,
    failures: &mut Vec<Failure>,
) -> Result<(), CliError> {
    let prepared = load(d).and_then(|corpus| {
        let (train, test) = train_test_split(&corpus, cfg.train_fraction).map_err(|e| e.to_string())?;
        let index = DocumentIndex::new(&train);
        Ok(Prepared { train, test, index })
    });
    let data = match prepared {
        Ok(p) => p,
        Err(e) => {
            failures.push(Failure::dataset(&d.name, e));
            return Ok(());
        }
    };

    let metrics = cfg.model_metrics();
    let wanted: BTreeSet<MetricId> = metrics.iter().copied().collect();
    let cells: Vec<(usize, usize, u64)> = (0..cfg.families.len())
        .flat_map(|f| {
            cfg.dataset_grid(d)
                .points()
                .into_iter()
                .flat_map(move |t| cfg.seeds.iter().map(move |&s| (f, t, s)))
        })
        .collect();
    let keys: BTreeMap<CellKey, usize> = cells
        .iter()
        .map(|&(f, t, s)| ((cfg.families[f].label(), t, s), f))
        .collect();

    let path = scan_curve_path(&cfg.out, &d.name);
    let existing = if force {
        Vec::new()
    } else {
        read_rows_if_present(&path)?.unwrap_or_default()
    };
    let mut present: BTreeMap<CellKey, BTreeSet<MetricId>> = BTreeMap::new();
    for r in &existing {
        present.entry(cell_key(r)).or_default().insert(r.metric);
    }
    let done: BTreeSet<CellKey> = present
        .into_iter()
        .filter(|(k, ms)| keys.contains_key(k) && wanted.is_subset(ms))
        .map(|(k, _)| k)
        .collect();
    let mut rows: Vec<CurveRow> = existing
        .into_iter()
        .filter(|r| wanted.contains(&r.metric) && done.contains(&cell_key(r)))
        .collect();

    let todo: Vec<(usize, usize, u64)> = cells
        .into_iter()
        .filter(|&(f, t, s)| !done.contains(&(cfg.families[f].label(), t, s)))
        .collect();
    log::info!("{}: {} cells to train, {} already present", d.name, todo.len(), done.len());

    let results: Vec<_> = pool.install(|| {
        todo.par_iter()
            .map(|&(f, t, s)| {
                let fam = &cfg.families[f];
                let out = run_cell(cfg, &d.name, &data, fam, t, s, &metrics);
                log::info!("{}/{} T={t} seed={s} {}", d.name, fam.label(), if out.is_ok() { "done" } else { "failed" });
                ((f, t, s), out)
            })
            .collect()
    });
    for ((f, t, s), out) in results {
        match out {
            Ok(r) => rows.extend(r),
            Err(e) => failures.push(Failure {
                dataset: d.name.clone(),
                family: Some(cfg.families[f].label()),
                topics: Some(t),
                seed: Some(s),
                error: e,
            }),
        }
    }
    if cfg.wants_rpc() {
        let derived = rpc_rows(&rows);
        rows.extend(derived);
    }
    write_rows(&path, rows)
}

/// Measures instability for every `(family, T)` of the stability grid and
/// writes `curves/<dataset>.instability.csv`.
///
/// Subsamples are drawn once per dataset from the full corpus and shared by
/// all families and topic counts.
pub fn cmd_stability(cfg: &ScanConfig, force: bool) -> Result<Outcome, CliError> {
    let pool = worker_pool(cfg)?;
    let model_seed = cfg.stability.model_seed;
    let mut failures = Vec::new();
    for d in &cfg.datasets {
        let st = cfg.stability_config(Some(d));
        let grid = cfg.stability_grid(Some(d)).points();
        let subsamples = load(d).and_then(|c| draw_subsamples(&c, &st).map_err(|e| e.to_string()));
        let subsamples = match subsamples {
            Ok(s) => s,
            Err(e) => {
                failures.push(Failure::dataset(&d.name, e));
                continue;
            }
        };
        let path = stability_curve_path(&cfg.out, &d.name);
        let labels: BTreeSet<String> = cfg.families.iter().map(FamilyEntry::label).collect();
        let existing = if force {
            Vec::new()
        } else {
            read_rows_if_present(&path)?.unwrap_or_default()
        };
        let mut rows: Vec<CurveRow> = existing
            .into_iter()
            .filter(|r| {
                r.metric == MetricId::Instability
                    && r.seed == model_seed
                    && labels.contains(&r.family)
                    && grid.contains(&r.topics)
            })
            .collect();
        let done: BTreeSet<(String, usize)> = rows.iter().map(|r| (r.family.clone(), r.topics)).collect();
        let todo: Vec<(&FamilyEntry, usize)> = cfg
            .families
            .iter()
            .flat_map(|f| grid.iter().map(move |&t| (f, t)))
            .filter(|(f, t)| !done.contains(&(f.label(), *t)))
            .collect();
        log::info!("{}: {} stability cells to run, {} already present", d.name, todo.len(), done.len());

        let results: Vec<_> = pool.install(|| {
            todo.par_iter()
                .map(|&(fam, t)| {
                    let spec = fam.spec(&subsamples[0], t, model_seed, cfg.iterations);
                    let out = spec
                        .validate()
                        .map_err(|e| e.to_string())
                        .and_then(|_| {
                            instability_over::<f64>(&subsamples, &spec, t, st.top_k, st.max_pairs)
                                .map_err(|e| e.to_string())
                        });
                    log::info!("{}/{} T={t} instability {}", d.name, fam.label(), if out.is_ok() { "done" } else { "failed" });
                    (fam, t, out)
                })
                .collect()
        });
        for (fam, t, out) in results {
            match out {
                Ok(report) => rows.push(CurveRow {
                    dataset: d.name.clone(),
                    family: fam.label(),
                    metric: MetricId::Instability,
                    seed: model_seed,
                    topics: t,
                    value: report.value,
                    defined: 1,
                }),
                Err(e) => failures.push(Failure {
                    dataset: d.name.clone(),
                    family: Some(fam.label()),
                    topics: Some(t),
                    seed: Some(model_seed),
                    error: e,
                }),
            }
        }
        write_rows(&path, rows)?;
    }
    finish(&cfg.out, "stability", failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(family: &str, seed: u64, topics: usize, value: f64) -> CurveRow {
        CurveRow {
            dataset: "toy".into(),
            family: family.into(),
            metric: MetricId::HoldoutPerplexity,
            seed,
            topics,
            value,
            defined: value.is_finite() as u8,
        }
    }

    #[test]
    fn rpc_rows_follow_each_series() {
        let rows = vec![
            hp("plsa", 0, 6, 70.0),
            hp("plsa", 0, 2, 100.0),
            hp("plsa", 0, 4, 90.0),
            hp("plsa", 1, 2, 50.0),
            hp("plsa", 1, 4, f64::NAN),
            hp("plsa", 1, 6, 40.0),
        ];
        let out = rpc_rows(&rows);
        let got: Vec<(u64, usize, u8, f64)> = out.iter().map(|r| (r.seed, r.topics, r.defined, r.value)).collect();
        assert_eq!(got.len(), 6);
        assert_eq!((got[0].0, got[0].1, got[0].2), (0, 2, 0));
        assert_eq!(&got[1..3], &[(0, 4, 1, 5.0), (0, 6, 1, 10.0)]);
        assert!(got[3..].iter().all(|g| g.2 == 0));
        assert!(out.iter().all(|r| r.metric == MetricId::Rpc));
    }
}
