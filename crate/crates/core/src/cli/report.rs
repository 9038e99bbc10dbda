use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::evaluation::{format_performance_table, performance_table, write_performance_csv, GroundTruth, Registry};
use crate::metrics::MetricId;
use crate::optima::{classify, majority_category, Curve, OptimumVerdict, VerdictRecord};

use super::config::ScanConfig;
use super::curves::{read_rows_if_present, scan_curve_path, stability_curve_path, CurveRow};
use super::{CliError, Outcome};

type Measurements = Vec<(usize, Option<f64>)>;

/// Builtin ground truth plus the expected ranges declared in the config.
pub fn registry(cfg: &ScanConfig) -> Result<Registry, CliError> {
    let mut reg = Registry::builtin();
    for d in &cfg.datasets {
        if let Some([lo, hi]) = d.expected {
            let grid = cfg.dataset_grid(d);
            let truth = GroundTruth::new(&d.name, Some((lo, hi)), (grid.start, grid.end))
                .map_err(|e| CliError::Config(e.to_string()))?;
            reg.register(truth);
        }
    }
    Ok(reg)
}

fn clear_dir(dir: &Path) -> Result<(), CliError> {
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Classifies every curve of every configured dataset and writes
/// `verdicts/<dataset>.json`, `categories.csv`, `performance.csv`,
/// `performance.txt` and `plots/*.dat`.
///
/// Curves expected from the config but absent are listed in `missing.txt`;
/// the report still covers everything that is present.
pub fn cmd_report(cfg: &ScanConfig) -> Result<Outcome, CliError> {
    let registry = registry(cfg)?;
    let (verdict_dir, plot_dir) = (cfg.out.join("verdicts"), cfg.out.join("plots"));
    clear_dir(&verdict_dir)?;
    clear_dir(&plot_dir)?;

    let mut missing = Vec::new();
    let mut records = Vec::new();
    let mut categories = String::from("dataset,metric,family,category,readable,seeds\n");
    for d in &cfg.datasets {
        let mut rows: Vec<CurveRow> = Vec::new();
        let scan_path = scan_curve_path(&cfg.out, &d.name);
        match read_rows_if_present(&scan_path)? {
            Some(r) => rows.extend(r),
            None => missing.push(format!("{}: no scan curves at {}", d.name, scan_path.display())),
        }
        if let Some(r) = read_rows_if_present(&stability_curve_path(&cfg.out, &d.name))? {
            rows.extend(r);
        }

        let mut groups: BTreeMap<(String, MetricId, u64), Measurements> = BTreeMap::new();
        for r in &rows {
            let v = r.is_defined().then_some(r.value);
            groups
                .entry((r.family.clone(), r.metric, r.seed))
                .or_default()
                .push((r.topics, v));
        }
        if !rows.is_empty() {
            for f in &cfg.families {
                for &m in &cfg.metrics {
                    for &s in &cfg.seeds {
                        if !groups.contains_key(&(f.label(), m, s)) {
                            missing.push(format!("{}: no {m} curve for {} seed {s}", d.name, f.label()));
                        }
                    }
                }
            }
        }

        let mut ds_records = Vec::new();
        for ((family, metric, seed), points) in groups {
            let curve = match Curve::from_measurements(metric, family.as_str(), seed, points) {
                Ok(c) => c,
                Err(e) => {
                    missing.push(format!("{}: unusable {metric} curve for {family} seed {seed}: {e}", d.name));
                    continue;
                }
            };
            if !curve.dropped.is_empty() {
                log::debug!("{}/{family}/{metric}/seed {seed}: undefined at T={:?}", d.name, curve.dropped);
            }
            let verdict = classify(&curve, cfg.alpha).unwrap_or_else(|e| {
                log::warn!("{}/{family}/{metric}/seed {seed}: {e}; marked uninformative", d.name);
                OptimumVerdict::uninformative()
            });
            let mut plot = String::new();
            for (t, v) in curve.points() {
                let _ = writeln!(plot, "{t} {v}");
            }
            fs::write(
                plot_dir.join(format!("{}__{family}__{metric}__seed{seed}.dat", d.name)),
                plot,
            )?;
            ds_records.push(VerdictRecord::new(&d.name, &curve, verdict));
        }

        let mut by_pair: BTreeMap<(MetricId, &str), Vec<OptimumVerdict>> = BTreeMap::new();
        for r in &ds_records {
            by_pair.entry((r.metric, &r.family)).or_default().push(r.verdict());
        }
        for ((metric, family), vs) in &by_pair {
            if let Some(c) = majority_category(vs) {
                let readable = vs.iter().filter(|v| v.category.is_readable()).count();
                let _ = writeln!(categories, "{},{metric},{family},{},{readable},{}", d.name, c.as_str(), vs.len());
            }
        }

        fs::write(
            verdict_dir.join(format!("{}.json", d.name)),
            serde_json::to_string_pretty(&ds_records)? + "\n",
        )?;
        records.extend(ds_records);
    }

    let table = performance_table(&records, &registry);
    write_performance_csv(&table, fs::File::create(cfg.out.join("performance.csv"))?)?;
    let text = format_performance_table(&table);
    fs::write(cfg.out.join("performance.txt"), &text)?;
    fs::write(cfg.out.join("categories.csv"), categories)?;
    print!("{text}");

    let missing_path = cfg.out.join("missing.txt");
    if missing.is_empty() {
        if missing_path.exists() {
            fs::remove_file(&missing_path)?;
        }
        Ok(Outcome::Complete)
    } else {
        for m in &missing {
            log::warn!("{m}");
        }
        fs::write(&missing_path, missing.join("\n") + "\n")?;
        Ok(Outcome::Partial)
    }
}
