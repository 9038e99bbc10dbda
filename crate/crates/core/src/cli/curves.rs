//! Curve CSV files: one row per measurement.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::MetricId;

use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub dataset: String,
    pub family: String,
    pub metric: MetricId,
    pub seed: u64,
    #[serde(rename = "T")]
    pub topics: usize,
    pub value: f64,
    pub defined: u8,
}

impl CurveRow {
    pub fn is_defined(&self) -> bool {
        self.defined == 1 && self.value.is_finite()
    }

    fn sort_key(&self) -> (&str, &str, &str, u64, usize) {
        (&self.dataset, &self.family, self.metric.as_str(), self.seed, self.topics)
    }
}

pub fn scan_curve_path(out: &Path, dataset: &str) -> PathBuf {
    out.join("curves").join(format!("{dataset}.csv"))
}

pub fn stability_curve_path(out: &Path, dataset: &str) -> PathBuf {
    out.join("curves").join(format!("{dataset}.instability.csv"))
}

pub fn sort_rows(rows: &mut [CurveRow]) {
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

pub fn read_rows(path: &Path) -> Result<Vec<CurveRow>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Writes `rows` sorted, through a temporary file so readers never see a
/// half-written curve file.
pub fn write_rows(path: &Path, mut rows: Vec<CurveRow>) -> Result<(), CliError> {
    sort_rows(&mut rows);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        if rows.is_empty() {
            w.write_record(["dataset", "family", "metric", "seed", "T", "value", "defined"])?;
        }
        for row in &rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads `path` if it exists; a missing file is an empty curve set.
pub fn read_rows_if_present(path: &Path) -> Result<Option<Vec<CurveRow>>, CliError> {
    match fs::metadata(path) {
        Ok(_) => read_rows(path).map(Some),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(metric: MetricId, topics: usize, value: f64, defined: u8) -> CurveRow {
        CurveRow {
            dataset: "toy".into(),
            family: "plsa".into(),
            metric,
            seed: 0,
            topics,
            value,
            defined,
        }
    }

    #[test]
    fn round_trip_with_undefined_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = scan_curve_path(dir.path(), "toy");
        let rows = vec![
            row(MetricId::Renyi1, 3, f64::NAN, 0),
            row(MetricId::Bic, 3, 1234.5678901234567, 1),
            row(MetricId::Bic, 2, -0.1, 1),
        ];
        write_rows(&path, rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "dataset,family,metric,seed,T,value,defined\n\
             toy,plsa,bic,0,2,-0.1,1\n\
             toy,plsa,bic,0,3,1234.5678901234567,1\n\
             toy,plsa,renyi-1,0,3,NaN,0\n"
        );
        let back = read_rows(&path).unwrap();
        assert_eq!(back[1].value, 1234.5678901234567);
        assert!(back[2].value.is_nan() && !back[2].is_defined());
    }

    #[test]
    fn empty_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = stability_curve_path(dir.path(), "toy");
        assert!(read_rows_if_present(&path).unwrap().is_none());
        write_rows(&path, vec![]).unwrap();
        assert_eq!(read_rows_if_present(&path).unwrap(), Some(vec![]));
    }
}
