//! Scan configuration, read from a TOML file.
//!
//! Every field has a default, so an empty file is a valid config that scans
//! no datasets. Relative paths are resolved against the config file's
//! directory.
//!
//! ```toml
//! out = "results"          # output directory
//! t_min = 2                # topic grid: t_min, t_min + t_step, ..., <= t_max
//! t_max = 20
//! t_step = 1
//! seeds = [0, 1, 2]        # model initialization seeds
//! iterations = 40          # EM iterations per model
//! fold_in_iterations = 20  # EM iterations for held-out theta
//! train_fraction = 0.8     # leading share of documents used for training
//! top_k = 10               # top tokens for coherence and lift
//! alpha = 0.07             # optimum band width
//! metrics = ["bic", "renyi-1", "rpc"]   # default: every per-model metric plus rpc
//! workers = 4              # default: available parallelism
//!
//! [[datasets]]
//! name = "brown"           # letters, digits, '-' and '_' only
//! docword = "docword.brown.txt"
//! vocab = "vocab.brown.txt"
//! expected = [10, 20]      # optional plausible topic range
//! t_min = 5                # optional per-dataset grid override
//!
//! [[families]]
//! kind = "decorrelated"    # plsa, lda_double_symmetric, lda_asymmetric,
//!                          # lda_heuristic, decorrelated, sparse, sparse_decorrelated
//! name = "decorrelated-01"   # optional label, defaults to kind
//! tau = 0.1
//! smooth_fraction = 0.1    # sparse kinds: betas as fractions of n / (W * T)
//! sparse_fraction = 0.5
//! background_count = 1
//!
//! [stability]
//! subsamples = 5
//! fraction = 0.5
//! base_seed = 0            # subsample i uses seed base_seed + i
//! model_seed = 0           # shared initialization seed
//! top_k = 10
//! max_pairs = 10           # optional cap on compared model pairs
//! t_min = 2                # optional, default to each dataset's scan grid
//! t_max = 20
//! t_step = 1
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::metrics::{MetricId, DEFAULT_TOP_K};
use crate::optima::DEFAULT_ALPHA;
use crate::stability::StabilityConfig;
use crate::trainer::{Family, ModelSpec, DEFAULT_FOLD_IN_ITERATIONS, DEFAULT_ITERATIONS};

use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub datasets: Vec<DatasetEntry>,
    pub families: Vec<FamilyEntry>,
    pub t_min: usize,
    pub t_max: usize,
    pub t_step: usize,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub fold_in_iterations: usize,
    pub train_fraction: f64,
    pub top_k: usize,
    pub alpha: f64,
    pub metrics: Vec<MetricId>,
    pub stability: StabilitySection,
    pub out: PathBuf,
    pub workers: Option<usize>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            families: vec![FamilyEntry::new(Family::Plsa)],
            t_min: 2,
            t_max: 20,
            t_step: 1,
            seeds: vec![0, 1, 2],
            iterations: DEFAULT_ITERATIONS,
            fold_in_iterations: DEFAULT_FOLD_IN_ITERATIONS,
            train_fraction: 0.8,
            top_k: DEFAULT_TOP_K,
            alpha: DEFAULT_ALPHA,
            metrics: MetricId::per_model().chain([MetricId::Rpc]).collect(),
            stability: StabilitySection::default(),
            out: PathBuf::from("results"),
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub docword: PathBuf,
    pub vocab: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyEntry {
    pub kind: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default = "default_smooth_fraction")]
    pub smooth_fraction: f64,
    #[serde(default = "default_sparse_fraction")]
    pub sparse_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_count: Option<usize>,
}

fn default_smooth_fraction() -> f64 {
    0.1
}

fn default_sparse_fraction() -> f64 {
    0.5
}

impl FamilyEntry {
    pub fn new(kind: Family) -> Self {
        Self {
            kind,
            name: None,
            tau: None,
            smooth_fraction: default_smooth_fraction(),
            sparse_fraction: default_sparse_fraction(),
            background_count: None,
        }
    }

    /// Label used in output files.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.as_str().to_string())
    }

    /// Model spec for this family; sparse betas are scaled to `corpus`.
    pub fn spec(&self, corpus: &Corpus, topics: usize, seed: u64, iterations: usize) -> ModelSpec {
        let mut spec = ModelSpec::new(self.kind, topics)
            .with_seed(seed)
            .with_iterations(iterations);
        if let Some(tau) = self.tau {
            spec = spec.with_tau(tau);
        }
        if let Some(b) = self.background_count {
            spec.background_count = b;
        }
        if self.kind.is_sparse() {
            spec = spec.with_dataset_adjusted_betas(corpus, self.smooth_fraction, self.sparse_fraction);
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub subsamples: usize,
    pub fraction: f64,
    pub base_seed: u64,
    pub model_seed: u64,
    pub top_k: usize,
    pub max_pairs: Option<usize>,
    pub t_min: Option<usize>,
    pub t_max: Option<usize>,
    pub t_step: Option<usize>,
}

impl Default for StabilitySection {
    fn default() -> Self {
        let base = StabilityConfig::default();
        Self {
            subsamples: base.subsamples,
            fraction: base.fraction,
            base_seed: base.base_seed,
            model_seed: 0,
            top_k: base.top_k,
            max_pairs: None,
            t_min: None,
            t_max: None,
            t_step: None,
        }
    }
}

/// A topic grid `start, start + step, ... <= end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step).collect()
    }

    fn validate(&self, what: &str) -> Result<(), CliError> {
        if self.start < 1 || self.step < 1 || self.start >= self.end {
            return Err(CliError::Config(format!(
                "{what}: need 1 <= t_min < t_max and t_step >= 1, got t_min={} t_max={} t_step={}",
                self.start, self.end, self.step
            )));
        }
        Ok(())
    }
}

impl ScanConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ScanConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.out);
        for d in &mut self.datasets {
            join(&mut d.docword);
            join(&mut d.vocab);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.grid().validate("scan")?;
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.iterations == 0 || self.fold_in_iterations == 0 {
            return bad("iterations and fold_in_iterations must be positive".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} outside (0, 1)", self.train_fraction));
        }
        if self.top_k == 0 {
            return bad("top_k must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if self.metrics.is_empty() {
            return bad("metrics must not be empty".into());
        }
        if self.metrics.contains(&MetricId::Instability) {
            return bad("instability is produced by the stability command, not listed in metrics".into());
        }
        if self.families.is_empty() {
            return bad("families must not be empty".into());
        }
        let mut labels = BTreeSet::new();
        for f in &self.families {
            let label = f.label();
            check_name("family", &label)?;
            if !labels.insert(label.clone()) {
                return bad(format!("duplicate family label {label:?}; set distinct names"));
            }
            for (what, v) in [("smooth_fraction", f.smooth_fraction), ("sparse_fraction", f.sparse_fraction)] {
                if !(v.is_finite() && v >= 0.0) {
                    return bad(format!("family {label}: {what} must be finite and >= 0"));
                }
            }
            if let Some(tau) = f.tau {
                if !(tau.is_finite() && tau >= 0.0) {
                    return bad(format!("family {label}: tau must be finite and >= 0"));
                }
            }
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            check_name("dataset", &d.name)?;
            if !names.insert(&d.name) {
                return bad(format!("duplicate dataset name {:?}", d.name));
            }
            let grid = self.dataset_grid(d);
            grid.validate(&format!("dataset {}", d.name))?;
            self.stability_grid(Some(d))
                .validate(&format!("dataset {} stability", d.name))?;
            if let Some([lo, hi]) = d.expected {
                if lo > hi || lo < 1 {
                    return bad(format!("dataset {}: bad expected range [{lo}, {hi}]", d.name));
                }
                if lo < grid.start || hi > grid.end {
                    return bad(format!(
                        "dataset {}: expected range [{lo}, {hi}] outside topic grid [{}, {}]",
                        d.name, grid.start, grid.end
                    ));
                }
            }
        }
        self.stability_grid(None).validate("stability")?;
        self.stability_config(None)
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid {
            start: self.t_min,
            end: self.t_max,
            step: self.t_step,
        }
    }

    pub fn dataset_grid(&self, d: &DatasetEntry) -> Grid {
        Grid {
            start: d.t_min.unwrap_or(self.t_min),
            end: d.t_max.unwrap_or(self.t_max),
            step: d.t_step.unwrap_or(self.t_step),
        }
    }

    /// Stability grid for `d`; unset bounds follow the dataset's scan grid.
    pub fn stability_grid(&self, d: Option<&DatasetEntry>) -> Grid {
        let s = &self.stability;
        let scan = d.map_or(self.grid(), |d| self.dataset_grid(d));
        Grid {
            start: s.t_min.unwrap_or(scan.start),
            end: s.t_max.unwrap_or(scan.end),
            step: s.t_step.unwrap_or(scan.step),
        }
    }

    pub fn stability_config(&self, d: Option<&DatasetEntry>) -> StabilityConfig {
        let s = &self.stability;
        let grid = self.stability_grid(d);
        StabilityConfig {
            subsamples: s.subsamples,
            fraction: s.fraction,
            base_seed: s.base_seed,
            top_k: s.top_k,
            t_min: grid.start,
            t_max: grid.end,
            max_pairs: s.max_pairs,
        }
    }

    /// Metrics computed per trained model. `rpc` pulls in the held-out
    /// perplexity it is derived from.
    pub fn model_metrics(&self) -> Vec<MetricId> {
        let mut set: BTreeSet<MetricId> = self.metrics.iter().copied().filter(|m| *m != MetricId::Rpc).collect();
        if self.metrics.contains(&MetricId::Rpc) {
            set.insert(MetricId::HoldoutPerplexity);
        }
        set.into_iter().collect()
    }

    pub fn wants_rpc(&self) -> bool {
        self.metrics.contains(&MetricId::Rpc)
    }
}

fn check_name(what: &str, name: &str) -> Result<(), CliError> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{what} name {name:?} may only use letters, digits, '-' and '_'"
        )))
    }
}
