//! Model instability across document subsamples.
//!
//! For a fixed topic count, models are trained on `S` half-size subsamples
//! with one shared initialization seed. Every unordered pair of models is
//! compared by optimally matching their topics on the Jaccard distance of
//! their top-token sets; instability is the mean matched distance over all
//! `C(S, 2)` pairs.

mod assignment;

use std::collections::BTreeSet;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{subsample, Corpus, CorpusError};
use crate::metrics::{top_tokens, DEFAULT_TOP_K};
use crate::scalar::Scalar;
use crate::trainer::{train, ModelSpec, TopicModel, TrainError};

pub use assignment::{linear_sum_assignment, AssignmentResult};

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("cost matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("cost matrix has non-finite entries")]
    NonFiniteCost,
    #[error("both token sets are empty")]
    EmptySets,
    #[error("topic count mismatch: {0} vs {1}")]
    TopicMismatch(usize, usize),
    #[error("invalid stability config: {0}")]
    InvalidConfig(String),
    #[error("subsampling failed: {0}")]
    Subsample(#[from] CorpusError),
    #[error("training on subsample {subsample} failed: {source}")]
    Training {
        subsample: usize,
        #[source]
        source: TrainError,
    },
}

pub(crate) type Result<T> = std::result::Result<T, StabilityError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityConfig {
    pub subsamples: usize,
    pub fraction: f64,
    pub base_seed: u64,
    pub top_k: usize,
    pub t_min: usize,
    pub t_max: usize,
    /// Upper bound on the number of model pairs compared; `None` compares all.
    pub max_pairs: Option<usize>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            subsamples: 5,
            fraction: 0.5,
            base_seed: 0,
            top_k: DEFAULT_TOP_K,
            t_min: 2,
            t_max: 20,
            max_pairs: None,
        }
    }
}

impl StabilityConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(StabilityError::InvalidConfig(msg));
        if self.subsamples < 2 {
            return bad(format!("need at least 2 subsamples, got {}", self.subsamples));
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return bad(format!("fraction {} outside (0, 1)", self.fraction));
        }
        if self.t_min < 1 || self.t_min > self.t_max {
            return bad(format!("bad topic range [{}, {}]", self.t_min, self.t_max));
        }
        if self.top_k == 0 {
            return bad("top_k must be positive".into());
        }
        if self.max_pairs == Some(0) {
            return bad("max_pairs must be positive".into());
        }
        Ok(())
    }
}

/// `1 - |a ∩ b| / |a ∪ b|`.
pub fn jaccard_distance<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Result<f64> {
    let union = a.union(b).count();
    if union == 0 {
        return Err(StabilityError::EmptySets);
    }
    let inter = a.intersection(b).count();
    Ok(1.0 - inter as f64 / union as f64)
}

fn top_sets<F: Scalar>(model: &TopicModel<F>, top_k: usize) -> Vec<BTreeSet<usize>> {
    top_tokens(&model.phi, top_k)
        .per_topic
        .into_iter()
        .map(|words| words.into_iter().collect())
        .collect()
}

/// Optimal topic matching between two models on top-token Jaccard distance.
pub fn match_topics<F: Scalar>(a: &TopicModel<F>, b: &TopicModel<F>, top_k: usize) -> Result<AssignmentResult<F>> {
    if a.num_topics() != b.num_topics() {
        return Err(StabilityError::TopicMismatch(a.num_topics(), b.num_topics()));
    }
    let (sa, sb) = (top_sets(a, top_k), top_sets(b, top_k));
    let t = sa.len();
    let mut cost = Array2::zeros((t, t));
    for (i, x) in sa.iter().enumerate() {
        for (j, y) in sb.iter().enumerate() {
            cost[[i, j]] = F::of(jaccard_distance(x, y)?);
        }
    }
    linear_sum_assignment(&cost)
}

/// Mean matched Jaccard distance between two models' topics, in `[0, 1]`.
pub fn model_distance<F: Scalar>(a: &TopicModel<F>, b: &TopicModel<F>, top_k: usize) -> Result<F> {
    Ok(match_topics(a, b, top_k)?.mean_distance)
}

/// Instability at one topic count together with the per-pair distances.
#[derive(Debug, Clone, PartialEq)]
pub struct InstabilityReport<F> {
    pub topics: usize,
    pub value: F,
    /// `(i, j, distance)` for every compared pair, `i < j`.
    pub pairs: Vec<(usize, usize, F)>,
}

/// Trains one model per subsample and averages pairwise model distances.
///
/// Every model uses `template`'s seed with its topic count set to `topics`.
pub fn instability_over<F: Scalar>(
    subsamples: &[Corpus],
    template: &ModelSpec,
    topics: usize,
    top_k: usize,
    max_pairs: Option<usize>,
) -> Result<InstabilityReport<F>> {
    if subsamples.len() < 2 {
        return Err(StabilityError::InvalidConfig("need at least 2 subsamples".into()));
    }
    let spec = template.clone().with_topics(topics);
    let models: Vec<TopicModel<F>> = subsamples
        .par_iter()
        .enumerate()
        .map(|(i, corpus)| train(&spec, corpus).map_err(|source| StabilityError::Training { subsample: i, source }))
        .collect::<Result<_>>()?;

    let s = models.len();
    let limit = max_pairs.unwrap_or(usize::MAX);
    let pairs: Vec<(usize, usize, F)> = (0..s)
        .flat_map(|i| (i + 1..s).map(move |j| (i, j)))
        .take(limit)
        .map(|(i, j)| Ok((i, j, model_distance(&models[i], &models[j], top_k)?)))
        .collect::<Result<_>>()?;
    let value = pairs.iter().map(|p| p.2).sum::<F>() / F::count(pairs.len() as u64);
    Ok(InstabilityReport { topics, value, pairs })
}

/// Instability of `template`'s family at `topics` topics on `corpus`.
///
/// Subsample `i` is drawn with seed `base_seed + i`.
pub fn instability<F: Scalar>(
    corpus: &Corpus,
    template: &ModelSpec,
    config: &StabilityConfig,
    topics: usize,
) -> Result<InstabilityReport<F>> {
    config.validate()?;
    if topics < config.t_min || topics > config.t_max {
        return Err(StabilityError::InvalidConfig(format!(
            "topic count {topics} outside [{}, {}]",
            config.t_min, config.t_max
        )));
    }
    let subsamples = draw_subsamples(corpus, config)?;
    instability_over(&subsamples, template, topics, config.top_k, config.max_pairs)
}

/// The `S` subsamples used by [`instability`].
pub fn draw_subsamples(corpus: &Corpus, config: &StabilityConfig) -> Result<Vec<Corpus>> {
    (0..config.subsamples)
        .map(|i| Ok(subsample(corpus, config.fraction, config.base_seed + i as u64)?))
        .collect()
}
