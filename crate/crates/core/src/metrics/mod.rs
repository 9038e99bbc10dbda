//! Intrinsic quality metrics computed from a trained model.
//!
//! Every metric carries an optimization direction so that downstream optimum
//! detection can treat all curves uniformly.

mod clustering;
mod criteria;
mod diversity;
mod perplexity;
mod renyi;
mod spectral;
mod tokens;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::scalar::Scalar;
use crate::trainer::{TopicModel, TrainError};

pub use clustering::{calinski_harabasz, calinski_harabasz_score, silhouette, silhouette_score, theta_labels};
pub use criteria::{information_criterion, nonzero_count, Criterion};
pub use diversity::{distance, diversity, Distance, DiversityMode};
pub use perplexity::{holdout_perplexity, perplexity, rpc};
pub use renyi::{renyi_entropy, RenyiThreshold};
pub use spectral::{d_spectral, singular_values, uni_theta_divergence};
pub use tokens::{coherence, coherence_with_index, lift_score, top_tokens, DocumentIndex, TopTokens};

/// Number of top tokens used by coherence, lift and stability.
pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("{metric} needs at least {needed} topics, model has {found}")]
    TooFewTopics {
        metric: &'static str,
        needed: usize,
        found: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("rpc input: {0}")]
    BadCurve(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("singular value decomposition did not converge")]
    SvdFailure,
    #[error(transparent)]
    Train(#[from] TrainError),
}

pub(crate) type Result<T> = std::result::Result<T, MetricError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

macro_rules! metric_ids {
    ($($variant:ident => $name:literal, $dir:ident;)*) => {
        /// Identifier of every curve the pipeline can emit.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum MetricId { $($variant),* }

        impl MetricId {
            pub const ALL: &'static [MetricId] = &[$(MetricId::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self { $(MetricId::$variant => $name),* }
            }

            pub fn direction(self) -> Direction {
                match self { $(MetricId::$variant => Direction::$dir),* }
            }
        }
    };
}

metric_ids! {
    Perplexity => "perplexity", Minimize;
    HoldoutPerplexity => "holdout-perplexity", Minimize;
    Rpc => "rpc", Maximize;
    Aic => "aic", Minimize;
    AicSparse => "aic-sparse", Minimize;
    Bic => "bic", Minimize;
    BicSparse => "bic-sparse", Minimize;
    Mdl => "mdl", Minimize;
    MdlSparse => "mdl-sparse", Minimize;
    Renyi05 => "renyi-0.5", Minimize;
    Renyi1 => "renyi-1", Minimize;
    Renyi2 => "renyi-2", Minimize;
    DAvgCos => "d-avg-cos", Maximize;
    DClsCos => "d-cls-cos", Maximize;
    DAvgL2 => "d-avg-l2", Maximize;
    DClsL2 => "d-cls-l2", Maximize;
    DAvgH => "d-avg-h", Maximize;
    DClsH => "d-cls-h", Maximize;
    DAvgJs => "d-avg-js", Maximize;
    DClsJs => "d-cls-js", Maximize;
    DSpectral => "d-spectral", Minimize;
    UniThetaDivergence => "uni-theta-divergence", Maximize;
    Silhc => "silhc", Maximize;
    Chi => "chi", Maximize;
    Coherence => "coherence", Maximize;
    Lift => "lift", Maximize;
    Instability => "instability", Minimize;
}

impl MetricId {
    /// Metrics computed per trained model (everything but the cross-`T`
    /// derived `rpc` and the separately scheduled `instability`).
    pub fn per_model() -> impl Iterator<Item = MetricId> {
        Self::ALL
            .iter()
            .copied()
            .filter(|m| !matches!(m, MetricId::Rpc | MetricId::Instability))
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

impl Serialize for MetricId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MetricId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One metric measurement.
///
/// `defined` is false when the metric has no meaningful value for the model
/// (e.g. empty Renyi support); `diagnostics` then says why.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue<F> {
    pub metric: MetricId,
    pub value: F,
    pub defined: bool,
    pub diagnostics: Vec<String>,
}

impl<F: Scalar> MetricValue<F> {
    pub fn new(metric: MetricId, value: F) -> Self {
        Self {
            metric,
            value,
            defined: value.is_finite(),
            diagnostics: Vec::new(),
        }
    }

    pub fn undefined(metric: MetricId, reason: impl Into<String>) -> Self {
        Self {
            metric,
            value: F::nan(),
            defined: false,
            diagnostics: vec![reason.into()],
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.diagnostics.push(note.into());
        self
    }

    pub fn direction(&self) -> Direction {
        self.metric.direction()
    }

    pub fn name(&self) -> &'static str {
        self.metric.as_str()
    }
}

/// Inputs shared by the per-model metric suite.
pub struct EvalContext<'a, F> {
    pub model: &'a TopicModel<F>,
    pub train: &'a Corpus,
    pub index: &'a DocumentIndex,
    /// Held-out corpus and its fold-in theta, when available.
    pub holdout: Option<(&'a Corpus, &'a ndarray::Array2<F>)>,
    pub top_k: usize,
}

/// Evaluates `metrics` on one model. Metric failures become undefined values
/// carrying the error message, so one degenerate metric never hides the rest.
pub fn evaluate<F: Scalar>(ctx: &EvalContext<'_, F>, metrics: &[MetricId]) -> Vec<MetricValue<F>> {
    metrics
        .iter()
        .filter_map(|&m| {
            let value = match m {
                MetricId::Rpc | MetricId::Instability => return None,
                MetricId::Perplexity => perplexity(ctx.model, ctx.train),
                MetricId::HoldoutPerplexity => match ctx.holdout {
                    Some((test, theta)) => perplexity(&ctx.model.with_theta(theta.clone()), test)
                        .map(|v| MetricValue { metric: m, ..v }),
                    None => Ok(MetricValue::undefined(m, "no held-out corpus")),
                },
                MetricId::Aic => information_criterion(ctx.model, ctx.train, Criterion::Aic, false),
                MetricId::AicSparse => information_criterion(ctx.model, ctx.train, Criterion::Aic, true),
                MetricId::Bic => information_criterion(ctx.model, ctx.train, Criterion::Bic, false),
                MetricId::BicSparse => information_criterion(ctx.model, ctx.train, Criterion::Bic, true),
                MetricId::Mdl => information_criterion(ctx.model, ctx.train, Criterion::Mdl, false),
                MetricId::MdlSparse => information_criterion(ctx.model, ctx.train, Criterion::Mdl, true),
                MetricId::Renyi05 => renyi_entropy(ctx.model, RenyiThreshold::Half),
                MetricId::Renyi1 => renyi_entropy(ctx.model, RenyiThreshold::One),
                MetricId::Renyi2 => renyi_entropy(ctx.model, RenyiThreshold::Two),
                MetricId::DAvgCos => diversity(ctx.model, Distance::Cosine, DiversityMode::AvgPairwise),
                MetricId::DClsCos => diversity(ctx.model, Distance::Cosine, DiversityMode::Closest),
                MetricId::DAvgL2 => diversity(ctx.model, Distance::L2, DiversityMode::AvgPairwise),
                MetricId::DClsL2 => diversity(ctx.model, Distance::L2, DiversityMode::Closest),
                MetricId::DAvgH => diversity(ctx.model, Distance::Hellinger, DiversityMode::AvgPairwise),
                MetricId::DClsH => diversity(ctx.model, Distance::Hellinger, DiversityMode::Closest),
                MetricId::DAvgJs => diversity(ctx.model, Distance::JensenShannon, DiversityMode::AvgPairwise),
                MetricId::DClsJs => diversity(ctx.model, Distance::JensenShannon, DiversityMode::Closest),
                MetricId::DSpectral => d_spectral(ctx.model, ctx.train),
                MetricId::UniThetaDivergence => uni_theta_divergence(ctx.model, ctx.train),
                MetricId::Silhc => silhouette(ctx.model),
                MetricId::Chi => calinski_harabasz(ctx.model),
                MetricId::Coherence => coherence_with_index(ctx.model, ctx.index, ctx.top_k),
                MetricId::Lift => lift_score(ctx.model, ctx.train, ctx.top_k),
            };
            Some(value.unwrap_or_else(|e| MetricValue::undefined(m, e.to_string())))
        })
        .collect()
}

pub(crate) fn require_topics(metric: &'static str, found: usize, needed: usize) -> Result<()> {
    if found < needed {
        Err(MetricError::TooFewTopics {
            metric,
            needed,
            found,
        })
    } else {
        Ok(())
    }
}
