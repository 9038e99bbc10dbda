//! Number-of-topics metric scanning for regularized EM topic models.
//!
//! The pipeline trains a family of topic models over a grid of topic counts,
//! measures intrinsic quality metrics on each model, locates the optimum band
//! of every metric curve and scores how reliably each metric points at a
//! plausible topic count.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the precision.

pub mod cli;
pub mod corpus;
pub mod evaluation;
pub mod metrics;
pub mod optima;
pub mod scalar;
pub mod stability;
pub mod trainer;

pub use corpus::{Corpus, Document, Vocabulary};
pub use metrics::{Direction, MetricId, MetricValue};
pub use optima::{Category, OptimumVerdict, VerdictRecord};
pub use scalar::Scalar;
pub use trainer::{Family, ModelSpec, TopicModel};

pub type TopicModel64 = trainer::TopicModel<f64>;
pub type TopicModel32 = trainer::TopicModel<f32>;
pub type Curve64 = optima::Curve<f64>;
pub type Curve32 = optima::Curve<f32>;
pub type Synthetic64 = corpus::Synthetic<f64>;
pub type Synthetic32 = corpus::Synthetic<f32>;
pub type MetricValue64 = metrics::MetricValue<f64>;
