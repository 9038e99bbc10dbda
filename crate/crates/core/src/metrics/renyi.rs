//! Renyi entropy of the thresholded word-topic matrix.

use crate::scalar::Scalar;
use crate::trainer::TopicModel;

use super::{require_topics, MetricId, MetricValue, Result};

/// Threshold `eps0 = multiplier / W` selecting the support set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenyiThreshold {
    Half,
    One,
    Two,
}

impl RenyiThreshold {
    pub fn multiplier(self) -> f64 {
        match self {
            RenyiThreshold::Half => 0.5,
            RenyiThreshold::One => 1.0,
            RenyiThreshold::Two => 2.0,
        }
    }

    fn metric(self) -> MetricId {
        match self {
            RenyiThreshold::Half => MetricId::Renyi05,
            RenyiThreshold::One => MetricId::Renyi1,
            RenyiThreshold::Two => MetricId::Renyi2,
        }
    }
}

/// Size of the support set and the probability mass on it.
pub(crate) fn support<F: Scalar>(model: &TopicModel<F>, threshold: RenyiThreshold) -> (usize, F) {
    let eps = F::of(threshold.multiplier()) / F::count(model.vocab_size() as u64);
    model
        .phi
        .iter()
        .filter(|&&p| p > eps)
        .fold((0, F::zero()), |(n, s), &p| (n + 1, s + p))
}

/// `-E_f / (T - 1)` with `E = -ln Σ_S phi`, `E_f = E - T ln(|S| / (W T))`.
pub fn renyi_entropy<F: Scalar>(model: &TopicModel<F>, threshold: RenyiThreshold) -> Result<MetricValue<F>> {
    let metric = threshold.metric();
    require_topics(metric.as_str(), model.num_topics(), 2)?;
    let (size, mass) = support(model, threshold);
    if size == 0 {
        return Ok(MetricValue::undefined(metric, "no phi entry exceeds the threshold"));
    }
    let topics = F::count(model.num_topics() as u64);
    let cells = F::count((model.vocab_size() * model.num_topics()) as u64);
    let energy = -mass.ln();
    let free_energy = energy - topics * (F::count(size as u64) / cells).ln();
    Ok(MetricValue::new(metric, -free_energy / (topics - F::one())))
}
