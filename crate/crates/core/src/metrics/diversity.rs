//! Distances between topic columns and the diversity scores built on them.

use ndarray::ArrayView1;

use crate::scalar::Scalar;
use crate::trainer::TopicModel;

use super::{require_topics, MetricId, MetricValue, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distance {
    /// `1 - cos(a, b)`.
    Cosine,
    /// Euclidean norm of `a - b`.
    L2,
    /// `sqrt(1 - Σ sqrt(a_w b_w))`, evaluated as `sqrt(Σ (sqrt a_w - sqrt b_w)^2 / 2)`.
    Hellinger,
    /// Jensen-Shannon divergence in bits, so disjoint supports give 1.
    JensenShannon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiversityMode {
    /// Mean over all unordered topic pairs.
    AvgPairwise,
    /// Mean over topics of the distance to the nearest other topic.
    Closest,
}

fn kl_half<F: Scalar>(p: F, m: F) -> F {
    if p > F::zero() {
        p * (p / m).log2()
    } else {
        F::zero()
    }
}

/// Distance between two probability vectors.
pub fn distance<F: Scalar>(kind: Distance, a: ArrayView1<F>, b: ArrayView1<F>) -> F {
    let pairs = a.iter().zip(b.iter()).map(|(&x, &y)| (x, y));
    match kind {
        Distance::Cosine => {
            let (dot, na, nb) = pairs.fold((F::zero(), F::zero(), F::zero()), |(d, na, nb), (x, y)| {
                (d + x * y, na + x * x, nb + y * y)
            });
            let denom = (na * nb).sqrt();
            if denom > F::zero() {
                (F::one() - dot / denom).max(F::zero())
            } else {
                F::one()
            }
        }
        Distance::L2 => pairs.map(|(x, y)| (x - y) * (x - y)).sum::<F>().sqrt(),
        Distance::Hellinger => {
            let sq: F = pairs.map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum();
            (F::of(0.5) * sq).min(F::one()).sqrt()
        }
        Distance::JensenShannon => {
            let half = F::of(0.5);
            let js: F = pairs
                .map(|(x, y)| {
                    let m = half * (x + y);
                    half * (kl_half(x, m) + kl_half(y, m))
                })
                .sum();
            js.max(F::zero()).min(F::one())
        }
    }
}

fn metric_id(kind: Distance, mode: DiversityMode) -> MetricId {
    use {Distance::*, DiversityMode::*};
    match (kind, mode) {
        (Cosine, AvgPairwise) => MetricId::DAvgCos,
        (Cosine, Closest) => MetricId::DClsCos,
        (L2, AvgPairwise) => MetricId::DAvgL2,
        (L2, Closest) => MetricId::DClsL2,
        (Hellinger, AvgPairwise) => MetricId::DAvgH,
        (Hellinger, Closest) => MetricId::DClsH,
        (JensenShannon, AvgPairwise) => MetricId::DAvgJs,
        (JensenShannon, Closest) => MetricId::DClsJs,
    }
}

/// Diversity of the topic columns of `phi`.
pub fn diversity<F: Scalar>(model: &TopicModel<F>, kind: Distance, mode: DiversityMode) -> Result<MetricValue<F>> {
    let metric = metric_id(kind, mode);
    let topics = model.num_topics();
    require_topics(metric.as_str(), topics, 2)?;
    let mut dist = vec![F::zero(); topics * topics];
    for a in 0..topics {
        for b in a + 1..topics {
            let d = distance(kind, model.phi.column(a), model.phi.column(b));
            dist[a * topics + b] = d;
            dist[b * topics + a] = d;
        }
    }
    let value = match mode {
        DiversityMode::AvgPairwise => {
            let pairs = topics * (topics - 1) / 2;
            let sum: F = (0..topics)
                .flat_map(|a| (a + 1..topics).map(move |b| (a, b)))
                .map(|(a, b)| dist[a * topics + b])
                .sum();
            sum / F::count(pairs as u64)
        }
        DiversityMode::Closest => {
            let sum: F = (0..topics)
                .map(|a| {
                    (0..topics)
                        .filter(|&b| b != a)
                        .map(|b| dist[a * topics + b])
                        .fold(F::infinity(), F::min)
                })
                .sum();
            sum / F::count(topics as u64)
        }
    };
    Ok(MetricValue::new(metric, value))
}
