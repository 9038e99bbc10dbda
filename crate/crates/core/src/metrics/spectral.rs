//! Spectral divergence and the uniform-vs-topic-mass divergence.

use ndarray::Array2;

use crate::corpus::Corpus;
use crate::scalar::{Scalar, DIVERGENCE_FLOOR};
use crate::trainer::TopicModel;

use super::{require_topics, MetricError, MetricId, MetricValue, Result};

const MAX_SWEEPS: usize = 100;

/// Singular values of `m`, sorted descending (one-sided Jacobi rotations).
pub fn singular_values<F: Scalar>(m: &Array2<F>) -> Result<Vec<F>> {
    // rotate columns of the taller orientation
    let mut a = if m.nrows() >= m.ncols() {
        m.clone()
    } else {
        m.t().to_owned()
    };
    let n = a.ncols();
    let eps = F::epsilon();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (F::zero(), F::zero(), F::zero());
                for (&x, &y) in a.column(p).iter().zip(a.column(q).iter()) {
                    alpha = alpha + x * x;
                    beta = beta + y * y;
                    gamma = gamma + x * y;
                }
                if gamma == F::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (F::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (F::one() + zeta * zeta).sqrt());
                let c = F::one() / (F::one() + t * t).sqrt();
                let s = c * t;
                for row in 0..a.nrows() {
                    let (x, y) = (a[[row, p]], a[[row, q]]);
                    a[[row, p]] = c * x - s * y;
                    a[[row, q]] = s * x + c * y;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MetricError::SvdFailure);
    }
    let mut values: Vec<F> = a
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|&x| x * x).sum::<F>().sqrt())
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::SvdFailure);
    }
    values.sort_by(|x, y| y.partial_cmp(x).expect("finite singular values"));
    Ok(values)
}

/// Floors zeros, then normalizes to sum 1.
fn to_distribution<F: Scalar>(mut v: Vec<F>) -> Vec<F> {
    let floor = F::of(DIVERGENCE_FLOOR);
    v.iter_mut().filter(|x| **x <= F::zero()).for_each(|x| *x = floor);
    let sum: F = v.iter().copied().sum();
    v.into_iter().map(|x| x / sum).collect()
}

fn kl<F: Scalar>(p: &[F], q: &[F]) -> F {
    p.iter().zip(q).map(|(&a, &b)| a * (a / b).ln()).sum()
}

fn topic_mass<F: Scalar>(model: &TopicModel<F>, corpus: &Corpus) -> Result<Vec<F>> {
    if model.num_docs() != corpus.num_docs() {
        return Err(MetricError::DimensionMismatch(format!(
            "theta has {} documents, corpus {}",
            model.num_docs(),
            corpus.num_docs()
        )));
    }
    let lengths: Vec<F> = corpus.doc_lengths().into_iter().map(F::count).collect();
    Ok(model
        .theta
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(&lengths).map(|(&th, &n)| th * n).sum())
        .collect())
}

/// Symmetric KL between the normalized singular-value spectrum of `phi` and
/// the normalized length-weighted topic mass `Σ_d n_d theta_td`, both sorted
/// descending.
pub fn d_spectral<F: Scalar>(model: &TopicModel<F>, corpus: &Corpus) -> Result<MetricValue<F>> {
    let topics = model.num_topics();
    require_topics("d-spectral", topics, 2)?;
    let mut spectrum = singular_values(&model.phi)?;
    let padded = spectrum.len() < topics;
    spectrum.resize(topics, F::zero());
    let mut mass = topic_mass(model, corpus)?;
    mass.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));

    let c1 = to_distribution(spectrum);
    let c2 = to_distribution(mass);
    let value = kl(&c1, &c2) + kl(&c2, &c1);
    let mv = MetricValue::new(MetricId::DSpectral, value);
    Ok(if padded {
        mv.with_note("spectrum shorter than T; padded with floor values")
    } else {
        mv
    })
}

/// `KL(u || p)` with `u = 1/T` and `p(t) = Σ_d theta_td n_d / n`.
pub fn uni_theta_divergence<F: Scalar>(model: &TopicModel<F>, corpus: &Corpus) -> Result<MetricValue<F>> {
    let n = corpus.total_tokens();
    if n == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    let floor = F::of(DIVERGENCE_FLOOR);
    let total = F::count(n);
    let u = F::one() / F::count(model.num_topics() as u64);
    let value = topic_mass(model, corpus)?
        .into_iter()
        .map(|m| {
            let p = (m / total).max(floor);
            u * (u / p).ln()
        })
        .sum::<F>()
        .max(F::zero());
    Ok(MetricValue::new(MetricId::UniThetaDivergence, value))
}
