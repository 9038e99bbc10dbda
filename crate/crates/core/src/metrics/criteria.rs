//! AIC, BIC and MDL with dense or sparsity-aware parameter counts.

use crate::corpus::Corpus;
use crate::scalar::Scalar;
use crate::trainer::TopicModel;

use super::{MetricError, MetricId, MetricValue, Result};

/// Entries of `phi` above this count as free parameters in the sparse variants.
pub const SPARSITY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Aic,
    Bic,
    Mdl,
}

/// Number of entries of `phi` strictly above [`SPARSITY_THRESHOLD`].
pub fn nonzero_count<F: Scalar>(model: &TopicModel<F>) -> usize {
    let eps = F::of(SPARSITY_THRESHOLD);
    model.phi.iter().filter(|&&x| x > eps).count()
}

/// Information criterion of a model against its training corpus.
///
/// Parameter count is `#Phi` when `sparse`, otherwise `(W - 1) * T`; the
/// likelihood is the model's stored training log-likelihood.
pub fn information_criterion<F: Scalar>(
    model: &TopicModel<F>,
    corpus: &Corpus,
    kind: Criterion,
    sparse: bool,
) -> Result<MetricValue<F>> {
    let (words, topics) = model.phi.dim();
    let docs = corpus.num_docs();
    if docs == 0 || topics == 0 {
        return Err(MetricError::Degenerate(format!("D = {docs}, T = {topics}")));
    }
    if words != corpus.vocab_size() {
        return Err(MetricError::DimensionMismatch(format!(
            "model W={words}, corpus W={}",
            corpus.vocab_size()
        )));
    }
    let params = if sparse {
        nonzero_count(model)
    } else {
        (words - 1) * topics
    };
    let value = criterion_value(kind, params, topics, docs, model.log_likelihood);
    let metric = match (kind, sparse) {
        (Criterion::Aic, false) => MetricId::Aic,
        (Criterion::Aic, true) => MetricId::AicSparse,
        (Criterion::Bic, false) => MetricId::Bic,
        (Criterion::Bic, true) => MetricId::BicSparse,
        (Criterion::Mdl, false) => MetricId::Mdl,
        (Criterion::Mdl, true) => MetricId::MdlSparse,
    };
    Ok(MetricValue::new(metric, value))
}

pub(crate) fn criterion_value<F: Scalar>(
    kind: Criterion,
    params: usize,
    topics: usize,
    docs: usize,
    log_likelihood: F,
) -> F {
    let np = F::count(params as u64);
    let two = F::of(2.0);
    let penalty = match kind {
        Criterion::Aic => two * np,
        Criterion::Bic => np * F::count(docs as u64).ln(),
        Criterion::Mdl => np * F::count((topics * docs) as u64).ln(),
    };
    penalty - two * log_likelihood
}
