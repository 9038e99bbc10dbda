use crate::corpus::Corpus;
use crate::scalar::Scalar;
use crate::trainer::{log_likelihood, TopicModel};

use super::{MetricError, MetricId, MetricValue, Result};

/// `exp(-L / n)` of `corpus` under the model's current `phi` and `theta`.
pub fn perplexity<F: Scalar>(model: &TopicModel<F>, corpus: &Corpus) -> Result<MetricValue<F>> {
    let n = corpus.total_tokens();
    if n == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    let ll = log_likelihood(&model.phi, &model.theta, corpus)?;
    let value = (-ll.value / F::count(n)).exp();
    let mv = MetricValue::new(MetricId::Perplexity, value);
    Ok(if ll.floored_terms > 0 {
        mv.with_note(format!("{} zero-probability terms floored", ll.floored_terms))
    } else {
        mv
    })
}

/// Perplexity of a held-out corpus, with theta obtained by fold-in.
pub fn holdout_perplexity<F: Scalar>(
    model: &TopicModel<F>,
    test: &Corpus,
    fold_in_iterations: usize,
) -> Result<MetricValue<F>> {
    let theta = model.infer_theta(test, fold_in_iterations)?;
    let mv = perplexity(&model.with_theta(theta), test)?;
    Ok(MetricValue {
        metric: MetricId::HoldoutPerplexity,
        ..mv
    })
}

/// Rate of perplexity change `|P_i - P_{i-1}| / (T_i - T_{i-1})` for `i >= 1`.
pub fn rpc<F: Scalar>(perplexities: &[(usize, F)]) -> Result<Vec<(usize, F)>> {
    if perplexities.len() < 2 {
        return Err(MetricError::BadCurve("need at least two points".into()));
    }
    perplexities
        .windows(2)
        .map(|pair| {
            let ((t0, p0), (t1, p1)) = (pair[0], pair[1]);
            if t1 <= t0 {
                return Err(MetricError::BadCurve(format!(
                    "topic counts must strictly increase, got {t0} then {t1}"
                )));
            }
            Ok((t1, (p1 - p0).abs() / F::count((t1 - t0) as u64)))
        })
        .collect()
}
