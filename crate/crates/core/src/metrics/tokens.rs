//! Top-token based metrics: coherence and lift.

use ndarray::Array2;

use crate::corpus::Corpus;
use crate::scalar::Scalar;
use crate::trainer::TopicModel;

use super::{MetricError, MetricId, MetricValue, Result};

/// Per-topic word indices ordered by descending probability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopTokens {
    pub per_topic: Vec<Vec<usize>>,
}

impl TopTokens {
    pub fn topic(&self, t: usize) -> &[usize] {
        &self.per_topic[t]
    }

    pub fn num_topics(&self) -> usize {
        self.per_topic.len()
    }
}

/// The `min(k, W)` most probable words of every topic; ties go to the lower
/// word index.
pub fn top_tokens<F: Scalar>(phi: &Array2<F>, k: usize) -> TopTokens {
    let k = k.min(phi.nrows());
    let per_topic = phi
        .columns()
        .into_iter()
        .map(|col| {
            let mut idx: Vec<usize> = (0..col.len()).collect();
            idx.sort_by(|&a, &b| {
                col[b]
                    .partial_cmp(&col[a])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            idx.truncate(k);
            idx
        })
        .collect();
    TopTokens { per_topic }
}

/// Inverted index of a corpus: which documents contain each word, plus
/// corpus-wide word counts. Built once and shared read-only.
#[derive(Debug, Clone)]
pub struct DocumentIndex {
    postings: Vec<Vec<u32>>,
    word_counts: Vec<u64>,
    total: u64,
}

impl DocumentIndex {
    pub fn new(corpus: &Corpus) -> Self {
        let mut postings = vec![Vec::new(); corpus.vocab_size()];
        for (d, doc) in corpus.documents().iter().enumerate() {
            for &(w, _) in doc.terms() {
                postings[w].push(d as u32);
            }
        }
        Self {
            postings,
            word_counts: corpus.word_counts(),
            total: corpus.total_tokens(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.postings.len()
    }

    /// Number of documents containing `w`.
    pub fn doc_frequency(&self, w: usize) -> usize {
        self.postings[w].len()
    }

    /// Number of documents containing both `a` and `b`.
    pub fn co_frequency(&self, a: usize, b: usize) -> usize {
        let (x, y) = (&self.postings[a], &self.postings[b]);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Empirical unigram probability of `w`.
    pub fn frequency(&self, w: usize) -> f64 {
        self.word_counts[w] as f64 / self.total as f64
    }
}

/// Mean UMass coherence of the models' top-`k` tokens over `corpus`.
pub fn coherence<F: Scalar>(model: &TopicModel<F>, corpus: &Corpus, k: usize) -> Result<MetricValue<F>> {
    coherence_with_index(model, &DocumentIndex::new(corpus), k)
}

/// [`coherence`] against a prebuilt index.
///
/// Per topic: `Σ_{i>=2} Σ_{j<i} ln((D(w_i, w_j) + 1) / D(w_j))`, words in
/// descending probability order. Pairs with `D(w_j) = 0` are skipped.
pub fn coherence_with_index<F: Scalar>(
    model: &TopicModel<F>,
    index: &DocumentIndex,
    k: usize,
) -> Result<MetricValue<F>> {
    if index.vocab_size() != model.vocab_size() {
        return Err(MetricError::DimensionMismatch(format!(
            "model W={}, index W={}",
            model.vocab_size(),
            index.vocab_size()
        )));
    }
    let top = top_tokens(&model.phi, k);
    let mut skipped = 0usize;
    let mut total = F::zero();
    for words in &top.per_topic {
        let mut score = F::zero();
        for i in 1..words.len() {
            for j in 0..i {
                let dj = index.doc_frequency(words[j]);
                if dj == 0 {
                    skipped += 1;
                    continue;
                }
                let co = index.co_frequency(words[i], words[j]);
                score = score + (F::count(co as u64 + 1) / F::count(dj as u64)).ln();
            }
        }
        total = total + score;
    }
    let mv = MetricValue::new(MetricId::Coherence, total / F::count(top.num_topics() as u64));
    Ok(if skipped > 0 {
        mv.with_note(format!("{skipped} pairs skipped: word absent from corpus"))
    } else {
        mv
    })
}

/// Mean over topics of the mean log-lift `ln(phi_wt / p(w))` of its top-`k`
/// tokens. Terms with zero `phi_wt` or zero corpus frequency are skipped.
pub fn lift_score<F: Scalar>(model: &TopicModel<F>, corpus: &Corpus, k: usize) -> Result<MetricValue<F>> {
    if corpus.vocab_size() != model.vocab_size() {
        return Err(MetricError::DimensionMismatch(format!(
            "model W={}, corpus W={}",
            model.vocab_size(),
            corpus.vocab_size()
        )));
    }
    if corpus.total_tokens() == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    let counts = corpus.word_counts();
    let n = F::count(corpus.total_tokens());
    let top = top_tokens(&model.phi, k);
    let mut skipped = 0usize;
    let mut total = F::zero();
    for (t, words) in top.per_topic.iter().enumerate() {
        let terms: Vec<F> = words
            .iter()
            .filter_map(|&w| {
                let phi = model.phi[[w, t]];
                if phi > F::zero() && counts[w] > 0 {
                    Some((phi / (F::count(counts[w]) / n)).ln())
                } else {
                    skipped += 1;
                    None
                }
            })
            .collect();
        if !terms.is_empty() {
            total = total + terms.iter().copied().sum::<F>() / F::count(terms.len() as u64);
        }
    }
    let mv = MetricValue::new(MetricId::Lift, total / F::count(top.num_topics() as u64));
    Ok(if skipped > 0 {
        mv.with_note(format!("{skipped} top tokens skipped: zero probability or corpus frequency"))
    } else {
        mv
    })
}
