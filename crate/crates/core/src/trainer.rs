//! Regularized EM for the PLSA/LDA/ARTM model families.
//!
//! Every family shares the same E-step. The M-step adds family-specific
//! pseudocounts to the expected counts, clips negatives at zero and
//! renormalizes:
//!
//! ```text
//! phi_wt   ∝ max(0, n_wt + r_wt)
//! theta_td ∝ max(0, n_td + a_td)
//! ```

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, ArrayViewMut1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::scalar::{Scalar, LOG_FLOOR};

/// Default number of full EM passes.
pub const DEFAULT_ITERATIONS: usize = 40;
/// Default number of fold-in passes for held-out documents.
pub const DEFAULT_FOLD_IN_ITERATIONS: usize = 20;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {matrix} after iteration {iteration}")]
    NonFinite { matrix: &'static str, iteration: usize },
    #[error("unseen document: no in-vocabulary tokens")]
    UnseenDocument,
    #[error("unknown model family {0:?}")]
    UnknownFamily(String),
}

type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Plsa,
    LdaDoubleSymmetric,
    LdaAsymmetric,
    LdaHeuristic,
    Decorrelated,
    Sparse,
    SparseDecorrelated,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Plsa,
        Family::LdaDoubleSymmetric,
        Family::LdaAsymmetric,
        Family::LdaHeuristic,
        Family::Decorrelated,
        Family::Sparse,
        Family::SparseDecorrelated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Plsa => "plsa",
            Family::LdaDoubleSymmetric => "lda_double_symmetric",
            Family::LdaAsymmetric => "lda_asymmetric",
            Family::LdaHeuristic => "lda_heuristic",
            Family::Decorrelated => "decorrelated",
            Family::Sparse => "sparse",
            Family::SparseDecorrelated => "sparse_decorrelated",
        }
    }

    pub fn is_decorrelated(self) -> bool {
        matches!(self, Family::Decorrelated | Family::SparseDecorrelated)
    }

    pub fn is_sparse(self) -> bool {
        matches!(self, Family::Sparse | Family::SparseDecorrelated)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| TrainError::UnknownFamily(s.to_string()))
    }
}

/// Everything needed to train one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub topics: usize,
    pub seed: u64,
    pub iterations: usize,
    /// Decorrelation weight; decorrelated families only.
    pub tau: f64,
    /// Pseudocount added to background topics; sparse families only.
    pub smooth_beta: f64,
    /// Pseudocount subtracted from specific topics; sparse families only.
    pub sparse_beta: f64,
    /// Number of leading background topics; sparse families only.
    pub background_count: usize,
}

impl ModelSpec {
    pub fn new(family: Family, topics: usize) -> Self {
        Self {
            family,
            topics,
            seed: 0,
            iterations: DEFAULT_ITERATIONS,
            tau: if family.is_decorrelated() { 0.05 } else { 0.0 },
            smooth_beta: 0.0,
            sparse_beta: 0.0,
            background_count: if family.is_sparse() { 1 } else { 0 },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_topics(mut self, topics: usize) -> Self {
        self.topics = topics;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_betas(mut self, smooth_beta: f64, sparse_beta: f64) -> Self {
        self.smooth_beta = smooth_beta;
        self.sparse_beta = sparse_beta;
        self
    }

    /// Sets the sparse-family betas as fractions of the mean count per
    /// `(word, topic)` cell, `n / (W * T)`.
    pub fn with_dataset_adjusted_betas(
        self,
        corpus: &Corpus,
        smooth_fraction: f64,
        sparse_fraction: f64,
    ) -> Self {
        let mean = corpus.total_tokens() as f64 / (corpus.vocab_size() * self.topics.max(1)) as f64;
        self.with_betas(smooth_fraction * mean, sparse_fraction * mean)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics == 0 {
            return Err(TrainError::InvalidSpec("topic count must be at least 1".into()));
        }
        for (name, v) in [
            ("tau", self.tau),
            ("smooth_beta", self.smooth_beta),
            ("sparse_beta", self.sparse_beta),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(TrainError::InvalidSpec(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if self.family.is_sparse() && self.background_count >= self.topics {
            return Err(TrainError::InvalidSpec(format!(
                "background_count {} must be below topic count {}",
                self.background_count, self.topics
            )));
        }
        Ok(())
    }

    /// Theta-side pseudocounts `a_t`, one per topic (identical across documents).
    pub fn theta_prior<F: Scalar>(&self) -> Vec<F> {
        let t = self.topics as f64;
        (0..self.topics)
            .map(|i| {
                F::of(match self.family {
                    Family::LdaDoubleSymmetric => 1.0 / t,
                    Family::LdaAsymmetric => 1.0 / (i as f64 + t).sqrt(),
                    Family::LdaHeuristic => 50.0 / t,
                    _ => 0.0,
                })
            })
            .collect()
    }

    /// Phi-side pseudocounts `r_wt` evaluated at the current `phi`.
    fn phi_pseudocounts<F: Scalar>(&self, phi: ArrayView2<F>) -> Option<Array2<F>> {
        let (words, topics) = phi.dim();
        let constant = match self.family {
            Family::LdaDoubleSymmetric | Family::LdaAsymmetric => Some(1.0 / topics as f64),
            Family::LdaHeuristic => Some(0.01),
            _ => None,
        };
        if let Some(c) = constant {
            return Some(Array2::from_elem((words, topics), F::of(c)));
        }
        if !self.family.is_sparse() && !self.family.is_decorrelated() {
            return None;
        }
        let mut r = Array2::zeros((words, topics));
        if self.family.is_sparse() {
            let (smooth, sparse) = (F::of(self.smooth_beta), -F::of(self.sparse_beta));
            for (t, mut col) in r.columns_mut().into_iter().enumerate() {
                col.fill(if t < self.background_count { smooth } else { sparse });
            }
        }
        if self.family.is_decorrelated() {
            let tau = F::of(self.tau);
            for (mut r_row, phi_row) in r.rows_mut().into_iter().zip(phi.rows()) {
                let row_sum: F = phi_row.sum();
                for (r_wt, &p) in r_row.iter_mut().zip(phi_row.iter()) {
                    *r_wt = *r_wt - tau * p * (row_sum - p);
                }
            }
        }
        Some(r)
    }
}

/// A trained (or initialized) topic model.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel<F> {
    /// `W x T`, column-stochastic.
    pub phi: Array2<F>,
    /// `T x D`, column-stochastic.
    pub theta: Array2<F>,
    /// `W x T` expected counts from the last E-step.
    pub n_wt: Array2<F>,
    /// Log-likelihood of the training corpus under the current parameters.
    pub log_likelihood: F,
    /// Log-likelihood after initialization and after every EM step.
    pub trajectory: Vec<F>,
    pub spec: ModelSpec,
}

/// Events observed during one EM step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepReport {
    /// Phi columns whose clipped mass was zero and were reset to uniform.
    pub reset_phi_columns: Vec<usize>,
    /// Number of theta columns reset to uniform.
    pub reset_theta_columns: usize,
    /// Tokens whose mixture probability was zero; they contribute no counts.
    pub unassigned_tokens: u64,
    /// Log-likelihood terms replaced by the floor.
    pub floored_terms: usize,
}

/// `Σ_d Σ_w n_dw ln p(w|d)` together with the number of floored terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood<F> {
    pub value: F,
    pub floored_terms: usize,
}

fn check_dims<F>(phi: &Array2<F>, theta: &Array2<F>, corpus: &Corpus) -> Result<()> {
    let (w, t) = phi.dim();
    let (t2, d) = theta.dim();
    if w != corpus.vocab_size() || t != t2 || d != corpus.num_docs() {
        return Err(TrainError::DimensionMismatch(format!(
            "phi {w}x{t}, theta {t2}x{d}, corpus W={} D={}",
            corpus.vocab_size(),
            corpus.num_docs()
        )));
    }
    Ok(())
}

/// Log-likelihood of `corpus` under `(phi, theta)`.
///
/// Terms whose mixture probability is zero contribute `ln(1e-30)` and are
/// counted in `floored_terms`.
pub fn log_likelihood<F: Scalar>(
    phi: &Array2<F>,
    theta: &Array2<F>,
    corpus: &Corpus,
) -> Result<LogLikelihood<F>> {
    check_dims(phi, theta, corpus)?;
    let log_floor = F::of(LOG_FLOOR).ln();
    let mut value = F::zero();
    let mut floored_terms = 0;
    for (doc, theta_d) in corpus.documents().iter().zip(theta.columns()) {
        for &(w, c) in doc.terms() {
            let p: F = phi.row(w).iter().zip(theta_d.iter()).map(|(&a, &b)| a * b).sum();
            let lp = if p > F::zero() {
                p.ln()
            } else {
                floored_terms += 1;
                log_floor
            };
            value = value + F::count(c as u64) * lp;
        }
    }
    Ok(LogLikelihood {
        value,
        floored_terms,
    })
}

/// Normalizes `v` in place after clipping at zero. Returns false (and fills
/// uniform) when nothing positive is left.
fn clip_normalize<F: Scalar>(mut v: ArrayViewMut1<F>) -> bool {
    v.mapv_inplace(|x| x.max(F::zero()));
    let sum = v.sum();
    if sum > F::zero() {
        v.mapv_inplace(|x| x / sum);
        true
    } else {
        let u = F::one() / F::count(v.len() as u64);
        v.fill(u);
        false
    }
}

impl<F: Scalar> TopicModel<F> {
    /// Seeded random `phi` with positive entries, uniform `theta`.
    pub fn initialize(spec: &ModelSpec, corpus: &Corpus) -> Result<Self> {
        spec.validate()?;
        let (words, topics, docs) = (corpus.vocab_size(), spec.topics, corpus.num_docs());
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut phi = Array2::from_shape_fn((words, topics), |_| F::of(1.0 - rng.random::<f64>()));
        for col in phi.columns_mut() {
            clip_normalize(col);
        }
        let theta = Array2::from_elem((topics, docs), F::one() / F::count(topics as u64));
        let ll = log_likelihood(&phi, &theta, corpus)?;
        Ok(Self {
            phi,
            theta,
            n_wt: Array2::zeros((words, topics)),
            log_likelihood: ll.value,
            trajectory: vec![ll.value],
            spec: spec.clone(),
        })
    }

    pub fn num_topics(&self) -> usize {
        self.phi.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.nrows()
    }

    pub fn num_docs(&self) -> usize {
        self.theta.ncols()
    }

    /// Replaces `theta`, e.g. with fold-in estimates for a held-out corpus.
    pub fn with_theta(&self, theta: Array2<F>) -> Self {
        Self {
            theta,
            ..self.clone()
        }
    }

    /// One regularized EM pass over `corpus`.
    pub fn em_step(&mut self, corpus: &Corpus) -> Result<StepReport> {
        check_dims(&self.phi, &self.theta, corpus)?;
        let topics = self.num_topics();
        let iteration = self.trajectory.len();
        let mut report = StepReport::default();
        let theta_prior = self.spec.theta_prior::<F>();

        let mut n_wt = Array2::<F>::zeros(self.phi.raw_dim());
        let mut new_theta = Array2::<F>::zeros(self.theta.raw_dim());
        let mut weights = vec![F::zero(); topics];
        for ((doc, theta_d), mut new_theta_d) in corpus
            .documents()
            .iter()
            .zip(self.theta.columns())
            .zip(new_theta.columns_mut())
        {
            for &(w, c) in doc.terms() {
                let phi_w = self.phi.row(w);
                let mut z = F::zero();
                for ((wt, &p), &th) in weights.iter_mut().zip(phi_w.iter()).zip(theta_d.iter()) {
                    *wt = p * th;
                    z = z + *wt;
                }
                if z <= F::zero() {
                    report.unassigned_tokens += c as u64;
                    continue;
                }
                let scale = F::count(c as u64) / z;
                let mut n_w = n_wt.row_mut(w);
                for ((n, acc), &wt) in n_w.iter_mut().zip(new_theta_d.iter_mut()).zip(&weights) {
                    let share = wt * scale;
                    *n = *n + share;
                    *acc = *acc + share;
                }
            }
            for (x, &a) in new_theta_d.iter_mut().zip(&theta_prior) {
                *x = *x + a;
            }
            if !clip_normalize(new_theta_d) {
                report.reset_theta_columns += 1;
            }
        }

        let mut new_phi = n_wt.clone();
        if let Some(r) = self.spec.phi_pseudocounts(self.phi.view()) {
            new_phi.zip_mut_with(&r, |x, &y| *x = *x + y);
        }
        for (t, col) in new_phi.columns_mut().into_iter().enumerate() {
            if !clip_normalize(col) {
                report.reset_phi_columns.push(t);
            }
        }

        for (name, m) in [("phi", &new_phi), ("theta", &new_theta), ("n_wt", &n_wt)] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(TrainError::NonFinite {
                    matrix: name,
                    iteration,
                });
            }
        }
        if !report.reset_phi_columns.is_empty() {
            log::warn!(
                "{} T={}: phi columns {:?} reset to uniform at iteration {iteration}",
                self.spec.family,
                topics,
                report.reset_phi_columns
            );
        }
        if report.reset_theta_columns > 0 {
            log::warn!(
                "{} T={}: {} theta columns reset to uniform at iteration {iteration}",
                self.spec.family,
                topics,
                report.reset_theta_columns
            );
        }

        self.phi = new_phi;
        self.theta = new_theta;
        self.n_wt = n_wt;
        let ll = log_likelihood(&self.phi, &self.theta, corpus)?;
        if !ll.value.is_finite() {
            return Err(TrainError::NonFinite {
                matrix: "log_likelihood",
                iteration,
            });
        }
        report.floored_terms = ll.floored_terms;
        self.log_likelihood = ll.value;
        self.trajectory.push(ll.value);
        Ok(report)
    }

    /// Column sums of `phi` (length `T`) and `theta` (length `D`).
    pub fn column_sums(&self) -> (Vec<F>, Vec<F>) {
        (
            self.phi.sum_axis(Axis(0)).to_vec(),
            self.theta.sum_axis(Axis(0)).to_vec(),
        )
    }

    /// Estimates `theta` for every document of `corpus` with `phi` frozen,
    /// applying this family's theta-side pseudocounts.
    pub fn infer_theta(&self, corpus: &Corpus, iterations: usize) -> Result<Array2<F>> {
        if corpus.vocab_size() != self.vocab_size() {
            return Err(TrainError::DimensionMismatch(format!(
                "model W={} but corpus W={}",
                self.vocab_size(),
                corpus.vocab_size()
            )));
        }
        let prior = self.spec.theta_prior::<F>();
        let mut theta = Array2::zeros((self.num_topics(), corpus.num_docs()));
        for (doc, mut col) in corpus.documents().iter().zip(theta.columns_mut()) {
            let est = fold_in_with_prior(&self.phi, doc.terms(), iterations, &prior)?;
            col.iter_mut().zip(est).for_each(|(dst, v)| *dst = v);
        }
        Ok(theta)
    }

    /// Writes `phi` (one row per word) as CSV with a header of topic labels.
    pub fn write_phi_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_matrix_csv(self.phi.view(), out)
    }

    /// Writes `theta` transposed (one row per document) as CSV with a header of topic labels.
    pub fn write_theta_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_matrix_csv(self.theta.t(), out)
    }
}

/// Writes a matrix whose columns are topics as CSV.
pub fn write_matrix_csv<F: Scalar, W: Write>(m: ArrayView2<F>, mut out: W) -> std::io::Result<()> {
    let header: Vec<String> = (0..m.ncols()).map(|t| format!("topic_{t}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()
}

/// Initializes and runs `spec.iterations` EM steps.
pub fn train<F: Scalar>(spec: &ModelSpec, corpus: &Corpus) -> Result<TopicModel<F>> {
    if corpus.num_docs() == 0 {
        return Err(TrainError::InvalidSpec("cannot train on an empty corpus".into()));
    }
    let mut model = TopicModel::initialize(spec, corpus)?;
    for _ in 0..spec.iterations {
        model.em_step(corpus)?;
    }
    Ok(model)
}

/// Infers `theta_d` for a single document with `phi` frozen, starting uniform.
pub fn fold_in<F: Scalar>(phi: &Array2<F>, doc: &[(usize, u32)], iterations: usize) -> Result<Vec<F>> {
    fold_in_with_prior(phi, doc, iterations, &vec![F::zero(); phi.ncols()])
}

/// [`fold_in`] with theta-side pseudocounts `prior` added in every M-step.
pub fn fold_in_with_prior<F: Scalar>(
    phi: &Array2<F>,
    doc: &[(usize, u32)],
    iterations: usize,
    prior: &[F],
) -> Result<Vec<F>> {
    let (words, topics) = phi.dim();
    if prior.len() != topics {
        return Err(TrainError::DimensionMismatch(format!(
            "prior has {} entries for {topics} topics",
            prior.len()
        )));
    }
    if doc.iter().all(|&(_, c)| c == 0) {
        return Err(TrainError::UnseenDocument);
    }
    if let Some(&(w, _)) = doc.iter().find(|&&(w, _)| w >= words) {
        return Err(TrainError::DimensionMismatch(format!("word {w} outside W={words}")));
    }
    let mut theta = vec![F::one() / F::count(topics as u64); topics];
    let mut acc = vec![F::zero(); topics];
    for _ in 0..iterations {
        acc.iter_mut().zip(prior).for_each(|(a, &p)| *a = p);
        for &(w, c) in doc {
            let phi_w = phi.row(w);
            let z: F = phi_w.iter().zip(&theta).map(|(&p, &th)| p * th).sum();
            if z <= F::zero() {
                continue;
            }
            let scale = F::count(c as u64) / z;
            for ((a, &p), &th) in acc.iter_mut().zip(phi_w.iter()).zip(&theta) {
                *a = *a + p * th * scale;
            }
        }
        std::mem::swap(&mut theta, &mut acc);
        clip_normalize(ArrayViewMut1::from(&mut theta[..]));
    }
    Ok(theta)
}
