//! Bag-of-words corpora: loading, splitting, subsampling and synthesis.
//!
//! The on-disk format is UCI bag-of-words: a `docword` file with three header
//! lines (`D`, `W`, `NNZ`) followed by `docID wordID count` triples (1-based),
//! and a `vocab` file with one token per line.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed entry on line {line}: {reason}")]
    MalformedEntry { line: usize, reason: String },
    #[error("index out of range on line {line}: {what} {index} exceeds declared {limit}")]
    IndexOutOfRange {
        line: usize,
        what: &'static str,
        index: i64,
        limit: usize,
    },
    #[error("negative count {count} on line {line}")]
    NegativeCount { line: usize, count: i64 },
    #[error("duplicate entry for document {doc}, word {word}")]
    DuplicateEntry { doc: usize, word: usize },
    #[error("vocabulary has {0} tokens, at least 2 are required")]
    VocabularyTooSmall(usize),
    #[error("vocabulary file has {found} tokens but docword header declares {declared}")]
    VocabularyMismatch { found: usize, declared: usize },
    #[error("duplicate token {0:?} in vocabulary")]
    DuplicateToken(String),
    #[error("declared {declared} nonzero entries, found {found}")]
    NnzMismatch { declared: usize, found: usize },
    #[error("document {0} is empty")]
    EmptyDocument(usize),
    #[error("word index {index} outside vocabulary of size {size}")]
    WordOutOfVocabulary { index: usize, size: usize },
    #[error("fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("split of {docs} documents at fraction {fraction} leaves one side empty")]
    EmptySplit { docs: usize, fraction: f64 },
    #[error("subsample fraction {fraction} of {docs} documents selects no documents")]
    EmptySubsample { docs: usize, fraction: f64 },
    #[error("invalid synthesis parameters: {0}")]
    BadSynthesis(String),
}

type Result<T> = std::result::Result<T, CorpusError>;

/// Ordered set of unique tokens; index and token are in bijection.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 {
            return Err(CorpusError::VocabularyTooSmall(tokens.len()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i).is_some() {
                return Err(CorpusError::DuplicateToken(tok.clone()));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, w: usize) -> &str {
        &self.tokens[w]
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// One document as sorted `(word index, count)` pairs with nonzero counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    id: usize,
    terms: Vec<(usize, u32)>,
    length: u64,
}

impl Document {
    /// Builds a document, sorting terms and dropping zero counts.
    pub fn new(id: usize, mut terms: Vec<(usize, u32)>) -> Result<Self> {
        terms.retain(|&(_, c)| c > 0);
        terms.sort_unstable_by_key(|&(w, _)| w);
        if let Some(pair) = terms.windows(2).find(|p| p[0].0 == p[1].0) {
            return Err(CorpusError::DuplicateEntry {
                doc: id,
                word: pair[0].0,
            });
        }
        let length = terms.iter().map(|&(_, c)| c as u64).sum();
        Ok(Self { id, terms, length })
    }

    /// Identifier carried over from the source file (1-based for UCI input).
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn terms(&self) -> &[(usize, u32)] {
        &self.terms
    }

    /// Token total `n_d`.
    pub fn len(&self) -> u64 {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn contains(&self, w: usize) -> bool {
        self.terms.binary_search_by_key(&w, |&(x, _)| x).is_ok()
    }
}

/// Immutable document-term count matrix with its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    vocab: Arc<Vocabulary>,
    docs: Vec<Document>,
    total: u64,
}

impl Corpus {
    /// Builds a corpus; every document must be nonempty and in-vocabulary.
    pub fn new(vocab: Arc<Vocabulary>, docs: Vec<Document>) -> Result<Self> {
        let size = vocab.len();
        for doc in &docs {
            if doc.is_empty() {
                return Err(CorpusError::EmptyDocument(doc.id));
            }
            if let Some(&(w, _)) = doc.terms.last() {
                if w >= size {
                    return Err(CorpusError::WordOutOfVocabulary { index: w, size });
                }
            }
        }
        let total = docs.iter().map(Document::len).sum();
        Ok(Self { vocab, docs, total })
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Total token count `n`.
    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn doc_lengths(&self) -> Vec<u64> {
        self.docs.iter().map(Document::len).collect()
    }

    pub fn doc_ids(&self) -> Vec<usize> {
        self.docs.iter().map(Document::id).collect()
    }

    /// Corpus-wide count of every word.
    pub fn word_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.vocab_size()];
        for doc in &self.docs {
            for &(w, c) in &doc.terms {
                counts[w] += c as u64;
            }
        }
        counts
    }

    fn with_docs(&self, docs: Vec<Document>) -> Self {
        let total = docs.iter().map(Document::len).sum();
        Self {
            vocab: Arc::clone(&self.vocab),
            docs,
            total,
        }
    }
}

/// Documents removed during loading because their total count was zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropReport {
    pub dropped_doc_ids: Vec<usize>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads a UCI bag-of-words corpus from disk.
pub fn load_uci(docword_path: &Path, vocab_path: &Path) -> Result<(Corpus, DropReport)> {
    let vocab_file = File::open(vocab_path).map_err(io_err(vocab_path))?;
    let docword_file = File::open(docword_path).map_err(io_err(docword_path))?;
    read_uci(BufReader::new(docword_file), BufReader::new(vocab_file))
}

/// Reads a vocabulary: one token per line, trailing blank lines ignored.
pub fn read_vocab<R: BufRead>(reader: R) -> Result<Vocabulary> {
    let mut tokens = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|source| CorpusError::Io {
            path: "<vocab>".into(),
            source,
        })?;
        tokens.push(line.trim_end_matches('\r').to_string());
    }
    while tokens.last().is_some_and(|t| t.is_empty()) {
        tokens.pop();
    }
    Vocabulary::new(tokens)
}

/// Parses UCI docword and vocab streams.
pub fn read_uci<R1: Read, R2: BufRead>(docword: R1, vocab: R2) -> Result<(Corpus, DropReport)> {
    let vocab = read_vocab(vocab)?;
    let mut text = String::new();
    BufReader::new(docword)
        .read_to_string(&mut text)
        .map_err(|source| CorpusError::Io {
            path: "<docword>".into(),
            source,
        })?;

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["D", "W", "NNZ"]) {
        let (_, line) = lines
            .next()
            .ok_or_else(|| CorpusError::MalformedHeader(format!("missing {name} line")))?;
        *slot = line
            .parse()
            .map_err(|_| CorpusError::MalformedHeader(format!("{name} line {line:?} is not a count")))?;
    }
    let [num_docs, num_words, nnz] = header;
    if num_words < 2 {
        return Err(CorpusError::VocabularyTooSmall(num_words));
    }
    if vocab.len() != num_words {
        return Err(CorpusError::VocabularyMismatch {
            found: vocab.len(),
            declared: num_words,
        });
    }

    let mut per_doc: Vec<Vec<(usize, u32)>> = vec![Vec::new(); num_docs];
    let mut found = 0usize;
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(CorpusError::MalformedEntry {
                line: line_no,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let mut parsed = [0i64; 3];
        for (slot, field) in parsed.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| CorpusError::MalformedEntry {
                line: line_no,
                reason: format!("{field:?} is not an integer"),
            })?;
        }
        let [doc, word, count] = parsed;
        if doc < 1 || doc as usize > num_docs {
            return Err(CorpusError::IndexOutOfRange {
                line: line_no,
                what: "docID",
                index: doc,
                limit: num_docs,
            });
        }
        if word < 1 || word as usize > num_words {
            return Err(CorpusError::IndexOutOfRange {
                line: line_no,
                what: "wordID",
                index: word,
                limit: num_words,
            });
        }
        if count < 0 {
            return Err(CorpusError::NegativeCount {
                line: line_no,
                count,
            });
        }
        let count = u32::try_from(count).map_err(|_| CorpusError::MalformedEntry {
            line: line_no,
            reason: format!("count {count} too large"),
        })?;
        per_doc[doc as usize - 1].push((word as usize - 1, count));
        found += 1;
    }
    if found != nnz {
        return Err(CorpusError::NnzMismatch {
            declared: nnz,
            found,
        });
    }

    let mut report = DropReport::default();
    let mut docs = Vec::with_capacity(num_docs);
    for (i, terms) in per_doc.into_iter().enumerate() {
        let doc = Document::new(i + 1, terms)?;
        if doc.is_empty() {
            report.dropped_doc_ids.push(i + 1);
        } else {
            docs.push(doc);
        }
    }
    if !report.dropped_doc_ids.is_empty() {
        log::warn!(
            "dropped {} empty documents: {:?}",
            report.dropped_doc_ids.len(),
            report.dropped_doc_ids
        );
    }
    Ok((Corpus::new(Arc::new(vocab), docs)?, report))
}

/// Serializes a corpus in UCI format; documents are renumbered `1..=D`.
pub fn write_uci<W1: Write, W2: Write>(
    corpus: &Corpus,
    mut docword: W1,
    mut vocab: W2,
) -> std::io::Result<()> {
    let nnz: usize = corpus.docs.iter().map(|d| d.terms.len()).sum();
    writeln!(docword, "{}", corpus.num_docs())?;
    writeln!(docword, "{}", corpus.vocab_size())?;
    writeln!(docword, "{nnz}")?;
    for (i, doc) in corpus.docs.iter().enumerate() {
        for &(w, c) in &doc.terms {
            writeln!(docword, "{} {} {}", i + 1, w + 1, c)?;
        }
    }
    for tok in corpus.vocab.tokens() {
        writeln!(vocab, "{tok}")?;
    }
    docword.flush()?;
    vocab.flush()
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction.is_finite() && fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(CorpusError::BadFraction(fraction))
    }
}

// Guards ceil/floor against representation error such as 0.7 * 10 = 7.000000000000001.
const ROUNDING_SLACK: f64 = 1e-9;

/// Splits off the first `ceil(fraction * D)` documents as train, in order.
pub fn train_test_split(corpus: &Corpus, train_fraction: f64) -> Result<(Corpus, Corpus)> {
    check_fraction(train_fraction)?;
    let d = corpus.num_docs();
    let n_train = (train_fraction * d as f64 - ROUNDING_SLACK).ceil().max(0.0) as usize;
    if n_train == 0 || n_train >= d {
        return Err(CorpusError::EmptySplit {
            docs: d,
            fraction: train_fraction,
        });
    }
    let (train, test) = corpus.docs.split_at(n_train);
    Ok((corpus.with_docs(train.to_vec()), corpus.with_docs(test.to_vec())))
}

/// Draws `floor(fraction * D)` distinct documents uniformly without replacement.
///
/// Selected documents keep their original relative order.
pub fn subsample(corpus: &Corpus, fraction: f64, seed: u64) -> Result<Corpus> {
    check_fraction(fraction)?;
    let d = corpus.num_docs();
    let k = (fraction * d as f64 + ROUNDING_SLACK).floor() as usize;
    if k == 0 {
        return Err(CorpusError::EmptySubsample { docs: d, fraction });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, d, k).into_vec();
    picked.sort_unstable();
    Ok(corpus.with_docs(picked.into_iter().map(|i| corpus.docs[i].clone()).collect()))
}

/// Parameters of the generative process behind [`synthesize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub topics: usize,
    pub words: usize,
    pub docs: usize,
    pub doc_len: usize,
    pub concentration: f64,
    pub seed: u64,
}

/// A generated corpus together with its generating matrices.
#[derive(Debug, Clone)]
pub struct Synthetic<F> {
    pub corpus: Corpus,
    /// `W x T` word-in-topic matrix.
    pub phi: Array2<F>,
    /// `T x D` topic-in-document matrix.
    pub theta: Array2<F>,
}

/// Samples a symmetric Dirichlet vector in log space.
///
/// Uses `Gamma(a) = Gamma(a + 1) * U^(1/a)`, so tiny concentrations do not
/// underflow to an all-zero draw.
fn dirichlet<R: Rng>(rng: &mut R, gamma: &Gamma<f64>, concentration: f64, len: usize) -> Vec<f64> {
    let logs: Vec<f64> = (0..len)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            g.ln() + u.ln() / concentration
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / sum).collect()
}

/// Generates a corpus from a known topic model.
///
/// Columns of `phi` and `theta` are symmetric Dirichlet draws; each token is
/// produced by drawing a topic from the document's `theta` column, then a word
/// from that topic's `phi` column.
pub fn synthesize<F: Scalar>(params: &SynthParams) -> Result<Synthetic<F>> {
    let SynthParams {
        topics,
        words,
        docs,
        doc_len,
        concentration,
        seed,
    } = *params;
    if topics == 0 || docs == 0 || doc_len == 0 {
        return Err(CorpusError::BadSynthesis("sizes must be positive".into()));
    }
    if words < 2 || words < topics {
        return Err(CorpusError::BadSynthesis(format!(
            "need W >= max(2, T), got W={words}, T={topics}"
        )));
    }
    if !(concentration.is_finite() && concentration > 0.0) {
        return Err(CorpusError::BadSynthesis(format!(
            "concentration {concentration} must be positive"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(1.0 + concentration, 1.0)
        .map_err(|e| CorpusError::BadSynthesis(e.to_string()))?;

    let phi_cols: Vec<Vec<f64>> = (0..topics)
        .map(|_| dirichlet(&mut rng, &gamma, concentration, words))
        .collect();
    let theta_cols: Vec<Vec<f64>> = (0..docs)
        .map(|_| dirichlet(&mut rng, &gamma, concentration, topics))
        .collect();

    let word_samplers: Vec<WeightedIndex<f64>> = phi_cols
        .iter()
        .map(|col| WeightedIndex::new(col).expect("dirichlet column has positive mass"))
        .collect();

    let mut documents = Vec::with_capacity(docs);
    let mut counts = vec![0u32; words];
    for (d, theta_d) in theta_cols.iter().enumerate() {
        let topic_sampler = WeightedIndex::new(theta_d).expect("dirichlet column has positive mass");
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..doc_len {
            let t = topic_sampler.sample(&mut rng);
            counts[word_samplers[t].sample(&mut rng)] += 1;
        }
        let terms = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(w, &c)| (w, c))
            .collect();
        documents.push(Document::new(d + 1, terms)?);
    }

    let width = (words - 1).to_string().len();
    let vocab = Vocabulary::new((0..words).map(|w| format!("w{w:0width$}")).collect())?;
    let corpus = Corpus::new(Arc::new(vocab), documents)?;
    let phi = Array2::from_shape_fn((words, topics), |(w, t)| F::of(phi_cols[t][w]));
    let theta = Array2::from_shape_fn((topics, docs), |(t, d)| F::of(theta_cols[d][t]));
    Ok(Synthetic { corpus, phi, theta })
}
