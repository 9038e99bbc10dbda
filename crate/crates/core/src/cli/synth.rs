use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::corpus::{synthesize, write_uci, SynthParams};
use crate::trainer::write_matrix_csv;

use super::config::DatasetEntry;
use super::{CliError, Outcome};

#[derive(Debug, Clone, clap::Args)]
pub struct SynthArgs {
    /// Number of generating topics.
    #[arg(long)]
    pub topics: usize,
    #[arg(long, default_value_t = 200)]
    pub words: usize,
    #[arg(long, default_value_t = 500)]
    pub docs: usize,
    /// Tokens per document.
    #[arg(long, default_value_t = 100)]
    pub doc_len: usize,
    /// Symmetric Dirichlet concentration for both topic and document draws.
    #[arg(long, default_value_t = 0.05)]
    pub concentration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset name written into `dataset.toml`; also the default output directory.
    #[arg(long, default_value = "synthetic")]
    pub name: String,
}

#[derive(Serialize)]
struct DatasetFile {
    datasets: Vec<DatasetEntry>,
}

/// Writes `docword.txt`, `vocab.txt`, the generating `phi.csv` (W x T) and
/// `theta.csv` (T x D), and `dataset.toml`, a config registering the corpus
/// with expected range `[T, T]`.
///
/// The config's topic grid runs from `max(1, T - 3)` to `2T + 2`, so the true
/// count sits inside the scan.
pub fn cmd_synth(args: &SynthArgs, out: &Path) -> Result<Outcome, CliError> {
    let params = SynthParams {
        topics: args.topics,
        words: args.words,
        docs: args.docs,
        doc_len: args.doc_len,
        concentration: args.concentration,
        seed: args.seed,
    };
    let synth = synthesize::<f64>(&params).map_err(|e| CliError::Config(e.to_string()))?;
    fs::create_dir_all(out)?;
    write_uci(
        &synth.corpus,
        BufWriter::new(File::create(out.join("docword.txt"))?),
        BufWriter::new(File::create(out.join("vocab.txt"))?),
    )?;
    write_matrix_csv(synth.phi.view(), BufWriter::new(File::create(out.join("phi.csv"))?))?;
    write_matrix_csv(synth.theta.view(), BufWriter::new(File::create(out.join("theta.csv"))?))?;

    let t = args.topics;
    let entry = DatasetEntry {
        name: args.name.clone(),
        docword: PathBuf::from("docword.txt"),
        vocab: PathBuf::from("vocab.txt"),
        expected: Some([t, t]),
        t_min: Some(t.saturating_sub(3).max(1)),
        t_max: Some(2 * t + 2),
        t_step: None,
    };
    let text = toml::to_string(&DatasetFile { datasets: vec![entry] })
        .map_err(|e| CliError::Other(format!("cannot serialize dataset.toml: {e}")))?;
    fs::write(out.join("dataset.toml"), text)?;
    println!(
        "wrote {} documents, {} words, {} tokens to {}",
        synth.corpus.num_docs(),
        synth.corpus.vocab_size(),
        synth.corpus.total_tokens(),
        out.display()
    );
    Ok(Outcome::Complete)
}
