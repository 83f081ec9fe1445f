//! Tokenization, vocabulary construction, and corpus statistics.
//!
//! Cleaning is deliberately lexicon-driven: a plain-text noun list and a
//! stopword list are the only resources, which keeps the pipeline
//! deterministic. Default English lists ship with the crate and can be
//! swapped for any file with one token per line (`#` starts a comment).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Minimum token length kept by the cleaner ("words shorter than 3
/// characters" are dropped; 3-letter words survive).
const MIN_TOKEN_LEN: usize = 3;

/// Default document-frequency cap for the vocabulary.
pub const DEFAULT_MAX_DF: f64 = 0.20;

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("word list {path} contains no tokens")]
    EmptyWordList { path: PathBuf },
    #[error("{0} word set is empty")]
    EmptyWordSet(&'static str),
    #[error("cannot build a vocabulary from zero documents")]
    NoDocuments,
    #[error("max_df must lie in (0, 1], got {0}")]
    BadMaxDf(f64),
}

/// A cleaned, ordered token sequence for one firm-year document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub cik: u64,
    pub year: i32,
    pub tokens: Vec<String>,
}

/// Load a word list: UTF-8, one token per line, `#` comments allowed.
/// Tokens are lowercased.
pub fn load_word_list(path: &Path) -> Result<HashSet<String>, TextprepError> {
    let text = std::fs::read_to_string(path).map_err(|source| TextprepError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let set = parse_word_list(&text);
    if set.is_empty() {
        return Err(TextprepError::EmptyWordList {
            path: path.to_path_buf(),
        });
    }
    Ok(set)
}

fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|line| !line.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

/// The noun lexicon bundled with the crate.
pub fn default_noun_lexicon() -> HashSet<String> {
    parse_word_list(include_str!("../data/nouns.txt"))
}

/// The stopword list bundled with the crate.
pub fn default_stopwords() -> HashSet<String> {
    parse_word_list(include_str!("../data/stopwords.txt"))
}

/// Lowercases, splits on non-alphabetic characters, and keeps tokens that
/// are at least 3 characters, not stopwords, and present in the noun
/// lexicon. Token order is preserved (the PV-DM trainer needs it).
pub struct Tokenizer {
    nouns: HashSet<String>,
    stopwords: HashSet<String>,
}

impl Tokenizer {
    pub fn new(nouns: HashSet<String>, stopwords: HashSet<String>) -> Result<Self, TextprepError> {
        if nouns.is_empty() {
            return Err(TextprepError::EmptyWordSet("noun lexicon"));
        }
        if stopwords.is_empty() {
            return Err(TextprepError::EmptyWordSet("stopword"));
        }
        Ok(Self { nouns, stopwords })
    }

    pub fn tokenize(&self, cik: u64, year: i32, text: &str) -> TokenizedDoc {
        let tokens = text
            .to_lowercase()
            .split(|c: char| !c.is_alphabetic())
            .filter(|t| t.chars().count() >= MIN_TOKEN_LEN)
            .filter(|t| !self.stopwords.contains(*t))
            .filter(|t| self.nouns.contains(*t))
            .map(str::to_string)
            .collect();
        TokenizedDoc { cik, year, tokens }
    }
}

/// The corpus dictionary: distinct words in canonical (lexicographic)
/// order with per-word document frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    doc_freq: Vec<u32>,
    total_docs: usize,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn total_docs(&self) -> usize {
        self.total_docs
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn doc_freq(&self, word: &str) -> Option<u32> {
        self.index_of(word).map(|i| self.doc_freq[i])
    }

    pub fn doc_freq_at(&self, index: usize) -> u32 {
        self.doc_freq[index]
    }
}

/// Build the dictionary over `docs`, keeping exactly the words whose
/// document frequency is strictly below `max_df` (presence-based, per the
/// usual df definition). `max_df` defaults to [`DEFAULT_MAX_DF`] upstream.
pub fn build_vocabulary(docs: &[TokenizedDoc], max_df: f64) -> Result<Vocabulary, TextprepError> {
    if docs.is_empty() {
        return Err(TextprepError::NoDocuments);
    }
    if !(max_df > 0.0 && max_df <= 1.0) {
        return Err(TextprepError::BadMaxDf(max_df));
    }
    let total_docs = docs.len();
    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    for doc in docs {
        let distinct: HashSet<&str> = doc.tokens.iter().map(String::as_str).collect();
        for word in distinct {
            *df.entry(word).or_insert(0) += 1;
        }
    }
    let mut words = Vec::new();
    let mut doc_freq = Vec::new();
    for (word, freq) in df {
        if (f64::from(freq) / total_docs as f64) < max_df {
            words.push(word.to_string());
            doc_freq.push(freq);
        }
    }
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    Ok(Vocabulary {
        words,
        doc_freq,
        total_docs,
        index,
    })
}

/// Per-year corpus statistics: pooled token/type totals and per-document
/// means.
#[derive(Debug, Clone, PartialEq)]
pub struct YearStats {
    pub year: i32,
    pub token_count: u64,
    pub type_count: u64,
    pub mean_tokens: f64,
    pub mean_types: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusStats {
    /// Sorted by year.
    pub years: Vec<YearStats>,
}

/// Totals pool all of a year's documents (distinct types over the pooled
/// year); means average each document's own token and type counts.
pub fn corpus_stats(docs: &[TokenizedDoc]) -> CorpusStats {
    let mut by_year: BTreeMap<i32, Vec<&TokenizedDoc>> = BTreeMap::new();
    for doc in docs {
        by_year.entry(doc.year).or_default().push(doc);
    }
    let years = by_year
        .into_iter()
        .map(|(year, group)| {
            let token_count: u64 = group.iter().map(|d| d.tokens.len() as u64).sum();
            let pooled: HashSet<&str> = group
                .iter()
                .flat_map(|d| d.tokens.iter().map(String::as_str))
                .collect();
            let n = group.len() as f64;
            let mean_tokens = group.iter().map(|d| d.tokens.len() as f64).sum::<f64>() / n;
            let mean_types = group
                .iter()
                .map(|d| {
                    d.tokens
                        .iter()
                        .map(String::as_str)
                        .collect::<HashSet<_>>()
                        .len() as f64
                })
                .sum::<f64>()
                / n;
            YearStats {
                year,
                token_count,
                type_count: pooled.len() as u64,
                mean_tokens,
                mean_types,
            }
        })
        .collect();
    CorpusStats { years }
}

/// Write corpus statistics as CSV (`year,tokens,types,mean_tokens,mean_types`).
pub fn write_stats_csv(
    stats: &CorpusStats,
    path: &Path,
    stamp: &crate::RunStamp,
) -> Result<(), TextprepError> {
    let io_err = |source| TextprepError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    writeln!(file, "{}", stamp.comment_line()).map_err(io_err)?;
    writeln!(file, "year,tokens,types,mean_tokens,mean_types").map_err(io_err)?;
    for y in &stats.years {
        writeln!(
            file,
            "{},{},{},{},{}",
            y.year, y.token_count, y.type_count, y.mean_tokens, y.mean_types
        )
        .map_err(io_err)?;
    }
    Ok(())
}
