//! Firm vectors: Boolean and TF-IDF bag-of-words embeddings plus the
//! PV-DM neural embedding. Every emitted vector has unit Euclidean norm.

mod pvdm;

pub use pvdm::{train_pvdm, PvdmTrained};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::textprep::{TokenizedDoc, Vocabulary};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("document (cik {cik}, year {year}) embeds to the zero vector: {reason}")]
    ZeroVector { cik: u64, year: i32, reason: String },
    #[error("document (cik {cik}, year {year}) has {tokens} tokens; PV-DM needs at least window + 1 = {required}")]
    DocTooShort {
        cik: u64,
        year: i32,
        tokens: usize,
        required: usize,
    },
    #[error("non-finite PV-DM loss at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid PV-DM parameters: {0}")]
    BadParams(String),
    #[error("vector dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("model tag mismatch: expected {expected}, got {got}")]
    ModelMismatch { expected: ModelTag, got: ModelTag },
    #[error("failed to read/write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not an embedding file (bad magic or version)")]
    BadFormat { path: PathBuf },
}

/// Which embedding model produced a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelTag {
    Boolean,
    Tfidf,
    Pvdm,
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelTag::Boolean => "boolean",
            ModelTag::Tfidf => "tfidf",
            ModelTag::Pvdm => "pvdm",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "boolean" => Ok(ModelTag::Boolean),
            "tfidf" => Ok(ModelTag::Tfidf),
            "pvdm" => Ok(ModelTag::Pvdm),
            other => Err(format!("unknown model tag `{other}`")),
        }
    }
}

/// Vector storage: sparse for bag-of-words models, dense for PV-DM.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorData {
    Sparse {
        dim: usize,
        /// `(index, value)` pairs with strictly increasing indices.
        entries: Vec<(u32, f64)>,
    },
    Dense(Vec<f64>),
}

impl VectorData {
    pub fn dim(&self) -> usize {
        match self {
            VectorData::Sparse { dim, .. } => *dim,
            VectorData::Dense(v) => v.len(),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            VectorData::Sparse { entries, .. } => {
                entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
            }
            VectorData::Dense(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    fn scale(&mut self, factor: f64) {
        match self {
            VectorData::Sparse { entries, .. } => {
                for (_, v) in entries.iter_mut() {
                    *v *= factor;
                }
            }
            VectorData::Dense(v) => {
                for x in v.iter_mut() {
                    *x *= factor;
                }
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            VectorData::Sparse { dim, entries } => {
                let mut out = vec![0.0; *dim];
                for &(i, v) in entries {
                    out[i as usize] = v;
                }
                out
            }
            VectorData::Dense(v) => v.clone(),
        }
    }

    fn dot(&self, other: &VectorData) -> f64 {
        match (self, other) {
            (VectorData::Sparse { entries: a, .. }, VectorData::Sparse { entries: b, .. }) => {
                let mut sum = 0.0;
                let (mut i, mut j) = (0, 0);
                while i < a.len() && j < b.len() {
                    match a[i].0.cmp(&b[j].0) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            sum += a[i].1 * b[j].1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
                sum
            }
            (VectorData::Sparse { entries, .. }, VectorData::Dense(d))
            | (VectorData::Dense(d), VectorData::Sparse { entries, .. }) => {
                entries.iter().map(|&(i, v)| v * d[i as usize]).sum()
            }
            (VectorData::Dense(a), VectorData::Dense(b)) => {
                a.iter().zip(b).map(|(x, y)| x * y).sum()
            }
        }
    }
}

/// A unit-length embedding of one firm-year document.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmVector {
    pub cik: u64,
    pub year: i32,
    pub model: ModelTag,
    values: VectorData,
}

impl FirmVector {
    /// Normalize `values` to unit length. A zero vector is an error naming
    /// the firm-year.
    pub fn normalized(
        cik: u64,
        year: i32,
        model: ModelTag,
        mut values: VectorData,
        zero_reason: &str,
    ) -> Result<Self, EmbedError> {
        let norm = values.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbedError::ZeroVector {
                cik,
                year,
                reason: zero_reason.to_string(),
            });
        }
        values.scale(1.0 / norm);
        Ok(FirmVector {
            cik,
            year,
            model,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.dim()
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }

    pub fn dot(&self, other: &FirmVector) -> f64 {
        self.values.dot(&other.values)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        self.values.to_dense()
    }

    pub fn values(&self) -> &VectorData {
        &self.values
    }
}

/// Boolean word-vector embedding: component `i` is 1 when dictionary word
/// `i` occurs in the document, then the vector is unit-normalized.
/// Invariant to token order and multiplicity.
pub fn embed_boolean(doc: &TokenizedDoc, vocab: &Vocabulary) -> Result<FirmVector, EmbedError> {
    if vocab.is_empty() {
        return Err(EmbedError::EmptyVocabulary);
    }
    let present: HashSet<usize> = doc
        .tokens
        .iter()
        .filter_map(|t| vocab.index_of(t))
        .collect();
    let mut entries: Vec<(u32, f64)> = present.into_iter().map(|i| (i as u32, 1.0)).collect();
    entries.sort_unstable_by_key(|&(i, _)| i);
    FirmVector::normalized(
        doc.cik,
        doc.year,
        ModelTag::Boolean,
        VectorData::Sparse {
            dim: vocab.len(),
            entries,
        },
        "no document token appears in the dictionary",
    )
}

/// TF-IDF embedding over the corpus `docs`, which is the `F` of the idf
/// denominator: raw component `i` is
/// `count(word_i, doc) * ln(|F| / docs(word_i, F))`, then each document is
/// unit-normalized. Natural log; the base cancels under normalization.
pub fn embed_tfidf(
    docs: &[TokenizedDoc],
    vocab: &Vocabulary,
) -> Result<Vec<FirmVector>, EmbedError> {
    if vocab.is_empty() {
        return Err(EmbedError::EmptyVocabulary);
    }
    if docs.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    let corpus_size = docs.len() as f64;
    // Document frequencies over this corpus (presence, not counts).
    let mut df = vec![0u32; vocab.len()];
    for doc in docs {
        let distinct: HashSet<usize> = doc
            .tokens
            .iter()
            .filter_map(|t| vocab.index_of(t))
            .collect();
        for i in distinct {
            df[i] += 1;
        }
    }
    docs.iter()
        .map(|doc| {
            let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
            for token in &doc.tokens {
                if let Some(i) = vocab.index_of(token) {
                    *counts.entry(i).or_insert(0) += 1;
                }
            }
            let entries: Vec<(u32, f64)> = counts
                .into_iter()
                .filter_map(|(index, count)| {
                    let weight = f64::from(count) * (corpus_size / f64::from(df[index])).ln();
                    (weight != 0.0).then_some((index as u32, weight))
                })
                .collect();
            FirmVector::normalized(
                doc.cik,
                doc.year,
                ModelTag::Tfidf,
                VectorData::Sparse {
                    dim: vocab.len(),
                    entries,
                },
                "all matching dictionary words occur in every document (idf 0)",
            )
        })
        .collect()
}

/// PV-DM training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PvdmParams {
    /// Embedding dimension.
    pub dim: usize,
    /// Preceding-context window size.
    pub window: usize,
    pub epochs: usize,
    /// Initial learning rate; decays linearly per epoch.
    pub learning_rate: f64,
    pub negative_samples: usize,
    pub seed: u64,
}

impl Default for PvdmParams {
    fn default() -> Self {
        PvdmParams {
            dim: 300,
            window: 8,
            epochs: 20,
            learning_rate: 0.025,
            negative_samples: 5,
            seed: 0,
        }
    }
}

impl PvdmParams {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim < 2 {
            return Err(EmbedError::BadParams(format!(
                "dim must be >= 2, got {}",
                self.dim
            )));
        }
        if self.window < 1 {
            return Err(EmbedError::BadParams("window must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(EmbedError::BadParams("epochs must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(EmbedError::BadParams(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

const EMBEDDING_MAGIC: &[u8; 4] = b"PDVE";
const EMBEDDING_FORMAT_VERSION: u8 = 1;

/// A stack of unit-length firm vectors sharing one model and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    model: ModelTag,
    dim: usize,
    vectors: Vec<FirmVector>,
}

impl EmbeddingMatrix {
    /// Assemble a matrix, checking that every vector carries the same
    /// model tag and dimension. Rows are sorted by `(year, cik)`.
    pub fn from_vectors(model: ModelTag, mut vectors: Vec<FirmVector>) -> Result<Self, EmbedError> {
        if vectors.is_empty() {
            return Err(EmbedError::EmptyCorpus);
        }
        let dim = vectors[0].dim();
        for v in &vectors {
            if v.model != model {
                return Err(EmbedError::ModelMismatch {
                    expected: model,
                    got: v.model,
                });
            }
            if v.dim() != dim {
                return Err(EmbedError::DimMismatch {
                    expected: dim,
                    got: v.dim(),
                });
            }
        }
        vectors.sort_by_key(|v| (v.year, v.cik));
        Ok(EmbeddingMatrix {
            model,
            dim,
            vectors,
        })
    }

    pub fn model(&self) -> ModelTag {
        self.model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[FirmVector] {
        &self.vectors
    }

    /// Vectors for one filing year, in cik order.
    pub fn for_year(&self, year: i32) -> Vec<&FirmVector> {
        self.vectors.iter().filter(|v| v.year == year).collect()
    }

    /// Distinct years present, ascending.
    pub fn years(&self) -> Vec<i32> {
        let mut years: Vec<i32> = self.vectors.iter().map(|v| v.year).collect();
        years.dedup();
        years
    }

    /// Binary serialization: magic, format version, stamp, model tag,
    /// dimension, row count, then per row `cik, year, d * f64`
    /// (little-endian).
    pub fn write_binary(&self, path: &Path, stamp: &crate::RunStamp) -> Result<(), EmbedError> {
        let io_err = |source| EmbedError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        w.write_all(EMBEDDING_MAGIC).map_err(io_err)?;
        w.write_u8(EMBEDDING_FORMAT_VERSION).map_err(io_err)?;
        write_string(&mut w, &stamp.to_string()).map_err(io_err)?;
        write_string(&mut w, &self.model.to_string()).map_err(io_err)?;
        w.write_u32::<LittleEndian>(self.dim as u32)
            .map_err(io_err)?;
        w.write_u32::<LittleEndian>(self.vectors.len() as u32)
            .map_err(io_err)?;
        for v in &self.vectors {
            w.write_u64::<LittleEndian>(v.cik).map_err(io_err)?;
            w.write_i32::<LittleEndian>(v.year).map_err(io_err)?;
            for x in v.to_dense() {
                w.write_f64::<LittleEndian>(x).map_err(io_err)?;
            }
        }
        w.flush().map_err(io_err)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self, EmbedError> {
        let io_err = |source| EmbedError::Io {
            path: path.to_path_buf(),
            source,
        };
        let bad_format = || EmbedError::BadFormat {
            path: path.to_path_buf(),
        };
        let file = std::fs::File::open(path).map_err(io_err)?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != EMBEDDING_MAGIC {
            return Err(bad_format());
        }
        if r.read_u8().map_err(io_err)? != EMBEDDING_FORMAT_VERSION {
            return Err(bad_format());
        }
        let _stamp = read_string(&mut r).map_err(io_err)?;
        let model =
            ModelTag::from_str(&read_string(&mut r).map_err(io_err)?).map_err(|_| bad_format())?;
        let dim = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let rows = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let mut vectors = Vec::with_capacity(rows);
        for _ in 0..rows {
            let cik = r.read_u64::<LittleEndian>().map_err(io_err)?;
            let year = r.read_i32::<LittleEndian>().map_err(io_err)?;
            let mut values = vec![0.0; dim];
            r.read_f64_into::<LittleEndian>(&mut values)
                .map_err(io_err)?;
            vectors.push(FirmVector {
                cik,
                year,
                model,
                values: VectorData::Dense(values),
            });
        }
        Self::from_vectors(model, vectors)
    }

    /// CSV index mapping each firm-year to its row in the binary file.
    pub fn write_index_csv(&self, path: &Path, stamp: &crate::RunStamp) -> Result<(), EmbedError> {
        let io_err = |source| EmbedError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        writeln!(file, "{}", stamp.comment_line()).map_err(io_err)?;
        writeln!(file, "cik,year,row").map_err(io_err)?;
        for (row, v) in self.vectors.iter().enumerate() {
            writeln!(file, "{},{},{}", v.cik, v.year, row).map_err(io_err)?;
        }
        Ok(())
    }

    /// Full dense export for external projection tools (t-SNE and friends).
    pub fn write_csv(&self, path: &Path, stamp: &crate::RunStamp) -> Result<(), EmbedError> {
        let io_err = |source| EmbedError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        writeln!(file, "{}", stamp.comment_line()).map_err(io_err)?;
        let mut header = String::from("cik,year");
        for i in 0..self.dim {
            header.push_str(&format!(",v{i}"));
        }
        writeln!(file, "{header}").map_err(io_err)?;
        for v in &self.vectors {
            let mut line = format!("{},{}", v.cik, v.year);
            for x in v.to_dense() {
                line.push_str(&format!(",{x}"));
            }
            writeln!(file, "{line}").map_err(io_err)?;
        }
        Ok(())
    }
}

fn write_string<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_string<R: Read>(r: &mut R) -> std::io::Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    if len > 1 << 20 {
        return Err(std::io::Error::other("unreasonable string length"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(std::io::Error::other)
}
