//! Diversity and specificity metrics: richness, Shannon entropy,
//! normalized entropy, similarity-sensitive diversity of order q, its
//! adjusted form, PCA-dimension diversity, and SIC industry specificity.
//!
//! The similarity-sensitive family is
//!
//! ```text
//! qD(a, Z) = (sum_i a_i (Za)_i^(q-1))^(1 / (1-q))      for q != 1
//! 1D(a, Z) = exp(-sum_i a_i ln (Za)_i)                 (the q -> 1 limit)
//! ```
//!
//! With an identity `Z` and balanced abundances the value is exactly the
//! class count `s`, which is why the adjusted form divides by `s`.
//! Natural logarithms throughout; one base has to hold globally or the
//! normalized-entropy ratio would silently mix bases.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::embed::FirmVector;
use crate::simspace::{ClassProfile, SimilarityMatrix};

/// Default explained-variance threshold for PCA-dimension diversity.
pub const DEFAULT_PCA_THRESHOLD: f64 = 0.9;

#[derive(Debug, Error)]
pub enum DiversityError {
    #[error("abundance counts must contain at least one positive count")]
    EmptyCounts,
    #[error("labels and counts have different lengths ({labels} vs {counts})")]
    ShapeMismatch { labels: usize, counts: usize },
    #[error("evenness is undefined for a single instantiated class")]
    UndefinedEvenness,
    #[error("q must be non-negative, got {0}")]
    NegativeQ(f64),
    #[error("similarity-weighted abundance (Za)_{index} is zero for a positive class")]
    DegenerateRow { index: usize },
    #[error("PCA diversity needs at least 2 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("vector dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("firm {cik} is not classified")]
    UnclassifiedFirm { cik: u64 },
    #[error("industry specificity needs at least 2 classes")]
    SingleClass,
    #[error("industry specificity needs at least one class with 2 or more firms")]
    NoWithinPairs,
    #[error("mean between-class similarity is zero; specificity is undefined")]
    DegenerateBetween,
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path} row {row}: {problem}")]
    Parse {
        path: PathBuf,
        row: usize,
        problem: String,
    },
}

/// Per-class nonnegative firm counts for one year.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbundanceCounts {
    labels: Vec<u16>,
    counts: Vec<u64>,
}

impl AbundanceCounts {
    pub fn new(labels: Vec<u16>, counts: Vec<u64>) -> Result<Self, DiversityError> {
        if labels.len() != counts.len() {
            return Err(DiversityError::ShapeMismatch {
                labels: labels.len(),
                counts: counts.len(),
            });
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(DiversityError::EmptyCounts);
        }
        Ok(AbundanceCounts { labels, counts })
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    fn positive(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.iter().copied().filter(|&c| c > 0)
    }
}

/// Number of instantiated classes (count > 0).
pub fn richness(counts: &AbundanceCounts) -> usize {
    counts.positive().count()
}

/// Shannon entropy `-sum p_i ln p_i` over instantiated classes.
pub fn shannon_entropy(counts: &AbundanceCounts) -> f64 {
    let total: u64 = counts.positive().sum();
    let total = total as f64;
    -counts
        .positive()
        .map(|c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Evenness: Shannon entropy divided by the log of the number of
/// instantiated classes. Undefined (an error) when only one class is
/// instantiated.
pub fn normalized_entropy(counts: &AbundanceCounts) -> Result<f64, DiversityError> {
    let bins = richness(counts);
    if bins < 2 {
        return Err(DiversityError::UndefinedEvenness);
    }
    Ok(shannon_entropy(counts) / (bins as f64).ln())
}

/// Similarity-sensitive diversity of order `q >= 0`. `q == 1` is computed
/// by the limit formula.
pub fn q_diversity(profile: &ClassProfile, q: f64) -> Result<f64, DiversityError> {
    if q < 0.0 || !q.is_finite() {
        return Err(DiversityError::NegativeQ(q));
    }
    let s = profile.size();
    let a = profile.abundance();
    let mut za = vec![0.0; s];
    for (i, za_i) in za.iter_mut().enumerate() {
        *za_i = (0..s).map(|j| profile.z(i, j) * a[j]).sum();
    }
    for (i, &x) in za.iter().enumerate() {
        // Cannot happen while Z keeps a unit diagonal, but the formula
        // divides by (Za)_i at q < 1, so fail loudly rather than emit NaN.
        if x <= 0.0 && a[i] > 0.0 {
            return Err(DiversityError::DegenerateRow { index: i });
        }
    }
    if (q - 1.0).abs() < 1e-12 {
        let log_sum: f64 = a.iter().zip(&za).map(|(&ai, &zi)| ai * zi.ln()).sum();
        return Ok((-log_sum).exp());
    }
    let sum: f64 = a
        .iter()
        .zip(&za)
        .map(|(&ai, &zi)| ai * zi.powf(q - 1.0))
        .sum();
    Ok(sum.powf(1.0 / (1.0 - q)))
}

/// `qD / s`: diversity rescaled so the identity-Z balanced maximum is 1.
pub fn adjusted_q_diversity(profile: &ClassProfile, q: f64) -> Result<f64, DiversityError> {
    Ok(q_diversity(profile, q)? / profile.size() as f64)
}

/// Number of principal components needed to reach `threshold` of the total
/// variance of the (mean-centered) firm vectors. Zero total variance (all
/// vectors identical) yields 0.
pub fn pca_diversity(vectors: &[FirmVector], threshold: f64) -> Result<usize, DiversityError> {
    if vectors.len() < 2 {
        return Err(DiversityError::TooFewVectors(vectors.len()));
    }
    let n = vectors.len();
    let d = vectors[0].dim();
    for v in vectors {
        if v.dim() != d {
            return Err(DiversityError::DimMismatch {
                expected: d,
                got: v.dim(),
            });
        }
    }
    let mut data = DMatrix::zeros(n, d);
    for (i, v) in vectors.iter().enumerate() {
        for (j, x) in v.to_dense().into_iter().enumerate() {
            data[(i, j)] = x;
        }
    }
    for j in 0..d {
        let mean = data.column(j).sum() / n as f64;
        for i in 0..n {
            data[(i, j)] -= mean;
        }
    }

    // The nonzero eigenvalues of X Xt and Xt X coincide, so work with the
    // smaller Gram matrix.
    let gram = if n <= d {
        &data * data.transpose()
    } else {
        data.transpose() * &data
    };
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .map(|&x| x.max(0.0))
        .collect();
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).expect("eigenvalues are finite"));
    let total: f64 = eigenvalues.iter().sum();
    if total <= 1e-12 {
        return Ok(0);
    }
    let needed = threshold * total;
    let mut acc = 0.0;
    for (k, lambda) in eigenvalues.iter().enumerate() {
        acc += lambda;
        if acc >= needed {
            return Ok(k + 1);
        }
    }
    Ok(eigenvalues.len())
}

/// Industry specificity of a firm similarity matrix relative to a
/// classification: mean within-class pair similarity divided by mean
/// between-class pair similarity, both averaged class-wise. Classes with a
/// single firm have no within pair and are skipped in the within average;
/// they still contribute to the between average. Between-class means are
/// normalized by the actual number of cross pairs.
pub fn industry_specificity(
    matrix: &SimilarityMatrix,
    classes: &HashMap<u64, u16>,
) -> Result<f64, DiversityError> {
    let n = matrix.n();
    let mut by_class: HashMap<u16, Vec<usize>> = HashMap::new();
    for (i, &cik) in matrix.labels().iter().enumerate() {
        let code = classes
            .get(&cik)
            .ok_or(DiversityError::UnclassifiedFirm { cik })?;
        by_class.entry(*code).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(DiversityError::SingleClass);
    }
    if by_class.values().all(|m| m.len() < 2) {
        return Err(DiversityError::NoWithinPairs);
    }

    let mut within_sum = 0.0;
    let mut within_classes = 0usize;
    let mut between_sum = 0.0;
    for members in by_class.values() {
        let size = members.len();
        if size >= 2 {
            let mut pair_sum = 0.0;
            for (k, &i) in members.iter().enumerate() {
                for &j in &members[k + 1..] {
                    pair_sum += matrix.get(i, j);
                }
            }
            let pairs = (size * (size - 1) / 2) as f64;
            within_sum += pair_sum / pairs;
            within_classes += 1;
        }
        let mut cross_sum = 0.0;
        let mut in_class = vec![false; n];
        for &i in members {
            in_class[i] = true;
        }
        for &i in members {
            for (j, inside) in in_class.iter().enumerate() {
                if !inside {
                    cross_sum += matrix.get(i, j);
                }
            }
        }
        let cross_pairs = (size * (n - size)) as f64;
        between_sum += cross_sum / cross_pairs;
    }
    let within = within_sum / within_classes as f64;
    let between = between_sum / by_class.len() as f64;
    if between == 0.0 {
        return Err(DiversityError::DegenerateBetween);
    }
    Ok(within / between)
}

/// One metric observation for the results CSV (`metric,q,year,value`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiversityValue {
    pub metric: String,
    pub q: Option<f64>,
    pub year: i32,
    pub value: f64,
}

pub fn write_metrics_csv(
    values: &[DiversityValue],
    path: &Path,
    stamp: &crate::RunStamp,
    extra_comments: &[String],
) -> Result<(), DiversityError> {
    let io_err = |source| DiversityError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    writeln!(file, "{}", stamp.comment_line()).map_err(io_err)?;
    for comment in extra_comments {
        writeln!(file, "# {comment}").map_err(io_err)?;
    }
    writeln!(file, "metric,q,year,value").map_err(io_err)?;
    for v in values {
        let q = v.q.map(|q| q.to_string()).unwrap_or_default();
        writeln!(file, "{},{},{},{}", v.metric, q, v.year, v.value).map_err(io_err)?;
    }
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<DiversityValue>, DiversityError> {
    let text = std::fs::read_to_string(path).map_err(|source| DiversityError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut values = Vec::new();
    for (i, line) in text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .enumerate()
    {
        let row = i + 1;
        let parse_err = |problem: &str| DiversityError::Parse {
            path: path.to_path_buf(),
            row,
            problem: problem.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err("expected 4 columns"));
        }
        let q = if fields[1].is_empty() {
            None
        } else {
            Some(fields[1].parse().map_err(|_| parse_err("bad q"))?)
        };
        values.push(DiversityValue {
            metric: fields[0].to_string(),
            q,
            year: fields[2].parse().map_err(|_| parse_err("bad year"))?,
            value: fields[3].parse().map_err(|_| parse_err("bad value"))?,
        });
    }
    Ok(values)
}
