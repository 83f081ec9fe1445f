//! The 4-level SIC hierarchy and the text-free baseline similarity model.
//!
//! Firms are leaves of a Division > Major Group > Industry Group > Code
//! tree. The distance between two codes is the number of leaf codes under
//! their lowest common ancestor, and similarity is an affine rescaling of
//! that distance so same-code pairs score 1 and pairs joined only at the
//! root score 0. All pairs sharing an LCA receive identical similarity,
//! which is what produces the uniform rectangular blocks in the baseline
//! heatmap.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::simspace::SimilarityMatrix;

#[derive(Debug, Error)]
pub enum SicError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("SIC tree row {row}: {problem}")]
    MalformedTreeRow { row: usize, problem: String },
    #[error("duplicate SIC code {code} in tree definition")]
    DuplicateCode { code: u16 },
    #[error("group `{group}` listed under both `{first}` and `{second}`")]
    AmbiguousParent {
        group: String,
        first: String,
        second: String,
    },
    #[error("SIC tree is empty")]
    EmptyTree,
    #[error("unknown SIC code {code}")]
    UnknownCode { code: u16 },
}

#[derive(Debug, Clone, Copy)]
struct LeafNode {
    industry_group: usize,
    major_group: usize,
    division: usize,
}

/// The 4-level SIC classification tree, loaded from a
/// `code,industry_group,major_group,division` CSV so toy trees and the
/// real SIC list interchange freely.
#[derive(Debug, Clone)]
pub struct SicTree {
    codes: Vec<u16>,
    leaves: HashMap<u16, LeafNode>,
    industry_groups: Vec<String>,
    major_groups: Vec<String>,
    divisions: Vec<String>,
    ig_leaf_count: Vec<u32>,
    mg_leaf_count: Vec<u32>,
    div_leaf_count: Vec<u32>,
}

/// Node counts per level, top to bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeSummary {
    pub divisions: usize,
    pub major_groups: usize,
    pub industry_groups: usize,
    pub codes: usize,
}

impl SicTree {
    /// Build a tree from `(code, industry_group, major_group, division)`
    /// rows. Every code must appear once and every group label must have a
    /// single parent.
    pub fn from_rows<S: AsRef<str>>(rows: &[(u16, S, S, S)]) -> Result<Self, SicError> {
        if rows.is_empty() {
            return Err(SicError::EmptyTree);
        }
        let mut tree = SicTree {
            codes: Vec::new(),
            leaves: HashMap::new(),
            industry_groups: Vec::new(),
            major_groups: Vec::new(),
            divisions: Vec::new(),
            ig_leaf_count: Vec::new(),
            mg_leaf_count: Vec::new(),
            div_leaf_count: Vec::new(),
        };
        let mut ig_index: HashMap<String, usize> = HashMap::new();
        let mut mg_index: HashMap<String, usize> = HashMap::new();
        let mut div_index: HashMap<String, usize> = HashMap::new();
        let mut ig_parent: Vec<usize> = Vec::new();
        let mut mg_parent: Vec<usize> = Vec::new();

        for (code, ig, mg, div) in rows {
            let (ig, mg, div) = (ig.as_ref(), mg.as_ref(), div.as_ref());
            if tree.leaves.contains_key(code) {
                return Err(SicError::DuplicateCode { code: *code });
            }
            let div_id = *div_index.entry(div.to_string()).or_insert_with(|| {
                tree.divisions.push(div.to_string());
                tree.div_leaf_count.push(0);
                tree.divisions.len() - 1
            });
            let mg_id = *mg_index.entry(mg.to_string()).or_insert_with(|| {
                tree.major_groups.push(mg.to_string());
                tree.mg_leaf_count.push(0);
                mg_parent.push(div_id);
                tree.major_groups.len() - 1
            });
            if mg_parent[mg_id] != div_id {
                return Err(SicError::AmbiguousParent {
                    group: mg.to_string(),
                    first: tree.divisions[mg_parent[mg_id]].clone(),
                    second: div.to_string(),
                });
            }
            let ig_id = *ig_index.entry(ig.to_string()).or_insert_with(|| {
                tree.industry_groups.push(ig.to_string());
                tree.ig_leaf_count.push(0);
                ig_parent.push(mg_id);
                tree.industry_groups.len() - 1
            });
            if ig_parent[ig_id] != mg_id {
                return Err(SicError::AmbiguousParent {
                    group: ig.to_string(),
                    first: tree.major_groups[ig_parent[ig_id]].clone(),
                    second: mg.to_string(),
                });
            }
            tree.leaves.insert(
                *code,
                LeafNode {
                    industry_group: ig_id,
                    major_group: mg_id,
                    division: div_id,
                },
            );
            tree.codes.push(*code);
            tree.ig_leaf_count[ig_id] += 1;
            tree.mg_leaf_count[mg_id] += 1;
            tree.div_leaf_count[div_id] += 1;
        }
        tree.codes.sort_unstable();
        Ok(tree)
    }

    /// Load a tree from a `code,industry_group,major_group,division` CSV.
    pub fn from_csv_path(path: &Path) -> Result<Self, SicError> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| SicError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e),
            })?;
        let mut rows: Vec<(u16, String, String, String)> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row_number = i + 1;
            let record = record.map_err(|e| SicError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e),
            })?;
            if record.len() != 4 {
                return Err(SicError::MalformedTreeRow {
                    row: row_number,
                    problem: format!("expected 4 columns, got {}", record.len()),
                });
            }
            let code: u16 = record[0].parse().map_err(|_| SicError::MalformedTreeRow {
                row: row_number,
                problem: format!("cannot parse code `{}`", &record[0]),
            })?;
            rows.push((
                code,
                record[1].to_string(),
                record[2].to_string(),
                record[3].to_string(),
            ));
        }
        Self::from_rows(&rows)
    }

    /// Leaf codes in ascending order.
    pub fn codes(&self) -> &[u16] {
        &self.codes
    }

    pub fn contains(&self, code: u16) -> bool {
        self.leaves.contains_key(&code)
    }

    /// Total number of leaf codes.
    pub fn leaf_count(&self) -> u32 {
        self.codes.len() as u32
    }

    pub fn summary(&self) -> TreeSummary {
        TreeSummary {
            divisions: self.divisions.len(),
            major_groups: self.major_groups.len(),
            industry_groups: self.industry_groups.len(),
            codes: self.codes.len(),
        }
    }

    /// Tree-walk distance between two codes: the number of leaf codes
    /// under their lowest common ancestor. `distance(c, c) == 1`.
    pub fn distance(&self, a: u16, b: u16) -> Result<u32, SicError> {
        let la = self.leaf(a)?;
        let lb = self.leaf(b)?;
        Ok(if a == b {
            1
        } else if la.industry_group == lb.industry_group {
            self.ig_leaf_count[la.industry_group]
        } else if la.major_group == lb.major_group {
            self.mg_leaf_count[la.major_group]
        } else if la.division == lb.division {
            self.div_leaf_count[la.division]
        } else {
            self.leaf_count()
        })
    }

    /// Similarity `1 - (d - 1) / (L - 1)` where `L` is the total leaf
    /// count: 1 for same-code pairs, 0 for pairs joined only at the root.
    /// A degenerate single-leaf tree yields 1 for its only pair.
    pub fn similarity(&self, a: u16, b: u16) -> Result<f64, SicError> {
        let d = self.distance(a, b)?;
        let leaves = self.leaf_count();
        if leaves == 1 {
            return Ok(1.0);
        }
        Ok(1.0 - (f64::from(d) - 1.0) / (f64::from(leaves) - 1.0))
    }

    fn leaf(&self, code: u16) -> Result<&LeafNode, SicError> {
        self.leaves.get(&code).ok_or(SicError::UnknownCode { code })
    }
}

/// Level counts of a tree. Equivalent to [`SicTree::summary`].
pub fn tree_summary(tree: &SicTree) -> TreeSummary {
    tree.summary()
}

/// Alias for [`SicTree::distance`] as a free function.
pub fn sic_distance(code_a: u16, code_b: u16, tree: &SicTree) -> Result<u32, SicError> {
    tree.distance(code_a, code_b)
}

/// The text-free baseline firm-similarity matrix: every pair scored by
/// tree-walk similarity of their SIC codes.
pub fn sic_similarity_matrix(
    firms: &[(u64, u16)],
    tree: &SicTree,
) -> Result<SimilarityMatrix, SicError> {
    for (_, code) in firms {
        if !tree.contains(*code) {
            return Err(SicError::UnknownCode { code: *code });
        }
    }
    let n = firms.len();
    let labels: Vec<u64> = firms.iter().map(|&(cik, _)| cik).collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let s = tree.similarity(firms[i].1, firms[j].1)?;
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    Ok(SimilarityMatrix::from_parts(labels, values))
}
