//! Firm-pair similarity matrices, per-year class profiles, and ordered
//! heatmap exports.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::embed::FirmVector;
use crate::sicmodel::SicTree;

#[derive(Debug, Error)]
pub enum SimspaceError {
    #[error("vector dimension mismatch: expected {expected}, got {got} for cik {cik}")]
    DimMismatch {
        expected: usize,
        got: usize,
        cik: u64,
    },
    #[error("no vectors supplied")]
    NoVectors,
    #[error("cik {cik} is missing from the SIC map")]
    UnclassifiedFirm { cik: u64 },
    #[error("class {code} centroid has zero norm")]
    ZeroCentroid { code: u16 },
    #[error("missing metadata for firm label {cik}")]
    MissingMetadata { cik: u64 },
    #[error("abundance vector does not sum to 1 (got {0})")]
    BadAbundance(f64),
    #[error("class similarity matrix violates its invariants: {0}")]
    BadClassMatrix(String),
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {problem}")]
    Parse { path: PathBuf, problem: String },
    #[error("tree lookup failed: {0}")]
    Tree(#[from] crate::sicmodel::SicError),
}

/// A dense symmetric firm-pair similarity matrix with unit diagonal.
/// Labels are firm CIKs in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    labels: Vec<u64>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Assemble from row labels and a row-major `n * n` buffer. Callers
    /// are the matrix builders in this crate, which guarantee symmetry.
    pub(crate) fn from_parts(labels: Vec<u64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(labels.len() * labels.len(), values.len());
        SimilarityMatrix { labels, values }
    }

    /// Assemble a matrix from external data, validating the invariants:
    /// square shape, symmetry, unit diagonal, entries in [-1, 1].
    pub fn new(labels: Vec<u64>, values: Vec<f64>) -> Result<Self, SimspaceError> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(SimspaceError::BadClassMatrix(format!(
                "{} values for {n} labels",
                values.len()
            )));
        }
        for i in 0..n {
            if (values[i * n + i] - 1.0).abs() > 1e-9 {
                return Err(SimspaceError::BadClassMatrix(format!(
                    "diagonal entry {i} is {}",
                    values[i * n + i]
                )));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&v) {
                    return Err(SimspaceError::BadClassMatrix(format!(
                        "entry ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
                if (v - values[j * n + i]).abs() > 1e-12 {
                    return Err(SimspaceError::BadClassMatrix(format!(
                        "asymmetry at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SimilarityMatrix { labels, values })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    /// Reorder rows and columns by the `(sic_code, cik)` sort key. Every
    /// label must appear in `meta` (cik -> sic code).
    pub fn reorder_by_sic(&self, meta: &HashMap<u64, u16>) -> Result<Self, SimspaceError> {
        let mut order: Vec<usize> = (0..self.n()).collect();
        for &cik in &self.labels {
            if !meta.contains_key(&cik) {
                return Err(SimspaceError::MissingMetadata { cik });
            }
        }
        order.sort_by_key(|&i| (meta[&self.labels[i]], self.labels[i]));
        let n = self.n();
        let labels: Vec<u64> = order.iter().map(|&i| self.labels[i]).collect();
        let mut values = vec![0.0; n * n];
        for (new_i, &old_i) in order.iter().enumerate() {
            for (new_j, &old_j) in order.iter().enumerate() {
                values[new_i * n + new_j] = self.get(old_i, old_j);
            }
        }
        Ok(SimilarityMatrix { labels, values })
    }

    /// CSV with firm labels as the first row and first column.
    pub fn write_csv(&self, path: &Path, stamp: &crate::RunStamp) -> Result<(), SimspaceError> {
        let io_err = |source| SimspaceError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        writeln!(file, "{}", stamp.comment_line()).map_err(io_err)?;
        let mut header = String::from("cik");
        for l in &self.labels {
            header.push_str(&format!(",{l}"));
        }
        writeln!(file, "{header}").map_err(io_err)?;
        for i in 0..self.n() {
            let mut line = format!("{}", self.labels[i]);
            for j in 0..self.n() {
                line.push_str(&format!(",{}", self.get(i, j)));
            }
            writeln!(file, "{line}").map_err(io_err)?;
        }
        Ok(())
    }

    /// Read back a matrix written by [`SimilarityMatrix::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self, SimspaceError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimspaceError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |problem: &str| SimspaceError::Parse {
            path: path.to_path_buf(),
            problem: problem.to_string(),
        };
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| parse_err("empty file"))?;
        let labels: Vec<u64> = header
            .split(',')
            .skip(1)
            .map(|s| s.parse().map_err(|_| parse_err("bad label")))
            .collect::<Result<_, _>>()?;
        let n = labels.len();
        let mut values = Vec::with_capacity(n * n);
        for line in lines {
            for cell in line.split(',').skip(1) {
                values.push(cell.parse().map_err(|_| parse_err("bad cell"))?);
            }
        }
        if values.len() != n * n {
            return Err(parse_err("cell count does not match label count"));
        }
        Ok(SimilarityMatrix { labels, values })
    }

    /// Simple grayscale cell raster; similarity 1 renders white.
    pub fn write_svg(&self, path: &Path, stamp: &crate::RunStamp) -> Result<(), SimspaceError> {
        let io_err = |source| SimspaceError::Io {
            path: path.to_path_buf(),
            source,
        };
        let cell = 4usize;
        let size = self.n() * cell;
        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\">\n"
        ));
        svg.push_str(&format!("<!-- {stamp} -->\n"));
        for i in 0..self.n() {
            for j in 0..self.n() {
                let v = self.get(i, j).clamp(0.0, 1.0);
                let shade = (v * 255.0).round() as u8;
                svg.push_str(&format!(
                    "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},{shade})\"/>\n",
                    j * cell,
                    i * cell,
                ));
            }
        }
        svg.push_str("</svg>\n");
        std::fs::write(path, svg).map_err(io_err)
    }
}

/// Pairwise cosine similarity of unit-norm firm vectors: entry `(i, j)` is
/// their dot product. Labels follow input order.
pub fn cosine_matrix(vectors: &[FirmVector]) -> Result<SimilarityMatrix, SimspaceError> {
    if vectors.is_empty() {
        return Err(SimspaceError::NoVectors);
    }
    let dim = vectors[0].dim();
    for v in vectors {
        if v.dim() != dim {
            return Err(SimspaceError::DimMismatch {
                expected: dim,
                got: v.dim(),
                cik: v.cik,
            });
        }
    }
    let n = vectors.len();
    let labels: Vec<u64> = vectors.iter().map(|v| v.cik).collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let d = vectors[i].dot(&vectors[j]);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(SimilarityMatrix { labels, values })
}

/// Per-year class-level inputs for the diversity functional: instantiated
/// class labels, a class similarity matrix `Z` (symmetric, unit diagonal,
/// entries in [0, 1]), and a normalized abundance vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProfile {
    year: i32,
    labels: Vec<u16>,
    z: Vec<f64>,
    abundance: Vec<f64>,
}

impl ClassProfile {
    /// Validates all profile invariants.
    pub fn new(
        year: i32,
        labels: Vec<u16>,
        z: Vec<f64>,
        abundance: Vec<f64>,
    ) -> Result<Self, SimspaceError> {
        let s = labels.len();
        if s == 0 {
            return Err(SimspaceError::NoVectors);
        }
        if z.len() != s * s || abundance.len() != s {
            return Err(SimspaceError::BadClassMatrix(format!(
                "shape mismatch: {s} labels, {} z entries, {} abundances",
                z.len(),
                abundance.len()
            )));
        }
        let total: f64 = abundance.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SimspaceError::BadAbundance(total));
        }
        if abundance.iter().any(|&a| a <= 0.0) {
            return Err(SimspaceError::BadAbundance(0.0));
        }
        for i in 0..s {
            if (z[i * s + i] - 1.0).abs() > 1e-12 {
                return Err(SimspaceError::BadClassMatrix(format!(
                    "diagonal entry {i} is {}",
                    z[i * s + i]
                )));
            }
            for j in 0..s {
                let v = z[i * s + j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(SimspaceError::BadClassMatrix(format!(
                        "entry ({i}, {j}) = {v} outside [0, 1]"
                    )));
                }
                if (v - z[j * s + i]).abs() > 1e-12 {
                    return Err(SimspaceError::BadClassMatrix(format!(
                        "asymmetry at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(ClassProfile {
            year,
            labels,
            z,
            abundance,
        })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    /// Number of classes `s`.
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn z(&self, i: usize, j: usize) -> f64 {
        self.z[i * self.size() + j]
    }

    pub fn abundance(&self) -> &[f64] {
        &self.abundance
    }
}

/// Group one year's firm vectors by SIC class: each class is represented
/// by the unit-normalized centroid of its member vectors, `Z[i, j]` is the
/// centroid dot product clamped into [0, 1], and abundance is the share of
/// firms per class. Classes are sorted by code, so the result is invariant
/// to firm input order.
pub fn aggregate_classes(
    vectors: &[FirmVector],
    sic_map: &HashMap<u64, u16>,
    year: i32,
) -> Result<ClassProfile, SimspaceError> {
    if vectors.is_empty() {
        return Err(SimspaceError::NoVectors);
    }
    let mut members: BTreeMap<u16, Vec<&FirmVector>> = BTreeMap::new();
    for v in vectors {
        let code = sic_map
            .get(&v.cik)
            .ok_or(SimspaceError::UnclassifiedFirm { cik: v.cik })?;
        members.entry(*code).or_default().push(v);
    }

    let total_firms = vectors.len() as f64;
    let s = members.len();
    let mut labels = Vec::with_capacity(s);
    let mut abundance = Vec::with_capacity(s);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(s);
    for (&code, group) in members.iter_mut() {
        // Accumulate in cik order so the centroid is independent of the
        // caller's firm order down to the last bit.
        group.sort_by_key(|v| v.cik);
        let dim = group[0].dim();
        let mut centroid = vec![0.0; dim];
        for v in group.iter() {
            for (c, x) in centroid.iter_mut().zip(v.to_dense()) {
                *c += x;
            }
        }
        let norm: f64 = centroid.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(SimspaceError::ZeroCentroid { code });
        }
        for c in centroid.iter_mut() {
            *c /= norm;
        }
        labels.push(code);
        abundance.push(group.len() as f64 / total_firms);
        centroids.push(centroid);
    }

    let mut z = vec![0.0; s * s];
    for i in 0..s {
        z[i * s + i] = 1.0;
        for j in i + 1..s {
            let dot: f64 = centroids[i]
                .iter()
                .zip(&centroids[j])
                .map(|(a, b)| a * b)
                .sum();
            // Negative PV-DM cosines and 1 + epsilon rounding are both
            // clamped here; the raw firm-pair matrix keeps its sign.
            let clamped = dot.clamp(0.0, 1.0);
            z[i * s + j] = clamped;
            z[j * s + i] = clamped;
        }
    }
    ClassProfile::new(year, labels, z, abundance)
}

/// Class profile for the text-free SIC baseline: `Z` entries come from
/// tree-walk similarity between the instantiated codes and abundance from
/// the per-code firm counts.
pub fn class_profile_from_tree(
    counts: &[(u16, u64)],
    tree: &SicTree,
    year: i32,
) -> Result<ClassProfile, SimspaceError> {
    let active: Vec<(u16, u64)> = counts.iter().copied().filter(|&(_, c)| c > 0).collect();
    if active.is_empty() {
        return Err(SimspaceError::NoVectors);
    }
    let mut sorted = active;
    sorted.sort_unstable_by_key(|&(code, _)| code);
    let total: u64 = sorted.iter().map(|&(_, c)| c).sum();
    let s = sorted.len();
    let labels: Vec<u16> = sorted.iter().map(|&(code, _)| code).collect();
    let abundance: Vec<f64> = sorted
        .iter()
        .map(|&(_, c)| c as f64 / total as f64)
        .collect();
    let mut z = vec![0.0; s * s];
    for i in 0..s {
        z[i * s + i] = 1.0;
        for j in i + 1..s {
            let sim = tree.similarity(labels[i], labels[j])?;
            z[i * s + j] = sim;
            z[j * s + i] = sim;
        }
    }
    ClassProfile::new(year, labels, z, abundance)
}

/// Export a similarity matrix as an ordered heatmap: rows and columns
/// sorted by `(sic_code, cik)`, written as CSV plus an SVG raster.
pub fn export_heatmap(
    matrix: &SimilarityMatrix,
    meta: &HashMap<u64, u16>,
    csv_path: &Path,
    svg_path: &Path,
    stamp: &crate::RunStamp,
) -> Result<(), SimspaceError> {
    let ordered = matrix.reorder_by_sic(meta)?;
    ordered.write_csv(csv_path, stamp)?;
    ordered.write_svg(svg_path, stamp)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{ModelTag, VectorData};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_vec(cik: u64, year: i32, values: Vec<f64>) -> FirmVector {
        FirmVector::normalized(cik, year, ModelTag::Pvdm, VectorData::Dense(values), "test")
            .unwrap()
    }

    #[test]
    fn cosine_matrix_orthogonal_and_duplicate_vectors() {
        let vs = vec![
            unit_vec(1, 2000, vec![1.0, 0.0, 0.0]),
            unit_vec(2, 2000, vec![0.0, 1.0, 0.0]),
            unit_vec(3, 2000, vec![1.0, 0.0, 0.0]),
        ];
        let m = cosine_matrix(&vs).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(0, 2), 1.0);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.labels(), &[1, 2, 3]);
    }

    #[test]
    fn cosine_matrix_fixture_matches_direct_dot_products() {
        // Independent check: recompute every entry with a plain loop over
        // dense components.
        let raw = [
            vec![0.3, 0.4, 0.5, 0.1],
            vec![0.9, 0.1, 0.0, 0.2],
            vec![0.2, 0.8, 0.3, 0.3],
            vec![0.5, 0.5, 0.5, 0.5],
            vec![0.1, 0.0, 0.9, 0.4],
        ];
        let vs: Vec<FirmVector> = raw
            .iter()
            .enumerate()
            .map(|(i, v)| unit_vec(i as u64 + 1, 2000, v.clone()))
            .collect();
        let m = cosine_matrix(&vs).unwrap();
        for i in 0..vs.len() {
            for j in 0..vs.len() {
                let (a, b) = (vs[i].to_dense(), vs[j].to_dense());
                let expected: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                assert_relative_eq!(m.get(i, j), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cosine_matrix_rejects_dimension_mismatch() {
        let vs = vec![
            unit_vec(1, 2000, vec![1.0, 0.0]),
            unit_vec(2, 2000, vec![1.0, 0.0, 0.0]),
        ];
        assert!(matches!(
            cosine_matrix(&vs),
            Err(SimspaceError::DimMismatch { cik: 2, .. })
        ));
    }

    #[test]
    fn aggregate_single_class() {
        let vs = vec![
            unit_vec(1, 2000, vec![1.0, 0.0]),
            unit_vec(2, 2000, vec![0.8, 0.6]),
        ];
        let map = HashMap::from([(1, 2011u16), (2, 2011u16)]);
        let p = aggregate_classes(&vs, &map, 2000).unwrap();
        assert_eq!(p.size(), 1);
        assert_eq!(p.z(0, 0), 1.0);
        assert_eq!(p.abundance(), &[1.0]);
        assert_eq!(p.labels(), &[2011]);
    }

    #[test]
    fn aggregate_orthogonal_classes() {
        let vs = vec![
            unit_vec(1, 2000, vec![1.0, 0.0, 0.0, 0.0]),
            unit_vec(2, 2000, vec![0.0, 1.0, 0.0, 0.0]),
            unit_vec(3, 2000, vec![0.0, 0.0, 1.0, 0.0]),
        ];
        let map = HashMap::from([(1, 100u16), (2, 100u16), (3, 200u16)]);
        let p = aggregate_classes(&vs, &map, 2000).unwrap();
        assert_eq!(p.size(), 2);
        assert_eq!(p.z(0, 1), 0.0);
        assert_relative_eq!(p.abundance()[0], 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(p.abundance()[1], 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn aggregate_fixture_matches_centroid_oracle() {
        // 8 firms in 3 classes; oracle computes centroids longhand.
        let raw: Vec<(u64, u16, Vec<f64>)> = vec![
            (1, 10, vec![1.0, 0.2, 0.0]),
            (2, 10, vec![0.9, 0.1, 0.1]),
            (3, 10, vec![0.8, 0.3, 0.0]),
            (4, 20, vec![0.1, 1.0, 0.2]),
            (5, 20, vec![0.0, 0.9, 0.1]),
            (6, 30, vec![0.2, 0.1, 1.0]),
            (7, 30, vec![0.0, 0.2, 0.9]),
            (8, 30, vec![0.1, 0.0, 0.8]),
        ];
        let vs: Vec<FirmVector> = raw
            .iter()
            .map(|(cik, _, v)| unit_vec(*cik, 2000, v.clone()))
            .collect();
        let map: HashMap<u64, u16> = raw.iter().map(|&(cik, code, _)| (cik, code)).collect();
        let p = aggregate_classes(&vs, &map, 2000).unwrap();

        let mut oracle_centroids: Vec<Vec<f64>> = Vec::new();
        for code in [10u16, 20, 30] {
            let group: Vec<Vec<f64>> = raw
                .iter()
                .zip(&vs)
                .filter(|((_, c, _), _)| *c == code)
                .map(|(_, v)| v.to_dense())
                .collect();
            let mut centroid = [0.0; 3];
            for g in &group {
                for (c, x) in centroid.iter_mut().zip(g) {
                    *c += x;
                }
            }
            let norm: f64 = centroid.iter().map(|x| x * x).sum::<f64>().sqrt();
            oracle_centroids.push(centroid.iter().map(|x| x / norm).collect());
        }
        for i in 0..3 {
            for j in 0..3 {
                let expected: f64 = oracle_centroids[i]
                    .iter()
                    .zip(&oracle_centroids[j])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .clamp(0.0, 1.0);
                let expected = if i == j { 1.0 } else { expected };
                assert_relative_eq!(p.z(i, j), expected, epsilon = 1e-12);
            }
        }
        assert_eq!(p.abundance(), &[3.0 / 8.0, 2.0 / 8.0, 3.0 / 8.0]);
    }

    #[test]
    fn aggregate_rejects_unclassified_firm() {
        let vs = vec![unit_vec(1, 2000, vec![1.0, 0.0])];
        let err = aggregate_classes(&vs, &HashMap::new(), 2000).unwrap_err();
        assert!(matches!(err, SimspaceError::UnclassifiedFirm { cik: 1 }));
    }

    #[test]
    fn class_profile_from_tree_uses_tree_similarity() {
        let tree = SicTree::from_rows(&[
            (2011u16, "201", "20", "D"),
            (2013u16, "201", "20", "D"),
            (5011u16, "501", "50", "F"),
        ])
        .unwrap();
        let p = class_profile_from_tree(&[(2011, 3), (2013, 1), (5011, 4), (9999, 0)], &tree, 2001)
            .unwrap();
        assert_eq!(p.size(), 3);
        assert_eq!(p.labels(), &[2011, 2013, 5011]);
        // Same industry group of 2 leaves out of 3 total.
        assert_relative_eq!(p.z(0, 1), 1.0 - 1.0 / 2.0, epsilon = 1e-12);
        assert_eq!(p.z(0, 2), 0.0);
        assert_eq!(p.abundance(), &[3.0 / 8.0, 1.0 / 8.0, 4.0 / 8.0]);
    }

    #[test]
    fn heatmap_reordering_sorts_by_code_then_cik() {
        let vs = vec![
            unit_vec(30, 2000, vec![1.0, 0.0, 0.0]),
            unit_vec(10, 2000, vec![0.0, 1.0, 0.0]),
            unit_vec(20, 2000, vec![0.0, 0.0, 1.0]),
        ];
        let m = cosine_matrix(&vs).unwrap();
        // 30 -> code 100; 10 and 20 -> code 200: order (30, 10, 20).
        let meta = HashMap::from([(30u64, 100u16), (10u64, 200u16), (20u64, 200u16)]);
        let ordered = m.reorder_by_sic(&meta).unwrap();
        assert_eq!(ordered.labels(), &[30, 10, 20]);
        // Conjugation: entries follow their labels.
        assert_eq!(ordered.get(0, 1), m.get(0, 1));
        for i in 0..3 {
            assert_eq!(ordered.get(i, i), 1.0);
            for j in 0..3 {
                assert_eq!(ordered.get(i, j), ordered.get(j, i));
            }
        }
    }

    #[test]
    fn heatmap_reordering_already_sorted_is_identity() {
        let vs = vec![
            unit_vec(1, 2000, vec![1.0, 0.0]),
            unit_vec(2, 2000, vec![0.0, 1.0]),
        ];
        let m = cosine_matrix(&vs).unwrap();
        let meta = HashMap::from([(1u64, 100u16), (2u64, 200u16)]);
        let ordered = m.reorder_by_sic(&meta).unwrap();
        assert_eq!(&ordered, &m);
    }

    #[test]
    fn heatmap_reordering_requires_full_metadata() {
        let vs = vec![unit_vec(1, 2000, vec![1.0, 0.0])];
        let m = cosine_matrix(&vs).unwrap();
        assert!(matches!(
            m.reorder_by_sic(&HashMap::new()),
            Err(SimspaceError::MissingMetadata { cik: 1 })
        ));
    }

    #[test]
    fn heatmap_csv_golden_fixture() {
        // Golden export for a 6-firm matrix, hand-sorted once: codes put
        // firms (6, 5) first, then (2, 4), then (1, 3); ties break by cik.
        // One-hot vectors make every expected cell 0 or 1.
        let vs = vec![
            unit_vec(1, 2000, vec![1.0, 0.0, 0.0]),
            unit_vec(2, 2000, vec![0.0, 1.0, 0.0]),
            unit_vec(3, 2000, vec![1.0, 0.0, 0.0]),
            unit_vec(4, 2000, vec![0.0, 1.0, 0.0]),
            unit_vec(5, 2000, vec![0.0, 0.0, 1.0]),
            unit_vec(6, 2000, vec![0.0, 0.0, 1.0]),
        ];
        let m = cosine_matrix(&vs).unwrap();
        let meta = HashMap::from([
            (1u64, 300u16),
            (2u64, 200u16),
            (3u64, 300u16),
            (4u64, 200u16),
            (5u64, 100u16),
            (6u64, 100u16),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("heat.csv");
        let svg_path = dir.path().join("heat.svg");
        export_heatmap(&m, &meta, &csv_path, &svg_path, &crate::RunStamp::ad_hoc(0)).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# prodiv"));
        assert_eq!(lines[1], "cik,5,6,2,4,1,3");
        assert_eq!(lines[2], "5,1,1,0,0,0,0");
        assert_eq!(lines[3], "6,1,1,0,0,0,0");
        assert_eq!(lines[4], "2,0,0,1,1,0,0");
        assert_eq!(lines[5], "4,0,0,1,1,0,0");
        assert_eq!(lines[6], "1,0,0,0,0,1,1");
        assert_eq!(lines[7], "3,0,0,0,0,1,1");
        let svg = std::fs::read_to_string(&svg_path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("rgb(255,255,255)"));
        assert!(svg.contains("rgb(0,0,0)"));
    }

    #[test]
    fn matrix_csv_round_trip() {
        let vs = vec![
            unit_vec(1, 2000, vec![0.6, 0.8]),
            unit_vec(2, 2000, vec![1.0, 0.0]),
        ];
        let m = cosine_matrix(&vs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        m.write_csv(&path, &crate::RunStamp::ad_hoc(0)).unwrap();
        let loaded = SimilarityMatrix::read_csv(&path).unwrap();
        assert_eq!(loaded.labels(), m.labels());
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(loaded.get(i, j), m.get(i, j));
            }
        }
    }

    proptest! {
        // aggregate_classes does not depend on firm input order.
        #[test]
        fn aggregation_order_invariant(rotation in 0usize..8) {
            let raw: Vec<(u64, u16, [f64; 3])> = vec![
                (1, 10, [1.0, 0.2, 0.0]),
                (2, 10, [0.9, 0.1, 0.1]),
                (3, 20, [0.1, 1.0, 0.2]),
                (4, 20, [0.0, 0.9, 0.1]),
                (5, 30, [0.2, 0.1, 1.0]),
                (6, 30, [0.0, 0.2, 0.9]),
                (7, 30, [0.3, 0.0, 0.8]),
                (8, 10, [0.7, 0.2, 0.2]),
            ];
            let map: HashMap<u64, u16> = raw.iter().map(|&(cik, code, _)| (cik, code)).collect();
            let mut vs: Vec<FirmVector> = raw
                .iter()
                .map(|(cik, _, v)| unit_vec(*cik, 2000, v.to_vec()))
                .collect();
            let base = aggregate_classes(&vs, &map, 2000).unwrap();
            let shift = rotation % vs.len();
            vs.rotate_left(shift);
            let rotated = aggregate_classes(&vs, &map, 2000).unwrap();
            prop_assert_eq!(base, rotated);
        }

        // Permuting firms conjugates the cosine matrix.
        #[test]
        fn cosine_conjugation_equivariance(rotation in 1usize..5) {
            let raw = [
                [0.3, 0.4, 0.5],
                [0.9, 0.1, 0.0],
                [0.2, 0.8, 0.3],
                [0.5, 0.5, 0.5],
                [0.1, 0.0, 0.9],
            ];
            let vs: Vec<FirmVector> = raw
                .iter()
                .enumerate()
                .map(|(i, v)| unit_vec(i as u64 + 1, 2000, v.to_vec()))
                .collect();
            let m = cosine_matrix(&vs).unwrap();
            let mut rotated = vs.clone();
            rotated.rotate_left(rotation);
            let mr = cosine_matrix(&rotated).unwrap();
            let n = vs.len();
            for i in 0..n {
                for j in 0..n {
                    let (oi, oj) = ((i + rotation) % n, (j + rotation) % n);
                    prop_assert_eq!(mr.get(i, j), m.get(oi, oj));
                }
            }
        }
    }
}
