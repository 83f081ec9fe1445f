//! Turns annual plain-text firm product descriptions into firm embeddings,
//! similarity matrices, and a suite of diversity metrics, then quantifies
//! multi-year diversity trends.
//!
//! The pipeline runs in stages, each backed by one module:
//!
//! 1. [`ingest`] — load a filing manifest, pull the Business section out of
//!    each raw filing, and filter the corpus.
//! 2. [`textprep`] — tokenize and clean sections, build the corpus
//!    vocabulary, compute corpus statistics.
//! 3. [`embed`] — produce unit-length firm vectors (Boolean, TF-IDF, PV-DM).
//! 4. [`sicmodel`] — the text-free baseline: similarity from tree-walk
//!    distances in the 4-level SIC hierarchy.
//! 5. [`simspace`] — firm-pair cosine matrices, per-year class profiles,
//!    ordered heatmap exports.
//! 6. [`diversity`] — richness, entropy, similarity-sensitive diversity of
//!    order q, PCA-dimension diversity, industry specificity.
//! 7. [`trends`] — linear fits with confidence bands and Pearson
//!    correlations with permutation significance.
//!
//! The `prodiv` binary (in the companion CLI crate) chains these stages
//! behind subcommands; everything here is usable as a library.

pub mod diversity;
pub mod embed;
pub mod ingest;
pub mod sicmodel;
pub mod simspace;
pub mod stamp;
pub mod textprep;
pub mod trends;

pub use embed::{EmbeddingMatrix, FirmVector, ModelTag, PvdmParams};
pub use ingest::{ExtractionMethod, ExtractionResult, FilingRecord, FormType};
pub use sicmodel::{SicTree, TreeSummary};
pub use simspace::{ClassProfile, SimilarityMatrix};
pub use stamp::RunStamp;
pub use textprep::{TokenizedDoc, Vocabulary};
pub use trends::{AnnualSeries, TrendReport};
