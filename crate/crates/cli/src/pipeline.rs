//! The pipeline stages behind the subcommands. Each stage reads only the
//! previous stage's files plus the original inputs, so stages can be
//! rerun independently; a missing upstream artifact names the command
//! that produces it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use prodiv_core::diversity::{
    self, industry_specificity, pca_diversity, q_diversity, richness, AbundanceCounts,
    DiversityValue,
};
use prodiv_core::embed::{
    embed_boolean, embed_tfidf, train_pvdm, EmbeddingMatrix, FirmVector, ModelTag, PvdmParams,
};
use prodiv_core::ingest::{
    self, extract_business_section, filter_corpus, load_manifest, section_file_name,
    strip_risk_factors, ExtractionMethod, ExtractionReportRow, FilingRecord,
};
use prodiv_core::sicmodel::SicTree;
use prodiv_core::simspace::{
    aggregate_classes, class_profile_from_tree, cosine_matrix, export_heatmap, SimilarityMatrix,
};
use prodiv_core::stamp::derive_seed;
use prodiv_core::textprep::{build_vocabulary, corpus_stats, TokenizedDoc, Tokenizer};
use prodiv_core::trends::{
    self, pearson_trend_with_confidence, write_scatter_svg, AnnualSeries, PermutationScheme,
    TrendReport,
};

use crate::config::{Model, RunConfig};

/// Output-file layout under the configured output directory.
pub struct Paths {
    root: PathBuf,
}

impl Paths {
    pub fn new(root: &Path) -> Self {
        Paths {
            root: root.to_path_buf(),
        }
    }

    pub fn sections_dir(&self) -> PathBuf {
        self.root.join("sections")
    }

    pub fn extraction_report(&self) -> PathBuf {
        self.root.join("extraction_report.csv")
    }

    pub fn corpus_stats(&self) -> PathBuf {
        self.root.join("corpus_stats.csv")
    }

    pub fn embeddings_dir(&self) -> PathBuf {
        self.root.join("embeddings")
    }

    pub fn embedding_bin(&self, model: ModelTag) -> PathBuf {
        self.embeddings_dir().join(format!("{model}.bin"))
    }

    pub fn embedding_index(&self, model: ModelTag) -> PathBuf {
        self.embeddings_dir().join(format!("{model}.index.csv"))
    }

    pub fn embedding_csv(&self, model: ModelTag) -> PathBuf {
        self.embeddings_dir().join(format!("{model}.csv"))
    }

    pub fn similarity_dir(&self) -> PathBuf {
        self.root.join("similarity")
    }

    pub fn heatmap_csv(&self, model: Model, year: i32) -> PathBuf {
        self.similarity_dir().join(format!("{model}_{year}.csv"))
    }

    pub fn heatmap_svg(&self, model: Model, year: i32) -> PathBuf {
        self.similarity_dir().join(format!("{model}_{year}.svg"))
    }

    pub fn diversity_csv(&self) -> PathBuf {
        self.root.join("diversity.csv")
    }

    pub fn trends_csv(&self) -> PathBuf {
        self.root.join("trends.csv")
    }

    pub fn summary_json(&self) -> PathBuf {
        self.root.join("summary.json")
    }

    pub fn plots_dir(&self) -> PathBuf {
        self.root.join("plots")
    }
}

fn require(path: &Path, produced_by: &str) -> Result<()> {
    if !path.exists() {
        bail!(
            "missing {}; run `prodiv {produced_by}` first",
            path.display()
        );
    }
    Ok(())
}

/// Resolve a manifest-relative text path.
fn resolve_text_path(manifest: &Path, text_path: &Path) -> PathBuf {
    if text_path.is_absolute() {
        text_path.to_path_buf()
    } else {
        manifest.parent().unwrap_or(Path::new(".")).join(text_path)
    }
}

fn load_filtered_manifest(config: &RunConfig) -> Result<Vec<FilingRecord>> {
    let records = load_manifest(&config.manifest)?;
    Ok(filter_corpus(records))
}

/// Extract Business sections for every manifest record, write section
/// files and the extraction report.
pub fn cmd_ingest(config: &RunConfig) -> Result<()> {
    let stamp = config.stamp();
    let paths = Paths::new(&config.output_dir);
    let records = load_filtered_manifest(config)?;
    std::fs::create_dir_all(paths.sections_dir())?;

    let extracted: Vec<(u64, i32, ingest::ExtractionResult)> = records
        .par_iter()
        .map(|record| {
            let path = resolve_text_path(&config.manifest, &record.text_path);
            let raw = std::fs::read_to_string(&path).with_context(|| {
                format!(
                    "cik {} year {}: cannot read filing {}",
                    record.cik,
                    record.year,
                    path.display()
                )
            })?;
            let mut result = extract_business_section(&raw);
            result.business_text = strip_risk_factors(&result.business_text);
            Ok((record.cik, record.year, result))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(extracted.len());
    let mut by_method: BTreeMap<String, usize> = BTreeMap::new();
    for (cik, year, result) in &extracted {
        *by_method.entry(result.method.to_string()).or_insert(0) += 1;
        if result.method != ExtractionMethod::Failed {
            let file = paths.sections_dir().join(section_file_name(*cik, *year));
            std::fs::write(&file, &result.business_text)
                .with_context(|| format!("writing {}", file.display()))?;
        }
        rows.push(ExtractionReportRow {
            cik: *cik,
            year: *year,
            method: result.method,
            chars: result.business_text.chars().count(),
        });
    }
    ingest::write_extraction_report(&rows, &paths.extraction_report(), &stamp)?;

    let summary: Vec<String> = by_method.iter().map(|(m, n)| format!("{n} {m}")).collect();
    println!(
        "ingest: {} records after filtering ({})",
        rows.len(),
        summary.join(", ")
    );
    Ok(())
}

struct Corpus {
    docs: Vec<TokenizedDoc>,
}

/// Tokenize previously extracted sections for records inside the year
/// range; the extraction report decides which firm-years exist.
fn load_corpus(config: &RunConfig) -> Result<Corpus> {
    let paths = Paths::new(&config.output_dir);
    require(&paths.extraction_report(), "ingest")?;
    let report = ingest::read_extraction_report(&paths.extraction_report())?;
    let records = load_filtered_manifest(config)?;
    let codes: HashMap<(u64, i32), u16> = records
        .iter()
        .map(|r| ((r.cik, r.year), r.sic_code))
        .collect();

    let nouns = match &config.noun_lexicon {
        Some(path) => prodiv_core::textprep::load_word_list(path)?,
        None => prodiv_core::textprep::default_noun_lexicon(),
    };
    let stopwords = match &config.stopwords {
        Some(path) => prodiv_core::textprep::load_word_list(path)?,
        None => prodiv_core::textprep::default_stopwords(),
    };
    let tokenizer = Tokenizer::new(nouns, stopwords)?;

    let mut docs = Vec::new();
    for row in &report {
        if row.method == ExtractionMethod::Failed || !config.year_in_range(row.year) {
            continue;
        }
        if !codes.contains_key(&(row.cik, row.year)) {
            // Extraction report row no longer matches the manifest.
            bail!(
                "extraction report entry (cik {}, year {}) not found in manifest; rerun `prodiv ingest`",
                row.cik,
                row.year
            );
        }
        let section = paths
            .sections_dir()
            .join(section_file_name(row.cik, row.year));
        require(&section, "ingest")?;
        let text = std::fs::read_to_string(&section)
            .with_context(|| format!("reading {}", section.display()))?;
        let doc = tokenizer.tokenize(row.cik, row.year, &text);
        if doc.tokens.is_empty() {
            eprintln!(
                "warning: (cik {}, year {}) has no lexicon tokens; skipped",
                row.cik, row.year
            );
            continue;
        }
        docs.push(doc);
    }
    if docs.is_empty() {
        bail!("no usable documents in the selected year range");
    }
    Ok(Corpus { docs })
}

/// Tokenize, build the dictionary, train/compute the selected embedding
/// models, and write the embedding artifacts plus corpus statistics.
pub fn cmd_embed(config: &RunConfig) -> Result<()> {
    let stamp = config.stamp();
    let paths = Paths::new(&config.output_dir);
    let corpus = load_corpus(config)?;
    std::fs::create_dir_all(paths.embeddings_dir())?;

    prodiv_core::textprep::write_stats_csv(
        &corpus_stats(&corpus.docs),
        &paths.corpus_stats(),
        &stamp,
    )?;

    let text_models: Vec<Model> = config
        .models
        .iter()
        .copied()
        .filter(|m| m.is_text_model())
        .collect();
    if text_models.is_empty() {
        println!("embed: no text models selected, wrote corpus stats only");
        return Ok(());
    }

    let vocab = build_vocabulary(&corpus.docs, config.max_df)?;
    if vocab.is_empty() {
        bail!(
            "every word exceeds the document-frequency cap (max_df = {}); \
             raise max_df or supply a larger corpus",
            config.max_df
        );
    }
    println!(
        "embed: {} docs, vocabulary of {} words (max_df {})",
        corpus.docs.len(),
        vocab.len(),
        config.max_df
    );

    for model in text_models {
        let matrix = match model {
            Model::Boolean => {
                let vectors: Vec<FirmVector> = corpus
                    .docs
                    .iter()
                    .map(|d| embed_boolean(d, &vocab))
                    .collect::<Result<_, _>>()?;
                EmbeddingMatrix::from_vectors(ModelTag::Boolean, vectors)?
            }
            Model::Tfidf => {
                let vectors = embed_tfidf(&corpus.docs, &vocab)?;
                EmbeddingMatrix::from_vectors(ModelTag::Tfidf, vectors)?
            }
            Model::Pvdm => {
                let params = PvdmParams {
                    seed: derive_seed(config.seed, "pvdm"),
                    ..config.pvdm.clone()
                };
                let trained = train_pvdm(&corpus.docs, &params)?;
                println!(
                    "embed: pvdm {} epochs, final mean loss {:.6}",
                    params.epochs,
                    trained.epoch_losses.last().copied().unwrap_or(f64::NAN)
                );
                trained.embeddings
            }
            Model::Sic => unreachable!("sic is not a text model"),
        };
        let tag = matrix.model();
        matrix.write_binary(&paths.embedding_bin(tag), &stamp)?;
        matrix.write_index_csv(&paths.embedding_index(tag), &stamp)?;
        matrix.write_csv(&paths.embedding_csv(tag), &stamp)?;
        println!(
            "embed: wrote {} ({} rows, d = {})",
            tag,
            matrix.len(),
            matrix.dim()
        );
    }
    Ok(())
}

fn model_tag(model: Model) -> ModelTag {
    match model {
        Model::Boolean => ModelTag::Boolean,
        Model::Tfidf => ModelTag::Tfidf,
        Model::Pvdm => ModelTag::Pvdm,
        Model::Sic => unreachable!("sic has no embedding"),
    }
}

fn read_embeddings(paths: &Paths, model: Model) -> Result<EmbeddingMatrix> {
    let bin = paths.embedding_bin(model_tag(model));
    require(&bin, "embed")?;
    Ok(EmbeddingMatrix::read_binary(&bin)?)
}

fn load_sic_maps(config: &RunConfig) -> Result<BTreeMap<i32, HashMap<u64, u16>>> {
    let records = load_filtered_manifest(config)?;
    let mut by_year: BTreeMap<i32, HashMap<u64, u16>> = BTreeMap::new();
    for r in &records {
        if config.year_in_range(r.year) {
            by_year.entry(r.year).or_default().insert(r.cik, r.sic_code);
        }
    }
    Ok(by_year)
}

/// Build per-year firm-pair similarity matrices for every selected model
/// and export them as ordered heatmaps (CSV + SVG).
pub fn cmd_similarity(config: &RunConfig) -> Result<()> {
    let stamp = config.stamp();
    let paths = Paths::new(&config.output_dir);
    let sic_maps = load_sic_maps(config)?;
    std::fs::create_dir_all(paths.similarity_dir())?;

    let tree = match &config.sic_tree {
        Some(path) => Some(SicTree::from_csv_path(path)?),
        None => None,
    };

    let mut written = 0usize;
    for &model in &config.models {
        if model.is_text_model() {
            let matrix = read_embeddings(&paths, model)?;
            for year in matrix.years() {
                let vectors: Vec<FirmVector> = matrix.for_year(year).into_iter().cloned().collect();
                let Some(meta) = sic_maps.get(&year) else {
                    continue;
                };
                let sim = cosine_matrix(&vectors)?;
                export_heatmap(
                    &sim,
                    meta,
                    &paths.heatmap_csv(model, year),
                    &paths.heatmap_svg(model, year),
                    &stamp,
                )?;
                written += 1;
            }
        } else {
            let tree = tree.as_ref().expect("validated: sic model requires a tree");
            // The sic model needs only the firm-years that produced text;
            // the extraction report is the roster.
            require(&paths.extraction_report(), "ingest")?;
            let report = ingest::read_extraction_report(&paths.extraction_report())?;
            for (&year, meta) in &sic_maps {
                let mut firms: Vec<(u64, u16)> = report
                    .iter()
                    .filter(|r| r.year == year && r.method != ExtractionMethod::Failed)
                    .filter_map(|r| meta.get(&r.cik).map(|&code| (r.cik, code)))
                    .collect();
                firms.sort_unstable();
                if firms.is_empty() {
                    continue;
                }
                let sim = prodiv_core::sicmodel::sic_similarity_matrix(&firms, tree)?;
                export_heatmap(
                    &sim,
                    meta,
                    &paths.heatmap_csv(model, year),
                    &paths.heatmap_svg(model, year),
                    &stamp,
                )?;
                written += 1;
            }
        }
    }
    println!("similarity: wrote {written} heatmaps");
    Ok(())
}

/// Compute every enabled diversity metric per year and write the metric
/// table.
pub fn cmd_diversity(config: &RunConfig) -> Result<()> {
    let stamp = config.stamp();
    let paths = Paths::new(&config.output_dir);
    require(&paths.extraction_report(), "ingest")?;
    let report = ingest::read_extraction_report(&paths.extraction_report())?;
    let sic_maps = load_sic_maps(config)?;

    let tree = match &config.sic_tree {
        Some(path) => Some(SicTree::from_csv_path(path)?),
        None => None,
    };

    // Firm roster per year: extracted, in range, classified.
    let mut roster: BTreeMap<i32, BTreeSet<u64>> = BTreeMap::new();
    for row in &report {
        if row.method == ExtractionMethod::Failed || !config.year_in_range(row.year) {
            continue;
        }
        roster.entry(row.year).or_default().insert(row.cik);
    }

    let mut values: Vec<DiversityValue> = Vec::new();
    let mut comments: Vec<String> = Vec::new();
    if config.q_list.iter().any(|&q| (q - 1.0).abs() < 1e-12) {
        comments.push("q=1 computed via the limit formula".to_string());
    }

    // Count-based metrics are model-free.
    for (&year, ciks) in &roster {
        let Some(meta) = sic_maps.get(&year) else {
            continue;
        };
        let mut counts: BTreeMap<u16, u64> = BTreeMap::new();
        for cik in ciks {
            if let Some(code) = meta.get(cik) {
                *counts.entry(*code).or_insert(0) += 1;
            }
        }
        if counts.is_empty() {
            continue;
        }
        let abundance = AbundanceCounts::new(
            counts.keys().copied().collect(),
            counts.values().copied().collect(),
        )?;
        values.push(DiversityValue {
            metric: "richness".into(),
            q: None,
            year,
            value: richness(&abundance) as f64,
        });
        values.push(DiversityValue {
            metric: "shannon_entropy".into(),
            q: None,
            year,
            value: diversity::shannon_entropy(&abundance),
        });
        match diversity::normalized_entropy(&abundance) {
            Ok(v) => values.push(DiversityValue {
                metric: "normalized_entropy".into(),
                q: None,
                year,
                value: v,
            }),
            Err(e) => comments.push(format!("normalized_entropy {year}: {e}")),
        }
    }

    for &model in &config.models {
        if model.is_text_model() {
            let matrix = read_embeddings(&paths, model)?;
            for year in matrix.years() {
                let Some(meta) = sic_maps.get(&year) else {
                    continue;
                };
                let vectors: Vec<FirmVector> = matrix.for_year(year).into_iter().cloned().collect();
                let profile = aggregate_classes(&vectors, meta, year)?;
                for &q in &config.q_list {
                    values.push(DiversityValue {
                        metric: format!("qd_{model}"),
                        q: Some(q),
                        year,
                        value: q_diversity(&profile, q)?,
                    });
                    values.push(DiversityValue {
                        metric: format!("qd_adj_{model}"),
                        q: Some(q),
                        year,
                        value: diversity::adjusted_q_diversity(&profile, q)?,
                    });
                }
                match pca_diversity(&vectors, diversity::DEFAULT_PCA_THRESHOLD) {
                    Ok(k) => values.push(DiversityValue {
                        metric: format!("pca_{model}"),
                        q: None,
                        year,
                        value: k as f64,
                    }),
                    Err(e) => comments.push(format!("pca_{model} {year}: {e}")),
                }
                match specificity_from_heatmap(&paths, model, year, meta) {
                    Ok(v) => values.push(DiversityValue {
                        metric: format!("specificity_{model}"),
                        q: None,
                        year,
                        value: v,
                    }),
                    Err(e) => comments.push(format!("specificity_{model} {year}: {e}")),
                }
            }
        } else {
            let tree = tree.as_ref().expect("validated: sic model requires a tree");
            for (&year, ciks) in &roster {
                let Some(meta) = sic_maps.get(&year) else {
                    continue;
                };
                let mut counts: BTreeMap<u16, u64> = BTreeMap::new();
                for cik in ciks {
                    if let Some(code) = meta.get(cik) {
                        *counts.entry(*code).or_insert(0) += 1;
                    }
                }
                if counts.is_empty() {
                    continue;
                }
                let pairs: Vec<(u16, u64)> = counts.iter().map(|(&code, &n)| (code, n)).collect();
                let profile = class_profile_from_tree(&pairs, tree, year)?;
                for &q in &config.q_list {
                    values.push(DiversityValue {
                        metric: "qd_sic".into(),
                        q: Some(q),
                        year,
                        value: q_diversity(&profile, q)?,
                    });
                    values.push(DiversityValue {
                        metric: "qd_adj_sic".into(),
                        q: Some(q),
                        year,
                        value: diversity::adjusted_q_diversity(&profile, q)?,
                    });
                }
                match specificity_from_heatmap(&paths, model, year, meta) {
                    Ok(v) => values.push(DiversityValue {
                        metric: "specificity_sic".into(),
                        q: None,
                        year,
                        value: v,
                    }),
                    Err(e) => comments.push(format!("specificity_sic {year}: {e}")),
                }
            }
        }
    }

    for note in &comments {
        eprintln!("note: {note}");
    }
    diversity::write_metrics_csv(&values, &paths.diversity_csv(), &stamp, &comments)?;
    println!(
        "diversity: wrote {} metric values across {} years",
        values.len(),
        roster.len()
    );
    Ok(())
}

fn specificity_from_heatmap(
    paths: &Paths,
    model: Model,
    year: i32,
    meta: &HashMap<u64, u16>,
) -> Result<f64> {
    let csv = paths.heatmap_csv(model, year);
    require(&csv, "similarity")?;
    let matrix = SimilarityMatrix::read_csv(&csv)?;
    Ok(industry_specificity(&matrix, meta)?)
}

/// Fit every metric series and write the trend table, the machine-readable
/// summary, and (optionally) scatter plots.
pub fn cmd_trend(config: &RunConfig) -> Result<()> {
    let stamp = config.stamp();
    let paths = Paths::new(&config.output_dir);
    require(&paths.diversity_csv(), "diversity")?;
    let values = diversity::read_metrics_csv(&paths.diversity_csv())?;
    let series = trends::series_from_values(&values);

    let scheme = PermutationScheme::Sampled {
        permutations: config.permutations,
        seed: derive_seed(config.seed, "trend"),
    };
    let mut reports: Vec<TrendReport> = Vec::new();
    let mut skipped: Vec<(String, String)> = Vec::new();
    for s in &series {
        if s.len() < 3 {
            skipped.push((
                series_label(s),
                format!("{} points; need at least 3", s.len()),
            ));
            continue;
        }
        match pearson_trend_with_confidence(s, scheme, config.confidence) {
            Ok(report) => reports.push(report),
            Err(e) => skipped.push((series_label(s), e.to_string())),
        }
    }

    trends::write_reports_csv(&reports, &paths.trends_csv(), &stamp)?;

    if config.plots {
        std::fs::create_dir_all(paths.plots_dir())?;
        for s in &series {
            let Ok(fit) = trends::linear_fit_with_confidence(s, config.confidence) else {
                continue;
            };
            let name = format!("{}.svg", series_label(s).replace([' ', ':'], "_"));
            write_scatter_svg(s, &fit, &paths.plots_dir().join(name), &stamp)?;
        }
    }

    let summary = serde_json::json!({
        "toolkit": prodiv_core::stamp::TOOLKIT_VERSION,
        "seed": config.seed,
        "config_digest": stamp.config_digest,
        "confidence": config.confidence,
        "permutations": config.permutations,
        "reports": reports.iter().map(|r| serde_json::json!({
            "metric": r.metric,
            "q": r.q,
            "slope": r.slope,
            "intercept": r.intercept,
            "ci_halfwidth": r.ci_halfwidth,
            "r": r.r,
            "p": r.p_value,
            "stars": r.stars,
        })).collect::<Vec<_>>(),
        "skipped": skipped.iter().map(|(metric, reason)| serde_json::json!({
            "metric": metric,
            "reason": reason,
        })).collect::<Vec<_>>(),
    });
    std::fs::write(
        paths.summary_json(),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;

    for (metric, reason) in &skipped {
        eprintln!("note: skipped {metric}: {reason}");
    }
    println!(
        "trend: wrote {} reports ({} skipped)",
        reports.len(),
        skipped.len()
    );
    Ok(())
}

fn series_label(s: &AnnualSeries) -> String {
    match s.q {
        Some(q) => format!("{} q={q}", s.metric),
        None => s.metric.clone(),
    }
}

/// Render the trend table from the written artifacts.
pub fn cmd_report(config: &RunConfig) -> Result<()> {
    let paths = Paths::new(&config.output_dir);
    require(&paths.trends_csv(), "trend")?;
    let text = std::fs::read_to_string(paths.trends_csv())?;
    println!(
        "{:<24} {:>5} {:>12} {:>12} {:>8} {:>12} {:>5}",
        "metric", "q", "slope", "ci90", "r", "p", "stars"
    );
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            bail!("malformed trends row: {line}");
        }
        let round = |s: &str| -> String {
            s.parse::<f64>()
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|_| s.to_string())
        };
        println!(
            "{:<24} {:>5} {:>12} {:>12} {:>8} {:>12} {:>5}",
            fields[0],
            fields[1],
            round(fields[2]),
            round(fields[3]),
            round(fields[4]),
            round(fields[5]),
            fields[6]
        );
    }
    Ok(())
}

/// The whole pipeline in order.
pub fn cmd_run_all(config: &RunConfig) -> Result<()> {
    cmd_ingest(config)?;
    cmd_embed(config)?;
    cmd_similarity(config)?;
    cmd_diversity(config)?;
    cmd_trend(config)?;
    cmd_report(config)?;
    Ok(())
}
