//! `prodiv`: corpus-to-diversity pipeline driver.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! configuration errors.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "prodiv",
    version,
    about = "Turn annual firm product descriptions into embeddings, similarity matrices, and diversity trend reports"
)]
struct Cli {
    /// INI-style config file (`key = value`, `#` comments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Filing manifest CSV (cik,year,form_type,sic_code,text_path,prefiltered).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// SIC tree CSV (code,industry_group,major_group,division).
    #[arg(long = "sic-tree", global = true)]
    sic_tree: Option<PathBuf>,

    /// Output directory for all pipeline artifacts.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Global seed; per-stage seeds derive from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Inclusive year range, e.g. 1997:2017.
    #[arg(long, global = true)]
    years: Option<String>,

    /// Comma-separated models out of boolean,tfidf,pvdm,sic.
    #[arg(long, global = true)]
    models: Option<String>,

    /// Comma-separated diversity orders, e.g. 0,2,5.
    #[arg(long, global = true)]
    q: Option<String>,

    /// Also write scatter+fit SVG plots for every trend series.
    #[arg(long, global = true)]
    plots: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract Business sections from the manifest's filings.
    Ingest,
    /// Tokenize sections and compute embedding matrices.
    Embed,
    /// Build per-year similarity matrices and heatmap exports.
    Similarity,
    /// Compute diversity and specificity metrics per year.
    Diversity,
    /// Fit trends and write the trend report and summary.
    Trend,
    /// Run every stage in order.
    RunAll,
    /// Print the trend table from existing artifacts.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        manifest: cli.manifest.clone(),
        sic_tree: cli.sic_tree.clone(),
        output_dir: cli.output.clone(),
        seed: cli.seed,
        years: cli.years.clone(),
        models: cli.models.clone(),
        q: cli.q.clone(),
        plots: cli.plots,
    };
    let config = match RunConfig::resolve(cli.config.as_deref(), &overrides) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("prodiv: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Ingest => pipeline::cmd_ingest(&config),
        Command::Embed => pipeline::cmd_embed(&config),
        Command::Similarity => pipeline::cmd_similarity(&config),
        Command::Diversity => pipeline::cmd_diversity(&config),
        Command::Trend => pipeline::cmd_trend(&config),
        Command::RunAll => pipeline::cmd_run_all(&config),
        Command::Report => pipeline::cmd_report(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("prodiv: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
