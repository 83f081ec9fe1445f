//! Run configuration: an INI-style `key = value` file plus command-line
//! overrides, resolved into one validated [`RunConfig`] whose canonical
//! rendering is digested into every output artifact.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use prodiv_core::embed::PvdmParams;
use prodiv_core::stamp;

/// A configuration problem; reported on stderr and exits with code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Models the pipeline can run. `Sic` is the text-free baseline; the
/// other three map onto the embedding models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Model {
    Boolean,
    Tfidf,
    Pvdm,
    Sic,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::Boolean, Model::Tfidf, Model::Pvdm, Model::Sic];

    pub fn is_text_model(self) -> bool {
        self != Model::Sic
    }

    pub fn tag(self) -> &'static str {
        match self {
            Model::Boolean => "boolean",
            Model::Tfidf => "tfidf",
            Model::Pvdm => "pvdm",
            Model::Sic => "sic",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Model {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "boolean" => Ok(Model::Boolean),
            "tfidf" => Ok(Model::Tfidf),
            "pvdm" => Ok(Model::Pvdm),
            "sic" => Ok(Model::Sic),
            other => Err(err(format!(
                "unknown model tag `{other}` (expected boolean, tfidf, pvdm, or sic)"
            ))),
        }
    }
}

/// Command-line overrides collected by the argument parser.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub manifest: Option<PathBuf>,
    pub sic_tree: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub years: Option<String>,
    pub models: Option<String>,
    pub q: Option<String>,
    pub plots: bool,
}

/// The fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub sic_tree: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub noun_lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub models: Vec<Model>,
    pub q_list: Vec<f64>,
    pub seed: u64,
    pub years: Option<(i32, i32)>,
    pub max_df: f64,
    pub confidence: f64,
    pub permutations: usize,
    pub pvdm: PvdmParams,
    pub plots: bool,
}

impl RunConfig {
    /// Load the config file (when given), apply overrides, validate.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig {
            manifest: PathBuf::new(),
            sic_tree: None,
            output_dir: PathBuf::new(),
            noun_lexicon: None,
            stopwords: None,
            models: Model::ALL.to_vec(),
            q_list: vec![0.0, 2.0, 5.0],
            seed: 42,
            years: None,
            max_df: prodiv_core::textprep::DEFAULT_MAX_DF,
            confidence: prodiv_core::trends::DEFAULT_CONFIDENCE,
            permutations: prodiv_core::trends::DEFAULT_PERMUTATIONS,
            pvdm: PvdmParams::default(),
            plots: false,
        };
        if let Some(path) = file {
            let base = path.parent().unwrap_or(Path::new("."));
            let text = std::fs::read_to_string(path)
                .map_err(|e| err(format!("cannot read config {}: {e}", path.display())))?;
            cfg.apply_file(&text, base)?;
        }
        cfg.apply_overrides(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, text: &str, base: &Path) -> Result<(), ConfigError> {
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let path_under_base = |v: &str| -> PathBuf {
                let p = PathBuf::from(v);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            };
            match key {
                "manifest" => self.manifest = path_under_base(value),
                "sic_tree" => self.sic_tree = Some(path_under_base(value)),
                "output_dir" => self.output_dir = path_under_base(value),
                "noun_lexicon" => self.noun_lexicon = Some(path_under_base(value)),
                "stopwords" => self.stopwords = Some(path_under_base(value)),
                "models" => self.models = parse_models(value)?,
                "q" => self.q_list = parse_q_list(value)?,
                "seed" => self.seed = parse_num(key, value)?,
                "years" => self.years = Some(parse_years(value)?),
                "max_df" => self.max_df = parse_num(key, value)?,
                "confidence" => self.confidence = parse_num(key, value)?,
                "permutations" => self.permutations = parse_num(key, value)?,
                "plots" => self.plots = parse_bool(value)?,
                "pvdm_dim" => self.pvdm.dim = parse_num(key, value)?,
                "pvdm_window" => self.pvdm.window = parse_num(key, value)?,
                "pvdm_epochs" => self.pvdm.epochs = parse_num(key, value)?,
                "pvdm_rate" => self.pvdm.learning_rate = parse_num(key, value)?,
                "pvdm_negative" => self.pvdm.negative_samples = parse_num(key, value)?,
                other => return Err(err(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        Ok(())
    }

    fn apply_overrides(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(p) = &o.manifest {
            self.manifest = p.clone();
        }
        if let Some(p) = &o.sic_tree {
            self.sic_tree = Some(p.clone());
        }
        if let Some(p) = &o.output_dir {
            self.output_dir = p.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(y) = &o.years {
            self.years = Some(parse_years(y)?);
        }
        if let Some(m) = &o.models {
            self.models = parse_models(m)?;
        }
        if let Some(q) = &o.q {
            self.q_list = parse_q_list(q)?;
        }
        if o.plots {
            self.plots = true;
        }
        Ok(())
    }

    fn validate(&mut self) -> Result<(), ConfigError> {
        if self.manifest.as_os_str().is_empty() {
            return Err(err(
                "no manifest given (config key `manifest` or --manifest)",
            ));
        }
        if !self.manifest.is_file() {
            return Err(err(format!(
                "manifest {} does not exist",
                self.manifest.display()
            )));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(err(
                "no output directory given (config key `output_dir` or --output)",
            ));
        }
        std::fs::create_dir_all(&self.output_dir).map_err(|e| {
            err(format!(
                "cannot create output directory {}: {e}",
                self.output_dir.display()
            ))
        })?;
        if self.models.is_empty() {
            return Err(err("model list is empty"));
        }
        if self.models.contains(&Model::Sic) && self.sic_tree.is_none() {
            return Err(err(
                "model `sic` requires a SIC tree (config key `sic_tree` or --sic-tree)",
            ));
        }
        if let Some(tree) = &self.sic_tree {
            if !tree.is_file() {
                return Err(err(format!("SIC tree {} does not exist", tree.display())));
            }
        }
        if self.q_list.is_empty() {
            return Err(err("q list is empty"));
        }
        for &q in &self.q_list {
            if q < 0.0 || !q.is_finite() {
                return Err(err(format!("q values must be non-negative, got {q}")));
            }
        }
        if let Some((a, b)) = self.years {
            if a > b {
                return Err(err(format!("year range {a}:{b} is empty")));
            }
        }
        if !(self.max_df > 0.0 && self.max_df <= 1.0) {
            return Err(err(format!(
                "max_df must lie in (0, 1], got {}",
                self.max_df
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(err(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        if self.permutations == 0 {
            return Err(err("permutations must be positive"));
        }
        self.pvdm
            .validate()
            .map_err(|e| err(format!("pvdm parameters: {e}")))?;
        // Canonical model order keeps artifacts byte-stable regardless of
        // how the list was written.
        self.models.sort();
        self.models.dedup();
        Ok(())
    }

    /// Year-range membership check (no range means every year).
    pub fn year_in_range(&self, year: i32) -> bool {
        match self.years {
            Some((a, b)) => (a..=b).contains(&year),
            None => true,
        }
    }

    /// Canonical rendering; its digest identifies the run configuration.
    pub fn canonical_string(&self) -> String {
        let fmt_opt_path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let models: Vec<&str> = self.models.iter().map(|m| m.tag()).collect();
        let qs: Vec<String> = self.q_list.iter().map(|q| q.to_string()).collect();
        format!(
            "manifest={}\nsic_tree={}\nnoun_lexicon={}\nstopwords={}\nmodels={}\nq={}\nseed={}\nyears={}\nmax_df={}\nconfidence={}\npermutations={}\npvdm_dim={}\npvdm_window={}\npvdm_epochs={}\npvdm_rate={}\npvdm_negative={}\n",
            self.manifest.display(),
            fmt_opt_path(&self.sic_tree),
            fmt_opt_path(&self.noun_lexicon),
            fmt_opt_path(&self.stopwords),
            models.join(","),
            qs.join(","),
            self.seed,
            self.years
                .map(|(a, b)| format!("{a}:{b}"))
                .unwrap_or_default(),
            self.max_df,
            self.confidence,
            self.permutations,
            self.pvdm.dim,
            self.pvdm.window,
            self.pvdm.epochs,
            self.pvdm.learning_rate,
            self.pvdm.negative_samples,
        )
    }

    pub fn stamp(&self) -> prodiv_core::RunStamp {
        prodiv_core::RunStamp::new(self.seed, stamp::digest(&self.canonical_string()))
    }
}

fn parse_models(value: &str) -> Result<Vec<Model>, ConfigError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Model::from_str)
        .collect()
}

fn parse_q_list(value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| err(format!("cannot parse q value `{}`", s.trim())))
        })
        .collect()
}

fn parse_years(value: &str) -> Result<(i32, i32), ConfigError> {
    let (a, b) = value
        .split_once(':')
        .ok_or_else(|| err(format!("year range `{value}` must look like 1997:2017")))?;
    let a: i32 = a
        .trim()
        .parse()
        .map_err(|_| err(format!("bad start year `{a}`")))?;
    let b: i32 = b
        .trim()
        .parse()
        .map_err(|_| err(format!("bad end year `{b}`")))?;
    Ok((a, b))
}

fn parse_bool(value: &str) -> Result<bool, ConfigError> {
    match value {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => Err(err(format!("cannot parse boolean `{other}`"))),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| err(format!("cannot parse `{key}` value `{value}`")))
}
