//! Filing manifest loading, Business-section extraction, and corpus filters.
//!
//! Filings are presumed to be plain text with markup already stripped
//! upstream. Extraction runs two tiers: a heading-grammar tier that matches
//! `ITEM 1` / `PART I, ITEM 1` headings at line starts (optionally labeled
//! `BUSINESS` within 40 characters), and a keyword fallback that looks for a
//! line whose first token is `BUSINESS`. Failure is not an error; it is
//! recorded in the [`ExtractionResult`] so callers can report parse rates.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

/// Keyword-tier sections shorter than this are treated as unusable.
const MIN_KEYWORD_SECTION_CHARS: usize = 1000;
/// How far past an `ITEM 1` heading the `BUSINESS` label may sit.
const BUSINESS_LABEL_LOOKAHEAD: usize = 40;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: missing manifest column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}: field `{field}`: {problem}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        field: String,
        problem: String,
    },
    #[error("{path}: duplicate filing key (cik {cik}, year {year}) at rows {first_row} and {second_row}")]
    DuplicateKey {
        path: PathBuf,
        cik: u64,
        year: i32,
        first_row: usize,
        second_row: usize,
    },
}

/// SEC annual-report form types covered by the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormType {
    TenK,
    TenK405,
    TenKsb,
}

impl FromStr for FormType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "10-K" => Ok(FormType::TenK),
            "10-K405" => Ok(FormType::TenK405),
            "10-KSB" => Ok(FormType::TenKsb),
            other => Err(format!(
                "unknown form type `{other}` (expected 10-K, 10-K405, or 10-KSB)"
            )),
        }
    }
}

impl fmt::Display for FormType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FormType::TenK => "10-K",
            FormType::TenK405 => "10-K405",
            FormType::TenKsb => "10-KSB",
        };
        f.write_str(s)
    }
}

/// One firm-year filing as listed in the manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilingRecord {
    pub cik: u64,
    pub year: i32,
    pub form_type: FormType,
    pub sic_code: u16,
    pub text_path: PathBuf,
    /// The manifest producer already applied external data-availability
    /// filters (Compustat keys, lagged data) to this record.
    pub prefiltered: bool,
}

/// Which extraction tier produced the section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExtractionMethod {
    Regex,
    Keyword,
    Failed,
}

impl fmt::Display for ExtractionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExtractionMethod::Regex => "regex",
            ExtractionMethod::Keyword => "keyword",
            ExtractionMethod::Failed => "failed",
        };
        f.write_str(s)
    }
}

impl FromStr for ExtractionMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "regex" => Ok(ExtractionMethod::Regex),
            "keyword" => Ok(ExtractionMethod::Keyword),
            "failed" => Ok(ExtractionMethod::Failed),
            other => Err(format!("unknown extraction method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractionDiagnostics {
    /// Character count of the extracted section.
    pub chars: usize,
    /// The heading text that opened the section, when one matched.
    pub start_marker: Option<String>,
    /// The heading text that closed the section, when one matched.
    pub end_marker: Option<String>,
}

/// Outcome of one Business-section extraction. `method == Failed` if and
/// only if `business_text` is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionResult {
    pub business_text: String,
    pub method: ExtractionMethod,
    pub diagnostics: ExtractionDiagnostics,
}

impl ExtractionResult {
    fn failed() -> Self {
        ExtractionResult {
            business_text: String::new(),
            method: ExtractionMethod::Failed,
            diagnostics: ExtractionDiagnostics::default(),
        }
    }
}

// Any `ITEM <n>[letter]` heading at a line start, with an optional
// `PART <roman>` prefix. The letter suffix must be adjacent to the digits
// ("ITEM 1A", not "ITEM 1 A") so prose like "item 1 a number of..." is not
// mistaken for a heading.
static ITEM_HEADING_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?mi)^[ \t]*(?:part\s+[ivx]{1,4}\b[ \t,.:;\-]*)?item\s+([0-9]{1,2})([a-z])?\b")
        .expect("item heading pattern compiles")
});

// `ITEM 1A` / `SECTION 1A` heading at a line start, opening Risk Factors.
static RISK_HEADING_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?mi)^[ \t]*(?:part\s+[ivx]{1,4}\b[ \t,.:;\-]*)?(?:item|section)\s+1a\b")
        .expect("risk heading pattern compiles")
});

static BUSINESS_LABEL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)business").expect("business label pattern compiles"));

struct ItemHeading {
    start: usize,
    end: usize,
    number: u8,
    letter: Option<char>,
    text: String,
}

fn item_headings(text: &str) -> Vec<ItemHeading> {
    ITEM_HEADING_RE
        .captures_iter(text)
        .map(|cap| {
            let whole = cap.get(0).expect("match");
            ItemHeading {
                start: whole.start(),
                end: whole.end(),
                number: cap[1].parse().expect("1-2 digits fit u8"),
                letter: cap
                    .get(2)
                    .map(|m| m.as_str().chars().next().expect("single letter")),
                text: whole.as_str().trim().to_string(),
            }
        })
        .collect()
}

/// Extract the Business section from one plain-text filing.
///
/// The heading tier considers every `ITEM 1` heading (headings labeled
/// `BUSINESS` within 40 characters take precedence) and keeps the candidate
/// with the longest body, which sidesteps table-of-contents entries. The
/// section ends at the next item heading, so the returned text never
/// contains one. When no heading candidate yields text, the keyword tier
/// looks for a `BUSINESS` line and requires at least 1000 characters.
pub fn extract_business_section(raw: &str) -> ExtractionResult {
    let headings = item_headings(raw);

    let mut labeled: Vec<Candidate> = Vec::new();
    let mut bare: Vec<Candidate> = Vec::new();
    for (idx, h) in headings.iter().enumerate() {
        if h.number != 1 || h.letter.is_some() {
            continue;
        }
        match candidate_from_heading(raw, &headings, idx) {
            Some(c) if c.has_business_label => labeled.push(c),
            Some(c) => bare.push(c),
            None => {}
        }
    }
    let best = labeled
        .into_iter()
        .max_by_key(|c| c.body.chars().count())
        .or_else(|| bare.into_iter().max_by_key(|c| c.body.chars().count()));

    if let Some(c) = best {
        let chars = c.body.chars().count();
        return ExtractionResult {
            business_text: c.body,
            method: ExtractionMethod::Regex,
            diagnostics: ExtractionDiagnostics {
                chars,
                start_marker: Some(c.start_marker),
                end_marker: c.end_marker,
            },
        };
    }

    keyword_tier(raw).unwrap_or_else(ExtractionResult::failed)
}

struct Candidate {
    body: String,
    has_business_label: bool,
    start_marker: String,
    end_marker: Option<String>,
}

fn candidate_from_heading(raw: &str, headings: &[ItemHeading], idx: usize) -> Option<Candidate> {
    let heading = &headings[idx];
    let mut content_start = heading.end;
    let mut start_marker = heading.text.clone();

    // Optional BUSINESS label within the lookahead window.
    let lookahead_end = floor_char_boundary(raw, heading.end + BUSINESS_LABEL_LOOKAHEAD);
    let window = &raw[heading.end..lookahead_end];
    let has_business_label = match BUSINESS_LABEL_RE.find(window) {
        Some(m) => {
            content_start = heading.end + m.end();
            start_marker = raw[heading.start..content_start].trim().to_string();
            true
        }
        None => false,
    };

    let next = headings[idx + 1..]
        .iter()
        .find(|h| h.start >= content_start);
    let content_end = next.map_or(raw.len(), |h| h.start);
    let body = trim_section(&raw[content_start..content_end]);
    if body.is_empty() {
        return None;
    }
    Some(Candidate {
        body,
        has_business_label,
        start_marker,
        end_marker: next.map(|h| h.text.clone()),
    })
}

fn keyword_tier(raw: &str) -> Option<ExtractionResult> {
    let mut offset = 0usize;
    let mut section_start: Option<usize> = None;
    let mut business_line = String::new();
    for line in raw.split_inclusive('\n') {
        let first_token = line
            .trim_start()
            .split(|c: char| !c.is_alphabetic())
            .next()
            .unwrap_or("");
        match section_start {
            None => {
                if first_token.eq_ignore_ascii_case("business") {
                    section_start = Some(offset + line.len());
                    business_line = line.trim().to_string();
                }
            }
            Some(start) => {
                if first_token.eq_ignore_ascii_case("item") {
                    return keyword_result(raw, start, offset, &business_line);
                }
            }
        }
        offset += line.len();
    }
    section_start.and_then(|start| keyword_result(raw, start, raw.len(), &business_line))
}

fn keyword_result(
    raw: &str,
    start: usize,
    end: usize,
    business_line: &str,
) -> Option<ExtractionResult> {
    let body = trim_section(&raw[start..end]);
    let chars = body.chars().count();
    if chars < MIN_KEYWORD_SECTION_CHARS {
        return None;
    }
    Some(ExtractionResult {
        business_text: body,
        method: ExtractionMethod::Keyword,
        diagnostics: ExtractionDiagnostics {
            chars,
            start_marker: Some(business_line.to_string()),
            end_marker: None,
        },
    })
}

fn trim_section(text: &str) -> String {
    text.trim_start_matches([' ', '\t', '.', ':', ',', ';', '-'])
        .trim()
        .to_string()
}

fn floor_char_boundary(s: &str, mut idx: usize) -> usize {
    if idx >= s.len() {
        return s.len();
    }
    while !s.is_char_boundary(idx) {
        idx -= 1;
    }
    idx
}

/// Remove the Risk Factors section (from an `ITEM 1A` / `SECTION 1A`
/// heading to the next item heading) from an extracted Business section.
/// Text without such a heading passes through unchanged; the operation is
/// idempotent.
pub fn strip_risk_factors(business_text: &str) -> String {
    let mut text = business_text.to_string();
    while let Some(m) = RISK_HEADING_RE.find(&text) {
        let cut_end = item_headings(&text)
            .into_iter()
            .find(|h| h.start >= m.end())
            .map_or(text.len(), |h| h.start);
        text.replace_range(m.start()..cut_end, "");
    }
    text
}

/// Drop financial firms (SIC 6000-6999) and records the manifest producer
/// did not prefilter. Order is preserved.
pub fn filter_corpus(records: Vec<FilingRecord>) -> Vec<FilingRecord> {
    records
        .into_iter()
        .filter(|r| !(6000..=6999).contains(&r.sic_code) && r.prefiltered)
        .collect()
}

const MANIFEST_COLUMNS: [&str; 6] = [
    "cik",
    "year",
    "form_type",
    "sic_code",
    "text_path",
    "prefiltered",
];

/// Load a filing manifest CSV (`cik,year,form_type,sic_code,text_path,prefiltered`).
///
/// Records come back in file order. Rows that fail to parse, violate a
/// field invariant, or repeat a `(cik, year)` key are hard errors naming
/// the offending row.
pub fn load_manifest(path: &Path) -> Result<Vec<FilingRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_error(path, e))?;

    let headers = reader.headers().map_err(|e| io_error(path, e))?.clone();
    let mut column_index = HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        column_index.insert(name.to_string(), i);
    }
    for column in MANIFEST_COLUMNS {
        if !column_index.contains_key(column) {
            return Err(IngestError::MissingColumn {
                path: path.to_path_buf(),
                column: column.to_string(),
            });
        }
    }

    let mut records = Vec::new();
    let mut seen: HashMap<(u64, i32), usize> = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let row_number = i + 1;
        let row = row.map_err(|e| io_error(path, e))?;
        let field = |name: &str| -> Result<&str, IngestError> {
            row.get(column_index[name])
                .ok_or_else(|| malformed(path, row_number, name, "missing value"))
        };

        let cik: u64 = parse_field(path, row_number, "cik", field("cik")?)?;
        if cik == 0 {
            return Err(malformed(path, row_number, "cik", "must be positive"));
        }
        let year: i32 = parse_field(path, row_number, "year", field("year")?)?;
        if !(1901..2100).contains(&year) {
            return Err(malformed(
                path,
                row_number,
                "year",
                "must lie strictly between 1900 and 2100",
            ));
        }
        let form_type = FormType::from_str(field("form_type")?)
            .map_err(|e| malformed(path, row_number, "form_type", &e))?;
        let sic_code: u16 = parse_field(path, row_number, "sic_code", field("sic_code")?)?;
        if sic_code > 9999 {
            return Err(malformed(
                path,
                row_number,
                "sic_code",
                "must be at most 9999",
            ));
        }
        let text_path = PathBuf::from(field("text_path")?);
        if text_path.as_os_str().is_empty() {
            return Err(malformed(
                path,
                row_number,
                "text_path",
                "must be non-empty",
            ));
        }
        let prefiltered = match field("prefiltered")? {
            "0" => false,
            "1" => true,
            other => {
                return Err(malformed(
                    path,
                    row_number,
                    "prefiltered",
                    &format!("expected 0 or 1, got `{other}`"),
                ))
            }
        };

        if let Some(&first_row) = seen.get(&(cik, year)) {
            return Err(IngestError::DuplicateKey {
                path: path.to_path_buf(),
                cik,
                year,
                first_row,
                second_row: row_number,
            });
        }
        seen.insert((cik, year), row_number);

        records.push(FilingRecord {
            cik,
            year,
            form_type,
            sic_code,
            text_path,
            prefiltered,
        });
    }
    Ok(records)
}

fn io_error(path: &Path, e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> IngestError {
    IngestError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

fn malformed(path: &Path, row: usize, field: &str, problem: &str) -> IngestError {
    IngestError::MalformedRow {
        path: path.to_path_buf(),
        row,
        field: field.to_string(),
        problem: problem.to_string(),
    }
}

fn parse_field<T: FromStr>(
    path: &Path,
    row: usize,
    field: &str,
    value: &str,
) -> Result<T, IngestError> {
    value
        .parse()
        .map_err(|_| malformed(path, row, field, &format!("cannot parse `{value}`")))
}

/// File name for one extracted section under the sections directory.
pub fn section_file_name(cik: u64, year: i32) -> String {
    format!("{cik}_{year}.txt")
}

/// One row of the extraction report CSV (`cik,year,method,chars`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionReportRow {
    pub cik: u64,
    pub year: i32,
    pub method: ExtractionMethod,
    pub chars: usize,
}

pub fn write_extraction_report(
    rows: &[ExtractionReportRow],
    path: &Path,
    stamp: &crate::RunStamp,
) -> Result<(), IngestError> {
    let mut file = std::fs::File::create(path).map_err(|e| io_error(path, e))?;
    writeln!(file, "{}", stamp.comment_line()).map_err(|e| io_error(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    writer
        .write_record(["cik", "year", "method", "chars"])
        .map_err(|e| io_error(path, e))?;
    for row in rows {
        writer
            .write_record([
                row.cik.to_string(),
                row.year.to_string(),
                row.method.to_string(),
                row.chars.to_string(),
            ])
            .map_err(|e| io_error(path, e))?;
    }
    writer.flush().map_err(|e| io_error(path, e))?;
    Ok(())
}

pub fn read_extraction_report(path: &Path) -> Result<Vec<ExtractionReportRow>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_error(path, e))?;
    let mut rows = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_number = i + 1;
        let row = row.map_err(|e| io_error(path, e))?;
        if row.len() != 4 {
            return Err(malformed(path, row_number, "row", "expected 4 columns"));
        }
        rows.push(ExtractionReportRow {
            cik: parse_field(path, row_number, "cik", &row[0])?,
            year: parse_field(path, row_number, "year", &row[1])?,
            method: ExtractionMethod::from_str(&row[2])
                .map_err(|e| malformed(path, row_number, "method", &e))?,
            chars: parse_field(path, row_number, "chars", &row[3])?,
        });
    }
    Ok(rows)
}
