//! Summary collections: tokenization, JSON-Lines ingestion and the record model.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Architecture label used for human-written reference summaries.
pub const HUMAN: &str = "Human";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: unknown {field} label {label:?}")]
    UnknownLabel {
        line: usize,
        field: &'static str,
        label: String,
    },
    #[error("line {line}: record {id:?} is human-written but carries train_dataset {train:?}")]
    HumanWithTrainDataset {
        line: usize,
        id: String,
        train: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PunctuationMode {
    /// Punctuation stays glued to the word it touches.
    Attached,
    /// Leading and trailing punctuation characters become tokens of their own.
    #[default]
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerConfig {
    pub case_fold: bool,
    pub punctuation_mode: PunctuationMode,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            case_fold: true,
            punctuation_mode: PunctuationMode::Split,
        }
    }
}

/// Normalized token stream for one text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    tokens: Vec<String>,
    source_char_count: usize,
}

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn source_char_count(&self) -> usize {
        self.source_char_count
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Split `raw_text` on whitespace, optionally case-folding and peeling
/// punctuation off both ends of each unit. Never produces empty tokens.
pub fn tokenize(raw_text: &str, config: &TokenizerConfig) -> TokenSequence {
    let mut tokens = Vec::new();
    for unit in raw_text.split_whitespace() {
        let unit = if config.case_fold {
            unit.to_lowercase()
        } else {
            unit.to_string()
        };
        match config.punctuation_mode {
            PunctuationMode::Attached => tokens.push(unit),
            PunctuationMode::Split => split_punctuation(&unit, &mut tokens),
        }
    }
    TokenSequence {
        tokens,
        source_char_count: raw_text.chars().count(),
    }
}

fn split_punctuation(unit: &str, out: &mut Vec<String>) {
    let core_start = unit.find(|c: char| !is_punct(c));
    let Some(core_start) = core_start else {
        // all punctuation
        out.extend(unit.chars().map(String::from));
        return;
    };
    let core_end = unit
        .char_indices()
        .rev()
        .find(|&(_, c)| !is_punct(c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(unit.len());
    out.extend(unit[..core_start].chars().map(String::from));
    out.push(unit[core_start..core_end].to_string());
    out.extend(unit[core_end..].chars().map(String::from));
}

/// One summary plus the metadata the regression needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub id: String,
    pub summary_text: String,
    pub summary: TokenSequence,
    pub input_text: Option<String>,
    pub input: Option<TokenSequence>,
    pub architecture: String,
    pub train_dataset: Option<String>,
    pub test_dataset: String,
}

impl SummaryRecord {
    pub fn new(raw: RawRecord, config: &TokenizerConfig) -> Self {
        let summary = tokenize(&raw.summary, config);
        let input = raw.input.as_deref().map(|t| tokenize(t, config));
        Self {
            id: raw.id,
            summary_text: raw.summary,
            summary,
            input_text: raw.input,
            input,
            architecture: raw.architecture,
            train_dataset: raw.train_dataset,
            test_dataset: raw.test_dataset,
        }
    }

    pub fn length_tokens(&self) -> usize {
        self.summary.len()
    }

    pub fn is_human(&self) -> bool {
        self.architecture == HUMAN
    }

    pub fn to_raw(&self) -> RawRecord {
        RawRecord {
            id: self.id.clone(),
            summary: self.summary_text.clone(),
            input: self.input_text.clone(),
            architecture: self.architecture.clone(),
            train_dataset: self.train_dataset.clone(),
            test_dataset: self.test_dataset.clone(),
        }
    }
}

/// Wire form of one JSON-Lines input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub id: String,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    pub architecture: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_dataset: Option<String>,
    pub test_dataset: String,
}

/// Optional label whitelists applied while loading.
#[derive(Debug, Clone, Default)]
pub struct LabelWhitelist {
    pub architectures: Option<BTreeSet<String>>,
    pub datasets: Option<BTreeSet<String>>,
}

impl LabelWhitelist {
    fn check(&self, line: usize, raw: &RawRecord) -> Result<(), CorpusError> {
        if let Some(archs) = &self.architectures {
            if !archs.contains(&raw.architecture) {
                return Err(CorpusError::UnknownLabel {
                    line,
                    field: "architecture",
                    label: raw.architecture.clone(),
                });
            }
        }
        if let Some(sets) = &self.datasets {
            let labels = [
                ("test_dataset", Some(&raw.test_dataset)),
                ("train_dataset", raw.train_dataset.as_ref()),
            ];
            for (field, label) in labels {
                if let Some(label) = label {
                    if !sets.contains(label) {
                        return Err(CorpusError::UnknownLabel {
                            line,
                            field,
                            label: label.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    name: String,
    config: TokenizerConfig,
    records: Vec<SummaryRecord>,
}

impl Corpus {
    /// Tokenizes every raw record under one config. Fails on duplicate ids.
    pub fn from_raw(
        name: impl Into<String>,
        raws: Vec<RawRecord>,
        config: TokenizerConfig,
    ) -> Result<Self, CorpusError> {
        let numbered = raws.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect();
        Self::from_numbered(name.into(), numbered, config)
    }

    fn from_numbered(
        name: String,
        raws: Vec<(usize, RawRecord)>,
        config: TokenizerConfig,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(raws.len());
        for (line, raw) in &raws {
            check_record(*line, raw)?;
            if !seen.insert(raw.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    line: *line,
                    id: raw.id.clone(),
                });
            }
        }
        let records = raws
            .into_par_iter()
            .map(|(_, raw)| SummaryRecord::new(raw, &config))
            .collect();
        Ok(Self {
            name,
            config,
            records,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn config(&self) -> &TokenizerConfig {
        &self.config
    }

    pub fn records(&self) -> &[SummaryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_tokens(&self) -> usize {
        self.records.iter().map(|r| r.length_tokens()).sum()
    }

    pub fn get(&self, id: &str) -> Option<&SummaryRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Writes the corpus back out in its JSON-Lines input schema.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut out, &record.to_raw())?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        let mut out = BufWriter::new(file);
        self.write_jsonl(&mut out).map_err(io_err)?;
        out.flush().map_err(io_err)
    }
}

fn check_record(line: usize, raw: &RawRecord) -> Result<(), CorpusError> {
    if raw.architecture == HUMAN {
        if let Some(train) = &raw.train_dataset {
            return Err(CorpusError::HumanWithTrainDataset {
                line,
                id: raw.id.clone(),
                train: train.clone(),
            });
        }
    }
    Ok(())
}

/// Parses JSON-Lines content, pairing each record with its 1-based line
/// number. Blank lines are skipped.
pub fn parse_jsonl<R: BufRead>(
    reader: R,
    whitelist: &LabelWhitelist,
) -> Result<Vec<(usize, RawRecord)>, CorpusError> {
    let mut raws = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        whitelist.check(line_no, &raw)?;
        raws.push((line_no, raw));
    }
    Ok(raws)
}

/// Loads a JSON-Lines corpus. The corpus is named after the file stem.
pub fn load_corpus(path: &Path, config: &TokenizerConfig) -> Result<Corpus, CorpusError> {
    load_corpus_with(path, config, &LabelWhitelist::default())
}

pub fn load_corpus_with(
    path: &Path,
    config: &TokenizerConfig,
    whitelist: &LabelWhitelist,
) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raws = parse_jsonl(BufReader::new(file), whitelist)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Corpus::from_numbered(name, raws, *config)
}
