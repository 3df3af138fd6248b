//! Command-line front end: argument parsing, the analysis commands and the
//! run manifest written beside every set of reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{AnalysisConfig, ConfigError, OutputFormat};
use crate::corpus::{load_corpus, Corpus, CorpusError};
use crate::metrics::{self, MetricsError, SummaryRepetitionScore};
use crate::ngram_index::{IndexError, RepetitionIndex};
use crate::regression::{self, Observation, RegressionError};
use crate::report::{self, DatasetRow, LengthRow, RepeatReportRow};

pub const MANIFEST_FILE: &str = "run-manifest.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("failed to load corpora:\n{}", .0.iter().map(|(p, e)| format!("  {p}: {e}")).collect::<Vec<_>>().join("\n"))]
    Load(Vec<(String, CorpusError)>),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Index(#[from] IndexError),
    #[error("{0}")]
    Regression(#[from] RegressionError),
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for unusable input, 2 for analysis failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Load(_) | CliError::Input(_) | CliError::Write { .. } => 1,
            CliError::Metrics(MetricsError::MissingInput(_)) => 1,
            CliError::Metrics(_) | CliError::Index(_) | CliError::Regression(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "repscope", version, about = "Measure self-repetition across summarizer outputs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dataset-level and per-summary repetition scores plus length statistics.
    Score { corpora: Vec<PathBuf> },
    /// Most frequent repeating n-grams of one corpus.
    Repeats { corpus: PathBuf },
    /// Percentage of summary n-grams absent from the paired inputs.
    Abstractiveness { corpus: PathBuf },
    /// OLS fit of per-summary scores and the interaction likelihood-ratio test.
    Regress { corpora: Vec<PathBuf> },
    /// Every report above in one run.
    ReportAll { corpora: Vec<PathBuf> },
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// TOML config file (or a previous run manifest).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub min_n: Option<usize>,
    /// all_ngrams or maximal_only.
    #[arg(long, global = true, value_parser = parse_score_mode)]
    pub score_mode: Option<metrics::ScoreMode>,
    #[arg(long, global = true)]
    pub tokenizer_case_fold: Option<bool>,
    #[arg(long, global = true)]
    pub limit: Option<usize>,
    #[arg(long, global = true)]
    pub min_count: Option<usize>,
    #[arg(long, global = true)]
    pub no_interactions: bool,
    #[arg(long, global = true)]
    pub confidence: Option<f64>,
    /// Comma-separated subset of csv,json,markdown.
    #[arg(long, global = true, value_delimiter = ',')]
    pub formats: Option<Vec<OutputFormat>>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub with_ids: bool,
}

fn parse_score_mode(s: &str) -> Result<metrics::ScoreMode, String> {
    match s {
        "all_ngrams" | "all-ngrams" => Ok(metrics::ScoreMode::AllNgrams),
        "maximal_only" | "maximal-only" => Ok(metrics::ScoreMode::MaximalOnly),
        other => Err(format!("unknown score mode {other:?}")),
    }
}

impl Overrides {
    /// Config file first, then flags on top.
    pub fn resolve(&self) -> Result<AnalysisConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => AnalysisConfig::load(path)?,
            None => AnalysisConfig::default(),
        };
        if let Some(v) = self.min_n {
            config.min_n = v;
        }
        if let Some(v) = self.score_mode {
            config.score_mode = v;
        }
        if let Some(v) = self.tokenizer_case_fold {
            config.tokenizer.case_fold = v;
        }
        if let Some(v) = self.limit {
            config.repeats.limit = v;
        }
        if let Some(v) = self.min_count {
            config.repeats.min_count = v;
        }
        if self.with_ids {
            config.repeats.with_ids = true;
        }
        if self.no_interactions {
            config.regression.include_interactions = false;
        }
        if let Some(v) = self.confidence {
            config.regression.confidence_level = v;
        }
        if let Some(v) = &self.formats {
            config.output_formats = v.iter().copied().collect();
        }
        if let Some(v) = &self.output_dir {
            config.output_dir = v.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = cli.overrides.resolve()?;
    match &cli.command {
        Command::Score { corpora } => cmd_score(corpora, &config),
        Command::Repeats { corpus } => cmd_repeats(corpus, &config),
        Command::Abstractiveness { corpus } => cmd_abstractiveness(corpus, &config),
        Command::Regress { corpora } => cmd_regress(corpora, &config),
        Command::ReportAll { corpora } => cmd_report_all(corpora, &config),
    }
}

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
    records: usize,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_sha256: String,
    config: &'a AnalysisConfig,
    inputs: &'a [InputDigest],
    outputs: &'a BTreeMap<String, String>,
}

/// Collects report files for one invocation and writes the manifest last.
struct Run<'a> {
    config: &'a AnalysisConfig,
    command: &'static str,
    inputs: Vec<InputDigest>,
    outputs: BTreeMap<String, String>,
}

impl<'a> Run<'a> {
    fn new(config: &'a AnalysisConfig, command: &'static str) -> Result<Self, CliError> {
        fs::create_dir_all(&config.output_dir).map_err(|source| CliError::Write {
            path: config.output_dir.display().to_string(),
            source,
        })?;
        Ok(Self {
            config,
            command,
            inputs: Vec::new(),
            outputs: BTreeMap::new(),
        })
    }

    fn wants(&self, format: OutputFormat) -> bool {
        self.config.output_formats.contains(&format)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.config.output_dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        })?;
        self.outputs
            .insert(name.to_string(), hex::encode(Sha256::digest(contents.as_bytes())));
        Ok(())
    }

    /// Writes whichever of the three renderings the config asks for.
    fn write_table(
        &mut self,
        stem: &str,
        csv: impl FnOnce() -> String,
        markdown: impl FnOnce() -> String,
        json: impl FnOnce() -> String,
    ) -> Result<(), CliError> {
        if self.wants(OutputFormat::Csv) {
            self.write(&format!("{stem}.csv"), &csv())?;
        }
        if self.wants(OutputFormat::Markdown) {
            self.write(&format!("{stem}.md"), &markdown())?;
        }
        if self.wants(OutputFormat::Json) {
            self.write(&format!("{stem}.json"), &json())?;
        }
        Ok(())
    }

    fn record_inputs(&mut self, paths: &[PathBuf], corpora: &[Analyzed]) -> Result<(), CliError> {
        for (path, a) in paths.iter().zip(corpora) {
            let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            self.inputs.push(InputDigest {
                path: path.display().to_string(),
                sha256: hex::encode(Sha256::digest(&bytes)),
                records: a.corpus.len(),
            });
        }
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        let manifest = Manifest {
            tool: "repscope",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config_sha256: self.config.digest(),
            config: self.config,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let path = self.config.output_dir.join(MANIFEST_FILE);
        fs::write(&path, report::to_json(&manifest)).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        })
    }
}

/// A loaded corpus with its index and per-summary scores.
pub struct Analyzed {
    pub corpus: Corpus,
    pub index: RepetitionIndex,
    pub scores: Vec<SummaryRepetitionScore>,
}

impl Analyzed {
    fn uniform<'c>(&'c self, label: impl Fn(&'c crate::corpus::SummaryRecord) -> Option<&'c str>) -> Option<String> {
        let mut labels = self.corpus.records().iter().map(label);
        let first = labels.next()??;
        labels
            .all(|l| l == Some(first))
            .then(|| first.to_string())
    }

    fn dataset_row(&self) -> Result<DatasetRow, CliError> {
        Ok(DatasetRow {
            score: metrics::dataset_repetition_score(&self.corpus, &self.index)?,
            architecture: self.uniform(|r| Some(r.architecture.as_str())),
            train_dataset: self.uniform(|r| r.train_dataset.as_deref()),
            test_dataset: self.uniform(|r| Some(r.test_dataset.as_str())),
        })
    }

    fn has_inputs(&self) -> bool {
        self.corpus.records().iter().all(|r| r.input.is_some())
    }
}

/// Loads, indexes and scores every corpus; load failures are reported together.
pub fn analyze(paths: &[PathBuf], config: &AnalysisConfig) -> Result<Vec<Analyzed>, CliError> {
    if paths.is_empty() {
        return Err(CliError::Input("no corpus files given".into()));
    }
    let loaded: Vec<Result<Corpus, CorpusError>> = paths
        .par_iter()
        .map(|p| load_corpus(p, &config.tokenizer))
        .collect();
    let mut corpora = Vec::new();
    let mut failures = Vec::new();
    for (path, result) in paths.iter().zip(loaded) {
        match result {
            Ok(c) => corpora.push(c),
            Err(e) => failures.push((path.display().to_string(), e)),
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Load(failures));
    }
    let mut names: Vec<&str> = corpora.iter().map(Corpus::name).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Input(format!("two corpora share the name {:?}", w[0])));
    }
    if let Some(c) = corpora.iter().find(|c| c.is_empty()) {
        return Err(CliError::Input(format!("corpus {:?} has no records", c.name())));
    }
    corpora
        .into_par_iter()
        .map(|corpus| {
            let index = RepetitionIndex::build(&corpus, config.min_n)?;
            let scores = metrics::summary_scores(&corpus, &index, config.score_mode)?;
            Ok(Analyzed {
                corpus,
                index,
                scores,
            })
        })
        .collect()
}

fn write_scores(run: &mut Run, analyzed: &[Analyzed]) -> Result<(), CliError> {
    let rows: Vec<DatasetRow> = analyzed.iter().map(Analyzed::dataset_row).collect::<Result<_, _>>()?;
    run.write_table(
        "dataset_scores",
        || report::dataset_scores_csv(&rows),
        || report::dataset_scores_markdown(&rows),
        || report::to_json(&rows),
    )?;
    for a in analyzed {
        let stem = format!("summary_scores_{}", a.corpus.name());
        if run.wants(OutputFormat::Csv) {
            run.write(&format!("{stem}.csv"), &report::summary_scores_csv(&a.scores))?;
        }
        if run.wants(OutputFormat::Json) {
            run.write(&format!("{stem}.json"), &report::to_json(&a.scores))?;
        }
    }
    let lengths: Vec<LengthRow> = analyzed
        .iter()
        .map(|a| {
            let input_mean = a.has_inputs().then(|| {
                let total: usize = a
                    .corpus
                    .records()
                    .iter()
                    .filter_map(|r| r.input.as_ref().map(|i| i.len()))
                    .sum();
                total as f64 / a.corpus.len() as f64
            });
            Ok(LengthRow {
                dataset: a.corpus.name().to_string(),
                summary: metrics::length_statistics(&a.corpus)?,
                input_mean,
            })
        })
        .collect::<Result<_, CliError>>()?;
    run.write_table(
        "lengths",
        || report::lengths_csv(&lengths),
        || report::lengths_markdown(&lengths),
        || report::to_json(&lengths),
    )
}

fn write_repeats(run: &mut Run, a: &Analyzed) -> Result<(), CliError> {
    let cfg = &run.config.repeats;
    let with_ids = cfg.with_ids;
    let rows: Vec<RepeatReportRow> = a
        .index
        .top_repeats(cfg.limit, cfg.min_count)
        .iter()
        .map(|row| {
            let example = row
                .ids
                .first()
                .and_then(|id| a.corpus.get(id))
                .map(|r| r.summary_text.as_str())
                .unwrap_or_default();
            RepeatReportRow::new(row, example, with_ids)
        })
        .collect();
    let stem = format!("repeats_{}", a.corpus.name());
    run.write_table(
        &stem,
        || report::repeats_csv(&rows, with_ids),
        || report::repeats_markdown(&rows, with_ids),
        || report::to_json(&rows),
    )?;
    if run.wants(OutputFormat::Json) {
        let mut buf = Vec::new();
        a.index
            .export_jsonl(&mut buf, with_ids)
            .expect("in-memory write");
        let text = String::from_utf8(buf).expect("utf-8 json");
        run.write(&format!("index_{}.jsonl", a.corpus.name()), &text)?;
    }
    Ok(())
}

fn write_abstractiveness(run: &mut Run, analyzed: &[&Analyzed]) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for a in analyzed {
        for &n in &run.config.abstractiveness_ns {
            rows.push(metrics::abstractiveness(&a.corpus, n, run.config.abstractiveness_mode)?);
        }
    }
    run.write_table(
        "abstractiveness",
        || report::abstractiveness_csv(&rows),
        || report::abstractiveness_markdown(&rows),
        || report::to_json(&rows),
    )
}

#[derive(Serialize)]
struct DesignManifest<'a> {
    n_rows: usize,
    length_mean: f64,
    length_sd: f64,
    columns: &'a [regression::Column],
    column_names: Vec<String>,
}

fn write_regression(run: &mut Run, analyzed: &[Analyzed]) -> Result<(), CliError> {
    let observations: Vec<Observation> = analyzed
        .iter()
        .flat_map(|a| {
            a.corpus
                .records()
                .iter()
                .zip(&a.scores)
                .map(|(r, s)| Observation::from_record(r, s.score))
        })
        .collect();
    let spec = &run.config.regression;
    let design = regression::build_design_matrix(&observations, spec)?;
    run.write(
        "design_columns.json",
        &report::to_json(&DesignManifest {
            n_rows: design.n_rows(),
            length_mean: design.length_mean,
            length_sd: design.length_sd,
            columns: &design.columns,
            column_names: design.column_names(),
        }),
    )?;
    let level = spec.confidence_level;
    if spec.include_interactions {
        let full = regression::ols_fit(&design, level)?;
        let nested = regression::ols_fit(&design.without_interactions(), level)?;
        let lr = regression::likelihood_ratio_test(&full, &nested, spec.lr_critical_value)?;
        run.write_table(
            "regression",
            || report::regression_csv(&full),
            || report::regression_markdown(&full),
            || report::to_json(&full),
        )?;
        run.write_table(
            "regression_nested",
            || report::regression_csv(&nested),
            || report::regression_markdown(&nested),
            || report::to_json(&nested),
        )?;
        run.write("lr_test.json", &report::lr_json(&lr))?;
    } else {
        let nested = regression::ols_fit(&design, level)?;
        run.write_table(
            "regression_nested",
            || report::regression_csv(&nested),
            || report::regression_markdown(&nested),
            || report::to_json(&nested),
        )?;
    }
    Ok(())
}

pub fn cmd_score(paths: &[PathBuf], config: &AnalysisConfig) -> Result<(), CliError> {
    let analyzed = analyze(paths, config)?;
    let mut run = Run::new(config, "score")?;
    run.record_inputs(paths, &analyzed)?;
    write_scores(&mut run, &analyzed)?;
    run.finish()
}

pub fn cmd_repeats(path: &Path, config: &AnalysisConfig) -> Result<(), CliError> {
    let paths = [path.to_path_buf()];
    let analyzed = analyze(&paths, config)?;
    let mut run = Run::new(config, "repeats")?;
    run.record_inputs(&paths, &analyzed)?;
    write_repeats(&mut run, &analyzed[0])?;
    run.finish()
}

pub fn cmd_abstractiveness(path: &Path, config: &AnalysisConfig) -> Result<(), CliError> {
    let paths = [path.to_path_buf()];
    let analyzed = analyze(&paths, config)?;
    let mut run = Run::new(config, "abstractiveness")?;
    run.record_inputs(&paths, &analyzed)?;
    write_abstractiveness(&mut run, &[&analyzed[0]])?;
    run.finish()
}

pub fn cmd_regress(paths: &[PathBuf], config: &AnalysisConfig) -> Result<(), CliError> {
    let analyzed = analyze(paths, config)?;
    let mut run = Run::new(config, "regress")?;
    run.record_inputs(paths, &analyzed)?;
    write_regression(&mut run, &analyzed)?;
    run.finish()
}

/// Scores, repeats for each corpus, abstractiveness for corpora with paired
/// inputs, then the regression. A regression failure still leaves the other
/// reports and the manifest on disk.
pub fn cmd_report_all(paths: &[PathBuf], config: &AnalysisConfig) -> Result<(), CliError> {
    let analyzed = analyze(paths, config)?;
    let mut run = Run::new(config, "report-all")?;
    run.record_inputs(paths, &analyzed)?;
    write_scores(&mut run, &analyzed)?;
    for a in &analyzed {
        write_repeats(&mut run, a)?;
    }
    let with_inputs: Vec<&Analyzed> = analyzed.iter().filter(|a| a.has_inputs()).collect();
    if !with_inputs.is_empty() {
        write_abstractiveness(&mut run, &with_inputs)?;
    }
    let regression = write_regression(&mut run, &analyzed);
    run.finish()?;
    regression
}
