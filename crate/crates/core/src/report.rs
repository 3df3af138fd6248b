//! Table renderers for CSV, Markdown and JSON outputs.
//!
//! Markdown tables follow the layouts used for repetition scores (datasets by
//! architecture), abstractiveness (datasets by n-gram size), repeated n-grams
//! (phrase, `count/total`, example) and regression coefficients.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::metrics::{AbstractivenessRow, DatasetRepetitionScore, LengthStatistics, SummaryRepetitionScore};
use crate::ngram_index::RepeatRow;
use crate::regression::{LrTestResult, RegressionFit};

fn csv_string<F>(header: &[&str], write_rows: F) -> String
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    write_rows(&mut w).expect("in-memory csv");
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn num(x: f64) -> String {
    format!("{x:.10}")
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// A scored collection plus the metadata labels that place it in a table.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetRow {
    #[serde(flatten)]
    pub score: DatasetRepetitionScore,
    pub architecture: Option<String>,
    pub train_dataset: Option<String>,
    pub test_dataset: Option<String>,
}

impl DatasetRow {
    fn column_label(&self) -> String {
        match (&self.architecture, &self.train_dataset, &self.test_dataset) {
            (Some(a), Some(tr), Some(te)) if tr != te => format!("{a} [train {tr}]"),
            (Some(a), _, _) => a.clone(),
            _ => "Score".to_string(),
        }
    }

    fn row_label(&self) -> String {
        self.test_dataset.clone().unwrap_or_else(|| self.score.dataset.clone())
    }
}

pub fn dataset_scores_csv(rows: &[DatasetRow]) -> String {
    csv_string(
        &[
            "dataset",
            "architecture",
            "train_dataset",
            "test_dataset",
            "repeating_summaries",
            "total_summaries",
            "score",
        ],
        |w| {
            for r in rows {
                w.write_record([
                    r.score.dataset.as_str(),
                    r.architecture.as_deref().unwrap_or(""),
                    r.train_dataset.as_deref().unwrap_or(""),
                    r.test_dataset.as_deref().unwrap_or(""),
                    &r.score.repeating_summaries.to_string(),
                    &r.score.total_summaries.to_string(),
                    &num(r.score.score),
                ])?;
            }
            Ok(())
        },
    )
}

/// Datasets as rows, architectures as columns, scores to two decimals.
pub fn dataset_scores_markdown(rows: &[DatasetRow]) -> String {
    let mut columns: Vec<String> = Vec::new();
    let mut table: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut row_order: Vec<String> = Vec::new();
    for r in rows {
        let (row, col) = (r.row_label(), r.column_label());
        if !columns.contains(&col) {
            columns.push(col.clone());
        }
        if !row_order.contains(&row) {
            row_order.push(row.clone());
        }
        table.entry(row).or_default().insert(col, r.score.score);
    }
    let mut out = String::from("| Dataset |");
    for c in &columns {
        out.push_str(&format!(" {} |", md_escape(c)));
    }
    out.push_str("\n|:--|");
    out.push_str(&"--:|".repeat(columns.len()));
    out.push('\n');
    for row in &row_order {
        out.push_str(&format!("| {} |", md_escape(row)));
        for c in &columns {
            match table[row].get(c) {
                Some(v) => out.push_str(&format!(" {v:.2} |")),
                None => out.push_str(" |"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn summary_scores_csv(scores: &[SummaryRepetitionScore]) -> String {
    csv_string(&["id", "m", "raw_sum", "score"], |w| {
        for s in scores {
            w.write_record([
                s.summary_id.as_str(),
                &s.m.to_string(),
                &s.raw_sum.to_string(),
                &num(s.score),
            ])?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LengthRow {
    pub dataset: String,
    #[serde(flatten)]
    pub summary: LengthStatistics,
    pub input_mean: Option<f64>,
}

pub fn lengths_csv(rows: &[LengthRow]) -> String {
    csv_string(&["dataset", "mean", "median", "min", "max", "input_mean"], |w| {
        for r in rows {
            w.write_record([
                r.dataset.as_str(),
                &num(r.summary.mean),
                &num(r.summary.median),
                &r.summary.min.to_string(),
                &r.summary.max.to_string(),
                &r.input_mean.map(num).unwrap_or_default(),
            ])?;
        }
        Ok(())
    })
}

pub fn lengths_markdown(rows: &[LengthRow]) -> String {
    let mut out = String::from(
        "| Dataset | Input Document | Summary (mean) | Median | Min | Max |\n|:--|--:|--:|--:|--:|--:|\n",
    );
    for r in rows {
        let input = r.input_mean.map(|m| format!("{m:.2}")).unwrap_or_default();
        out.push_str(&format!(
            "| {} | {} | {:.2} | {:.1} | {} | {} |\n",
            md_escape(&r.dataset),
            input,
            r.summary.mean,
            r.summary.median,
            r.summary.min,
            r.summary.max
        ));
    }
    out
}

/// A repeated n-gram with one example summary (the first containing id).
#[derive(Debug, Clone, Serialize)]
pub struct RepeatReportRow {
    pub ngram: String,
    pub n: usize,
    pub count: usize,
    pub total: usize,
    pub example_id: String,
    pub example: String,
    pub ids: Option<Vec<String>>,
}

impl RepeatReportRow {
    pub fn new(row: &RepeatRow, example: &str, with_ids: bool) -> Self {
        Self {
            ngram: row.ngram.to_string(),
            n: row.ngram.n(),
            count: row.count,
            total: row.corpus_size,
            example_id: row.ids.first().cloned().unwrap_or_default(),
            example: example.to_string(),
            ids: with_ids.then(|| row.ids.clone()),
        }
    }

    pub fn frequency(&self) -> String {
        format!("{}/{}", self.count, self.total)
    }
}

pub fn repeats_csv(rows: &[RepeatReportRow], with_ids: bool) -> String {
    let mut header = vec!["ngram", "n", "count", "total", "freq", "example_id", "example"];
    if with_ids {
        header.push("ids");
    }
    csv_string(&header, |w| {
        for r in rows {
            let mut rec = vec![
                r.ngram.clone(),
                r.n.to_string(),
                r.count.to_string(),
                r.total.to_string(),
                r.frequency(),
                r.example_id.clone(),
                r.example.clone(),
            ];
            if with_ids {
                rec.push(r.ids.as_deref().unwrap_or_default().join(" "));
            }
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn repeats_markdown(rows: &[RepeatReportRow], with_ids: bool) -> String {
    let mut out = String::from("| Repeating n-gram | Freq |\n|:--|--:|\n");
    for r in rows {
        out.push_str(&format!("| {} | {} |\n", md_escape(&r.ngram), r.frequency()));
        out.push_str(&format!(
            "| Example ({}): {} | |\n",
            md_escape(&r.example_id),
            md_escape(&r.example)
        ));
        if with_ids {
            if let Some(ids) = &r.ids {
                out.push_str(&format!("| Ids: {} | |\n", md_escape(&ids.join(", "))));
            }
        }
    }
    out
}

fn ngram_label(n: usize) -> String {
    match n {
        1 => "Unigram".into(),
        2 => "Bigram".into(),
        3 => "Trigram".into(),
        n => format!("{n}-gram"),
    }
}

pub fn abstractiveness_csv(rows: &[AbstractivenessRow]) -> String {
    csv_string(&["dataset", "n", "novel", "total", "percent_novel"], |w| {
        for r in rows {
            w.write_record([
                r.dataset.as_str(),
                &r.n.to_string(),
                &r.novel.to_string(),
                &r.total.to_string(),
                &num(r.percent_novel),
            ])?;
        }
        Ok(())
    })
}

/// Datasets as rows, n-gram sizes as columns, percentages to two decimals.
pub fn abstractiveness_markdown(rows: &[AbstractivenessRow]) -> String {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut datasets: Vec<&str> = Vec::new();
    for r in rows {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
    }
    let mut out = String::from("| Dataset |");
    for &n in &ns {
        out.push_str(&format!(" {} |", ngram_label(n)));
    }
    out.push_str("\n|:--|");
    out.push_str(&"--:|".repeat(ns.len()));
    out.push('\n');
    for d in datasets {
        out.push_str(&format!("| {} |", md_escape(d)));
        for &n in &ns {
            match rows.iter().find(|r| r.dataset == d && r.n == n) {
                Some(r) => out.push_str(&format!(" {:.2} |", r.percent_novel)),
                None => out.push_str(" |"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn regression_csv(fit: &RegressionFit) -> String {
    csv_string(
        &["term", "coef", "std_err", "t", "p_value", "ci_low", "ci_high"],
        |w| {
            for j in 0..fit.n_params {
                w.write_record([
                    fit.column_names[j].as_str(),
                    &num(fit.coefficients[j]),
                    &num(fit.standard_errors[j]),
                    &num(fit.t_statistics[j]),
                    &num(fit.p_values[j]),
                    &num(fit.ci_lower[j]),
                    &num(fit.ci_upper[j]),
                ])?;
            }
            Ok(())
        },
    )
}

fn trim_level(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

/// Coef, P>|t| and the confidence bounds, one row per term.
pub fn regression_markdown(fit: &RegressionFit) -> String {
    let tail = (1.0 - fit.confidence_level) / 2.0;
    let mut out = format!(
        "| | Coef | P>\\|t\\| | [{} | {}] |\n|:--|--:|--:|--:|--:|\n",
        trim_level(tail),
        trim_level(1.0 - tail)
    );
    for j in 0..fit.n_params {
        out.push_str(&format!(
            "| {} | {:.4} | {:.3} | {:.3} | {:.3} |\n",
            md_escape(&fit.column_names[j]),
            fit.coefficients[j],
            fit.p_values[j],
            fit.ci_lower[j],
            fit.ci_upper[j]
        ));
    }
    out.push_str(&format!(
        "\nObservations: {}. Parameters: {}. Residual df: {}. RSS: {:.4}.\n",
        fit.n_rows, fit.n_params, fit.degrees_of_freedom, fit.rss
    ));
    out
}

pub fn lr_json(result: &LrTestResult) -> String {
    to_json(result)
}
