//! Cross-summary self-repetition analysis.
//!
//! A summarizer repeats itself when the same long n-gram (four tokens or
//! more by default) turns up in outputs for different inputs. This crate
//! indexes those n-grams over a collection of summaries, scores each summary
//! and the collection, measures abstractiveness against paired inputs, and
//! fits a linear model relating the per-summary scores to architecture,
//! training data, test data and train-by-test interactions.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod metrics;
pub mod ngram_index;
pub mod regression;
pub mod report;
pub mod special;

pub use corpus::{load_corpus, tokenize, Corpus, SummaryRecord, TokenSequence, TokenizerConfig};
pub use metrics::{
    abstractiveness, dataset_repetition_score, length_statistics, summary_repetition_score,
    DatasetRepetitionScore, ScoreMode, SummaryRepetitionScore,
};
pub use ngram_index::{build_repetition_index, extract_ngrams, NGram, RepetitionIndex};
pub use regression::{
    build_design_matrix, likelihood_ratio_test, ols_fit, DesignMatrix, LrTestResult,
    RegressionFit, RegressionSpec,
};
pub use special::t_two_sided_p;
