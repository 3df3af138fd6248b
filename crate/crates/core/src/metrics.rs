//! Repetition scores, abstractiveness and length statistics.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, SummaryRecord, TokenSequence};
use crate::ngram_index::RepetitionIndex;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("record {0:?} is not part of the indexed corpus")]
    NotIndexed(String),
    #[error("records without a paired input: {}", .0.join(", "))]
    MissingInput(Vec<String>),
    #[error("n-gram size must be at least 1")]
    InvalidN,
}

/// Which repeating n-gram types enter the per-summary sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Every distinct repeating type, nested ones included.
    #[default]
    AllNgrams,
    /// Only types not contained in a longer repeating n-gram of the same summary.
    MaximalOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRepetitionScore {
    pub summary_id: String,
    /// Distinct repeating n-gram types in the summary.
    pub m: usize,
    /// Sum of containing-summary counts over those types.
    pub raw_sum: usize,
    /// `ln(raw_sum + 1)`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetRepetitionScore {
    pub dataset: String,
    pub repeating_summaries: usize,
    pub total_summaries: usize,
    pub score: f64,
}

impl DatasetRepetitionScore {
    fn new(dataset: &str, repeating_summaries: usize, total_summaries: usize) -> Self {
        Self {
            dataset: dataset.to_string(),
            repeating_summaries,
            total_summaries,
            score: repeating_summaries as f64 / total_summaries as f64,
        }
    }
}

pub fn summary_repetition_score(
    record: &SummaryRecord,
    index: &RepetitionIndex,
    mode: ScoreMode,
) -> Result<SummaryRepetitionScore, MetricsError> {
    let position = index
        .position_of(&record.id)
        .filter(|&p| index.sequence(p).len() == record.length_tokens())
        .ok_or_else(|| MetricsError::NotIndexed(record.id.clone()))?;
    let (m, raw_sum) = repeating_types(index, index.sequence(position), mode);
    Ok(SummaryRepetitionScore {
        summary_id: record.id.clone(),
        m,
        raw_sum,
        score: ((raw_sum + 1) as f64).ln(),
    })
}

/// Walks the summary's windows length by length, keeping only positions whose
/// window repeats; a longer window can only repeat if both of its shorter
/// sub-windows do.
fn repeating_types(index: &RepetitionIndex, seq: &[u32], mode: ScoreMode) -> (usize, usize) {
    let mut n = index.min_n();
    if seq.len() < n {
        return (0, 0);
    }
    let mut alive: Vec<usize> = (0..=seq.len() - n)
        .filter(|&i| index.count_ids(&seq[i..i + n]) > 0)
        .collect();
    let (mut m, mut raw_sum) = (0, 0);
    while !alive.is_empty() {
        let next: Vec<usize> = alive
            .windows(2)
            .filter(|p| p[1] == p[0] + 1 && p[0] + n < seq.len())
            .map(|p| p[0])
            .filter(|&i| index.count_ids(&seq[i..i + n + 1]) > 0)
            .collect();
        let covered: HashSet<&[u32]> = match mode {
            ScoreMode::AllNgrams => HashSet::new(),
            ScoreMode::MaximalOnly => next
                .iter()
                .flat_map(|&i| [&seq[i..i + n], &seq[i + 1..i + 1 + n]])
                .collect(),
        };
        let types: HashSet<&[u32]> = alive.iter().map(|&i| &seq[i..i + n]).collect();
        for g in types {
            if !covered.contains(g) {
                m += 1;
                raw_sum += index.count_ids(g);
            }
        }
        alive = next;
        n += 1;
    }
    (m, raw_sum)
}

/// Scores for every record of `corpus`, in corpus order.
pub fn summary_scores(
    corpus: &Corpus,
    index: &RepetitionIndex,
    mode: ScoreMode,
) -> Result<Vec<SummaryRepetitionScore>, MetricsError> {
    corpus
        .records()
        .par_iter()
        .map(|r| summary_repetition_score(r, index, mode))
        .collect()
}

/// Fraction of summaries containing a repeating n-gram, counted as the union
/// of the summary sets of the shortest (min_n) repeating n-grams.
pub fn dataset_repetition_score(
    corpus: &Corpus,
    index: &RepetitionIndex,
) -> Result<DatasetRepetitionScore, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut hit = vec![false; index.corpus_size()];
    for (tokens, ids) in index.raw_entries() {
        if tokens.len() == index.min_n() {
            for &p in ids {
                hit[p as usize] = true;
            }
        }
    }
    let mut repeating = 0;
    for record in corpus.records() {
        let p = index
            .position_of(&record.id)
            .ok_or_else(|| MetricsError::NotIndexed(record.id.clone()))?;
        repeating += usize::from(hit[p]);
    }
    Ok(DatasetRepetitionScore::new(
        corpus.name(),
        repeating,
        corpus.len(),
    ))
}

/// Same score computed from per-summary results: summaries with `m > 0`.
pub fn dataset_score_from_summaries(
    dataset: &str,
    scores: &[SummaryRepetitionScore],
) -> Result<DatasetRepetitionScore, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let repeating = scores.iter().filter(|s| s.m > 0).count();
    Ok(DatasetRepetitionScore::new(dataset, repeating, scores.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstractivenessMode {
    /// Pool n-gram instances over the whole corpus.
    #[default]
    InstanceWeighted,
    /// Average the per-summary percentages (summaries with no n-grams skipped).
    SummaryAveraged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstractivenessRow {
    pub dataset: String,
    pub n: usize,
    pub novel: usize,
    pub total: usize,
    pub percent_novel: f64,
}

fn novel_counts(summary: &TokenSequence, input: &TokenSequence, n: usize) -> (usize, usize) {
    let source: HashSet<&[String]> = input.tokens().windows(n).collect();
    let windows = summary.tokens().windows(n);
    let total = windows.len();
    let novel = windows.filter(|w| !source.contains(w)).count();
    (novel, total)
}

/// Percentage of summary n-gram instances absent from the paired input.
pub fn abstractiveness(
    corpus: &Corpus,
    n: usize,
    mode: AbstractivenessMode,
) -> Result<AbstractivenessRow, MetricsError> {
    if n == 0 {
        return Err(MetricsError::InvalidN);
    }
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let missing: Vec<String> = corpus
        .records()
        .iter()
        .filter(|r| r.input.is_none())
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingInput(missing));
    }
    let counts: Vec<(usize, usize)> = corpus
        .records()
        .par_iter()
        .map(|r| novel_counts(&r.summary, r.input.as_ref().expect("checked"), n))
        .collect();
    let novel: usize = counts.iter().map(|c| c.0).sum();
    let total: usize = counts.iter().map(|c| c.1).sum();
    let percent_novel = match mode {
        AbstractivenessMode::InstanceWeighted if total > 0 => 100.0 * novel as f64 / total as f64,
        AbstractivenessMode::InstanceWeighted => 0.0,
        AbstractivenessMode::SummaryAveraged => {
            let per: Vec<f64> = counts
                .iter()
                .filter(|c| c.1 > 0)
                .map(|&(nv, t)| 100.0 * nv as f64 / t as f64)
                .collect();
            if per.is_empty() {
                0.0
            } else {
                per.iter().sum::<f64>() / per.len() as f64
            }
        }
    };
    Ok(AbstractivenessRow {
        dataset: corpus.name().to_string(),
        n,
        novel,
        total,
        percent_novel,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthStatistics {
    pub mean: f64,
    pub median: f64,
    pub min: usize,
    pub max: usize,
}

pub fn length_statistics(corpus: &Corpus) -> Result<LengthStatistics, MetricsError> {
    let mut lengths: Vec<usize> = corpus.records().iter().map(|r| r.length_tokens()).collect();
    if lengths.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    lengths.sort_unstable();
    let k = lengths.len();
    let median = if k % 2 == 1 {
        lengths[k / 2] as f64
    } else {
        (lengths[k / 2 - 1] + lengths[k / 2]) as f64 / 2.0
    };
    Ok(LengthStatistics {
        mean: lengths.iter().sum::<usize>() as f64 / k as f64,
        median,
        min: lengths[0],
        max: lengths[k - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{RawRecord, TokenizerConfig};

    fn raw(id: &str, summary: &str, input: Option<&str>) -> RawRecord {
        RawRecord {
            id: id.into(),
            summary: summary.into(),
            input: input.map(Into::into),
            architecture: "T5".into(),
            train_dataset: Some("XSum".into()),
            test_dataset: "XSum".into(),
        }
    }

    fn corpus(texts: &[&str]) -> Corpus {
        let raws = texts
            .iter()
            .enumerate()
            .map(|(i, t)| raw(&format!("s{}", i + 1), t, None))
            .collect();
        Corpus::from_raw("toy", raws, TokenizerConfig::default()).unwrap()
    }

    fn scores(texts: &[&str], mode: ScoreMode) -> Vec<SummaryRepetitionScore> {
        let c = corpus(texts);
        let idx = RepetitionIndex::build(&c, 4).unwrap();
        summary_scores(&c, &idx, mode).unwrap()
    }

    #[test]
    fn no_repeats_scores_zero() {
        let s = scores(&["a b c d", "e f g h"], ScoreMode::AllNgrams);
        assert_eq!((s[0].m, s[0].raw_sum, s[0].score), (0, 0, 0.0));
    }

    #[test]
    fn three_way_four_gram() {
        let s = scores(&["a b c d", "x a b c d", "a b c d y"], ScoreMode::AllNgrams);
        assert_eq!((s[0].m, s[0].raw_sum), (1, 3));
        assert!((s[0].score - 4f64.ln()).abs() < 1e-15);
        assert!((s[0].score - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn nested_five_gram_counts_sub_grams() {
        let s = scores(&["a b c d e", "a b c d e", "z"], ScoreMode::AllNgrams);
        assert_eq!((s[0].m, s[0].raw_sum), (3, 6));
        assert!((s[0].score - 1.9459).abs() < 1e-4);
        let s = scores(&["a b c d e", "a b c d e", "z"], ScoreMode::MaximalOnly);
        assert_eq!((s[0].m, s[0].raw_sum), (1, 2));
    }

    #[test]
    fn maximal_mode_keeps_independently_repeating_sub_gram() {
        // "a b c d" also repeats with s3 outside the 5-gram, but in s1 it is
        // covered by the repeating 5-gram
        let s = scores(&["a b c d e", "a b c d e", "a b c d"], ScoreMode::MaximalOnly);
        assert_eq!((s[0].m, s[0].raw_sum), (1, 2));
        assert_eq!((s[2].m, s[2].raw_sum), (1, 3));
    }

    #[test]
    fn unindexed_record_is_rejected() {
        let c = corpus(&["a b c d", "a b c d"]);
        let idx = RepetitionIndex::build(&c, 4).unwrap();
        let other = SummaryRecord::new(raw("zz", "a b c d", None), &TokenizerConfig::default());
        assert!(matches!(
            summary_repetition_score(&other, &idx, ScoreMode::AllNgrams),
            Err(MetricsError::NotIndexed(_))
        ));
    }

    #[test]
    fn dataset_scores() {
        let c = corpus(&["a b c d", "a b c d"]);
        let idx = RepetitionIndex::build(&c, 4).unwrap();
        assert_eq!(dataset_repetition_score(&c, &idx).unwrap().score, 1.0);

        let c = corpus(&["a b c d", "a b c d e", "x y z w"]);
        let idx = RepetitionIndex::build(&c, 4).unwrap();
        let d = dataset_repetition_score(&c, &idx).unwrap();
        assert_eq!((d.repeating_summaries, d.total_summaries), (2, 3));
        assert!((d.score - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_summary_counts_in_denominator() {
        let c = corpus(&["a b c d", "a b c d", ""]);
        let idx = RepetitionIndex::build(&c, 4).unwrap();
        let d = dataset_repetition_score(&c, &idx).unwrap();
        assert_eq!((d.repeating_summaries, d.total_summaries), (2, 3));
        let s = summary_scores(&c, &idx, ScoreMode::AllNgrams).unwrap();
        assert_eq!(s[2].score, 0.0);
    }

    fn paired(pairs: &[(&str, &str)]) -> Corpus {
        let raws = pairs
            .iter()
            .enumerate()
            .map(|(i, (s, inp))| raw(&format!("r{i}"), s, Some(inp)))
            .collect();
        Corpus::from_raw("paired", raws, TokenizerConfig::default()).unwrap()
    }

    #[test]
    fn abstractiveness_extremes() {
        let copy = paired(&[("the cat sat on the mat", "the cat sat on the mat")]);
        let disjoint = paired(&[("one two three four five", "six seven eight nine ten")]);
        for n in 1..=4 {
            let mode = AbstractivenessMode::InstanceWeighted;
            assert_eq!(abstractiveness(&copy, n, mode).unwrap().percent_novel, 0.0);
            assert_eq!(abstractiveness(&disjoint, n, mode).unwrap().percent_novel, 100.0);
        }
    }

    #[test]
    fn abstractiveness_counts_instances_with_multiplicity() {
        // unigrams: "a a b" vs input "a": b novel -> 1/3;
        // second summary "c" vs input "d": 1/1. pooled 2/4, averaged (33.3+100)/2
        let c = paired(&[("a a b", "a"), ("c", "d")]);
        let pooled = abstractiveness(&c, 1, AbstractivenessMode::InstanceWeighted).unwrap();
        assert_eq!((pooled.novel, pooled.total), (2, 4));
        assert_eq!(pooled.percent_novel, 50.0);
        let avg = abstractiveness(&c, 1, AbstractivenessMode::SummaryAveraged).unwrap();
        assert!((avg.percent_novel - (100.0 / 3.0 + 100.0) / 2.0).abs() < 1e-12);
        // summaries shorter than n contribute nothing
        let bi = abstractiveness(&c, 2, AbstractivenessMode::InstanceWeighted).unwrap();
        assert_eq!((bi.novel, bi.total), (2, 2));
    }

    #[test]
    fn abstractiveness_requires_inputs() {
        let c = corpus(&["a b"]);
        let err = abstractiveness(&c, 1, AbstractivenessMode::InstanceWeighted).unwrap_err();
        assert!(matches!(err, MetricsError::MissingInput(ref ids) if ids == &["s1"]));
    }

    #[test]
    fn length_stats() {
        let c = corpus(&["a b c d e f g h i j", &"w ".repeat(20), &"q ".repeat(30)]);
        let st = length_statistics(&c).unwrap();
        assert_eq!(st.mean, 20.0);
        assert_eq!((st.min, st.max, st.median), (10, 30, 20.0));

        let st = length_statistics(&corpus(&["a b c d e f g"])).unwrap();
        assert_eq!((st.mean, st.median, st.min, st.max), (7.0, 7.0, 7, 7));

        let empty = Corpus::from_raw("e", vec![], TokenizerConfig::default()).unwrap();
        assert!(length_statistics(&empty).is_err());
    }
}
