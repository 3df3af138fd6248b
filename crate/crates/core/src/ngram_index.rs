//! Cross-summary repeating n-gram index.
//!
//! Construction walks lengths `min_n, min_n + 1, ...`. At each length only
//! windows whose two length-`n - 1` sub-windows were repeating are candidates,
//! which is sound because an n-gram's summary set is a subset of each of its
//! sub-grams' sets. Candidate windows carry an incrementally extended 64-bit
//! hash; the windows are sorted by hash and every hash group is split by exact
//! token comparison, so hash collisions never merge distinct n-grams. The walk
//! stops at the first length with no repeating n-gram.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Corpus, TokenSequence};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("min_n must be at least 1")]
    InvalidMinN,
}

/// An n-gram identified by its normalized tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NGram(pub Vec<String>);

impl NGram {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        Self(tokens.into_iter().map(Into::into).collect())
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// All contiguous windows of length `n`, in order.
pub fn extract_ngrams(seq: &TokenSequence, n: usize) -> Vec<NGram> {
    if n == 0 {
        return Vec::new();
    }
    seq.tokens()
        .windows(n)
        .map(|w| NGram(w.to_vec()))
        .collect()
}

#[derive(Debug, Clone, Default)]
struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.ids.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(word.to_string());
        self.ids.insert(word.to_string(), id);
        id
    }

    fn lookup(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }
}

/// Map from each repeating n-gram to the (sorted) positions of the summaries
/// containing it.
#[derive(Debug, Clone)]
pub struct RepetitionIndex {
    vocab: Vocabulary,
    sequences: Vec<Vec<u32>>,
    summary_ids: Vec<String>,
    positions: HashMap<String, u32>,
    entries: HashMap<Box<[u32]>, Vec<u32>>,
    min_n: usize,
    max_observed_n: usize,
}

#[derive(Clone, Copy)]
struct Window {
    hash: u64,
    summary: u32,
    pos: u32,
}

const SEED: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn extend_hash(h: u64, token: u32) -> u64 {
    let mut x = (h ^ u64::from(token)).wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^ (x >> 29)
}

impl RepetitionIndex {
    pub fn build(corpus: &Corpus, min_n: usize) -> Result<Self, IndexError> {
        if corpus.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        if min_n == 0 {
            return Err(IndexError::InvalidMinN);
        }
        let mut vocab = Vocabulary::default();
        let sequences: Vec<Vec<u32>> = corpus
            .records()
            .iter()
            .map(|r| r.summary.tokens().iter().map(|t| vocab.intern(t)).collect())
            .collect();
        let summary_ids: Vec<String> = corpus.records().iter().map(|r| r.id.clone()).collect();
        let positions = summary_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();

        let mut index = Self {
            vocab,
            sequences,
            summary_ids,
            positions,
            entries: HashMap::new(),
            min_n,
            max_observed_n: 0,
        };
        index.populate();
        Ok(index)
    }

    fn populate(&mut self) {
        let min_n = self.min_n;
        // candidates at min_n: every window, hashed from scratch
        let mut candidates: Vec<Window> = Vec::new();
        for (s, seq) in self.sequences.iter().enumerate() {
            if seq.len() < min_n {
                continue;
            }
            for pos in 0..=seq.len() - min_n {
                let hash = seq[pos..pos + min_n]
                    .iter()
                    .fold(SEED, |h, &t| extend_hash(h, t));
                candidates.push(Window {
                    hash,
                    summary: s as u32,
                    pos: pos as u32,
                });
            }
        }

        let mut n = min_n;
        while !candidates.is_empty() {
            let repeating = self.scan_level(&candidates, n);
            let survivors: Vec<Window> = candidates
                .iter()
                .zip(&repeating)
                .filter(|(_, &r)| r)
                .map(|(w, _)| *w)
                .collect();
            if survivors.is_empty() {
                break;
            }
            self.max_observed_n = n;
            candidates = self.next_candidates(&survivors, n);
            n += 1;
        }
    }

    /// Marks which candidate windows of length `n` are repeating and records
    /// the repeating n-grams. `candidates` is ordered by (summary, pos).
    fn scan_level(&mut self, candidates: &[Window], n: usize) -> Vec<bool> {
        let mut order: Vec<u32> = (0..candidates.len() as u32).collect();
        order.par_sort_unstable_by_key(|&i| {
            let w = &candidates[i as usize];
            (w.hash, w.summary, w.pos)
        });

        let sequences = &self.sequences;
        let slice = |w: &Window| &sequences[w.summary as usize][w.pos as usize..w.pos as usize + n];

        let mut repeating = vec![false; candidates.len()];
        let mut found: Vec<(Box<[u32]>, Vec<u32>)> = Vec::new();
        // distinct n-grams in the current hash group: (representative, summaries, windows)
        let mut group: Vec<(u32, Vec<u32>, Vec<u32>)> = Vec::new();

        let mut start = 0;
        while start < order.len() {
            let hash = candidates[order[start] as usize].hash;
            let mut end = start;
            while end < order.len() && candidates[order[end] as usize].hash == hash {
                end += 1;
            }
            group.clear();
            for &wi in &order[start..end] {
                let w = &candidates[wi as usize];
                let tokens = slice(w);
                let slot = group
                    .iter()
                    .position(|(rep, _, _)| slice(&candidates[*rep as usize]) == tokens);
                let slot = match slot {
                    Some(slot) => slot,
                    None => {
                        group.push((wi, Vec::new(), Vec::new()));
                        group.len() - 1
                    }
                };
                let (_, summaries, windows) = &mut group[slot];
                // within a hash group windows arrive sorted by summary
                if summaries.last() != Some(&w.summary) {
                    summaries.push(w.summary);
                }
                windows.push(wi);
            }
            for (rep, summaries, windows) in group.drain(..) {
                if summaries.len() >= 2 {
                    for wi in windows {
                        repeating[wi as usize] = true;
                    }
                    found.push((slice(&candidates[rep as usize]).into(), summaries));
                }
            }
            start = end;
        }
        self.entries.extend(found);
        repeating
    }

    /// Windows of length `n + 1` whose two length-`n` sub-windows both repeat.
    fn next_candidates(&self, survivors: &[Window], n: usize) -> Vec<Window> {
        survivors
            .windows(2)
            .filter_map(|pair| {
                let (a, b) = (pair[0], pair[1]);
                if a.summary != b.summary || b.pos != a.pos + 1 {
                    return None;
                }
                let seq = &self.sequences[a.summary as usize];
                let next = seq[a.pos as usize + n];
                Some(Window {
                    hash: extend_hash(a.hash, next),
                    summary: a.summary,
                    pos: a.pos,
                })
            })
            .collect()
    }

    pub fn min_n(&self) -> usize {
        self.min_n
    }

    /// Longest repeating n-gram length, or 0 when nothing repeats.
    pub fn max_observed_n(&self) -> usize {
        self.max_observed_n
    }

    pub fn corpus_size(&self) -> usize {
        self.summary_ids.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn summary_ids(&self) -> &[String] {
        &self.summary_ids
    }

    pub fn contains_summary(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    pub(crate) fn position_of(&self, id: &str) -> Option<usize> {
        self.positions.get(id).map(|&p| p as usize)
    }

    pub(crate) fn sequence(&self, position: usize) -> &[u32] {
        &self.sequences[position]
    }

    pub(crate) fn count_ids(&self, tokens: &[u32]) -> usize {
        self.entries.get(tokens).map_or(0, Vec::len)
    }

    pub(crate) fn raw_entries(&self) -> impl Iterator<Item = (&[u32], &[u32])> {
        self.entries.iter().map(|(k, v)| (&k[..], &v[..]))
    }

    fn to_ngram(&self, tokens: &[u32]) -> NGram {
        NGram(tokens.iter().map(|&t| self.vocab.word(t).to_string()).collect())
    }

    /// Number of summaries containing `g`, or 0 if it is not repeating.
    pub fn repeat_count(&self, g: &NGram) -> usize {
        if g.n() < self.min_n {
            return 0;
        }
        let ids: Option<Vec<u32>> = g.tokens().iter().map(|t| self.vocab.lookup(t)).collect();
        ids.map_or(0, |ids| self.count_ids(&ids))
    }

    /// Ids of the summaries containing `g`, in corpus order.
    pub fn containing_ids(&self, g: &NGram) -> Vec<&str> {
        let ids: Option<Vec<u32>> = g.tokens().iter().map(|t| self.vocab.lookup(t)).collect();
        ids.and_then(|ids| self.entries.get(&ids[..]))
            .map(|ps| {
                ps.iter()
                    .map(|&p| self.summary_ids[p as usize].as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Every entry as (n-gram, containing ids in corpus order). Unordered.
    pub fn entries(&self) -> impl Iterator<Item = (NGram, Vec<&str>)> + '_ {
        self.entries.iter().map(|(k, v)| {
            let ids = v
                .iter()
                .map(|&p| self.summary_ids[p as usize].as_str())
                .collect();
            (self.to_ngram(k), ids)
        })
    }

    /// Repeating n-grams with at least `min_count` containing summaries, most
    /// frequent first; ties go to longer n-grams, then token order.
    pub fn top_repeats(&self, limit: usize, min_count: usize) -> Vec<RepeatRow> {
        let mut rows: Vec<(NGram, &Vec<u32>)> = self
            .entries
            .iter()
            .filter(|(_, ids)| ids.len() >= min_count)
            .map(|(k, ids)| (self.to_ngram(k), ids))
            .collect();
        rows.sort_by(|(ga, ia), (gb, ib)| {
            ib.len()
                .cmp(&ia.len())
                .then(gb.n().cmp(&ga.n()))
                .then_with(|| ga.cmp(gb))
        });
        rows.truncate(limit);
        rows.into_iter()
            .map(|(ngram, ids)| {
                let mut ids: Vec<String> = ids
                    .iter()
                    .map(|&p| self.summary_ids[p as usize].clone())
                    .collect();
                ids.sort();
                RepeatRow {
                    count: ids.len(),
                    corpus_size: self.corpus_size(),
                    ngram,
                    ids,
                }
            })
            .collect()
    }

    /// Writes the `top_repeats` ordering as JSON Lines.
    pub fn export_jsonl<W: Write>(&self, mut out: W, with_ids: bool) -> std::io::Result<()> {
        for row in self.top_repeats(usize::MAX, 2) {
            serde_json::to_writer(&mut out, &row.export(with_ids))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// One line of a top-repeats report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepeatRow {
    pub ngram: NGram,
    pub count: usize,
    pub corpus_size: usize,
    /// Containing summary ids, sorted.
    pub ids: Vec<String>,
}

impl RepeatRow {
    /// The `count/total` frequency cell, e.g. `73/11490`.
    pub fn frequency(&self) -> String {
        format!("{}/{}", self.count, self.corpus_size)
    }

    pub fn export(&self, with_ids: bool) -> ExportRow<'_> {
        ExportRow {
            ngram: &self.ngram.0,
            n: self.ngram.n(),
            count: self.count,
            ids: with_ids.then_some(&self.ids[..]),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ExportRow<'a> {
    pub ngram: &'a [String],
    pub n: usize,
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ids: Option<&'a [String]>,
}

/// Convenience wrapper over [`RepetitionIndex::build`].
pub fn build_repetition_index(corpus: &Corpus, min_n: usize) -> Result<RepetitionIndex, IndexError> {
    RepetitionIndex::build(corpus, min_n)
}
