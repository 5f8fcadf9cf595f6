//! Co-occurrence statistics and the UMass and UCI coherence scores.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;

use crate::error::NumericError;

pub const DEFAULT_WINDOW: usize = 10;

/// Smoothing inside the UCI logarithm.
pub const UCI_EPSILON: f64 = 1e-12;

/// Document and sliding-window occurrence counts for a fixed set of words.
#[derive(Debug, Clone, PartialEq)]
pub struct CoocCounts {
    index: BTreeMap<u32, usize>,
    doc_freq: Vec<u64>,
    /// Symmetric; the diagonal equals `doc_freq`.
    doc_pair: Vec<Vec<u64>>,
    window_freq: Vec<u64>,
    window_pair: Vec<Vec<u64>>,
    total_windows: u64,
    window: usize,
}

impl CoocCounts {
    /// Counts occurrences of `words` in `documents`.
    ///
    /// Windows of `window` consecutive tokens slide by one token and never cross
    /// a document boundary; a document shorter than the window is one window.
    pub fn build<'a>(
        documents: impl IntoIterator<Item = &'a [u32]>,
        words: impl IntoIterator<Item = u32>,
        window: usize,
    ) -> Result<Self, NumericError> {
        if window == 0 {
            return Err(NumericError::Parameter("window size must be at least 1".into()));
        }
        let index: BTreeMap<u32, usize> = words
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, w)| (w, i))
            .collect();
        let n = index.len();
        let mut c = CoocCounts {
            index,
            doc_freq: vec![0; n],
            doc_pair: vec![vec![0; n]; n],
            window_freq: vec![0; n],
            window_pair: vec![vec![0; n]; n],
            total_windows: 0,
            window,
        };
        for doc in documents {
            let local: Vec<Option<usize>> = doc.iter().map(|w| c.index.get(w).copied()).collect();
            let present: BTreeSet<usize> = local.iter().flatten().copied().collect();
            add_set(&present, &mut c.doc_freq, &mut c.doc_pair);
            if doc.is_empty() {
                continue;
            }
            let starts = doc.len().saturating_sub(window) + 1;
            // Multiplicity of each tracked word inside the current window.
            let mut inside = vec![0u32; n];
            for t in local.iter().take(window).flatten() {
                inside[*t] += 1;
            }
            for s in 0..starts {
                if s > 0 {
                    if let Some(i) = local[s - 1] {
                        inside[i] -= 1;
                    }
                    if let Some(i) = local[s + window - 1] {
                        inside[i] += 1;
                    }
                }
                let set: BTreeSet<usize> = (0..n).filter(|&i| inside[i] > 0).collect();
                add_set(&set, &mut c.window_freq, &mut c.window_pair);
                c.total_windows += 1;
            }
        }
        Ok(c)
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn total_windows(&self) -> u64 {
        self.total_windows
    }

    fn idx(&self, w: u32) -> Option<usize> {
        self.index.get(&w).copied()
    }

    /// Number of documents containing `w`; 0 for untracked words.
    pub fn doc_freq(&self, w: u32) -> u64 {
        self.idx(w).map_or(0, |i| self.doc_freq[i])
    }

    /// Number of documents containing both words.
    pub fn doc_pair(&self, a: u32, b: u32) -> u64 {
        match (self.idx(a), self.idx(b)) {
            (Some(i), Some(j)) => self.doc_pair[i][j],
            _ => 0,
        }
    }

    pub fn window_freq(&self, w: u32) -> u64 {
        self.idx(w).map_or(0, |i| self.window_freq[i])
    }

    pub fn window_pair(&self, a: u32, b: u32) -> u64 {
        match (self.idx(a), self.idx(b)) {
            (Some(i), Some(j)) => self.window_pair[i][j],
            _ => 0,
        }
    }
}

fn add_set(set: &BTreeSet<usize>, single: &mut [u64], pair: &mut [Vec<u64>]) {
    for &i in set {
        single[i] += 1;
        for &j in set {
            pair[i][j] += 1;
        }
    }
}

/// A coherence score with its per-topic parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Coherence {
    /// Mean over the topics that had at least one scorable pair.
    pub score: f64,
    pub per_topic: Vec<Option<f64>>,
    /// Pairs left out because a word never occurs.
    pub skipped_pairs: usize,
}

fn average(per_topic: Vec<Option<f64>>, skipped_pairs: usize, name: &str) -> Result<Coherence, NumericError> {
    let scored: Vec<f64> = per_topic.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(NumericError::Parameter(format!("{name}: no topic has a scorable word pair")));
    }
    if skipped_pairs > 0 {
        warn!("{name}: skipped {skipped_pairs} pairs involving words absent from the corpus");
    }
    Ok(Coherence {
        score: scored.iter().sum::<f64>() / scored.len() as f64,
        per_topic,
        skipped_pairs,
    })
}

fn check_lists(topics: &[Vec<u32>], m: usize, min_m: usize) -> Result<(), NumericError> {
    if topics.is_empty() {
        return Err(NumericError::Parameter("no topics given".into()));
    }
    if m < min_m {
        return Err(NumericError::Parameter(format!("m must be at least {min_m}, got {m}")));
    }
    Ok(())
}

/// UMass: the mean over ordered pairs `j < i` of the top `m` words of
/// `log((D(w_i, w_j) + 1) / D(w_j))`, averaged over topics.
pub fn umass(topics: &[Vec<u32>], counts: &CoocCounts, m: usize) -> Result<Coherence, NumericError> {
    check_lists(topics, m, 2)?;
    let mut skipped = 0;
    let per_topic = topics
        .iter()
        .map(|list| {
            let words = &list[..m.min(list.len())];
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 1..words.len() {
                for j in 0..i {
                    let (wi, wj) = (words[i], words[j]);
                    if counts.doc_freq(wi) == 0 || counts.doc_freq(wj) == 0 {
                        skipped += 1;
                        continue;
                    }
                    let joint = counts.doc_pair(wi, wj) as f64;
                    sum += ((joint + 1.0) / counts.doc_freq(wj) as f64).ln();
                    pairs += 1;
                }
            }
            (pairs > 0).then(|| sum / pairs as f64)
        })
        .collect();
    average(per_topic, skipped, "UMass")
}

/// UCI: the mean pointwise mutual information over unordered pairs of the top
/// `m` words, with window probabilities, averaged over topics.
pub fn uci(topics: &[Vec<u32>], counts: &CoocCounts, m: usize) -> Result<Coherence, NumericError> {
    check_lists(topics, m, 2)?;
    let total = counts.total_windows() as f64;
    let mut skipped = 0;
    let per_topic = topics
        .iter()
        .map(|list| {
            let words = &list[..m.min(list.len())];
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 0..words.len() {
                for j in i + 1..words.len() {
                    let (wi, wj) = (words[i], words[j]);
                    let (ci, cj) = (counts.window_freq(wi), counts.window_freq(wj));
                    if ci == 0 || cj == 0 {
                        skipped += 1;
                        continue;
                    }
                    let pij = counts.window_pair(wi, wj) as f64 / total;
                    let pi = ci as f64 / total;
                    let pj = cj as f64 / total;
                    sum += ((pij + UCI_EPSILON) / (pi * pj)).ln();
                    pairs += 1;
                }
            }
            (pairs > 0).then(|| sum / pairs as f64)
        })
        .collect();
    average(per_topic, skipped, "UCI")
}

/// Fraction of distinct words across the top `m` of every list, out of `K·m`.
pub fn topic_diversity(topics: &[Vec<u32>], m: usize) -> Result<f64, NumericError> {
    check_lists(topics, m, 1)?;
    let unique: BTreeSet<u32> = topics
        .iter()
        .flat_map(|list| list.iter().take(m).copied())
        .collect();
    Ok(unique.len() as f64 / (topics.len() * m) as f64)
}
