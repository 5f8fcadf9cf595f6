//! Topic-word rankings, document-topic distributions and their export.
//!
//! A word type's latent vector is the mean of the encoded latents of all its
//! occurrences, renormalized; words rank under a topic by cosine similarity.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::attention::AttentionParams;
use crate::corpus::Corpus;
use crate::error::{FormatError, NumericError};
use crate::latent::{LatentModel, MIN_ENCODING_NORM};
use crate::train::encode_tokens;

pub const DEFAULT_TOP_WORDS: usize = 10;

/// Unit latent vector per word type, keyed by word id.
pub type WordLatents = BTreeMap<u32, Array1<f64>>;

/// Averages token latents `z` (one row per token) by word id and renormalizes.
/// Words whose mean has (near) zero norm are left out.
pub fn aggregate_word_latents(z: ArrayView2<'_, f64>, word_ids: &[u32]) -> WordLatents {
    assert_eq!(z.nrows(), word_ids.len());
    let mut sums: BTreeMap<u32, Array1<f64>> = BTreeMap::new();
    for (row, &w) in z.axis_iter(Axis(0)).zip(word_ids) {
        *sums.entry(w).or_insert_with(|| Array1::zeros(z.ncols())) += &row;
    }
    let mut out = BTreeMap::new();
    let mut excluded = 0usize;
    for (w, sum) in sums {
        let norm = sum.dot(&sum).sqrt();
        if norm < MIN_ENCODING_NORM {
            excluded += 1;
            continue;
        }
        out.insert(w, sum / norm);
    }
    if excluded > 0 {
        warn!("{excluded} word types excluded: their occurrence latents cancel out");
    }
    out
}

/// [`aggregate_word_latents`] over every token of the corpus.
pub fn word_type_latents(model: &LatentModel, corpus: &Corpus) -> Result<WordLatents, NumericError> {
    let z = encode_tokens(model, corpus)?;
    Ok(aggregate_word_latents(z.view(), corpus.word_ids()))
}

/// The `m` words closest in cosine to `topic`, best first; ties go to the
/// smaller word id.
pub fn rank_words(latents: &WordLatents, topic: ArrayView1<'_, f64>, m: usize) -> Vec<(u32, f64)> {
    let t_norm = topic.dot(&topic).sqrt();
    let mut scored: Vec<(u32, f64)> = latents
        .iter()
        .map(|(&w, v)| (w, v.dot(&topic) / (v.dot(v).sqrt() * t_norm)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if scored.len() < m {
        warn!("only {} scorable words for a top-{m} list", scored.len());
    }
    scored.truncate(m);
    scored
}

/// Top `m` words of topic `k`.
pub fn top_words(
    model: &LatentModel,
    corpus: &Corpus,
    k: usize,
    m: usize,
) -> Result<Vec<(u32, f64)>, NumericError> {
    if k >= model.num_topics() {
        return Err(NumericError::Parameter(format!(
            "topic {k} out of range for K = {}",
            model.num_topics()
        )));
    }
    let latents = word_type_latents(model, corpus)?;
    Ok(rank_words(&latents, model.topics().row(k), m))
}

/// `normalize(f(pool(document)))`
pub fn document_latent(
    model: &LatentModel,
    attention: &AttentionParams,
    corpus: &Corpus,
    doc_index: usize,
) -> Result<Array1<f64>, NumericError> {
    if doc_index >= corpus.num_documents() {
        return Err(NumericError::Parameter(format!("no document {doc_index}")));
    }
    let pooled = attention.pool(corpus.document_embeddings(doc_index))?;
    model.encode(pooled.view())
}

/// Latent document embeddings, one row per document.
pub fn document_latents(
    model: &LatentModel,
    attention: &AttentionParams,
    corpus: &Corpus,
) -> Result<Array2<f64>, NumericError> {
    let mut out = Array2::zeros((corpus.num_documents(), model.latent_dim()));
    for (d, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        row.assign(&document_latent(model, attention, corpus, d)?);
    }
    Ok(out)
}

/// `p(t_k | z_d)` for one document.
pub fn doc_topic_distribution(
    model: &LatentModel,
    attention: &AttentionParams,
    corpus: &Corpus,
    doc_index: usize,
) -> Result<Array1<f64>, NumericError> {
    let z = document_latent(model, attention, corpus, doc_index)?;
    Ok(model.posterior(z.insert_axis(Axis(0)).view())?.row(0).to_owned())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedWord {
    pub word_id: u32,
    pub surface: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicReport {
    topics: Vec<Vec<RankedWord>>,
    doc_ids: Vec<u64>,
    doc_topics: Array2<f64>,
    /// Word surfaces with their unit latent vectors, by word id.
    latent_words: Vec<(String, Array1<f64>)>,
}

impl TopicReport {
    pub fn new(
        topics: Vec<Vec<RankedWord>>,
        doc_ids: Vec<u64>,
        doc_topics: Array2<f64>,
        latent_words: Vec<(String, Array1<f64>)>,
    ) -> Result<Self, NumericError> {
        if topics.is_empty() {
            return Err(NumericError::Parameter("a report needs at least one topic".into()));
        }
        if doc_topics.ncols() != topics.len() || doc_topics.nrows() != doc_ids.len() {
            return Err(NumericError::Shape(format!(
                "doc_topics is {:?} for {} documents and {} topics",
                doc_topics.dim(),
                doc_ids.len(),
                topics.len()
            )));
        }
        for (i, row) in doc_topics.axis_iter(Axis(0)).enumerate() {
            if (row.sum() - 1.0).abs() > 1e-6 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(NumericError::Parameter(format!("doc_topics row {i} is not a distribution")));
            }
        }
        for (k, list) in topics.iter().enumerate() {
            if list.windows(2).any(|w| w[0].score < w[1].score) {
                return Err(NumericError::Parameter(format!("topic {k} is not sorted by score")));
            }
        }
        Ok(TopicReport {
            topics,
            doc_ids,
            doc_topics,
            latent_words,
        })
    }

    /// Top `m` words for every topic and the topic distribution of every document.
    pub fn build(
        model: &LatentModel,
        attention: &AttentionParams,
        corpus: &Corpus,
        m: usize,
    ) -> Result<Self, NumericError> {
        let latents = word_type_latents(model, corpus)?;
        let vocab = corpus.vocabulary();
        let topics = model
            .topics()
            .axis_iter(Axis(0))
            .map(|t| {
                rank_words(&latents, t, m)
                    .into_iter()
                    .map(|(word_id, score)| RankedWord {
                        word_id,
                        surface: vocab.surface(word_id).to_owned(),
                        score,
                    })
                    .collect()
            })
            .collect();
        let z = document_latents(model, attention, corpus)?;
        let doc_topics = model.posterior(z.view())?;
        let doc_ids = corpus.documents().iter().map(|d| d.doc_id).collect();
        let latent_words = latents
            .into_iter()
            .map(|(w, v)| (vocab.surface(w).to_owned(), v))
            .collect();
        Self::new(topics, doc_ids, doc_topics, latent_words)
    }

    pub fn topics(&self) -> &[Vec<RankedWord>] {
        &self.topics
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn doc_ids(&self) -> &[u64] {
        &self.doc_ids
    }

    pub fn doc_topics(&self) -> ArrayView2<'_, f64> {
        self.doc_topics.view()
    }

    pub fn latent_words(&self) -> &[(String, Array1<f64>)] {
        &self.latent_words
    }

    /// Word ids of each topic's list, for the coherence metrics.
    pub fn word_lists(&self) -> Vec<Vec<u32>> {
        self.topics
            .iter()
            .map(|t| t.iter().map(|w| w.word_id).collect())
            .collect()
    }
}

#[derive(Serialize)]
struct WordOut<'a> {
    surface: &'a str,
    score: Box<RawValue>,
}

#[derive(Serialize)]
struct TopicOut<'a> {
    topic_id: usize,
    words: Vec<WordOut<'a>>,
}

/// One entry of `topics.json` as read back.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TopicEntry {
    pub topic_id: usize,
    pub words: Vec<WordScore>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct WordScore {
    pub surface: String,
    pub score: f64,
}

fn fixed6(x: f64) -> Box<RawValue> {
    // Avoid "-0.000000".
    let s = format!("{:.6}", x);
    let s = if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0.000000".to_string()
    } else {
        s
    };
    RawValue::from_string(s).expect("a decimal literal is valid JSON")
}

/// Rounds a distribution to multiples of 1e-6 that sum to exactly 1, moving the
/// leftover units to the entries with the largest remainders.
pub fn round_distribution(p: ArrayView1<'_, f64>) -> Vec<u64> {
    const UNITS: u64 = 1_000_000;
    let total: f64 = p.sum();
    let scaled: Vec<f64> = p.iter().map(|&x| x / total * UNITS as f64).collect();
    let mut units: Vec<u64> = scaled.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = units.iter().sum();
    let mut order: Vec<usize> = (0..units.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(UNITS.saturating_sub(assigned) as usize) {
        units[i] += 1;
    }
    units
}

fn format_units(u: u64) -> String {
    format!("{}.{:06}", u / 1_000_000, u % 1_000_000)
}

/// Writes `topics.json`, `doc_topics.tsv` and `latent_words.tsv` into `out_dir`.
pub fn export_report(report: &TopicReport, out_dir: &Path) -> Result<(), FormatError> {
    fs::create_dir_all(out_dir).map_err(|e| FormatError::io(out_dir, e))?;

    let topics: Vec<TopicOut<'_>> = report
        .topics
        .iter()
        .enumerate()
        .map(|(topic_id, words)| TopicOut {
            topic_id,
            words: words
                .iter()
                .map(|w| WordOut {
                    surface: &w.surface,
                    score: fixed6(w.score),
                })
                .collect(),
        })
        .collect();
    let mut json = serde_json::to_string_pretty(&topics).expect("plain data serializes");
    json.push('\n');
    let path = out_dir.join("topics.json");
    fs::write(&path, json).map_err(|e| FormatError::io(&path, e))?;

    let mut tsv = String::new();
    for (id, row) in report.doc_ids.iter().zip(report.doc_topics.axis_iter(Axis(0))) {
        tsv.push_str(&id.to_string());
        for u in round_distribution(row) {
            tsv.push('\t');
            tsv.push_str(&format_units(u));
        }
        tsv.push('\n');
    }
    let path = out_dir.join("doc_topics.tsv");
    fs::write(&path, tsv).map_err(|e| FormatError::io(&path, e))?;

    let mut tsv = String::new();
    for (surface, v) in &report.latent_words {
        tsv.push_str(surface);
        for x in v {
            tsv.push('\t');
            tsv.push_str(&x.to_string());
        }
        tsv.push('\n');
    }
    let path = out_dir.join("latent_words.tsv");
    fs::write(&path, tsv).map_err(|e| FormatError::io(&path, e))?;
    Ok(())
}

/// Parses a `topics.json` written by [`export_report`].
pub fn read_topics_json(path: &Path) -> Result<Vec<TopicEntry>, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FormatError::Tsv {
        line: e.line(),
        reason: e.to_string(),
    })
}
