//! Topic quality and document clustering quality.
//!
//! Coherence is measured on the training corpus itself: UMass from document
//! co-occurrence, UCI from sliding windows. Diversity is the share of distinct
//! words among all top lists, and NMI compares a k-means clustering of the
//! latent document embeddings with reference labels.

mod coherence;
mod nmi;

use serde::{Deserialize, Serialize};

pub use coherence::{topic_diversity, uci, umass, Coherence, CoocCounts, DEFAULT_WINDOW, UCI_EPSILON};
pub use nmi::nmi;

use crate::attention::AttentionParams;
use crate::corpus::Corpus;
use crate::error::NumericError;
use crate::kmeans::{kmeans, DEFAULT_MAX_ITERS};
use crate::latent::LatentModel;
use crate::report::document_latents;
use crate::rng::substream;

pub const DEFAULT_COHERENCE_M: usize = 10;
pub const DEFAULT_DIVERSITY_M: usize = 25;

/// Euclidean k-means with `k_eval` clusters on the unit latent document
/// embeddings; one label per document.
pub fn cluster_documents(
    model: &LatentModel,
    attention: &AttentionParams,
    corpus: &Corpus,
    k_eval: usize,
    seed: u64,
) -> Result<Vec<usize>, NumericError> {
    if k_eval < 2 {
        return Err(NumericError::Parameter(format!("k_eval must be at least 2, got {k_eval}")));
    }
    let z = document_latents(model, attention, corpus)?;
    let clustering = kmeans(z.view(), k_eval, &mut substream(seed, "document-kmeans"), DEFAULT_MAX_ITERS)?;
    Ok(clustering.assignments)
}

/// Settings echoed into `metrics.json`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub m: usize,
    pub diversity_m: usize,
    pub window: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            m: DEFAULT_COHERENCE_M,
            diversity_m: DEFAULT_DIVERSITY_M,
            window: DEFAULT_WINDOW,
        }
    }
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub umass: f64,
    pub uci: f64,
    pub diversity: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nmi: Option<f64>,
    pub config: MetricsConfig,
}

/// UMass, UCI and diversity of `topics` (word-id lists, best first) on `corpus`.
pub fn topic_metrics(
    topics: &[Vec<u32>],
    corpus: &Corpus,
    config: MetricsConfig,
) -> Result<MetricsReport, NumericError> {
    let tracked = topics.iter().flat_map(|l| l.iter().take(config.m).copied());
    let docs = (0..corpus.num_documents()).map(|d| corpus.document_words(d));
    let counts = CoocCounts::build(docs, tracked, config.window)?;
    Ok(MetricsReport {
        umass: umass(topics, &counts, config.m)?.score,
        uci: uci(topics, &counts, config.m)?.score,
        diversity: topic_diversity(topics, config.diversity_m)?,
        nmi: None,
        config,
    })
}
