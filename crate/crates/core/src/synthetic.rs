//! Synthetic corpora with known structure.
//!
//! [`planted_topics`] draws token embeddings from von Mises–Fisher clusters on
//! a small sphere and maps them linearly into the embedding space; every token
//! carries its planted topic. [`circle_subspace`] places tokens on an ellipse
//! inside a random 2-plane, a shape a two-dimensional spherical bottleneck can
//! represent exactly.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::corpus::{Corpus, PosClass, TokenRecord, Vocabulary};
use crate::rng::substream;

/// One draw from `vMF(mean, kappa)` on the unit sphere, by Wood's rejection
/// sampler. `mean` must be a unit vector of dimension at least 2.
pub fn sample_vmf(mean: ArrayView1<'_, f64>, kappa: f64, rng: &mut impl Rng) -> Array1<f64> {
    let p = mean.len();
    assert!(p >= 2, "the sphere needs dimension ≥ 2");
    let uniform_direction = |rng: &mut dyn rand::RngCore| loop {
        let v = Array1::from_shape_simple_fn(p, || rng.sample::<f64, _>(StandardNormal));
        let n = v.dot(&v).sqrt();
        if n > 1e-12 {
            return v / n;
        }
    };
    if kappa <= 0.0 {
        return uniform_direction(rng);
    }
    let pm1 = (p - 1) as f64;
    let b = (-2.0 * kappa + (4.0 * kappa * kappa + pm1 * pm1).sqrt()) / pm1;
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + pm1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(pm1 / 2.0, pm1 / 2.0).expect("positive shape");
    let w = loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + pm1 * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w;
        }
    };
    // Tangent direction orthogonal to the mean.
    let v = loop {
        let mut v = uniform_direction(rng);
        let proj = v.dot(&mean);
        v.scaled_add(-proj, &mean);
        let n = v.dot(&v).sqrt();
        if n > 1e-9 {
            break v / n;
        }
    };
    &mean * w + &v * (1.0 - w * w).max(0.0).sqrt()
}

/// Parameters of [`planted_topics`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub num_topics: usize,
    /// Dimension of the sphere the clusters live on.
    pub sphere_dim: usize,
    /// Embedding dimension `r` after the linear map.
    pub dim: usize,
    pub num_tokens: usize,
    pub doc_len: usize,
    pub words_per_topic: usize,
    /// Spread of word directions around their topic mean.
    pub word_kappa: f64,
    /// Spread of token occurrences around their word direction.
    pub token_kappa: f64,
    /// Probability that a token follows its document's dominant topic.
    pub dominant_share: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            num_topics: 5,
            sphere_dim: 8,
            dim: 32,
            num_tokens: 2000,
            doc_len: 20,
            words_per_topic: 10,
            word_kappa: 50.0,
            token_kappa: 200.0,
            dominant_share: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub corpus: Corpus,
    /// Planted topic of every token, in token order.
    pub token_labels: Vec<usize>,
    /// Dominant topic of every document.
    pub doc_labels: Vec<usize>,
    /// Unit topic means on the generating sphere, `K × sphere_dim`.
    pub topic_means: Array2<f64>,
}

fn unit_gaussian(rng: &mut impl Rng, p: usize) -> Array1<f64> {
    let v = Array1::from_shape_simple_fn(p, || rng.sample::<f64, _>(StandardNormal));
    let n = v.dot(&v).sqrt();
    v / n
}

/// Corpus whose tokens come from `K` planted vMF clusters.
///
/// Each topic owns `words_per_topic` words whose directions scatter around the
/// topic mean; each token scatters around its word's direction. Documents have
/// a dominant topic followed with probability `dominant_share`, the remaining
/// tokens pick a topic uniformly.
pub fn planted_topics(spec: &PlantedSpec) -> PlantedCorpus {
    assert!(spec.num_topics >= 1 && spec.words_per_topic >= 1 && spec.doc_len >= 1);
    assert!(spec.sphere_dim >= 2 && spec.dim >= spec.sphere_dim && spec.num_tokens >= 1);
    let mut rng = substream(spec.seed, "planted-geometry");
    let k = spec.num_topics;
    let mut topic_means = Array2::zeros((k, spec.sphere_dim));
    for mut row in topic_means.rows_mut() {
        row.assign(&unit_gaussian(&mut rng, spec.sphere_dim));
    }
    let n_words = k * spec.words_per_topic;
    let word_dirs: Vec<Array1<f64>> = (0..n_words)
        .map(|w| sample_vmf(topic_means.row(w / spec.words_per_topic), spec.word_kappa, &mut rng))
        .collect();
    let scale = 1.0 / (spec.sphere_dim as f64).sqrt();
    let map = Array2::from_shape_simple_fn((spec.dim, spec.sphere_dim), || {
        rng.sample::<f64, _>(StandardNormal) * scale
    });

    let mut rng = substream(spec.seed, "planted-tokens");
    let vocab = Vocabulary::from_surfaces(
        (0..n_words).map(|w| format!("t{}w{}", w / spec.words_per_topic, w % spec.words_per_topic)),
    )
    .expect("distinct surfaces");
    let mut documents = Vec::new();
    let mut token_labels = Vec::with_capacity(spec.num_tokens);
    let mut doc_labels = Vec::new();
    let mut emitted = 0;
    while emitted < spec.num_tokens {
        let len = spec.doc_len.min(spec.num_tokens - emitted);
        let dominant = rng.random_range(0..k);
        let tokens: Vec<TokenRecord> = (0..len)
            .map(|_| {
                let topic = if rng.random::<f64>() < spec.dominant_share {
                    dominant
                } else {
                    rng.random_range(0..k)
                };
                let word = topic * spec.words_per_topic + rng.random_range(0..spec.words_per_topic);
                let x = sample_vmf(word_dirs[word].view(), spec.token_kappa, &mut rng);
                token_labels.push(topic);
                TokenRecord {
                    word_id: word as u32,
                    pos: PosClass::Noun,
                    embedding: map.dot(&x).to_vec(),
                }
            })
            .collect();
        documents.push((documents.len() as u64, tokens));
        doc_labels.push(dominant);
        emitted += len;
    }
    let corpus = Corpus::from_documents(spec.dim, documents, vocab).expect("generated records are valid");
    PlantedCorpus {
        corpus,
        token_labels,
        doc_labels,
        topic_means,
    }
}

/// Tokens `h = B u` with `u` uniform on the unit circle and `B` a random
/// `dim × 2` matrix: rank-2 data whose shape a two-dimensional unit-sphere
/// latent space can reproduce exactly.
pub fn circle_subspace(dim: usize, num_tokens: usize, doc_len: usize, seed: u64) -> Corpus {
    assert!(dim >= 3 && num_tokens >= 1 && doc_len >= 1);
    let mut rng = substream(seed, "circle-subspace");
    let basis = Array2::from_shape_simple_fn((dim, 2), || rng.sample::<f64, _>(StandardNormal));
    let vocab = Vocabulary::from_surfaces(["point"]).expect("one word");
    let mut documents = Vec::new();
    let mut emitted = 0;
    while emitted < num_tokens {
        let len = doc_len.min(num_tokens - emitted);
        let tokens = (0..len)
            .map(|_| {
                let angle = rng.random::<f64>() * std::f64::consts::TAU;
                let u = ndarray::array![angle.cos(), angle.sin()];
                TokenRecord {
                    word_id: 0,
                    pos: PosClass::Noun,
                    embedding: basis.dot(&u).to_vec(),
                }
            })
            .collect();
        documents.push((documents.len() as u64, tokens));
        emitted += len;
    }
    Corpus::from_documents(dim, documents, vocab).expect("generated records are valid")
}
