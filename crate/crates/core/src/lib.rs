//! Topic discovery on contextualized token embeddings.
//!
//! Token vectors from a pretrained language model are mapped by an encoder MLP
//! onto a low-dimensional unit sphere, where `K` topic directions act as the
//! means of a von Mises–Fisher mixture with one shared concentration. Training
//! alternates a sharpened, frequency-balanced target assignment (E-step) with
//! minibatch updates of a joint objective (M-step). The objective adds a
//! clustering cross entropy and a topical reconstruction of attention-pooled
//! documents to an autoencoder term on the token embeddings.
//!
//! The modules mirror the pipeline:
//!
//! - [`corpus`]: binary embedding files, vocabulary filtering, generic document vectors
//! - [`attention`]: learnable attention pooling of token vectors into documents
//! - [`latent`]: encoder/decoder, vMF topic posteriors and the sharpened target
//! - [`kmeans`]: spherical k-means for topic initialization, Euclidean k-means for evaluation
//! - [`train`]: pretraining, the EM loop, Adam, finite-difference gradient checks
//! - [`report`]: topic-word rankings, document-topic distributions, exports
//! - [`metrics`]: UMass, UCI, topic diversity, NMI
//! - [`theorem`]: numerical check that an MLM softmax is a Gaussian-mixture posterior
//! - [`checkpoint`]: bit-exact model persistence
//! - [`synthetic`]: planted-cluster corpora for experiments and tests

// `!(x >= y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod kmeans;
pub mod latent;
pub mod metrics;
pub mod mlp;
pub mod report;
pub mod rng;
pub mod synthetic;
pub mod theorem;
pub mod train;

pub use attention::AttentionParams;
pub use checkpoint::Checkpoint;
pub use corpus::{Corpus, PosClass, TokenRecord, Vocabulary};
pub use latent::{target_distribution, topic_posterior, LatentModel};
pub use mlp::Mlp;
pub use report::TopicReport;
pub use train::{LossBreakdown, TrainConfig};
