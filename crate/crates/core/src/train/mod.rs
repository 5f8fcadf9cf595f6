//! Autoencoder pretraining and the EM training loop.
//!
//! [`train`] runs [`pretrain`] and then [`fit`]: every epoch recomputes the
//! target distribution over the whole corpus ([`e_step`]) and then takes one
//! Adam step per shuffled batch of documents on `λ·L_clus + L_rec + L_pre`.

mod adam;
mod gradcheck;
mod objective;

use std::fmt;

use log::{debug, info};
use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;

pub use adam::Adam;
pub use gradcheck::{gradient_check, relative_error, GradientReport, RELATIVE_GUARD, STEP};
pub use objective::{
    clustering_loss, preservation_loss, reconstruction_loss, topical_reconstruction, Gradients,
    Objective, Terms,
};

use crate::attention::AttentionParams;
use crate::corpus::Corpus;
use crate::error::{NumericError, TrainError};
use crate::kmeans::{spherical_kmeans, DEFAULT_MAX_ITERS};
use crate::latent::{target_distribution, LatentModel};
use crate::mlp::Mlp;
use crate::rng::substream;

use objective::param_slices_mut;

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// `K`
    pub num_topics: usize,
    /// `r′`
    pub latent_dim: usize,
    /// `κ`
    pub kappa: f64,
    /// `λ`, the weight of the clustering loss.
    pub lambda: f64,
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub learning_rate: f64,
    /// Documents per batch.
    pub batch_size: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub grad_check_tolerance: f64,
    /// `d_a`, the width of the attention scoring layer.
    pub attention_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    /// Pool documents over content words only, when a document has any.
    pub attention_content_only: bool,
    pub kmeans_max_iters: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            num_topics: 100,
            latent_dim: 100,
            kappa: 10.0,
            lambda: 0.1,
            epochs: 20,
            pretrain_epochs: 10,
            learning_rate: 5e-4,
            batch_size: 32,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            grad_check_tolerance: 1e-4,
            attention_dim: 100,
            encoder_hidden: vec![500, 500, 1000],
            decoder_hidden: vec![1000, 500, 500],
            attention_content_only: false,
            kmeans_max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl TrainConfig {
    /// Checks the configuration against an embedding dimension `r`.
    pub fn validate(&self, dim: usize) -> Result<(), TrainError> {
        let fail = |msg: String| Err(TrainError::Config(msg));
        if self.num_topics < 2 {
            return fail(format!("num_topics must be at least 2, got {}", self.num_topics));
        }
        if self.latent_dim == 0 || self.latent_dim >= dim {
            return fail(format!(
                "latent_dim must be in 1..{dim} (below the embedding dimension), got {}",
                self.latent_dim
            ));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return fail(format!("kappa must be finite and ≥ 0, got {}", self.kappa));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return fail(format!("lambda must be finite and ≥ 0, got {}", self.lambda));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return fail(format!("{name} must be in [0, 1), got {beta}"));
            }
        }
        if !(self.adam_epsilon > 0.0 && self.adam_epsilon.is_finite()) {
            return fail(format!("adam_epsilon must be positive, got {}", self.adam_epsilon));
        }
        if !(self.grad_check_tolerance > 0.0) {
            return fail("grad_check_tolerance must be positive".into());
        }
        if self.attention_dim == 0 {
            return fail("attention_dim must be at least 1".into());
        }
        if self.encoder_hidden.contains(&0) || self.decoder_hidden.contains(&0) {
            return fail("hidden layer widths must be positive".into());
        }
        if self.kmeans_max_iters == 0 {
            return fail("kmeans_max_iters must be at least 1".into());
        }
        Ok(())
    }

    pub fn encoder_dims(&self, dim: usize) -> Vec<usize> {
        let mut dims = vec![dim];
        dims.extend(&self.encoder_hidden);
        dims.push(self.latent_dim);
        dims
    }

    pub fn decoder_dims(&self, dim: usize) -> Vec<usize> {
        let mut dims = vec![self.latent_dim];
        dims.extend(&self.decoder_hidden);
        dims.push(dim);
        dims
    }
}

/// The three loss terms and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub clus: f64,
    pub rec: f64,
    pub pre: f64,
    /// `λ·clus + rec + pre`
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(lambda: f64, clus: f64, rec: f64, pre: f64) -> Self {
        LossBreakdown {
            clus,
            rec,
            pre,
            total: lambda * clus + rec + pre,
        }
    }

    fn is_finite(&self) -> bool {
        self.clus.is_finite() && self.rec.is_finite() && self.pre.is_finite() && self.total.is_finite()
    }

    fn accumulate(&mut self, other: &LossBreakdown) {
        self.clus += other.clus;
        self.rec += other.rec;
        self.pre += other.pre;
        self.total += other.total;
    }
}

/// One line of the epoch log: `epoch\tclus\trec\tpre\ttotal`, values to nine
/// significant digits.
pub fn format_epoch_line(epoch: usize, loss: &LossBreakdown) -> String {
    format!(
        "{epoch}\t{:.8e}\t{:.8e}\t{:.8e}\t{:.8e}",
        loss.clus, loss.rec, loss.pre, loss.total
    )
}

/// Loss of one M-step batch, measured before the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchRecord {
    pub epoch: usize,
    pub batch: usize,
    pub loss: LossBreakdown,
}

/// Result of autoencoder pretraining.
#[derive(Debug, Clone)]
pub struct Pretrained {
    /// Encoder, decoder and k-means topics.
    pub model: LatentModel,
    /// Mean `L_pre` per token over the whole corpus: entry 0 before training,
    /// then one entry after each epoch.
    pub losses: Vec<f64>,
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LatentModel,
    pub attention: AttentionParams,
    pub pretrain_losses: Vec<f64>,
    /// Sum of the batch losses of each epoch.
    pub epochs: Vec<LossBreakdown>,
    pub batches: Vec<BatchRecord>,
}

impl fmt::Display for TrainOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, loss) in self.epochs.iter().enumerate() {
            writeln!(f, "{}", format_epoch_line(i + 1, loss))?;
        }
        Ok(())
    }
}

/// Rows per encoder call when a pass covers the whole corpus.
const CHUNK: usize = 4096;

/// `normalize(f(h))` for every token of the corpus, in token order.
pub fn encode_tokens(model: &LatentModel, corpus: &Corpus) -> Result<Array2<f64>, NumericError> {
    let emb = corpus.embeddings();
    let mut z = Array2::zeros((corpus.num_tokens(), model.latent_dim()));
    let mut start = 0;
    while start < corpus.num_tokens() {
        let end = (start + CHUNK).min(corpus.num_tokens());
        let part = model
            .encode_batch(emb.slice(s![start..end, ..]))
            .map_err(|e| match e {
                NumericError::NonFinite { index } => NumericError::NonFinite { index: index + start },
                other => other,
            })?;
        z.slice_mut(s![start..end, ..]).assign(&part);
        start = end;
    }
    Ok(z)
}

/// Target distribution `Q` over every token of the corpus, with cluster
/// frequencies summed over the whole corpus.
pub fn e_step(model: &LatentModel, corpus: &Corpus) -> Result<Array2<f64>, NumericError> {
    let z = encode_tokens(model, corpus)?;
    let p = model.posterior(z.view())?;
    Ok(target_distribution(p.view()))
}

fn mean_preservation(model: &LatentModel, corpus: &Corpus) -> Result<f64, NumericError> {
    let emb = corpus.embeddings();
    let mut total = 0.0;
    let mut start = 0;
    while start < corpus.num_tokens() {
        let end = (start + CHUNK).min(corpus.num_tokens());
        total += preservation_loss(model, emb.slice(s![start..end, ..]))?;
        start = end;
    }
    Ok(total / corpus.num_tokens() as f64)
}

fn generic_embeddings(corpus: &Corpus) -> Array2<f64> {
    let mut out = Array2::zeros((corpus.num_documents(), corpus.dim()));
    for (d, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        row.assign(&corpus.generic_document_embedding(d).expect("index in range"));
    }
    out
}

fn state_summary(model: &LatentModel, attention: Option<&AttentionParams>) -> String {
    let norm = |s: &[f64]| s.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut parts = Vec::new();
    if let Some(a) = attention {
        for (name, slice) in ["attention.W", "attention.b", "attention.v"].iter().zip(a.slices()) {
            parts.push(format!("{name}: norm {:e}", norm(slice)));
        }
    }
    for (net, mlp) in [("encoder", &model.encoder), ("decoder", &model.decoder)] {
        for (i, slice) in mlp.slices().iter().enumerate() {
            let kind = if i % 2 == 0 { "weight" } else { "bias" };
            parts.push(format!("{net}.layer{}.{kind}: norm {:e}", i / 2, norm(slice)));
        }
    }
    parts.push(format!("topics: norm {:e}", norm(model.topics().as_slice().expect("standard layout"))));
    parts.join("; ")
}

fn diverged(
    phase: &'static str,
    epoch: usize,
    batch: usize,
    loss: f64,
    model: &LatentModel,
    attention: Option<&AttentionParams>,
) -> TrainError {
    TrainError::Diverged {
        phase,
        epoch,
        batch,
        loss,
        state: state_summary(model, attention),
    }
}

fn batches(num_documents: usize, batch_size: usize, rng: &mut crate::rng::Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..num_documents).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(|c| c.to_vec()).collect()
}

/// Trains encoder and decoder on `L_pre` alone, then places the topics by
/// spherical k-means on the encoded tokens.
pub fn pretrain(corpus: &Corpus, config: &TrainConfig) -> Result<Pretrained, TrainError> {
    let dim = corpus.dim();
    config.validate(dim)?;
    if corpus.num_tokens() < config.num_topics {
        return Err(TrainError::Config(format!(
            "corpus has {} tokens, fewer than num_topics = {}",
            corpus.num_tokens(),
            config.num_topics
        )));
    }
    let encoder = Mlp::init(&config.encoder_dims(dim), &mut substream(config.seed, "encoder"));
    let decoder = Mlp::init(&config.decoder_dims(dim), &mut substream(config.seed, "decoder"));
    // Placeholder topics until k-means runs.
    let mut placeholder = Array2::zeros((config.num_topics, config.latent_dim));
    placeholder.column_mut(0).fill(1.0);
    let mut model = LatentModel::new(encoder, decoder, placeholder, config.kappa)?;

    let initial = mean_preservation(&model, corpus)?;
    let mut losses = vec![initial];
    info!("pretrain epoch 0: mean L_pre per token {initial:.6e}");

    let generic = Array2::<f64>::zeros((0, dim));
    let targets = Array2::<f64>::zeros((0, config.num_topics));
    let objective = Objective {
        corpus,
        generic: generic.view(),
        targets: targets.view(),
        lambda: config.lambda,
        content_only_attention: config.attention_content_only,
        terms: Terms::PRESERVATION,
    };
    // Attention takes no part in pretraining; a dummy keeps the parameter lists uniform.
    let mut dummy = AttentionParams::new(
        Array2::zeros((1, dim)),
        ndarray::Array1::zeros(1),
        ndarray::Array1::zeros(1),
    )?;
    let net_slices = 3..3 + 2 * (model.encoder.layers().len() + model.decoder.layers().len());
    let shapes: Vec<usize> = Gradients::zeros_like(&model, &dummy).slices()[net_slices.clone()]
        .iter()
        .map(|s| s.len())
        .collect();
    let mut adam = Adam::new(
        &shapes,
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_epsilon,
    );
    let mut rng = substream(config.seed, "pretrain-batches");
    for epoch in 1..=config.pretrain_epochs {
        for (b, docs) in batches(corpus.num_documents(), config.batch_size, &mut rng)
            .into_iter()
            .enumerate()
        {
            let mut grads = Gradients::zeros_like(&model, &dummy);
            let loss = objective.evaluate(&model, &dummy, &docs, Some(&mut grads))?;
            if !loss.is_finite() || grads.slices().iter().any(|s| s.iter().any(|x| !x.is_finite())) {
                return Err(diverged("pretraining", epoch, b, loss.pre, &model, None));
            }
            let g = grads.slices();
            let params: Vec<&mut [f64]> = param_slices_mut(&mut model, &mut dummy)
                .into_iter()
                .skip(net_slices.start)
                .take(net_slices.len())
                .collect();
            adam.update(params, &g[net_slices.clone()]);
        }
        let mean = mean_preservation(&model, corpus)?;
        if !mean.is_finite() {
            return Err(diverged("pretraining", epoch, 0, mean, &model, None));
        }
        info!("pretrain epoch {epoch}: mean L_pre per token {mean:.6e}");
        losses.push(mean);
    }

    let z = encode_tokens(&model, corpus)?;
    let clustering = spherical_kmeans(
        z.view(),
        config.num_topics,
        &mut substream(config.seed, "kmeans"),
        config.kmeans_max_iters,
    )?;
    debug!(
        "topic k-means: {} iterations, converged = {}",
        clustering.iterations, clustering.converged
    );
    model.set_topics(clustering.centroids)?;
    Ok(Pretrained { model, losses })
}

/// The EM loop on an already pretrained model.
pub fn fit(
    corpus: &Corpus,
    config: &TrainConfig,
    mut model: LatentModel,
    mut attention: AttentionParams,
) -> Result<(LatentModel, AttentionParams, Vec<LossBreakdown>, Vec<BatchRecord>), TrainError> {
    config.validate(corpus.dim())?;
    if model.dim() != corpus.dim() || attention.dim() != corpus.dim() {
        return Err(TrainError::Config(format!(
            "model expects dimension {} but the corpus has {}",
            model.dim(),
            corpus.dim()
        )));
    }
    let generic = generic_embeddings(corpus);
    let shapes: Vec<usize> = Gradients::zeros_like(&model, &attention)
        .slices()
        .iter()
        .map(|s| s.len())
        .collect();
    let mut adam = Adam::new(
        &shapes,
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_epsilon,
    );
    let mut rng = substream(config.seed, "batches");
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut records = Vec::new();
    for epoch in 1..=config.epochs {
        let targets = e_step(&model, corpus)?;
        let objective = Objective {
            corpus,
            generic: generic.view(),
            targets: targets.view(),
            lambda: config.lambda,
            content_only_attention: config.attention_content_only,
            terms: Terms::ALL,
        };
        let mut epoch_loss = LossBreakdown::default();
        for (b, docs) in batches(corpus.num_documents(), config.batch_size, &mut rng)
            .into_iter()
            .enumerate()
        {
            let mut grads = Gradients::zeros_like(&model, &attention);
            let loss = objective.evaluate(&model, &attention, &docs, Some(&mut grads))?;
            if !loss.is_finite() || grads.slices().iter().any(|s| s.iter().any(|x| !x.is_finite())) {
                return Err(diverged("training", epoch, b, loss.total, &model, Some(&attention)));
            }
            adam.update(param_slices_mut(&mut model, &mut attention), &grads.slices());
            model
                .renormalize_topics()
                .map_err(|_| diverged("training", epoch, b, loss.total, &model, Some(&attention)))?;
            epoch_loss.accumulate(&loss);
            records.push(BatchRecord {
                epoch,
                batch: b,
                loss,
            });
        }
        info!("{}", format_epoch_line(epoch, &epoch_loss));
        epochs.push(epoch_loss);
    }
    Ok((model, attention, epochs, records))
}

/// Pretraining followed by the EM loop.
pub fn train(corpus: &Corpus, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    let pretrained = pretrain(corpus, config)?;
    let attention = AttentionParams::init(
        corpus.dim(),
        config.attention_dim,
        &mut substream(config.seed, "attention"),
    );
    let (model, attention, epochs, batches) = fit(corpus, config, pretrained.model, attention)?;
    Ok(TrainOutcome {
        model,
        attention,
        pretrain_losses: pretrained.losses,
        epochs,
        batches,
    })
}
