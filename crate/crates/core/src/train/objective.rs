//! The three training losses and their gradients.
//!
//! For a batch of documents the objective is
//!
//! ```text
//! λ·L_clus + L_rec + L_pre
//! L_clus = −Σ_tokens Σ_k q_ik log p(t_k | z_i)
//! L_rec  = Σ_docs ‖Σ_k p(t_k | z_d) g(t_k) − h̄_d‖²
//! L_pre  = Σ_tokens ‖h_i − g(f(h_i))‖²
//! ```
//!
//! where `z = normalize(f(h))`, `z_d` encodes the attention-pooled document and
//! `q` is the fixed target from the last E-step. Cosines against the topics are
//! taken with explicit topic normalization, so the gradient with respect to a
//! topic row is tangent to the sphere.

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::LossBreakdown;
use crate::attention::{AttentionCache, AttentionParams};
use crate::corpus::Corpus;
use crate::error::NumericError;
use crate::latent::{log_softmax_rows, project_rows, softmax_rows, LatentModel};
use crate::mlp::Mlp;

/// Gradient of the objective, shaped like the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub attention: AttentionParams,
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub topics: Array2<f64>,
}

impl Gradients {
    pub fn zeros_like(latent: &LatentModel, attention: &AttentionParams) -> Self {
        Gradients {
            attention: attention.zeros_like(),
            encoder: latent.encoder.zeros_like(),
            decoder: latent.decoder.zeros_like(),
            topics: Array2::zeros(latent.topics().raw_dim()),
        }
    }

    /// Flat views in the same order as [`param_slices_mut`].
    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.attention.slices().into_iter().collect();
        out.extend(self.encoder.slices());
        out.extend(self.decoder.slices());
        out.push(self.topics.as_slice().expect("standard layout"));
        out
    }
}

/// Every trainable parameter as a flat slice: attention, encoder, decoder, topics.
pub(crate) fn param_slices_mut<'a>(
    latent: &'a mut LatentModel,
    attention: &'a mut AttentionParams,
) -> Vec<&'a mut [f64]> {
    let (encoder, decoder, topics) = latent.parts_mut();
    let mut out: Vec<&mut [f64]> = attention.slices_mut().into_iter().collect();
    out.extend(encoder.slices_mut());
    out.extend(decoder.slices_mut());
    out.push(topics.as_slice_mut().expect("standard layout"));
    out
}

/// Names matching [`param_slices_mut`] plus the trailing topic matrix.
pub(crate) fn param_names(latent: &LatentModel) -> Vec<String> {
    let mut names = vec![
        "attention.W".to_string(),
        "attention.b".to_string(),
        "attention.v".to_string(),
    ];
    for (net, mlp) in [("encoder", &latent.encoder), ("decoder", &latent.decoder)] {
        for i in 0..mlp.layers().len() {
            names.push(format!("{net}.layer{i}.weight"));
            names.push(format!("{net}.layer{i}.bias"));
        }
    }
    names.push("topics".to_string());
    names
}

/// Which loss terms participate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub clustering: bool,
    pub reconstruction: bool,
    pub preservation: bool,
}

impl Terms {
    pub const ALL: Terms = Terms {
        clustering: true,
        reconstruction: true,
        preservation: true,
    };
    pub const PRESERVATION: Terms = Terms {
        clustering: false,
        reconstruction: false,
        preservation: true,
    };
}

/// Constant inputs of the M-step objective.
pub struct Objective<'a> {
    pub corpus: &'a Corpus,
    /// Generic document embeddings `h̄_d`, one row per document.
    pub generic: ArrayView2<'a, f64>,
    /// E-step targets `q`, one row per token.
    pub targets: ArrayView2<'a, f64>,
    pub lambda: f64,
    pub content_only_attention: bool,
    pub terms: Terms,
}

/// Token indices the attention module sees for a document.
pub(crate) fn attention_tokens(corpus: &Corpus, doc: usize, content_only: bool) -> Vec<usize> {
    let range = corpus.documents()[doc].range();
    if content_only {
        let content: Vec<usize> = range
            .clone()
            .filter(|&t| corpus.pos_classes()[t].is_content())
            .collect();
        if !content.is_empty() {
            return content;
        }
    }
    range.collect()
}

/// Unit topic rows and the original norms.
fn unit_topics(latent: &LatentModel) -> (Array2<f64>, Array1<f64>) {
    let t = latent.topics();
    let norms = t.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    let mut unit = t.to_owned();
    for (mut row, &n) in unit.axis_iter_mut(Axis(0)).zip(&norms) {
        row /= n;
    }
    (unit, norms)
}

fn encode_rows(raw: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>), NumericError> {
    let norms = raw.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    let z = project_rows(raw.clone()).map_err(|(_, norm)| NumericError::DegenerateEncoding { norm })?;
    Ok((z, norms))
}

/// Gradient through `z = u / ‖u‖`.
fn normalize_backward(z: &Array2<f64>, norms: &Array1<f64>, dz: &Array2<f64>) -> Array2<f64> {
    let mut du = dz.clone();
    for ((mut row, zr), &n) in du.axis_iter_mut(Axis(0)).zip(z.axis_iter(Axis(0))).zip(norms) {
        let radial = zr.dot(&row);
        row.scaled_add(-radial, &zr);
        row /= n;
    }
    du
}

/// Softmax Jacobian-vector product: `p ⊙ (dp − ⟨p, dp⟩)` row-wise.
fn softmax_backward(p: &Array2<f64>, dp: &Array2<f64>) -> Array2<f64> {
    let mut out = dp.clone();
    for (mut row, prow) in out.axis_iter_mut(Axis(0)).zip(p.axis_iter(Axis(0))) {
        let mean = prow.dot(&row);
        row -= mean;
        row *= &prow;
    }
    out
}

impl Objective<'_> {
    /// Loss on the given documents; gradients are accumulated into `grads` when present.
    pub fn evaluate(
        &self,
        latent: &LatentModel,
        attention: &AttentionParams,
        docs: &[usize],
        mut grads: Option<&mut Gradients>,
    ) -> Result<LossBreakdown, NumericError> {
        let corpus = self.corpus;
        let kappa = latent.kappa();
        let (t_hat, t_norms) = unit_topics(latent);
        let mut d_t_hat = Array2::<f64>::zeros(t_hat.raw_dim());

        let tokens: Vec<usize> = docs
            .iter()
            .flat_map(|&d| corpus.documents()[d].range())
            .collect();
        let mut clus = 0.0;
        let mut pre = 0.0;
        let mut rec = 0.0;

        if self.terms.clustering || self.terms.preservation {
            let h_tok = corpus.embeddings().select(Axis(0), &tokens);
            let f_cache = latent.encoder.forward_cached(h_tok.view());
            let (z_tok, u_norms) = encode_rows(&f_cache.output)?;
            let mut d_z = Array2::<f64>::zeros(z_tok.raw_dim());

            if self.terms.clustering {
                let q = self.targets.select(Axis(0), &tokens);
                let logp = log_softmax_rows(z_tok.dot(&t_hat.t()) * kappa);
                clus = -(&q * &logp).sum();
                if grads.is_some() {
                    let p = logp.mapv(f64::exp);
                    let q_mass = q.sum_axis(Axis(1)).insert_axis(Axis(1));
                    let d_cos = (&p * &q_mass - &q) * (self.lambda * kappa);
                    d_z += &d_cos.dot(&t_hat);
                    d_t_hat += &d_cos.t().dot(&z_tok);
                }
            }
            if self.terms.preservation {
                let g_cache = latent.decoder.forward_cached(z_tok.view());
                let resid = &g_cache.output - &h_tok;
                pre = resid.iter().map(|x| x * x).sum();
                if let Some(g) = grads.as_deref_mut() {
                    d_z += &latent.decoder.backward(&g_cache, resid * 2.0, &mut g.decoder);
                }
            }
            if let Some(g) = grads.as_deref_mut() {
                let d_u = normalize_backward(&z_tok, &u_norms, &d_z);
                latent.encoder.backward(&f_cache, d_u, &mut g.encoder);
            }
        }

        if self.terms.reconstruction {
            let mut pooled = Array2::<f64>::zeros((docs.len(), corpus.dim()));
            let mut caches: Vec<(Array2<f64>, AttentionCache)> = Vec::with_capacity(docs.len());
            for (b, &d) in docs.iter().enumerate() {
                let sel = attention_tokens(corpus, d, self.content_only_attention);
                let h = corpus.embeddings().select(Axis(0), &sel);
                let cache = attention.forward(h.view())?;
                pooled.row_mut(b).assign(&cache.pooled);
                caches.push((h, cache));
            }
            let f_cache = latent.encoder.forward_cached(pooled.view());
            let (z_doc, u_norms) = encode_rows(&f_cache.output)?;
            let p_doc = softmax_rows(z_doc.dot(&t_hat.t()) * kappa);
            let g_top = latent.decoder.forward_cached(t_hat.view());
            let h_rec = p_doc.dot(&g_top.output);
            let h_bar = self.generic.select(Axis(0), docs);
            let resid = h_rec - &h_bar;
            rec = resid.iter().map(|x| x * x).sum();

            if let Some(g) = grads.as_deref_mut() {
                let d_rec = resid * 2.0;
                let d_gtop = p_doc.t().dot(&d_rec);
                let d_p = d_rec.dot(&g_top.output.t());
                let d_cos = softmax_backward(&p_doc, &d_p) * kappa;
                let d_z = d_cos.dot(&t_hat);
                d_t_hat += &d_cos.t().dot(&z_doc);
                let d_u = normalize_backward(&z_doc, &u_norms, &d_z);
                let d_pooled = latent.encoder.backward(&f_cache, d_u, &mut g.encoder);
                for (b, (h, cache)) in caches.iter().enumerate() {
                    attention.backward(h.view(), cache, d_pooled.row(b), &mut g.attention);
                }
                d_t_hat += &latent.decoder.backward(&g_top, d_gtop, &mut g.decoder);
            }
        }

        if let Some(g) = grads {
            let d_t = normalize_backward(&t_hat, &t_norms, &d_t_hat);
            g.topics += &d_t;
        }
        Ok(LossBreakdown::new(self.lambda, clus, rec, pre))
    }
}

impl Objective<'_> {
    /// On/off state of every rectifier the objective passes through on `docs`.
    /// Finite differences are only meaningful while this pattern stays fixed.
    pub(crate) fn relu_pattern(
        &self,
        latent: &LatentModel,
        attention: &AttentionParams,
        docs: &[usize],
    ) -> Result<Vec<bool>, NumericError> {
        let corpus = self.corpus;
        let tokens: Vec<usize> = docs
            .iter()
            .flat_map(|&d| corpus.documents()[d].range())
            .collect();
        let mut pattern = Vec::new();
        if self.terms.clustering || self.terms.preservation {
            let h_tok = corpus.embeddings().select(Axis(0), &tokens);
            let f_cache = latent.encoder.forward_cached(h_tok.view());
            pattern.extend(f_cache.active_units());
            if self.terms.preservation {
                let (z_tok, _) = encode_rows(&f_cache.output)?;
                pattern.extend(latent.decoder.forward_cached(z_tok.view()).active_units());
            }
        }
        if self.terms.reconstruction {
            let mut pooled = Array2::<f64>::zeros((docs.len(), corpus.dim()));
            for (b, &d) in docs.iter().enumerate() {
                let sel = attention_tokens(corpus, d, self.content_only_attention);
                let h = corpus.embeddings().select(Axis(0), &sel);
                pooled.row_mut(b).assign(&attention.forward(h.view())?.pooled);
            }
            pattern.extend(latent.encoder.forward_cached(pooled.view()).active_units());
            let (t_hat, _) = unit_topics(latent);
            pattern.extend(latent.decoder.forward_cached(t_hat.view()).active_units());
        }
        Ok(pattern)
    }
}

/// Cross entropy `−Σ_i Σ_k Q[i,k] log P[i,k]`, with `Q` a fixed target.
///
/// A zero `P` entry under positive target mass is floored at `1e-12` inside the
/// log and counted in a warning.
pub fn clustering_loss(p: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>) -> Result<f64, NumericError> {
    if p.dim() != q.dim() {
        return Err(NumericError::Shape(format!(
            "P is {:?} but Q is {:?}",
            p.dim(),
            q.dim()
        )));
    }
    let mut floored = 0usize;
    let mut loss = 0.0;
    for (&pv, &qv) in p.iter().zip(q) {
        if qv == 0.0 {
            continue;
        }
        let pv = if pv < 1e-12 {
            floored += 1;
            1e-12
        } else {
            pv
        };
        loss -= qv * pv.ln();
    }
    if floored > 0 {
        warn!("clustering loss floored {floored} vanishing posterior entries");
    }
    Ok(loss)
}

/// `Σ_k p_k g(t_k)`: the document embedding implied by a topic distribution.
pub fn topical_reconstruction(p: ArrayView1<'_, f64>, decoded_topics: ArrayView2<'_, f64>) -> Array1<f64> {
    p.dot(&decoded_topics)
}

/// `Σ_d ‖Σ_k p(t_k | z_d) g(t_k) − h̄_d‖²` over the given documents.
pub fn reconstruction_loss(
    latent: &LatentModel,
    attention: &AttentionParams,
    corpus: &Corpus,
    docs: &[usize],
) -> Result<f64, NumericError> {
    let decoded = latent.decode_batch(latent.topics());
    let mut loss = 0.0;
    for &d in docs {
        let pooled = attention.pool(corpus.document_embeddings(d))?;
        let z = latent.encode(pooled.view())?;
        let p = latent.posterior(z.insert_axis(Axis(0)).view())?;
        let h_hat = topical_reconstruction(p.row(0), decoded.view());
        let h_bar = corpus
            .generic_document_embedding(d)
            .map_err(|e| NumericError::Shape(e.to_string()))?;
        loss += (&h_hat - &h_bar).iter().map(|x| x * x).sum::<f64>();
    }
    Ok(loss)
}

/// `Σ ‖h − g(f(h))‖²` over the rows of `tokens`.
pub fn preservation_loss(latent: &LatentModel, tokens: ArrayView2<'_, f64>) -> Result<f64, NumericError> {
    let z = latent.encode_batch(tokens)?;
    let back = latent.decode_batch(z.view());
    Ok((&back - &tokens).iter().map(|x| x * x).sum())
}
