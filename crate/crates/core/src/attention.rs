//! Attention pooling of token embeddings into a document embedding.
//!
//! Each token `h_i` is scored by `s_i = tanh(W h_i + b) · v`; the document
//! embedding is the softmax(`s`)-weighted average of its tokens, so it lives in
//! the same space as the tokens themselves.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::NumericError;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `d_a × r`
    pub w: Array2<f64>,
    /// `d_a`
    pub b: Array1<f64>,
    /// `d_a`
    pub v: Array1<f64>,
}

impl AttentionParams {
    pub fn new(w: Array2<f64>, b: Array1<f64>, v: Array1<f64>) -> Result<Self, NumericError> {
        let da = w.nrows();
        if da == 0 || w.ncols() == 0 {
            return Err(NumericError::Shape("attention W must be non-empty".into()));
        }
        if b.len() != da || v.len() != da {
            return Err(NumericError::Shape(format!(
                "attention W is {}x{}, b has {}, v has {}",
                da,
                w.ncols(),
                b.len(),
                v.len()
            )));
        }
        if w.iter().chain(&b).chain(&v).any(|x| !x.is_finite()) {
            return Err(NumericError::Parameter("attention parameters must be finite".into()));
        }
        Ok(AttentionParams { w, b, v })
    }

    /// Uniform initialization in `[-1/√r, 1/√r]`.
    pub fn init(dim: usize, attention_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (dim as f64).sqrt();
        let u = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let w = Array2::from_shape_simple_fn((attention_dim, dim), || u.sample(rng));
        let b = Array1::from_shape_simple_fn(attention_dim, || u.sample(rng));
        let v = Array1::from_shape_simple_fn(attention_dim, || u.sample(rng));
        AttentionParams { w, b, v }
    }

    pub fn zeros_like(&self) -> Self {
        AttentionParams {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.len()),
            v: Array1::zeros(self.v.len()),
        }
    }

    /// Token embedding dimension `r`.
    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn attention_dim(&self) -> usize {
        self.w.nrows()
    }

    fn hidden(&self, tokens: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut l = tokens.dot(&self.w.t());
        l += &self.b;
        l.mapv_inplace(f64::tanh);
        l
    }

    /// Attention weights over the rows of `tokens` (`n × r`, `n ≥ 1`).
    pub fn weights(&self, tokens: ArrayView2<'_, f64>) -> Result<Array1<f64>, NumericError> {
        Ok(self.forward(tokens)?.alpha)
    }

    /// Attention-weighted document embedding.
    pub fn pool(&self, tokens: ArrayView2<'_, f64>) -> Result<Array1<f64>, NumericError> {
        Ok(self.forward(tokens)?.pooled)
    }

    pub(crate) fn forward(&self, tokens: ArrayView2<'_, f64>) -> Result<AttentionCache, NumericError> {
        if tokens.nrows() == 0 {
            return Err(NumericError::Shape("attention needs at least one token".into()));
        }
        if tokens.ncols() != self.dim() {
            return Err(NumericError::Shape(format!(
                "tokens have dimension {}, attention expects {}",
                tokens.ncols(),
                self.dim()
            )));
        }
        let hidden = self.hidden(tokens);
        let logits = hidden.dot(&self.v);
        if let Some(index) = logits.iter().position(|s| !s.is_finite()) {
            return Err(NumericError::NonFinite { index });
        }
        let alpha = softmax(logits.view());
        let pooled = alpha.dot(&tokens);
        Ok(AttentionCache {
            hidden,
            alpha,
            pooled,
        })
    }

    /// Accumulates parameter gradients given the upstream gradient of the
    /// pooled embedding.
    pub(crate) fn backward(
        &self,
        tokens: ArrayView2<'_, f64>,
        cache: &AttentionCache,
        d_pooled: ArrayView1<'_, f64>,
        grads: &mut AttentionParams,
    ) {
        let alpha = &cache.alpha;
        let d_alpha = tokens.dot(&d_pooled);
        let mean = alpha.dot(&d_alpha);
        let d_logits = alpha * &(d_alpha - mean);
        grads.v += &cache.hidden.t().dot(&d_logits);
        // d(pre-tanh) = (d_logits ⊗ v) ⊙ (1 − l²)
        let mut d_pre = cache.hidden.mapv(|l| 1.0 - l * l);
        for (mut row, &ds) in d_pre.axis_iter_mut(Axis(0)).zip(&d_logits) {
            row *= &(&self.v * ds);
        }
        grads.w += &d_pre.t().dot(&tokens);
        grads.b += &d_pre.sum_axis(Axis(0));
    }

    pub(crate) fn slices(&self) -> [&[f64]; 3] {
        [
            self.w.as_slice().expect("standard layout"),
            self.b.as_slice().expect("standard layout"),
            self.v.as_slice().expect("standard layout"),
        ]
    }

    pub(crate) fn slices_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.w.as_slice_mut().expect("standard layout"),
            self.b.as_slice_mut().expect("standard layout"),
            self.v.as_slice_mut().expect("standard layout"),
        ]
    }
}

pub(crate) struct AttentionCache {
    hidden: Array2<f64>,
    pub(crate) alpha: Array1<f64>,
    pub(crate) pooled: Array1<f64>,
}

/// Softmax with max-logit subtraction.
pub fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mut out = logits.mapv(|x| (x - max).exp());
    let sum = out.sum();
    out /= sum;
    out
}
