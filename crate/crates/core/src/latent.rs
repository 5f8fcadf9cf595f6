//! The spherical latent space: encoder `f: H → Z`, decoder `g: Z → H`, topic
//! directions and the von Mises–Fisher posterior over topics.
//!
//! All topics share one concentration `κ` and a uniform prior, so the vMF
//! normalizing constant cancels and the posterior over topics is a softmax of
//! `κ · cos(z, t_k)`. No Bessel function is ever evaluated.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::NumericError;
use crate::mlp::Mlp;

/// Raw encoder outputs with a norm below this cannot be projected onto the sphere.
pub const MIN_ENCODING_NORM: f64 = 1e-12;

/// Floor added to the soft cluster frequencies of the target distribution.
pub const CLUSTER_FREQUENCY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    /// `r → … → r′`
    pub encoder: Mlp,
    /// `r′ → … → r`
    pub decoder: Mlp,
    topics: Array2<f64>,
    kappa: f64,
}

impl LatentModel {
    /// Assembles a model; topic rows are normalized to unit length.
    pub fn new(encoder: Mlp, decoder: Mlp, topics: Array2<f64>, kappa: f64) -> Result<Self, NumericError> {
        let r = encoder.input_dim();
        let r_prime = encoder.output_dim();
        if decoder.input_dim() != r_prime || decoder.output_dim() != r {
            return Err(NumericError::Shape(format!(
                "encoder maps {r} → {r_prime} but decoder maps {} → {}",
                decoder.input_dim(),
                decoder.output_dim()
            )));
        }
        if r_prime >= r {
            return Err(NumericError::Shape(format!(
                "latent dimension {r_prime} must be below the embedding dimension {r}"
            )));
        }
        if topics.ncols() != r_prime || topics.nrows() == 0 {
            return Err(NumericError::Shape(format!(
                "topic matrix is {}x{}, expected K x {r_prime} with K ≥ 1",
                topics.nrows(),
                topics.ncols()
            )));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(NumericError::Parameter(format!("kappa must be finite and ≥ 0, got {kappa}")));
        }
        let mut model = LatentModel {
            encoder,
            decoder,
            topics,
            kappa,
        };
        model.renormalize_topics()?;
        Ok(model)
    }

    /// Like [`LatentModel::new`] but keeps the topic rows exactly as given; they
    /// must already be unit length within 1e-6.
    pub fn from_stored(encoder: Mlp, decoder: Mlp, topics: Array2<f64>, kappa: f64) -> Result<Self, NumericError> {
        let stored = topics.clone();
        let mut model = Self::new(encoder, decoder, topics, kappa)?;
        for (k, row) in stored.axis_iter(Axis(0)).enumerate() {
            let norm = row.dot(&row).sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(NumericError::Parameter(format!("stored topic {k} has norm {norm}")));
            }
        }
        model.topics = stored;
        Ok(model)
    }

    /// Embedding dimension `r`.
    pub fn dim(&self) -> usize {
        self.encoder.input_dim()
    }

    /// Latent dimension `r′`.
    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn num_topics(&self) -> usize {
        self.topics.nrows()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Unit-norm topic directions, `K × r′`.
    pub fn topics(&self) -> ArrayView2<'_, f64> {
        self.topics.view()
    }

    pub fn set_topics(&mut self, topics: Array2<f64>) -> Result<(), NumericError> {
        if topics.dim() != self.topics.dim() {
            return Err(NumericError::Shape(format!(
                "topic matrix must stay {:?}",
                self.topics.dim()
            )));
        }
        self.topics = topics;
        self.renormalize_topics()
    }

    /// Encoder, decoder and raw topic matrix, borrowed together.
    pub(crate) fn parts_mut(&mut self) -> (&mut Mlp, &mut Mlp, &mut Array2<f64>) {
        (&mut self.encoder, &mut self.decoder, &mut self.topics)
    }

    /// Projects every topic row back onto the unit sphere.
    pub fn renormalize_topics(&mut self) -> Result<(), NumericError> {
        for (k, mut row) in self.topics.axis_iter_mut(Axis(0)).enumerate() {
            let norm = row.dot(&row).sqrt();
            if !(norm > MIN_ENCODING_NORM && norm.is_finite()) {
                return Err(NumericError::Parameter(format!("topic {k} has norm {norm}")));
            }
            row /= norm;
        }
        Ok(())
    }

    /// `normalize(f(h))`: a point on the unit sphere.
    pub fn encode(&self, h: ArrayView1<'_, f64>) -> Result<Array1<f64>, NumericError> {
        let batch = h.insert_axis(Axis(0));
        Ok(self.encode_batch(batch)?.row(0).to_owned())
    }

    /// Row-wise [`LatentModel::encode`].
    pub fn encode_batch(&self, h: ArrayView2<'_, f64>) -> Result<Array2<f64>, NumericError> {
        if h.ncols() != self.dim() {
            return Err(NumericError::Shape(format!(
                "input has dimension {}, model expects {}",
                h.ncols(),
                self.dim()
            )));
        }
        if let Some(pos) = h.iter().position(|x| !x.is_finite()) {
            return Err(NumericError::NonFinite { index: pos / self.dim() });
        }
        let raw = self.encoder.forward(h);
        project_rows(raw).map_err(|(_, norm)| NumericError::DegenerateEncoding { norm })
    }

    /// `g(z)`, with no normalization.
    pub fn decode(&self, z: ArrayView1<'_, f64>) -> Result<Array1<f64>, NumericError> {
        if z.len() != self.latent_dim() {
            return Err(NumericError::Shape(format!(
                "latent vector has dimension {}, model expects {}",
                z.len(),
                self.latent_dim()
            )));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(NumericError::NonFinite { index: 0 });
        }
        Ok(self.decoder.forward_one(z))
    }

    pub fn decode_batch(&self, z: ArrayView2<'_, f64>) -> Array2<f64> {
        self.decoder.forward(z)
    }

    /// Topic posterior of each row of `z` under this model's topics and `κ`.
    pub fn posterior(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>, NumericError> {
        topic_posterior(z, self.topics.view(), self.kappa)
    }
}

/// Divides each row by its norm, or reports the first row whose norm is too small.
pub(crate) fn project_rows(mut raw: Array2<f64>) -> Result<Array2<f64>, (usize, f64)> {
    for (i, mut row) in raw.axis_iter_mut(Axis(0)).enumerate() {
        let norm = row.dot(&row).sqrt();
        if !(norm >= MIN_ENCODING_NORM) || !norm.is_finite() {
            return Err((i, norm));
        }
        row /= norm;
    }
    Ok(raw)
}

/// Cosine similarity of every row of `a` with every row of `b`.
pub fn cosine_matrix(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let na = a.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    let nb = b.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    let mut c = a.dot(&b.t());
    for ((i, j), v) in c.indexed_iter_mut() {
        *v /= na[i] * nb[j];
    }
    c
}

/// `P[i,k] = exp(κ cos(z_i, t_k)) / Σ_k' exp(κ cos(z_i, t_k'))`.
///
/// Cosines are computed explicitly, so rescaling any row of `z` or `topics`
/// leaves the result unchanged.
pub fn topic_posterior(
    z: ArrayView2<'_, f64>,
    topics: ArrayView2<'_, f64>,
    kappa: f64,
) -> Result<Array2<f64>, NumericError> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(NumericError::Parameter(format!("kappa must be finite and ≥ 0, got {kappa}")));
    }
    if z.ncols() != topics.ncols() {
        return Err(NumericError::Shape(format!(
            "latent rows have dimension {}, topics have {}",
            z.ncols(),
            topics.ncols()
        )));
    }
    let mut logits = cosine_matrix(z, topics);
    logits *= kappa;
    if let Some(pos) = logits.iter().position(|x| !x.is_finite()) {
        return Err(NumericError::NonFinite { index: pos / topics.nrows().max(1) });
    }
    Ok(softmax_rows(logits))
}

pub(crate) fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    logits
}

pub(crate) fn log_softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        row -= lse;
    }
    logits
}

/// Sharpened, frequency-balanced target assignment:
/// `Q[i,k] ∝ P[i,k]² / s_k` with `s_k = Σ_i P[i,k]`.
///
/// Column sums are accumulated in row order, so the result is reproducible
/// bit-for-bit.
pub fn target_distribution(p: ArrayView2<'_, f64>) -> Array2<f64> {
    let k = p.ncols();
    let mut s = vec![0.0; k];
    for row in p.axis_iter(Axis(0)) {
        for (acc, &x) in s.iter_mut().zip(row) {
            *acc += x;
        }
    }
    let mut q = Array2::zeros(p.raw_dim());
    for (mut qrow, prow) in q.axis_iter_mut(Axis(0)).zip(p.axis_iter(Axis(0))) {
        let mut total = 0.0;
        for ((out, &x), &sk) in qrow.iter_mut().zip(prow).zip(&s) {
            *out = x * x / (sk + CLUSTER_FREQUENCY_FLOOR);
            total += *out;
        }
        qrow /= total;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::Layer;
    use ndarray::array;
    use proptest::prelude::*;

    fn toy_model() -> LatentModel {
        // r = 3, r′ = 2, a single linear layer each way.
        let encoder = Mlp::new(vec![Layer {
            weight: array![[1.0, 0.0, 2.0], [0.0, 1.0, -1.0]],
            bias: array![0.5, 0.0],
        }])
        .unwrap();
        let decoder = Mlp::new(vec![Layer {
            weight: array![[1.0, 0.0], [0.0, 1.0], [2.0, -1.0]],
            bias: array![0.0, 0.0, 1.0],
        }])
        .unwrap();
        LatentModel::new(encoder, decoder, array![[1.0, 0.0], [0.0, 2.0]], 10.0).unwrap()
    }

    #[test]
    fn encode_is_hand_computed_normalized_forward() {
        let m = toy_model();
        // f_raw([1, 2, 1]) = [1 + 2 + 0.5, 2 − 1] = [3.5, 1]
        let z = m.encode(array![1.0, 2.0, 1.0].view()).unwrap();
        let norm = (3.5f64 * 3.5 + 1.0).sqrt();
        assert!((z[0] - 3.5 / norm).abs() < 1e-15);
        assert!((z[1] - 1.0 / norm).abs() < 1e-15);
        assert!((z.dot(&z) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn encode_ignores_output_scale() {
        let m = toy_model();
        // Inputs whose raw encodings are [3.5, 1] and [7, 2].
        let a = m.encode(array![1.0, 2.0, 1.0].view()).unwrap();
        let b = m.encode(array![2.5, 4.0, 2.0].view()).unwrap();
        assert!((&a - &b).iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn degenerate_encoding_is_an_error() {
        let m = toy_model();
        // f_raw([-0.5, 0, 0]) = [0, 0]
        assert!(matches!(
            m.encode(array![-0.5, 0.0, 0.0].view()),
            Err(NumericError::DegenerateEncoding { .. })
        ));
    }

    #[test]
    fn decode_is_plain_forward_pass() {
        let m = toy_model();
        let y = m.decode(array![0.6, 0.8].view()).unwrap();
        assert_eq!(y, array![0.6, 0.8, 2.0 * 0.6 - 0.8 + 1.0]);
        let zero = LatentModel::new(Mlp::zeros(&[3, 2]), Mlp::zeros(&[2, 4, 3]), array![[1.0, 0.0]], 1.0).unwrap();
        assert_eq!(zero.decode(array![0.0, 0.0].view()).unwrap(), array![0.0, 0.0, 0.0]);
    }

    #[test]
    fn topics_are_normalized_on_construction() {
        let m = toy_model();
        assert_eq!(m.topics().row(1), array![0.0, 1.0]);
        assert!(LatentModel::new(Mlp::zeros(&[3, 3]), Mlp::zeros(&[3, 3]), array![[1.0, 0.0, 0.0]], 1.0).is_err());
        assert!(LatentModel::new(Mlp::zeros(&[3, 2]), Mlp::zeros(&[2, 3]), array![[1.0, 0.0]], -1.0).is_err());
    }

    #[test]
    fn posterior_two_topics_hand_value() {
        let z = array![[1.0, 0.0]];
        let t = array![[1.0, 0.0], [0.0, 1.0]];
        let p = topic_posterior(z.view(), t.view(), 10.0).unwrap();
        let expected = 1.0 / (1.0 + (-10f64).exp());
        assert!((p[[0, 0]] - expected).abs() < 1e-15);
        assert!((p[[0, 0]] - 0.9999546).abs() < 1e-7);
        assert!((p[[0, 1]] - 0.0000454).abs() < 1e-7);
    }

    #[test]
    fn posterior_symmetric_and_zero_kappa() {
        let t = array![[1.0, 0.0], [-0.5, 0.75f64.sqrt()], [-0.5, -(0.75f64.sqrt())]];
        // The origin direction orthogonal to the plane is equidistant; use a 3-D lift.
        let t3 = ndarray::concatenate![Axis(1), t, Array2::zeros((3, 1))];
        let z = array![[0.0, 0.0, 1.0]];
        let p = topic_posterior(z.view(), t3.view(), 10.0).unwrap();
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-12));
        let z = array![[0.3, -0.2, 0.9], [1.0, 0.0, 0.0]];
        let p = topic_posterior(z.view(), t3.view(), 0.0).unwrap();
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-12));
        assert!(topic_posterior(z.view(), t3.view(), -1.0).is_err());
    }

    #[test]
    fn target_distribution_hand_cases() {
        let q = target_distribution(array![[0.8, 0.2]].view());
        assert!((q[[0, 0]] - 0.8).abs() < 1e-12 && (q[[0, 1]] - 0.2).abs() < 1e-12);

        let q = target_distribution(array![[0.9, 0.1], [0.5, 0.5]].view());
        // s = [1.4, 0.6]
        let a = 0.81 / 1.4;
        let b = 0.01 / 0.6;
        assert!((q[[0, 0]] - a / (a + b)).abs() < 1e-12);
        assert!((q[[0, 0]] - 0.972).abs() < 1e-3 && (q[[0, 1]] - 0.028).abs() < 1e-3);
        assert!((q[[1, 0]] - 0.300).abs() < 1e-3 && (q[[1, 1]] - 0.700).abs() < 1e-3);

        let uniform = Array2::from_elem((4, 3), 1.0 / 3.0);
        let q = target_distribution(uniform.view());
        assert!(q.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn zero_column_is_floored() {
        let q = target_distribution(array![[1.0, 0.0], [1.0, 0.0]].view());
        assert!(q.iter().all(|x| x.is_finite()));
        assert_eq!(q[[0, 0]], 1.0);
    }

    fn row_entropy(row: ArrayView1<'_, f64>) -> f64 {
        -row.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
    }

    proptest! {
        #[test]
        fn posterior_rows_are_distributions_and_scale_free(
            z in prop::collection::vec(-1.0f64..1.0, 12),
            t in prop::collection::vec(-1.0f64..1.0, 9),
            scale in 0.01f64..100.0,
            kappa in 0.0f64..50.0,
        ) {
            let z = Array2::from_shape_vec((4, 3), z).unwrap();
            let t = Array2::from_shape_vec((3, 3), t).unwrap();
            prop_assume!(z.rows().into_iter().all(|r| r.dot(&r) > 1e-6));
            prop_assume!(t.rows().into_iter().all(|r| r.dot(&r) > 1e-6));
            let p = topic_posterior(z.view(), t.view(), kappa).unwrap();
            for row in p.rows() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-9);
                prop_assert!(row.iter().all(|&x| x > 0.0));
            }
            let zs = &z * scale;
            let ps = topic_posterior(zs.view(), t.view(), kappa).unwrap();
            prop_assert!((&p - &ps).iter().all(|x| x.abs() < 1e-12));
        }

        #[test]
        fn target_argmax_matches_sharpened_ratio(p in prop::collection::vec(0.01f64..1.0, 15)) {
            let mut p = Array2::from_shape_vec((5, 3), p).unwrap();
            for mut row in p.rows_mut() {
                let s = row.sum();
                row /= s;
            }
            let q = target_distribution(p.view());
            let s = p.sum_axis(Axis(0));
            for (qrow, prow) in q.rows().into_iter().zip(p.rows()) {
                prop_assert!((qrow.sum() - 1.0).abs() < 1e-12);
                let ratio: Vec<f64> = prow.iter().zip(&s).map(|(&x, &sk)| x * x / sk).collect();
                let am = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, &x)| if x > v[b] { i } else { b });
                prop_assert_eq!(am(qrow.as_slice().unwrap()), am(&ratio));
            }
        }

        #[test]
        fn sharpening_lowers_entropy_under_balanced_columns(x in prop::collection::vec(0.01f64..1.0, 9)) {
            // Symmetrize into a doubly stochastic matrix via circulant rows, so column sums are equal.
            let base = Array1::from(x[..3].to_vec());
            let base = &base / base.sum();
            let mut p = Array2::zeros((3, 3));
            for i in 0..3 {
                for k in 0..3 {
                    p[[i, k]] = base[(k + i) % 3];
                }
            }
            let q = target_distribution(p.view());
            for (qrow, prow) in q.rows().into_iter().zip(p.rows()) {
                prop_assert!(row_entropy(qrow) <= row_entropy(prow) + 1e-12);
            }
        }
    }
}
