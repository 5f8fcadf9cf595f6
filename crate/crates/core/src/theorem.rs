//! A masked-language-model softmax is the Bayes posterior of a Gaussian mixture.
//!
//! Given output token embeddings `e_i`, biases `b_i` and any symmetric positive
//! definite `Σ`, take `|V|` Gaussians `N(Σ e_i, Σ)` with weights
//! `π ∝ exp(½ e_iᵀ Σ e_i + b_i)`. Then for every `h`
//!
//! ```text
//! p(i | h) = softmax_i(e_iᵀ h + b_i)
//! ```
//!
//! This module evaluates both sides independently: the left through Cholesky
//! log-densities and log-sum-exp, the right as a plain softmax.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::attention::softmax;
use crate::error::{NumericError, TheoremError};
use crate::rng::substream;

/// Tolerance used by the verification command.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Mixture built from token embeddings, biases and a shared covariance.
#[derive(Debug, Clone)]
pub struct GmmSpec {
    /// `|V| × r`; row `i` is `μ_i = Σ e_i`.
    pub means: Array2<f64>,
    /// Mixture weights `π`.
    pub weights: Array1<f64>,
    log_weights: Array1<f64>,
    covariance: DMatrix<f64>,
    cholesky: Cholesky<f64, Dyn>,
}

fn to_matrix(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn log_sum_exp(x: &Array1<f64>) -> f64 {
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + x.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// `μ_i = Σ e_i`, `π = softmax(½ e_iᵀ Σ e_i + b_i)`.
pub fn build_gmm(
    e: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
    sigma: ArrayView2<'_, f64>,
) -> Result<GmmSpec, TheoremError> {
    let r = e.ncols();
    if b.len() != e.nrows() || sigma.dim() != (r, r) || e.nrows() == 0 {
        return Err(NumericError::Shape(format!(
            "e is {:?}, b has {} entries, sigma is {:?}",
            e.dim(),
            b.len(),
            sigma.dim()
        ))
        .into());
    }
    for i in 0..r {
        for j in 0..i {
            if (sigma[[i, j]] - sigma[[j, i]]).abs() > 1e-12 {
                return Err(TheoremError::NotPositiveDefinite(format!(
                    "entries ({i},{j}) and ({j},{i}) differ"
                )));
            }
        }
    }
    let covariance = to_matrix(sigma);
    let cholesky = Cholesky::new(covariance.clone())
        .ok_or_else(|| TheoremError::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    let sigma_nd = sigma.to_owned();
    let means = e.dot(&sigma_nd.t());
    let logits: Array1<f64> = Array1::from_shape_fn(e.nrows(), |i| 0.5 * e.row(i).dot(&means.row(i)) + b[i]);
    let lse = log_sum_exp(&logits);
    let log_weights = logits.mapv(|x| x - lse);
    Ok(GmmSpec {
        means,
        weights: log_weights.mapv(f64::exp),
        log_weights,
        covariance,
        cholesky,
    })
}

impl GmmSpec {
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// `log N(h; μ_i, Σ)` for every component.
    pub fn log_densities(&self, h: ArrayView1<'_, f64>) -> Array1<f64> {
        let r = h.len();
        let l = self.cholesky.l();
        let log_det: f64 = 2.0 * (0..r).map(|i| l[(i, i)].ln()).sum::<f64>();
        let norm = -0.5 * (r as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Array1::from_shape_fn(self.means.nrows(), |i| {
            let diff = DVector::from_fn(r, |j, _| h[j] - self.means[[i, j]]);
            let y = l.solve_lower_triangular(&diff).expect("Cholesky factor is invertible");
            norm - 0.5 * y.norm_squared()
        })
    }
}

/// `p(i | h) ∝ π_i N(h; μ_i, Σ)`, normalized in the log domain.
pub fn gmm_posterior(gmm: &GmmSpec, h: ArrayView1<'_, f64>) -> Result<Array1<f64>, NumericError> {
    if h.len() != gmm.means.ncols() {
        return Err(NumericError::Shape(format!(
            "h has dimension {}, the mixture {}",
            h.len(),
            gmm.means.ncols()
        )));
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(NumericError::NonFinite { index: 0 });
    }
    let joint = &gmm.log_weights + &gmm.log_densities(h);
    let lse = log_sum_exp(&joint);
    Ok(joint.mapv(|x| (x - lse).exp()))
}

/// `softmax_i(e_iᵀ h + b_i)`
pub fn mlm_softmax(
    e: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
    h: ArrayView1<'_, f64>,
) -> Result<Array1<f64>, NumericError> {
    if e.ncols() != h.len() || e.nrows() != b.len() {
        return Err(NumericError::Shape(format!(
            "e is {:?}, b has {} entries, h has {}",
            e.dim(),
            b.len(),
            h.len()
        )));
    }
    let logits = e.dot(&h) + b;
    Ok(softmax(logits.view()))
}

/// Outcome of [`verify_equivalence`].
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub trials: usize,
    pub max_deviation: f64,
    /// Trial with the largest deviation.
    pub worst_trial: usize,
}

fn standard_normal(rng: &mut impl Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.sample(StandardNormal))
}

/// Random instance of trial `trial`: `(e, b, Σ = AᵀA + I, h)`.
pub fn random_instance(
    seed: u64,
    trial: usize,
    r: usize,
    vocab_size: usize,
) -> (Array2<f64>, Array1<f64>, Array2<f64>, Array1<f64>) {
    let mut rng = substream(seed, &format!("theorem-trial-{trial}"));
    let e = standard_normal(&mut rng, (vocab_size, r));
    let b = standard_normal(&mut rng, (1, vocab_size)).row(0).to_owned();
    let a = standard_normal(&mut rng, (r, r));
    let sigma = a.t().dot(&a) + Array2::<f64>::eye(r);
    let h = standard_normal(&mut rng, (1, r)).row(0).to_owned();
    (e, b, sigma, h)
}

/// Compares both routes on `trials` random instances and returns the largest
/// absolute deviation over trials and components.
pub fn verify_equivalence(
    seed: u64,
    r: usize,
    vocab_size: usize,
    trials: usize,
    tolerance: f64,
) -> Result<Verification, TheoremError> {
    if r == 0 || vocab_size == 0 || trials == 0 {
        return Err(NumericError::Parameter("r, vocab_size and trials must be positive".into()).into());
    }
    let mut out = Verification {
        trials,
        max_deviation: 0.0,
        worst_trial: 0,
    };
    for trial in 0..trials {
        let (e, b, sigma, h) = random_instance(seed, trial, r, vocab_size);
        let gmm = build_gmm(e.view(), b.view(), sigma.view())?;
        let left = gmm_posterior(&gmm, h.view())?;
        let right = mlm_softmax(e.view(), b.view(), h.view())?;
        let dev = (&left - &right).fold(0.0f64, |m, x| m.max(x.abs()));
        if dev > out.max_deviation {
            out.max_deviation = dev;
            out.worst_trial = trial;
        }
    }
    if !(out.max_deviation < tolerance) {
        return Err(TheoremError::Failed {
            seed,
            trial: out.worst_trial,
            deviation: out.max_deviation,
            tolerance,
        });
    }
    Ok(out)
}
