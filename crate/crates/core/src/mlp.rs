//! Fully connected network with rectifier hidden layers and a linear output.
//!
//! Inputs are batched as rows: a batch of `n` vectors is an `n × in` matrix and
//! each layer computes `X Wᵀ + b`. Gradients are derived by hand; correctness is
//! pinned by the finite-difference checks in [`crate::train::gradient_check`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::NumericError;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NumericError> {
        if layers.is_empty() {
            return Err(NumericError::Shape("an MLP needs at least one layer".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.weight.nrows() {
                return Err(NumericError::Shape(format!(
                    "layer {i}: weight has {} rows but bias has {} entries",
                    layer.weight.nrows(),
                    layer.bias.len()
                )));
            }
            if i > 0 && layers[i - 1].weight.nrows() != layer.weight.ncols() {
                return Err(NumericError::Shape(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    layer.weight.ncols(),
                    i - 1,
                    layers[i - 1].weight.nrows()
                )));
            }
            if layer.weight.iter().chain(&layer.bias).any(|x| !x.is_finite()) {
                return Err(NumericError::Parameter(format!(
                    "layer {i} has non-finite parameters"
                )));
            }
        }
        Ok(Mlp { layers })
    }

    /// Random network with layer widths `dims[0] → dims[1] → … → dims[last]`,
    /// weights and biases uniform in `[-1/√fan_in, 1/√fan_in]`.
    pub fn init(dims: &[usize], rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "need input and output widths");
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let u = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Layer {
                    weight: Array2::from_shape_simple_fn((fan_out, fan_in), || u.sample(rng)),
                    bias: Array1::from_shape_simple_fn(fan_out, || u.sample(rng)),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "need input and output widths");
        let layers = dims
            .windows(2)
            .map(|w| Layer {
                weight: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.dims())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Layer widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.weight.nrows()))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").weight.nrows()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            a = a.dot(&layer.weight.t());
            a += &layer.bias;
            if i < last {
                a.mapv_inplace(relu);
            }
        }
        a
    }

    pub fn forward_one(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            a = layer.weight.dot(&a) + &layer.bias;
            if i < last {
                a.mapv_inplace(relu);
            }
        }
        a
    }

    /// Forward pass that keeps each layer's input for [`Mlp::backward`].
    pub(crate) fn forward_cached(&self, x: ArrayView2<'_, f64>) -> MlpCache {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = a.dot(&layer.weight.t());
            next += &layer.bias;
            if i < last {
                next.mapv_inplace(relu);
            }
            inputs.push(a);
            a = next;
        }
        MlpCache { inputs, output: a }
    }

    /// Backpropagates `d_out` (same shape as the cached output), adds parameter
    /// gradients into `grads` and returns the gradient with respect to the input.
    pub(crate) fn backward(&self, cache: &MlpCache, d_out: Array2<f64>, grads: &mut Mlp) -> Array2<f64> {
        let mut delta = d_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            let g = &mut grads.layers[i];
            g.weight += &delta.t().dot(input);
            g.bias += &delta.sum_axis(Axis(0));
            let mut d_in = delta.dot(&layer.weight);
            if i > 0 {
                // `input` is the rectified output of layer i−1.
                ndarray::Zip::from(&mut d_in)
                    .and(input)
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
            }
            delta = d_in;
        }
        delta
    }

    pub(crate) fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }
}

pub(crate) struct MlpCache {
    inputs: Vec<Array2<f64>>,
    pub(crate) output: Array2<f64>,
}

impl MlpCache {
    /// Which hidden units are active, over every row and hidden layer.
    pub(crate) fn active_units(&self) -> impl Iterator<Item = bool> + '_ {
        self.inputs[1..].iter().flat_map(|a| a.iter().map(|&x| x > 0.0))
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_network_maps_zero_to_zero() {
        let m = Mlp::zeros(&[3, 4, 2]);
        assert_eq!(m.forward_one(array![0.0, 0.0, 0.0].view()), array![0.0, 0.0]);
    }

    #[test]
    fn single_layer_is_affine() {
        let m = Mlp::new(vec![Layer {
            weight: array![[1.0, 2.0], [-1.0, 0.5], [0.0, 3.0]],
            bias: array![0.5, 0.0, -1.0],
        }])
        .unwrap();
        // Output layer is linear, so negative entries survive.
        let y = m.forward_one(array![2.0, -1.0].view());
        assert_eq!(y, array![0.5, -2.5, -4.0]);
        let batch = m.forward(array![[2.0, -1.0], [0.0, 1.0]].view());
        assert_eq!(batch.row(0), y);
        assert_eq!(batch.row(1), array![2.5, 0.5, 2.0]);
    }

    #[test]
    fn hidden_layer_rectifies() {
        let m = Mlp::new(vec![
            Layer {
                weight: array![[1.0], [-1.0]],
                bias: array![0.0, 0.0],
            },
            Layer {
                weight: array![[1.0, 1.0]],
                bias: array![0.0],
            },
        ])
        .unwrap();
        assert_eq!(m.forward_one(array![3.0].view()), array![3.0]);
        assert_eq!(m.forward_one(array![-2.0].view()), array![2.0]);
    }

    #[test]
    fn rejects_incompatible_layers() {
        let bad = Mlp::new(vec![
            Layer {
                weight: Array2::zeros((3, 2)),
                bias: Array1::zeros(3),
            },
            Layer {
                weight: Array2::zeros((1, 4)),
                bias: Array1::zeros(1),
            },
        ]);
        assert!(bad.is_err());
        assert_eq!(Mlp::zeros(&[5, 7, 3]).dims(), vec![5, 7, 3]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = crate::rng::substream(3, "mlp");
        let m = Mlp::init(&[3, 5, 4, 2], &mut rng);
        let x = array![[0.3, -0.7, 1.1], [1.5, 0.2, -0.4]];
        // Loss = Σ c ⊙ output with a fixed weighting c.
        let c = array![[1.0, -2.0], [0.5, 3.0]];
        let loss = |m: &Mlp| (&m.forward(x.view()) * &c).sum();
        let cache = m.forward_cached(x.view());
        let mut grads = m.zeros_like();
        let d_in = m.backward(&cache, c.clone(), &mut grads);

        let h = 1e-6;
        let mut probe = m.clone();
        let n_slices = probe.slices().len();
        for s in 0..n_slices {
            for j in 0..probe.slices()[s].len() {
                let orig = probe.slices()[s][j];
                probe.slices_mut()[s][j] = orig + h;
                let up = loss(&probe);
                probe.slices_mut()[s][j] = orig - h;
                let down = loss(&probe);
                probe.slices_mut()[s][j] = orig;
                let fd = (up - down) / (2.0 * h);
                assert!((fd - grads.slices()[s][j]).abs() < 1e-6, "slice {s} entry {j}");
            }
        }
        for i in 0..2 {
            for j in 0..3 {
                let mut xp = x.clone();
                xp[[i, j]] += h;
                let mut xm = x.clone();
                xm[[i, j]] -= h;
                let fd = ((&m.forward(xp.view()) * &c).sum() - (&m.forward(xm.view()) * &c).sum()) / (2.0 * h);
                assert!((fd - d_in[[i, j]]).abs() < 1e-6);
            }
        }
    }
}
