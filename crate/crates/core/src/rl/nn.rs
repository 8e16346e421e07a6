use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Fully connected network with tanh hidden layers and a linear output.
///
/// Parameters live in one flat vector, layer by layer: the weight matrix in
/// row-major `out × in` order, then the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Layer outputs from a forward pass, input first. Needed for backprop.
#[derive(Debug, Clone)]
pub struct Activations {
    layers: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("at least the input layer")
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "need input and output sizes");
        let count = sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        Self { sizes: sizes.to_vec(), params: vec![0.0; count] }
    }

    /// Gaussian weights scaled by `1/sqrt(fan_in)`; the last layer gets an
    /// extra `output_gain`. Biases start at zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let layers = net.sizes.len() - 1;
        for k in 0..layers {
            let (fan_in, out) = (net.sizes[k], net.sizes[k + 1]);
            let gain = if k + 1 == layers { output_gain } else { 1.0 };
            let std = gain / (fan_in as f64).sqrt();
            let (w, _) = net.offsets(k);
            for p in &mut net.params[w..w + out * fan_in] {
                let z: f64 = StandardNormal.sample(rng);
                *p = z * std;
            }
        }
        net
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("sizes is nonempty")
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self, layer: usize) -> (usize, usize) {
        let mut off = 0;
        for w in self.sizes.windows(2).take(layer) {
            off += w[1] * w[0] + w[1];
        }
        (off, off + self.sizes[layer + 1] * self.sizes[layer])
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).layers.pop().expect("output layer")
    }

    pub fn forward_cached(&self, x: &[f64]) -> Activations {
        assert_eq!(x.len(), self.input_dim(), "input dimension");
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        for k in 0..layers {
            let (fan_in, out) = (self.sizes[k], self.sizes[k + 1]);
            let (w, b) = self.offsets(k);
            let input = &acts[k];
            let mut z: Vec<f64> = (0..out)
                .map(|o| {
                    let row = &self.params[w + o * fan_in..w + (o + 1) * fan_in];
                    self.params[b + o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            if k + 1 < layers {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        Activations { layers: acts }
    }

    /// Adds `∂(grad_out · output)/∂params` into `grad`.
    pub fn backward(&self, acts: &Activations, grad_out: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let layers = self.sizes.len() - 1;
        let mut delta = grad_out.to_vec();
        for k in (0..layers).rev() {
            let (fan_in, out) = (self.sizes[k], self.sizes[k + 1]);
            let (w, b) = self.offsets(k);
            let input = &acts.layers[k];
            for o in 0..out {
                let d = delta[o];
                grad[b + o] += d;
                if d != 0.0 {
                    for (g, a) in grad[w + o * fan_in..w + (o + 1) * fan_in].iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
            }
            if k > 0 {
                delta = (0..fan_in)
                    .map(|i| {
                        let back: f64 = (0..out).map(|o| self.params[w + o * fan_in + i] * delta[o]).sum();
                        back * (1.0 - input[i] * input[i])
                    })
                    .collect();
            }
        }
    }
}
