//! Fully connected network with tanh hidden layers and a linear output layer.
//!
//! Parameters live in one flat vector: for each layer the row-major weight matrix
//! (`outputs × inputs`) followed by the bias. Gradients use the same layout.

use matrixmultiply::dgemm;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Post-activation outputs of every layer, input included.
#[derive(Debug, Clone)]
pub struct Activations {
    pub batch: usize,
    pub layers: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("at least the input layer")
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let n = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Mlp { sizes: sizes.to_vec(), params: vec![0.0; n] }
    }

    /// Fan-in uniform weights with unit variance gain, zero biases; the output layer is
    /// further multiplied by `output_scale`.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], output_scale: f64, rng: &mut R) -> Self {
        let mut net = Mlp::zeros(sizes);
        let layers = net.num_layers();
        for l in 0..layers {
            let fan_in = net.sizes[l];
            let bound = (3.0 / fan_in as f64).sqrt() * if l + 1 == layers { output_scale } else { 1.0 };
            let (w, _) = net.layer_ranges(l);
            for p in &mut net.params[w] {
                *p = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Option<Self> {
        let net = Mlp::zeros(sizes);
        (net.params.len() == params.len()).then(|| Mlp { sizes: sizes.to_vec(), params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Index ranges of the weight matrix and bias of layer `l`.
    pub fn layer_ranges(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let mut off = 0;
        for k in 0..l {
            off += self.sizes[k] * self.sizes[k + 1] + self.sizes[k + 1];
        }
        let nw = self.sizes[l] * self.sizes[l + 1];
        (off..off + nw, off + nw..off + nw + self.sizes[l + 1])
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        &self.params[self.layer_ranges(l).0]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.params[self.layer_ranges(l).1]
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_batch(x, 1)
    }

    /// Row-major `batch × inputs` in, `batch × outputs` out.
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Vec<f64> {
        self.forward_cached(x, batch).layers.pop().unwrap()
    }

    pub fn forward_cached(&self, x: &[f64], batch: usize) -> Activations {
        assert_eq!(x.len(), batch * self.input_size(), "input length");
        let mut layers = Vec::with_capacity(self.sizes.len());
        layers.push(x.to_vec());
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (wr, br) = self.layer_ranges(l);
            let w = &self.params[wr];
            let b = &self.params[br];
            let mut y = vec![0.0; batch * n_out];
            for row in y.chunks_exact_mut(n_out) {
                row.copy_from_slice(b);
            }
            let input = layers.last().unwrap();
            // y (batch × out) += x (batch × in) · Wᵀ (in × out)
            unsafe {
                dgemm(
                    batch, n_in, n_out, 1.0,
                    input.as_ptr(), n_in as isize, 1,
                    w.as_ptr(), 1, n_in as isize,
                    1.0,
                    y.as_mut_ptr(), n_out as isize, 1,
                );
            }
            if l != last {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            layers.push(y);
        }
        Activations { batch, layers }
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂output` for the cached batch.
    pub fn backward(&self, acts: &Activations, grad_output: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let batch = acts.batch;
        assert_eq!(grad_output.len(), batch * self.output_size());
        let mut delta = grad_output.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (wr, br) = self.layer_ranges(l);
            let input = &acts.layers[l];
            // dW (out × in) += δᵀ (out × batch) · x (batch × in)
            unsafe {
                dgemm(
                    n_out, batch, n_in, 1.0,
                    delta.as_ptr(), 1, n_out as isize,
                    input.as_ptr(), n_in as isize, 1,
                    1.0,
                    grad[wr.clone()].as_mut_ptr(), n_in as isize, 1,
                );
            }
            let gb = &mut grad[br];
            for row in delta.chunks_exact(n_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l == 0 {
                break;
            }
            // δ_prev (batch × in) = δ (batch × out) · W (out × in), then through tanh.
            let w = &self.params[wr];
            let mut prev = vec![0.0; batch * n_in];
            unsafe {
                dgemm(
                    batch, n_out, n_in, 1.0,
                    delta.as_ptr(), n_out as isize, 1,
                    w.as_ptr(), n_in as isize, 1,
                    0.0,
                    prev.as_mut_ptr(), n_in as isize, 1,
                );
            }
            for (p, h) in prev.iter_mut().zip(input) {
                *p *= 1.0 - h * h;
            }
            delta = prev;
        }
    }
}
