//! Fully connected Q-network with ReLU hidden layers and a linear head.

use rand::Rng;

use crate::error::{Error, Result};

/// `C (m x n) = alpha * A (m x k) * B (k x n) + beta * C`, arbitrary strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    rsc: usize,
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() > (m - 1) * rsc + (n - 1));
    // SAFETY: the assertions above keep every strided access inside the slices,
    // and `c` does not alias `a` or `b` (it is a distinct &mut borrow).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    /// Fan-in scaled uniform init (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`), zero bias.
    pub fn kaiming_uniform(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / inputs as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-bound..bound)).collect();
        Dense { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    /// `y = x W^T + b` for `batch` rows of `x`.
    fn forward(&self, x: &[f64], batch: usize, y: &mut Vec<f64>) {
        y.clear();
        y.reserve(batch * self.outputs);
        for _ in 0..batch {
            y.extend_from_slice(&self.bias);
        }
        gemm(
            batch,
            self.inputs,
            self.outputs,
            x,
            (self.inputs, 1),
            &self.weights,
            (1, self.inputs),
            y,
            self.outputs,
            1.0,
        );
    }
}

/// Per-layer parameter gradients, laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Gradients { layers: net.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect() }
    }

    pub fn l2_norm(&self) -> f64 {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias)).map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|g| *g *= s);
        }
    }

    /// Rescales to unit L2 norm when the norm exceeds `max_norm`; returns the pre-clip norm.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let n = self.l2_norm();
        if n > max_norm {
            self.scale(max_norm / n);
        }
        n
    }
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `acts[0]` is the input; `acts[i]` the post-activation output of layer `i-1`.
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<Dense>,
}

impl QNetwork {
    pub fn new(dims: &[usize], rng: &mut impl Rng) -> Result<Self> {
        Self::check_dims(dims)?;
        let layers = dims.windows(2).map(|w| Dense::kaiming_uniform(w[0], w[1], rng)).collect();
        Ok(QNetwork { layers })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::check_dims(dims)?;
        Ok(QNetwork { layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect() })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Argument("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Argument(format!("layer {i} has inconsistent parameter shapes")));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(Error::Argument(format!("layer {i} input does not match previous output")));
            }
        }
        Ok(QNetwork { layers })
    }

    fn check_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Argument(format!("invalid layer dims {dims:?}")));
        }
        Ok(())
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].inputs];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Action values for a single input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(x, 1)
    }

    /// Outputs for `batch` row-major inputs.
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        if x.len() != batch * self.input_dim() {
            return Err(Error::Argument(format!("expected {} inputs, got {}", batch * self.input_dim(), x.len())));
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, batch, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward_cached(&self, x: &[f64], batch: usize) -> Result<ForwardCache> {
        if x.len() != batch * self.input_dim() {
            return Err(Error::Argument(format!("expected {} inputs, got {}", batch * self.input_dim(), x.len())));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = Vec::new();
            layer.forward(&acts[i], batch, &mut y);
            if i < last {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(y);
        }
        Ok(ForwardCache { batch, acts })
    }

    /// Gradients of a scalar loss given `d_out = dL/d(output)` for the cached batch.
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64]) -> Gradients {
        let batch = cache.batch;
        assert_eq!(d_out.len(), batch * self.output_dim(), "d_out shape mismatch");
        let mut grads = Gradients::zeros_like(self);
        let mut delta = d_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &cache.acts[i];
            let g = &mut grads.layers[i];
            // dW = delta^T * input
            gemm(
                layer.outputs,
                batch,
                layer.inputs,
                &delta,
                (1, layer.outputs),
                input,
                (layer.inputs, 1),
                &mut g.weights,
                layer.inputs,
                0.0,
            );
            for row in delta.chunks_exact(layer.outputs) {
                for (b, d) in g.bias.iter_mut().zip(row) {
                    *b += d;
                }
            }
            if i == 0 {
                break;
            }
            let mut d_in = vec![0.0; batch * layer.inputs];
            gemm(
                batch,
                layer.outputs,
                layer.inputs,
                &delta,
                (layer.outputs, 1),
                &layer.weights,
                (layer.inputs, 1),
                &mut d_in,
                layer.inputs,
                0.0,
            );
            // ReLU gate: the previous layer's output is zero exactly where it was clamped.
            for (d, &a) in d_in.iter_mut().zip(input) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            delta = d_in;
        }
        grads
    }

    /// Overwrites every parameter with `other`'s.
    pub fn copy_from(&mut self, other: &QNetwork) {
        self.layers.clone_from(&other.layers);
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
