//! Dense tanh network with a linear output layer and hand-written backprop.
//!
//! Parameters live in one flat vector. Layer `l` stores its weight matrix
//! row-major (`out × in`) followed by its bias vector.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer activations from one forward pass; `layers[0]` is the input and
/// the last entry is the (linear) output.
#[derive(Debug, Clone, Default)]
pub struct Activations {
    layers: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// Builds a network from explicit parameters.
    pub fn from_params(dims: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("invalid layer dims {dims:?}")));
        }
        let expected = param_count(&dims);
        if params.len() != expected {
            return Err(Error::Shape(format!(
                "{} parameters for dims {dims:?}, expected {expected}",
                params.len()
            )));
        }
        Ok(Self { dims, params })
    }

    /// Scaled-uniform init: weights have standard deviation `gain/√fan_in`
    /// on hidden layers and `output_gain/√fan_in` on the last; biases are 0.
    pub fn new<R: Rng + ?Sized>(
        dims: &[usize],
        hidden_gain: f64,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::from_params(dims.to_vec(), vec![0.0; param_count(dims)])?;
        let layers = dims.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let gain = if l + 1 == layers { output_gain } else { hidden_gain };
            // Uniform on [-a, a] has standard deviation a/√3.
            let a = gain * (3.0 / fan_in as f64).sqrt();
            for w in &mut net.params[offset..offset + fan_in * fan_out] {
                *w = if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 };
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Forward pass keeping every activation for a later backward pass.
    pub fn forward_cached(&self, input: &[f64], cache: &mut Activations) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let layers = self.dims.len() - 1;
        cache.layers.resize_with(layers + 1, Vec::new);
        cache.layers[0].clear();
        cache.layers[0].extend_from_slice(input);
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let bias = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let (prev, rest) = cache.layers.split_at_mut(l + 1);
            let x = &prev[l];
            let out = &mut rest[0];
            out.clear();
            for (row, b) in weights.chunks_exact(fan_in).zip(bias) {
                let z = b + dot(row, x);
                out.push(if l + 1 < layers { z.tanh() } else { z });
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = Activations::default();
        self.forward_cached(input, &mut cache)?;
        Ok(cache.layers.pop().unwrap_or_default())
    }

    /// Accumulates `∂(grad_out · output)/∂params` into `grads`.
    pub fn backward(&self, cache: &Activations, grad_out: &[f64], grads: &mut [f64]) {
        let layers = self.dims.len() - 1;
        debug_assert_eq!(grads.len(), self.params.len());
        debug_assert_eq!(grad_out.len(), self.output_dim());
        let mut delta = grad_out.to_vec();
        let mut next = Vec::new();
        let mut end = self.params.len();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let offset = end - (fan_in * fan_out + fan_out);
            let x = &cache.layers[l];
            let (gw, gb) = grads[offset..end].split_at_mut(fan_in * fan_out);
            for ((grow, gbias), &d) in gw.chunks_exact_mut(fan_in).zip(gb.iter_mut()).zip(&delta) {
                *gbias += d;
                for (g, xi) in grow.iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            if l > 0 {
                let weights = &self.params[offset..offset + fan_in * fan_out];
                next.clear();
                next.resize(fan_in, 0.0);
                for (row, &d) in weights.chunks_exact(fan_in).zip(&delta) {
                    for (n, w) in next.iter_mut().zip(row) {
                        *n += d * w;
                    }
                }
                // x holds tanh outputs of the previous layer.
                for (n, a) in next.iter_mut().zip(x) {
                    *n *= 1.0 - a * a;
                }
                std::mem::swap(&mut delta, &mut next);
            }
            end = offset;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn param_layout_and_shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[3, 4, 2], 1.0, 1.0, &mut rng).unwrap();
        assert_eq!(net.num_params(), 3 * 4 + 4 + 4 * 2 + 2);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(Mlp::from_params(vec![3], vec![]).is_err());
        assert!(Mlp::from_params(vec![2, 1], vec![0.0; 2]).is_err());
    }

    #[test]
    fn forward_matches_hand_computation() {
        // 2 → 1 (tanh) → 1 (linear)
        let net = Mlp::from_params(vec![2, 1, 1], vec![0.5, -1.0, 0.25, 2.0, -0.5]).unwrap();
        let out = net.forward(&[1.0, 2.0]).unwrap();
        let h = (0.5 - 2.0 + 0.25f64).tanh();
        assert!((out[0] - (2.0 * h - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = Mlp::new(&[4, 5, 3, 2], 1.0, 1.0, &mut rng).unwrap();
        let x = [0.3, -0.7, 0.1, 0.9];
        let g = [0.6, -1.3];
        let objective = |n: &Mlp| {
            let o = n.forward(&x).unwrap();
            o[0] * g[0] + o[1] * g[1]
        };
        let mut cache = Activations::default();
        net.forward_cached(&x, &mut cache).unwrap();
        let mut grads = vec![0.0; net.num_params()];
        net.backward(&cache, &g, &mut grads);
        let h = 1e-6;
        for i in 0..net.num_params() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = objective(&net);
            net.params_mut()[i] = orig - h;
            let down = objective(&net);
            net.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grads[i]).abs() < 1e-8, "param {i}: {fd} vs {}", grads[i]);
        }
    }

    #[test]
    fn zero_output_gain_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[3, 8, 4], 1.0, 0.0, &mut rng).unwrap();
        assert_eq!(net.forward(&[1.0, -1.0, 0.5]).unwrap(), vec![0.0; 4]);
    }
}
