//! Fully connected network with Mish hidden units and a scalar linear output.
//!
//! Parameters live in one flat vector. Layer `l` stores its weight matrix
//! (`out × in`, row-major) followed by its bias vector. The final affine
//! output is multiplied by a fixed `output_scale`, 1 unless set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// `x · tanh(softplus(x))` and its derivative, sharing one exponential.
#[inline]
pub fn mish(x: f64) -> (f64, f64) {
    if x > 20.0 {
        // tanh(softplus(x)) is 1 to machine precision
        return (x, 1.0);
    }
    let e = x.exp();
    let n = e * (e + 2.0);
    let t = n / (n + 2.0);
    let sig = e / (1.0 + e);
    (x * t, t + x * (1.0 - t * t) * sig)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Checkpoint", into = "Checkpoint")]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    output_scale: f64,
}

/// On-disk form: the layer sizes followed by the flat parameter vector.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    layer_sizes: Vec<usize>,
    #[serde(default = "unit")]
    output_scale: f64,
    params: Vec<f64>,
}

fn unit() -> f64 {
    1.0
}

impl TryFrom<Checkpoint> for Mlp {
    type Error = Error;
    fn try_from(c: Checkpoint) -> Result<Self> {
        Mlp::from_params(c.layer_sizes, c.params)?.try_output_scale(c.output_scale)
    }
}

impl From<Mlp> for Checkpoint {
    fn from(m: Mlp) -> Self {
        Checkpoint { layer_sizes: m.sizes, output_scale: m.output_scale, params: m.params }
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return input("a network needs at least an input and an output layer");
    }
    if sizes.iter().any(|&n| n == 0) {
        return input(format!("layer sizes must be positive, got {sizes:?}"));
    }
    if sizes[sizes.len() - 1] != 1 {
        return input(format!("output layer must have width 1, got {sizes:?}"));
    }
    Ok(())
}

/// Activations kept from a batched forward pass for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    batch: usize,
    /// Layer inputs: `acts[0]` is the batch input, `acts[l]` the output of hidden layer `l`.
    acts: Vec<Vec<f64>>,
    /// Mish derivatives at each hidden pre-activation.
    slopes: Vec<Vec<f64>>,
    out: Vec<f64>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl ForwardCache {
    pub fn outputs(&self) -> &[f64] {
        &self.out
    }
}

impl Mlp {
    /// All-zero parameters.
    pub fn zeros(sizes: Vec<usize>) -> Result<Self> {
        check_sizes(&sizes)?;
        let n = param_count(&sizes);
        Ok(Self { sizes, params: vec![0.0; n], output_scale: 1.0 })
    }

    /// Weights and biases uniform on `±1/√fan_in`.
    pub fn init<R: Rng + ?Sized>(sizes: Vec<usize>, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut off = 0;
        for w in net.sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[off..off + w[1] * (w[0] + 1)] {
                *p = rng.random_range(-bound..bound);
            }
            off += w[1] * (w[0] + 1);
        }
        Ok(net)
    }

    pub fn from_params(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        check_sizes(&sizes)?;
        let n = param_count(&sizes);
        if params.len() != n {
            return input(format!("layer sizes {sizes:?} need {n} parameters, got {}", params.len()));
        }
        Ok(Self { sizes, params, output_scale: 1.0 })
    }

    /// Panics unless `scale` is positive and finite.
    pub fn with_output_scale(self, scale: f64) -> Self {
        self.try_output_scale(scale).expect("output scale must be positive and finite")
    }

    fn try_output_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return input(format!("output scale must be positive and finite, got {scale}"));
        }
        self.output_scale = scale;
        Ok(self)
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
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

    /// Whole-parameter copy, used for target-network syncs.
    pub fn copy_from(&mut self, other: &Mlp) {
        assert_eq!(self.sizes, other.sizes, "copy between differently shaped networks");
        self.params.copy_from_slice(&other.params);
        self.output_scale = other.output_scale;
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn to_json(&self) -> Result<String> {
        if !self.is_finite() {
            return Err(Error::Model("cannot checkpoint non-finite parameters".into()));
        }
        serde_json::to_string(self).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Input(format!("bad checkpoint: {e}")))
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let mut cache = ForwardCache::default();
        self.forward_batch(x, 1, &mut cache)?;
        Ok(cache.out[0])
    }

    /// Parameter gradient of `upstream · forward(x)`.
    pub fn backward(&self, x: &[f64], upstream: f64) -> Result<Vec<f64>> {
        let mut cache = ForwardCache::default();
        self.forward_batch(x, 1, &mut cache)?;
        let mut grad = vec![0.0; self.params.len()];
        self.backward_batch(&mut cache, &[upstream], &mut grad)?;
        Ok(grad)
    }

    /// Forward pass over `batch` row-major inputs; outputs land in `cache.outputs()`.
    pub fn forward_batch(&self, x: &[f64], batch: usize, cache: &mut ForwardCache) -> Result<()> {
        let n_in = self.sizes[0];
        if x.len() != batch * n_in {
            return input(format!("expected {batch}×{n_in} inputs, got {}", x.len()));
        }
        let layers = self.sizes.len() - 1;
        cache.batch = batch;
        cache.acts.resize(layers, Vec::new());
        cache.slopes.resize(layers - 1, Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        let mut off = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + fan_out * fan_in];
            let b = &self.params[off + fan_out * fan_in..off + fan_out * (fan_in + 1)];
            off += fan_out * (fan_in + 1);
            let mut z = vec![0.0; batch * fan_out];
            for row in z.chunks_exact_mut(fan_out) {
                row.copy_from_slice(b);
            }
            // z += A · Wᵀ
            unsafe {
                matrixmultiply::dgemm(
                    batch, fan_in, fan_out, 1.0,
                    cache.acts[l].as_ptr(), fan_in as isize, 1,
                    w.as_ptr(), 1, fan_in as isize,
                    1.0, z.as_mut_ptr(), fan_out as isize, 1,
                );
            }
            if l + 1 == layers {
                if self.output_scale != 1.0 {
                    z.iter_mut().for_each(|o| *o *= self.output_scale);
                }
                cache.out = z;
            } else {
                let slope = &mut cache.slopes[l];
                slope.resize(z.len(), 0.0);
                for (zi, si) in z.iter_mut().zip(slope.iter_mut()) {
                    let (m, d) = mish(*zi);
                    *zi = m;
                    *si = d;
                }
                cache.acts[l + 1] = z;
            }
        }
        Ok(())
    }

    /// Adds the parameter gradient of `Σᵢ upstream[i] · out[i]` into `grad`.
    pub fn backward_batch(&self, cache: &mut ForwardCache, upstream: &[f64], grad: &mut [f64]) -> Result<()> {
        let batch = cache.batch;
        if upstream.len() != batch || grad.len() != self.params.len() || cache.acts.is_empty() {
            return input("backward shapes do not match the cached forward pass");
        }
        let layers = self.sizes.len() - 1;
        let mut delta = std::mem::take(&mut cache.delta);
        let mut prev = std::mem::take(&mut cache.delta_prev);
        delta.clear();
        delta.extend(upstream.iter().map(|u| u * self.output_scale));
        let mut end = self.params.len();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let start = end - fan_out * (fan_in + 1);
            let (gw, gb) = grad[start..end].split_at_mut(fan_out * fan_in);
            for row in delta.chunks_exact(fan_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            let a = &cache.acts[l];
            // gW += Δᵀ · A
            unsafe {
                matrixmultiply::dgemm(
                    fan_out, batch, fan_in, 1.0,
                    delta.as_ptr(), 1, fan_out as isize,
                    a.as_ptr(), fan_in as isize, 1,
                    1.0, gw.as_mut_ptr(), fan_in as isize, 1,
                );
            }
            if l > 0 {
                let w = &self.params[start..start + fan_out * fan_in];
                prev.clear();
                prev.resize(batch * fan_in, 0.0);
                // Δ_prev = Δ · W, then through the activation
                unsafe {
                    matrixmultiply::dgemm(
                        batch, fan_out, fan_in, 1.0,
                        delta.as_ptr(), fan_out as isize, 1,
                        w.as_ptr(), fan_in as isize, 1,
                        0.0, prev.as_mut_ptr(), fan_in as isize, 1,
                    );
                }
                for (p, s) in prev.iter_mut().zip(&cache.slopes[l - 1]) {
                    *p *= s;
                }
                std::mem::swap(&mut delta, &mut prev);
            }
            end = start;
        }
        cache.delta = delta;
        cache.delta_prev = prev;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn affine_identity() {
        let net = Mlp::from_params(vec![1, 1], vec![2.0, 1.0]).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), 7.0);
        assert!(net.forward(&[3.0, 1.0]).is_err());
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(vec![3, 5, 5, 1]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 9.0]).unwrap(), 0.0);
    }

    #[test]
    fn mish_values() {
        assert_eq!(mish(0.0).0, 0.0);
        assert!((mish(0.0).1 - 0.6f64).abs() < 1e-15);
        let x = 1.3f64;
        let reference = x * (x.exp().ln_1p()).tanh();
        assert!((mish(x).0 - reference).abs() < 1e-15);
        assert!(mish(-800.0).0.abs() < 1e-300 && mish(800.0).0 == 800.0);
        for x in [-30.0, -3.0, -0.5, 0.2, 4.0, 19.9, 20.1] {
            let h = 1e-6;
            let fd = (mish(x + h).0 - mish(x - h).0) / (2.0 * h);
            assert!((fd - mish(x).1).abs() < 1e-7, "x = {x}");
        }
    }

    #[test]
    fn batch_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::init(vec![2, 4, 3, 1], &mut rng).unwrap();
        let xs = [0.1, -0.4, 2.0, 0.3, -1.0, -1.0];
        let mut cache = ForwardCache::default();
        net.forward_batch(&xs, 3, &mut cache).unwrap();
        let mut grad = vec![0.0; net.num_params()];
        net.backward_batch(&mut cache, &[1.0, -2.0, 0.5], &mut grad).unwrap();
        let mut expect = vec![0.0; net.num_params()];
        for (i, (x, u)) in xs.chunks(2).zip([1.0, -2.0, 0.5]).enumerate() {
            assert!((cache.outputs()[i] - net.forward(x).unwrap()).abs() < 1e-14);
            for (e, g) in expect.iter_mut().zip(net.backward(x, u).unwrap()) {
                *e += g;
            }
        }
        for (a, b) in grad.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::init(vec![2, 8, 8, 1], &mut rng).unwrap();
        let back = Mlp::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, back);
        let scaled = net.with_output_scale(0.01);
        assert_eq!(Mlp::from_json(&scaled.to_json().unwrap()).unwrap(), scaled);
        assert!(Mlp::from_json(r#"{"layer_sizes":[2,1],"params":[1.0]}"#).is_err());
    }
}
