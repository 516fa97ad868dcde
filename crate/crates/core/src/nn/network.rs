use super::adam::{adam_step, AdamState};
use super::conv::{backward_with, forward_with, ConvLayer};
use super::{Real, Tensor4};
use crate::{Error, Result};

pub fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Upstream gradient gated by the activation input `x`.
pub fn relu_backward<T: Real>(x: T, upstream: T) -> T {
    if x > T::zero() {
        upstream
    } else {
        T::zero()
    }
}

/// Stack of same-padded convolutions, ReLU between layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    layers: Vec<ConvLayer<T>>,
}

/// Inputs to every layer plus the network output.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    activations: Vec<Tensor4<T>>,
}

impl<T: Real> ForwardCache<T> {
    /// Post-activation output of every layer, input first.
    pub fn activations(&self) -> &[Tensor4<T>] {
        &self.activations
    }

    pub fn output(&self) -> &Tensor4<T> {
        self.activations.last().expect("cache holds the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads<T> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<Vec<T>>,
}

impl<T: Real> NetworkGrads<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        NetworkGrads {
            weights: net.layers.iter().map(|l| vec![T::zero(); l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![T::zero(); l.bias.len()]).collect(),
        }
    }

    /// Buffers in the order used by [`Network::param_sizes`].
    pub fn slices(&self) -> Vec<&[T]> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| [&w[..], &b[..]])
            .collect()
    }
}

impl<T: Real> Network<T> {
    pub fn new(layers: Vec<ConvLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.kh == 0 || l.kw == 0 || l.in_channels == 0 || l.out_channels == 0 {
                return Err(Error::invalid(format!("layer {i} has a zero dimension")));
            }
            if l.weights.len() != l.out_channels * l.patch_len() || l.bias.len() != l.out_channels {
                return Err(Error::invalid(format!("layer {i} buffers do not match its shape")));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].out_channels != w[1].in_channels {
                return Err(Error::invalid(format!(
                    "layer {} emits {} channels but layer {} expects {}",
                    i,
                    w[0].out_channels,
                    i + 1,
                    w[1].in_channels
                )));
            }
        }
        Ok(Network { layers })
    }

    pub fn layers(&self) -> &[ConvLayer<T>] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(ConvLayer::param_count).sum()
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| [l.weights.len(), l.bias.len()]).collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights[..], &mut l.bias[..]])
            .collect()
    }

    pub fn forward(&self, input: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut cols = Vec::new();
        let mut x = forward_with(input, &self.layers[0], &mut cols)?;
        for layer in &self.layers[1..] {
            x.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
            x = forward_with(&x, layer, &mut cols)?;
        }
        Ok(x)
    }

    pub fn forward_cached(&self, input: &Tensor4<T>) -> Result<ForwardCache<T>> {
        let mut cols = Vec::new();
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = forward_with(activations.last().unwrap(), layer, &mut cols)?;
            if i < last {
                y.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
            }
            activations.push(y);
        }
        Ok(ForwardCache { activations })
    }

    /// Parameter gradients for `dL/d(output) = upstream`.
    pub fn backward(&self, cache: &ForwardCache<T>, upstream: &Tensor4<T>) -> Result<NetworkGrads<T>> {
        let mut grads = NetworkGrads::zeros_like(self);
        self.backward_into(cache, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Network::backward`] but accumulates into `grads`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache<T>,
        upstream: &Tensor4<T>,
        grads: &mut NetworkGrads<T>,
    ) -> Result<()> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::invalid("forward cache does not belong to this network"));
        }
        let mut cols = Vec::new();
        let mut g = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[i];
            let gi = backward_with(input, layer, &g, i > 0, &mut grads.weights[i], &mut grads.bias[i], &mut cols)?;
            if let Some(mut gi) = gi {
                // activations[i] is post-ReLU, positive exactly where the pre-activation was
                for (d, &a) in gi.as_mut_slice().iter_mut().zip(input.as_slice()) {
                    *d = relu_backward(a, *d);
                }
                g = gi;
            }
        }
        Ok(())
    }

    pub fn adam_update(&mut self, grads: &NetworkGrads<T>, state: &mut AdamState<T>, lr: f64) -> Result<()> {
        let g = grads.slices();
        adam_step(&mut self.param_slices_mut(), &g, state, lr)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.to_f64().is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng_stream;
    use rand::Rng;

    fn small_net(seed: u64) -> Network<f64> {
        let mut rng = rng_stream(seed, 0);
        let mut layers = vec![
            ConvLayer::init(1, 3, 3, 2, &mut rng),
            ConvLayer::init(3, 2, 4, 3, &mut rng),
            ConvLayer::init(2, 1, 2, 2, &mut rng),
        ];
        for l in &mut layers {
            for b in &mut l.bias {
                *b = rng.random_range(-0.2..0.2);
            }
        }
        Network::new(layers).unwrap()
    }

    #[test]
    fn relu_values() {
        assert_eq!(relu(-1.0), 0.0);
        assert_eq!(relu(2.0), 2.0);
        assert_eq!(relu_backward(3.0, 1.0), 1.0);
        assert_eq!(relu_backward(-3.0, 1.0), 0.0);
    }

    #[test]
    fn channel_chain_is_checked() {
        let mut rng = rng_stream(1, 0);
        let layers = vec![ConvLayer::<f32>::init(1, 4, 3, 3, &mut rng), ConvLayer::init(3, 1, 3, 3, &mut rng)];
        assert!(Network::new(layers).is_err());
    }

    #[test]
    fn forward_matches_cached_output() {
        let net = small_net(2);
        let mut rng = rng_stream(2, 1);
        let x = Tensor4::from_vec([2, 1, 7, 5], (0..70).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        assert_eq!(&net.forward(&x).unwrap(), net.forward_cached(&x).unwrap().output());
        assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }

    #[test]
    fn network_gradients_match_central_differences() {
        let step = 1e-4;
        for trial in 0..3u64 {
            let net = small_net(10 + trial);
            let mut rng = rng_stream(20 + trial, 0);
            let x = Tensor4::from_vec([2, 1, 6, 5], (0..60).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let r = Tensor4::from_vec([2, 1, 6, 5], (0..60).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let loss = |n: &Network<f64>| -> f64 {
                let y = n.forward(&x).unwrap();
                y.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum()
            };
            let grads = net.backward(&net.forward_cached(&x).unwrap(), &r).unwrap();
            let flat: Vec<f64> = grads.slices().concat();
            let mut checked = 0;
            let mut idx = 0;
            for buf in 0..net.param_sizes().len() {
                for j in 0..net.param_sizes()[buf] {
                    let (mut np, mut nm) = (net.clone(), net.clone());
                    np.param_slices_mut()[buf][j] += step;
                    nm.param_slices_mut()[buf][j] -= step;
                    let fd = (loss(&np) - loss(&nm)) / (2.0 * step);
                    let a = flat[idx];
                    idx += 1;
                    // a ReLU kink inside the stencil makes the difference meaningless
                    if (fd - a).abs() > 1e-3 * a.abs().max(1e-2) {
                        let kinked = [&np, &nm].iter().any(|n| {
                            let c = n.forward_cached(&x).unwrap();
                            let c0 = net.forward_cached(&x).unwrap();
                            c.activations.iter().zip(&c0.activations).any(|(p, q)| {
                                p.as_slice().iter().zip(q.as_slice()).any(|(u, v)| (*u > 0.0) != (*v > 0.0))
                            })
                        });
                        assert!(kinked, "layer buffer {buf} index {j}: fd {fd} vs analytic {a}");
                        continue;
                    }
                    let rel = (fd - a).abs() / fd.abs().max(a.abs()).max(1e-8);
                    assert!(rel < 1e-4 || (fd - a).abs() < 1e-9, "buffer {buf} index {j}: rel {rel}");
                    checked += 1;
                }
            }
            assert!(checked > net.param_count() * 9 / 10);
        }
    }

    #[test]
    fn zero_lr_keeps_weights() {
        let mut net = small_net(3);
        let before = net.clone();
        let x = Tensor4::from_vec([1, 1, 6, 5], vec![0.3; 30]).unwrap();
        let g = net.backward(&net.forward_cached(&x).unwrap(), &Tensor4::from_vec([1, 1, 6, 5], vec![1.0; 30]).unwrap()).unwrap();
        let mut s = AdamState::new(&net.param_sizes());
        net.adam_update(&g, &mut s, 0.0).unwrap();
        assert_eq!(net, before);
    }
}
