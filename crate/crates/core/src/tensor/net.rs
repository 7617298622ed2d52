use super::{Layer, ManifestEntry, Real};
use crate::error::{Error, Result};
use rand::Rng;

/// A feed-forward chain of layers over a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    name: String,
    layers: Vec<Layer>,
    offsets: Vec<usize>,
    input_len: usize,
    output_len: usize,
    param_len: usize,
}

impl Network {
    pub fn new(name: impl Into<String>, input_len: usize, layers: Vec<Layer>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(layers.len());
        let mut len = input_len;
        let mut off = 0;
        for layer in &layers {
            offsets.push(off);
            off += layer.param_count();
            len = layer.output_len(len)?;
        }
        Ok(Self {
            name: name.into(),
            layers,
            offsets,
            input_len,
            output_len: len,
            param_len: off,
        })
    }

    /// Dense chain with `act` after every hidden layer and a linear output.
    pub fn mlp(name: impl Into<String>, input_len: usize, hidden: &[usize], output_len: usize, act: Layer) -> Result<Self> {
        let mut layers = Vec::new();
        let mut prev = input_len;
        for &h in hidden {
            layers.push(Layer::Dense {
                inputs: prev,
                outputs: h,
            });
            layers.push(act.clone());
            prev = h;
        }
        layers.push(Layer::Dense {
            inputs: prev,
            outputs: output_len,
        });
        Self::new(name, input_len, layers)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }
    pub fn input_len(&self) -> usize {
        self.input_len
    }
    pub fn output_len(&self) -> usize {
        self.output_len
    }
    pub fn param_len(&self) -> usize {
        self.param_len
    }

    /// Parameter slice range of layer `i`.
    pub fn layer_params(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i] + self.layers[i].param_count()
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for (part, shape) in layer.param_shapes() {
                out.push(ManifestEntry {
                    name: format!("{}.{}.{}", self.name, i, part),
                    shape,
                });
            }
        }
        out
    }

    /// Uniform fan-based init for weights, zero biases.
    pub fn init<S: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<S> {
        let mut params = vec![S::zero(); self.param_len];
        for (i, layer) in self.layers.iter().enumerate() {
            if let Some((n, fan_in, fan_out)) = layer.weight_fans() {
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let start = self.offsets[i];
                for p in &mut params[start..start + n] {
                    *p = S::of(rng.random_range(-bound..bound));
                }
            }
        }
        params
    }

    fn check(&self, params: usize, input: usize) -> Result<()> {
        if params != self.param_len {
            return Err(Error::Shape(format!(
                "{}: {} parameters supplied, {} expected",
                self.name, params, self.param_len
            )));
        }
        if input != self.input_len {
            return Err(Error::Shape(format!(
                "{}: input length {}, expected {}",
                self.name, input, self.input_len
            )));
        }
        Ok(())
    }

    pub fn forward<S: Real>(&self, params: &[S], input: &[S]) -> Result<Vec<S>> {
        self.check(params.len(), input.len())?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&params[self.layer_params(i)], &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward pass that records every layer input for one backward replay.
    pub fn forward_taped<S: Real>(&self, params: &[S], input: &[S]) -> Result<(Vec<S>, Tape<S>)> {
        self.check(params.len(), input.len())?;
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut cur = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = Vec::new();
            layer.forward(&params[self.layer_params(i)], &cur, &mut next);
            acts.push(std::mem::replace(&mut cur, next));
        }
        Ok((
            cur,
            Tape {
                inputs: acts,
                consumed: false,
            },
        ))
    }
}

/// Layer inputs recorded by [`Network::forward_taped`].
#[derive(Debug)]
pub struct Tape<S> {
    inputs: Vec<Vec<S>>,
    consumed: bool,
}

impl<S: Real> Tape<S> {
    /// Replays the tape backwards, adding parameter gradients into `grads`
    /// and returning the gradient with respect to the network input.
    pub fn backward(&mut self, net: &Network, params: &[S], upstream: &[S], grads: &mut [S]) -> Result<Vec<S>> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        if upstream.len() != net.output_len || grads.len() != net.param_len || params.len() != net.param_len {
            return Err(Error::Shape(format!(
                "{}: backward with upstream {} / grads {} / params {}",
                net.name,
                upstream.len(),
                grads.len(),
                params.len()
            )));
        }
        if self.inputs.len() != net.layers.len() {
            return Err(Error::Shape(format!("{}: tape does not match network", net.name)));
        }
        self.consumed = true;
        let mut dy = upstream.to_vec();
        let mut dx = Vec::new();
        for i in (0..net.layers.len()).rev() {
            let range = net.layer_params(i);
            net.layers[i].backward(&params[range.clone()], &self.inputs[i], &dy, &mut grads[range], &mut dx);
            std::mem::swap(&mut dy, &mut dx);
        }
        self.inputs.clear();
        Ok(dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn replay_twice_rejected() {
        let net = Network::mlp("m", 3, &[4], 2, Layer::Elu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p: Vec<f64> = net.init(&mut rng);
        let (_, mut tape) = net.forward_taped(&p, &[0.1, 0.2, 0.3]).unwrap();
        let mut g = vec![0.0; net.param_len()];
        tape.backward(&net, &p, &[1.0, 0.0], &mut g).unwrap();
        assert!(matches!(tape.backward(&net, &p, &[1.0, 0.0], &mut g), Err(Error::TapeConsumed)));
    }

    #[test]
    fn zero_gradient_at_quadratic_minimum() {
        // loss = 0.5 |Wx + b - t|^2 with t chosen as the current output
        let net = Network::new("d", 2, vec![Layer::Dense { inputs: 2, outputs: 2 }]).unwrap();
        let p = vec![0.5, -0.2, 0.1, 0.3, 0.05, -0.05];
        let x = [0.7, -1.1];
        let (y, mut tape) = net.forward_taped(&p, &x).unwrap();
        let residual: Vec<f64> = y.iter().map(|v| v - v).collect();
        let mut g = vec![0.0; 6];
        let dx = tape.backward(&net, &p, &residual, &mut g).unwrap();
        assert!(g.iter().chain(&dx).all(|&v| v == 0.0));
    }

    #[test]
    fn loss_scaling_scales_gradients() {
        let net = Network::mlp("m", 3, &[5, 4], 2, Layer::Elu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p: Vec<f64> = net.init(&mut rng);
        let x = [0.3, -0.4, 0.9];
        let run = |scale: f64| {
            let (_, mut tape) = net.forward_taped(&p, &x).unwrap();
            let mut g = vec![0.0; net.param_len()];
            tape.backward(&net, &p, &[scale, -0.5 * scale], &mut g).unwrap();
            g
        };
        for (a, b) in run(1.0).iter().zip(run(2.0)) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn backward_leaves_inputs_untouched() {
        let net = Network::mlp("m", 2, &[3], 1, Layer::Relu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p: Vec<f32> = net.init(&mut rng);
        let x = vec![0.25f32, -0.5];
        let before = (p.clone(), x.clone());
        let (_, mut tape) = net.forward_taped(&p, &x).unwrap();
        let mut g = vec![0.0; net.param_len()];
        tape.backward(&net, &p, &[1.0], &mut g).unwrap();
        assert_eq!(before, (p, x));
    }

    #[test]
    fn manifest_volumes_sum_to_param_len() {
        let net = Network::mlp("pi", 31, &[16, 8], 8, Layer::Elu).unwrap();
        let total: usize = net.manifest().iter().map(|e| e.shape.iter().product::<usize>()).sum();
        assert_eq!(total, net.param_len());
    }
}
