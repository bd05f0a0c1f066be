use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Matrix, NnError};

/// Sigmoid outputs are kept this far away from 0 and 1 so that
/// `log(φ)` and `log(1 - φ)` stay finite.
const SIGMOID_MARGIN: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => {
                (1.0 / (1.0 + (-z).exp())).clamp(SIGMOID_MARGIN, 1.0 - SIGMOID_MARGIN)
            }
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output `a = f(z)`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "linear" => Ok(Activation::Linear),
            other => Err(NnError::Config(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct LayerShape {
    fan_in: usize,
    fan_out: usize,
    /// Offset of the weight block in the flat parameter vector; biases follow it.
    offset: usize,
    activation: Activation,
}

impl LayerShape {
    fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }

    fn param_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + (self.fan_in + 1) * self.fan_out
    }
}

/// Feed-forward network with all parameters stored in one flat vector.
///
/// Layer `l` owns a `fan_in x fan_out` weight block (row `i` holds the weights
/// leaving input unit `i`) followed by `fan_out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
}

/// Intermediate activations kept by [`Mlp::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `activations[0]` is the input, `activations[l + 1]` the output of layer `l`.
    activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache always holds the input")
    }

    pub fn input(&self) -> &Matrix {
        &self.activations[0]
    }

    pub fn into_output(mut self) -> Matrix {
        self.activations.pop().expect("cache always holds the input")
    }
}

/// Gradient accumulator aligned with an [`Mlp`]'s parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GradTape {
    pub params: Vec<f64>,
    /// Gradient with respect to the network input of the last backward call.
    pub input: Matrix,
}

impl GradTape {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            params: vec![0.0; net.num_params()],
            input: Matrix::zeros(0, net.input_dim()),
        }
    }

    pub fn zero(&mut self) {
        self.params.iter_mut().for_each(|g| *g = 0.0);
        self.input.as_mut_slice().iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.params.iter_mut().for_each(|g| *g *= factor);
    }
}

impl Mlp {
    /// Creates a network whose layers are all initialized with
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` weights and biases.
    pub fn new(sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self, NnError> {
        Self::build(sizes, activations, None, seed)
    }

    /// Like [`Mlp::new`], but the output layer is drawn from `U(-bound, bound)`.
    pub fn with_output_bound(
        sizes: &[usize],
        activations: &[Activation],
        output_bound: f64,
        seed: u64,
    ) -> Result<Self, NnError> {
        if !(output_bound.is_finite() && output_bound >= 0.0) {
            return Err(NnError::Config(format!(
                "output init bound must be finite and non-negative, got {output_bound}"
            )));
        }
        Self::build(sizes, activations, Some(output_bound), seed)
    }

    /// A network with every parameter set to zero.
    pub fn zeroed(sizes: &[usize], activations: &[Activation]) -> Result<Self, NnError> {
        let mut net = Self::build(sizes, activations, Some(0.0), 0)?;
        net.params.iter_mut().for_each(|p| *p = 0.0);
        Ok(net)
    }

    fn build(
        sizes: &[usize],
        activations: &[Activation],
        output_bound: Option<f64>,
        seed: u64,
    ) -> Result<Self, NnError> {
        if sizes.len() < 2 {
            return Err(NnError::Config(format!(
                "need at least an input and an output layer, got sizes {sizes:?}"
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(NnError::Config(format!("layer sizes must be positive: {sizes:?}")));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(NnError::Config(format!(
                "{} layers need {} activations, got {}",
                sizes.len(),
                sizes.len() - 1,
                activations.len()
            )));
        }

        let mut layers = Vec::with_capacity(activations.len());
        let mut offset = 0;
        for (w, &activation) in sizes.windows(2).zip(activations) {
            layers.push(LayerShape {
                fan_in: w[0],
                fan_out: w[1],
                offset,
                activation,
            });
            offset += (w[0] + 1) * w[1];
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; offset];
        let last = layers.len() - 1;
        for (l, layer) in layers.iter().enumerate() {
            let bound = match output_bound {
                Some(b) if l == last => b,
                _ => 1.0 / (layer.fan_in as f64).sqrt(),
            };
            for p in &mut params[layer.param_range()] {
                *p = if bound > 0.0 {
                    rng.random_range(-bound..bound)
                } else {
                    0.0
                };
            }
        }

        Ok(Self {
            sizes: sizes.to_vec(),
            layers,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
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

    /// Index of the layer owning flat parameter `index`.
    pub fn layer_of_param(&self, index: usize) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| l.param_range().contains(&index))
    }

    /// Mutable view of layer `l`'s weights (`fan_in x fan_out`, row-major) and biases.
    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let layer = &self.layers[l];
        let (w, b) = (layer.weight_range(), layer.bias_range());
        let (head, tail) = self.params.split_at_mut(b.start);
        (&mut head[w], &mut tail[..b.len()])
    }

    /// Runs the network over a batch and keeps every layer's activations.
    pub fn forward(&self, input: &Matrix) -> Result<ForwardCache, NnError> {
        if input.cols() != self.input_dim() {
            return Err(NnError::Shape {
                what: "forward input width",
                expected: self.input_dim(),
                got: input.cols(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for layer in &self.layers {
            let next = self.layer_forward(layer, activations.last().expect("non-empty"));
            activations.push(next);
        }
        Ok(ForwardCache { activations })
    }

    /// Forward pass that only returns the output.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix, NnError> {
        if input.cols() != self.input_dim() {
            return Err(NnError::Shape {
                what: "forward input width",
                expected: self.input_dim(),
                got: input.cols(),
            });
        }
        let mut current = self.layer_forward(&self.layers[0], input);
        for layer in &self.layers[1..] {
            current = self.layer_forward(layer, &current);
        }
        Ok(current)
    }

    fn layer_forward(&self, layer: &LayerShape, x: &Matrix) -> Matrix {
        let weights = &self.params[layer.weight_range()];
        let biases = &self.params[layer.bias_range()];
        let out_dim = layer.fan_out;
        let mut out = Matrix::zeros(x.rows(), out_dim);
        for b in 0..x.rows() {
            let row = out.row_mut(b);
            row.copy_from_slice(biases);
            for (i, &xi) in x.row(b).iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let w = &weights[i * out_dim..(i + 1) * out_dim];
                for (o, &wio) in row.iter_mut().zip(w) {
                    *o += xi * wio;
                }
            }
            if layer.activation != Activation::Linear {
                for v in row.iter_mut() {
                    *v = layer.activation.apply(*v);
                }
            }
        }
        out
    }

    /// Backpropagates `output_grad` (dLoss/dOutput) through the cached pass.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &Matrix) -> Result<GradTape, NnError> {
        let mut tape = GradTape::zeros_like(self);
        self.backward_into(cache, output_grad, &mut tape)?;
        Ok(tape)
    }

    /// Adds the parameter gradient into `tape.params` and overwrites `tape.input`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        output_grad: &Matrix,
        tape: &mut GradTape,
    ) -> Result<(), NnError> {
        let out = cache.output();
        if cache.activations.len() != self.layers.len() + 1 || cache.input().cols() != self.input_dim()
        {
            return Err(NnError::Shape {
                what: "forward cache depth",
                expected: self.layers.len() + 1,
                got: cache.activations.len(),
            });
        }
        if output_grad.rows() != out.rows() || output_grad.cols() != out.cols() {
            return Err(NnError::Shape {
                what: "output gradient shape",
                expected: out.rows() * out.cols(),
                got: output_grad.rows() * output_grad.cols(),
            });
        }
        if tape.params.len() != self.params.len() {
            return Err(NnError::Shape {
                what: "gradient tape length",
                expected: self.params.len(),
                got: tape.params.len(),
            });
        }

        let batch = out.rows();
        let mut upstream = output_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let a = &cache.activations[l + 1];
            let x = &cache.activations[l];
            let out_dim = layer.fan_out;
            let in_dim = layer.fan_in;

            // dz = da * f'(z)
            let mut dz = upstream;
            if layer.activation != Activation::Linear {
                for (g, &av) in dz.as_mut_slice().iter_mut().zip(a.as_slice()) {
                    *g *= layer.activation.derivative_from_output(av);
                }
            }

            let (w_range, b_range) = (layer.weight_range(), layer.bias_range());
            {
                let (head, tail) = tape.params.split_at_mut(b_range.start);
                let gw = &mut head[w_range.clone()];
                let gb = &mut tail[..out_dim];
                for b in 0..batch {
                    let dzb = dz.row(b);
                    for (g, &d) in gb.iter_mut().zip(dzb) {
                        *g += d;
                    }
                    for (i, &xi) in x.row(b).iter().enumerate() {
                        if xi == 0.0 {
                            continue;
                        }
                        let row = &mut gw[i * out_dim..(i + 1) * out_dim];
                        for (g, &d) in row.iter_mut().zip(dzb) {
                            *g += xi * d;
                        }
                    }
                }
            }

            let weights = &self.params[w_range];
            let mut dx = Matrix::zeros(batch, in_dim);
            for b in 0..batch {
                let dzb = dz.row(b);
                let dxb = dx.row_mut(b);
                for (i, g) in dxb.iter_mut().enumerate() {
                    let w = &weights[i * out_dim..(i + 1) * out_dim];
                    *g = w.iter().zip(dzb).map(|(wv, d)| wv * d).sum();
                }
            }
            upstream = dx;
        }
        tape.input = upstream;
        Ok(())
    }

    /// Overwrites every parameter with `tau * source + (1 - tau) * self`.
    pub fn blend_from(&mut self, source: &Mlp, tau: f64) -> Result<(), NnError> {
        if source.params.len() != self.params.len() {
            return Err(NnError::Shape {
                what: "blend source parameter count",
                expected: self.params.len(),
                got: source.params.len(),
            });
        }
        let keep = 1.0 - tau;
        for (t, &s) in self.params.iter_mut().zip(&source.params) {
            *t = tau * s + keep * *t;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Activation::*;

    #[test]
    fn parameter_count_matches_shapes() {
        let net = Mlp::new(&[3, 64, 64, 1], &[Relu, Relu, Sigmoid], 0).unwrap();
        assert_eq!(net.num_params(), 3 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
        assert_eq!(net.num_params(), 4481);
    }

    #[test]
    fn init_is_seeded() {
        let a = Mlp::new(&[3, 8, 2], &[Tanh, Linear], 7).unwrap();
        let b = Mlp::new(&[3, 8, 2], &[Tanh, Linear], 7).unwrap();
        assert_eq!(a.params(), b.params());
        let c = Mlp::new(&[3, 8, 2], &[Tanh, Linear], 0).unwrap();
        let d = Mlp::new(&[3, 8, 2], &[Tanh, Linear], 1).unwrap();
        assert!(c.params().iter().zip(d.params()).any(|(x, y)| x != y));
    }

    #[test]
    fn output_bound_limits_last_layer() {
        let net = Mlp::with_output_bound(&[3, 16, 1], &[Relu, Sigmoid], 3e-3, 4).unwrap();
        let last = &net.params()[(3 + 1) * 16..];
        assert!(last.iter().all(|p| p.abs() <= 3e-3));
        let first = &net.params()[..(3 + 1) * 16];
        assert!(first.iter().any(|p| p.abs() > 3e-3));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(matches!(Mlp::new(&[3], &[], 0), Err(NnError::Config(_))));
        assert!(matches!(Mlp::new(&[3, 0, 1], &[Relu, Linear], 0), Err(NnError::Config(_))));
        assert!(matches!(Mlp::new(&[3, 4, 1], &[Relu], 0), Err(NnError::Config(_))));
        assert!(matches!(
            Mlp::with_output_bound(&[1, 1], &[Linear], f64::NAN, 0),
            Err(NnError::Config(_))
        ));
    }

    #[test]
    fn zero_network_outputs() {
        let net = Mlp::zeroed(&[4, 5, 2], &[Relu, Linear]).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.0, 4.0]]);
        assert_eq!(net.predict(&x).unwrap().as_slice(), &[0.0, 0.0]);

        let net = Mlp::zeroed(&[4, 5, 1], &[Tanh, Sigmoid]).unwrap();
        assert_eq!(net.predict(&x).unwrap().as_slice(), &[0.5]);
    }

    #[test]
    fn affine_identity() {
        let mut net = Mlp::zeroed(&[1, 1], &[Linear]).unwrap();
        net.params_mut().copy_from_slice(&[2.5, -0.75]);
        let y = net.predict(&Matrix::from_rows(&[[3.0]])).unwrap();
        assert_eq!(y.as_slice(), &[2.5 * 3.0 - 0.75]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = Mlp::new(&[3, 4, 1], &[Relu, Linear], 0).unwrap();
        let err = net.forward(&Matrix::zeros(2, 2)).unwrap_err();
        assert!(matches!(err, NnError::Shape { expected: 3, got: 2, .. }));
    }

    #[test]
    fn backward_rejects_wrong_gradient_shape() {
        let net = Mlp::new(&[3, 4, 2], &[Relu, Linear], 0).unwrap();
        let cache = net.forward(&Matrix::zeros(2, 3)).unwrap();
        assert!(net.backward(&cache, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn zero_output_gradient_gives_zero_tape() {
        let net = Mlp::new(&[3, 8, 2], &[Tanh, Linear], 3).unwrap();
        let x = Matrix::from_rows(&[[0.1, -0.4, 0.9], [1.0, 2.0, -3.0]]);
        let cache = net.forward(&x).unwrap();
        let tape = net.backward(&cache, &Matrix::zeros(2, 2)).unwrap();
        assert!(tape.params.iter().all(|&g| g == 0.0));
        assert!(tape.input.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn tape_zeroing_clears_everything() {
        let net = Mlp::new(&[2, 3, 1], &[Tanh, Linear], 3).unwrap();
        let cache = net.forward(&Matrix::from_rows(&[[0.3, 0.2]])).unwrap();
        let mut tape = net.backward(&cache, &Matrix::from_rows(&[[1.0]])).unwrap();
        assert!(tape.params.iter().any(|&g| g != 0.0));
        tape.zero();
        assert!(tape.params.iter().all(|&g| g == 0.0));
        assert!(tape.input.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn blend_is_convex_combination() {
        let mut target = Mlp::zeroed(&[1, 1], &[Linear]).unwrap();
        let mut online = Mlp::zeroed(&[1, 1], &[Linear]).unwrap();
        online.params_mut().copy_from_slice(&[1.0, 1.0]);
        target.blend_from(&online, 0.001).unwrap();
        assert_eq!(target.params(), &[0.001, 0.001]);
    }

    #[test]
    fn layer_lookup() {
        let net = Mlp::new(&[2, 3, 1], &[Tanh, Linear], 3).unwrap();
        assert_eq!(net.layer_of_param(0), Some(0));
        assert_eq!(net.layer_of_param(8), Some(0));
        assert_eq!(net.layer_of_param(9), Some(1));
        assert_eq!(net.layer_of_param(13), None);
    }
}
