use super::{GradTape, Mlp, NnError};

/// Adam optimizer state for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl Adam {
    /// Default moment decay rates `(0.9, 0.999)` and `epsilon = 1e-8`.
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self::with_params(net, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_params(net: &Mlp, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            first_moment: vec![0.0; net.num_params()],
            second_moment: vec![0.0; net.num_params()],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// Applies one bias-corrected Adam descent step using `tape.params`.
    ///
    /// Nothing is modified when the tape contains a non-finite entry.
    pub fn step(&mut self, net: &mut Mlp, tape: &GradTape) -> Result<(), NnError> {
        let n = net.num_params();
        if tape.params.len() != n || self.first_moment.len() != n {
            return Err(NnError::Shape {
                what: "adam parameter count",
                expected: n,
                got: tape.params.len(),
            });
        }
        if let Some(bad) = tape.params.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFinite {
                layer: net.layer_of_param(bad).unwrap_or(0),
                what: "gradient",
            });
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for (((p, &g), m), v) in net
            .params_mut()
            .iter_mut()
            .zip(&tape.params)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn scalar_net(w: f64) -> Mlp {
        let mut net = Mlp::zeroed(&[1, 1], &[Activation::Linear]).unwrap();
        net.params_mut()[0] = w;
        net
    }

    fn tape_with(net: &Mlp, grads: &[f64]) -> GradTape {
        let mut tape = GradTape::zeros_like(net);
        tape.params.copy_from_slice(grads);
        tape
    }

    #[test]
    fn first_step_is_learning_rate_sized() {
        let mut net = scalar_net(0.0);
        let mut adam = Adam::new(&net, 0.1);
        { let g = tape_with(&net, &[1.0, 0.0]); adam.step(&mut net, &g) }.unwrap();
        // m_hat = 1, v_hat = 1 => w = -0.1 / (1 + 1e-8)
        assert!((net.params()[0] + 0.1).abs() < 1e-8);
        assert_eq!(net.params()[1], 0.0);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = Mlp::new(&[2, 3, 1], &[Activation::Tanh, Activation::Linear], 5).unwrap();
        let before = net.clone();
        let mut adam = Adam::new(&net, 1e-3);
        let zeros = GradTape::zeros_like(&net);
        adam.step(&mut net, &zeros).unwrap();
        assert_eq!(net.params(), before.params());
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn moments_decay_under_zero_gradient() {
        let mut net = scalar_net(0.0);
        let mut adam = Adam::new(&net, 0.1);
        { let g = tape_with(&net, &[1.0, 0.0]); adam.step(&mut net, &g) }.unwrap();
        let m = adam.first_moment()[0];
        { let g = GradTape::zeros_like(&net); adam.step(&mut net, &g) }.unwrap();
        assert!((adam.first_moment()[0] - 0.9 * m).abs() < 1e-15);
        assert_eq!(adam.step_count(), 2);
    }

    #[test]
    fn optimizer_is_stateful() {
        let mut twice = scalar_net(0.0);
        let mut adam_a = Adam::new(&twice, 0.1);
        let g = tape_with(&twice, &[1.0, 0.0]);
        adam_a.step(&mut twice, &g).unwrap();
        adam_a.step(&mut twice, &g).unwrap();

        let mut doubled = scalar_net(0.0);
        let mut adam_b = Adam::new(&doubled, 0.1);
        { let g = tape_with(&doubled, &[2.0, 0.0]); adam_b.step(&mut doubled, &g) }.unwrap();
        assert_ne!(twice.params()[0], doubled.params()[0]);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut net = Mlp::new(&[2, 3, 1], &[Activation::Tanh, Activation::Linear], 5).unwrap();
        let before = net.clone();
        let mut adam = Adam::new(&net, 1e-3);
        let mut tape = GradTape::zeros_like(&net);
        tape.params[10] = f64::NAN;
        let err = adam.step(&mut net, &tape).unwrap_err();
        assert!(matches!(err, NnError::NonFinite { layer: 1, .. }));
        assert_eq!(net, before);
        assert_eq!(adam.step_count(), 0);
    }
}
