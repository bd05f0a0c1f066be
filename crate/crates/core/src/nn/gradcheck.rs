//! Central finite-difference verification of analytic gradients.

use super::{Matrix, Mlp, NnError};

/// Step used by the central difference quotient.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Floor of the relative-error denominator, so that two tiny gradients compare equal.
const DENOM_FLOOR: f64 = 1e-8;

/// A scalar loss on a network output, with its output gradient.
pub trait OutputLoss {
    fn value(&self, output: &Matrix) -> f64;
    fn gradient(&self, output: &Matrix) -> Matrix;
}

/// `L = Σ outputs`.
pub struct SumLoss;

impl OutputLoss for SumLoss {
    fn value(&self, output: &Matrix) -> f64 {
        output.as_slice().iter().sum()
    }

    fn gradient(&self, output: &Matrix) -> Matrix {
        Matrix::from_vec(output.rows(), output.cols(), vec![1.0; output.as_slice().len()])
    }
}

/// `L = Σ c_k * out_k` with fixed coefficients laid out like the output.
pub struct WeightedSumLoss(pub Matrix);

impl OutputLoss for WeightedSumLoss {
    fn value(&self, output: &Matrix) -> f64 {
        output
            .as_slice()
            .iter()
            .zip(self.0.as_slice())
            .map(|(o, c)| o * c)
            .sum()
    }

    fn gradient(&self, _output: &Matrix) -> Matrix {
        self.0.clone()
    }
}

/// `L = Σ (out - target)^2`.
pub struct SquaredError(pub Matrix);

impl OutputLoss for SquaredError {
    fn value(&self, output: &Matrix) -> f64 {
        output
            .as_slice()
            .iter()
            .zip(self.0.as_slice())
            .map(|(o, t)| (o - t) * (o - t))
            .sum()
    }

    fn gradient(&self, output: &Matrix) -> Matrix {
        let g = output
            .as_slice()
            .iter()
            .zip(self.0.as_slice())
            .map(|(o, t)| 2.0 * (o - t))
            .collect();
        Matrix::from_vec(output.rows(), output.cols(), g)
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(DENOM_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Largest [`relative_error`] over paired entries, with the index where it occurs.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> (f64, usize) {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .enumerate()
        .fold((0.0, 0), |(best, at), (i, e)| {
            if e > best || e.is_nan() {
                (e, i)
            } else {
                (best, at)
            }
        })
}

/// Central-difference gradient of `loss` with respect to every parameter of `net`.
pub fn numeric_gradient<F>(net: &Mlp, step: f64, mut loss: F) -> Vec<f64>
where
    F: FnMut(&Mlp) -> f64,
{
    let mut probe = net.clone();
    (0..net.num_params())
        .map(|i| {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + step;
            let plus = loss(&probe);
            probe.params_mut()[i] = orig - step;
            let minus = loss(&probe);
            probe.params_mut()[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_param: usize,
    pub passed: bool,
}

/// Compares backprop against central differences for `loss(net(input))`.
pub fn grad_check(
    net: &Mlp,
    loss: &dyn OutputLoss,
    input: &Matrix,
    tolerance: f64,
) -> Result<GradCheckReport, NnError> {
    let cache = net.forward(input)?;
    let tape = net.backward(&cache, &loss.gradient(cache.output()))?;
    let numeric = numeric_gradient(net, DEFAULT_STEP, |probe| {
        loss.value(&probe.predict(input).expect("shape checked above"))
    });
    let (max_relative_error, worst_param) = max_relative_error(&tape.params, &numeric);
    Ok(GradCheckReport {
        max_relative_error,
        worst_param,
        passed: max_relative_error < tolerance,
    })
}
