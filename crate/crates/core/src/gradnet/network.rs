//! Forward pass and reverse-mode gradients for the dense ReLU network.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::params::{GradientSet, Layer, ParameterSet};

/// Outputs of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass<T> {
    pub logits: Matrix<T>,
    /// Activation of the last hidden layer. For a single-layer network this
    /// is the input batch itself.
    pub penultimate: Matrix<T>,
}

/// A scalar function of the logits together with its gradient.
pub trait LogitLoss<T: Scalar> {
    /// Returns the loss and `d loss / d logits` (same shape as `logits`).
    fn value_and_grad(&self, logits: &Matrix<T>) -> Result<(T, Matrix<T>)>;
}

impl<T, F> LogitLoss<T> for F
where
    T: Scalar,
    F: Fn(&Matrix<T>) -> Result<(T, Matrix<T>)>,
{
    fn value_and_grad(&self, logits: &Matrix<T>) -> Result<(T, Matrix<T>)> {
        self(logits)
    }
}

fn affine<T: Scalar>(layer: &Layer<T>, input: &Matrix<T>, relu: bool) -> Matrix<T> {
    let n = input.rows();
    let mut out = Matrix::zeros(n, layer.fan_out);
    for r in 0..n {
        let x = input.row(r);
        let y = out.row_mut(r);
        for (o, yo) in y.iter_mut().enumerate() {
            let w = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
            let mut acc = layer.bias[o];
            for (wi, xi) in w.iter().zip(x) {
                acc += *wi * *xi;
            }
            *yo = if relu && acc < T::zero() { T::zero() } else { acc };
        }
    }
    out
}

fn check_input<T: Scalar>(params: &ParameterSet<T>, batch: &Matrix<T>) -> Result<()> {
    if batch.cols() != params.input_dim() {
        return Err(Error::shape(format!(
            "batch has {} features but the network expects {}",
            batch.cols(),
            params.input_dim()
        )));
    }
    Ok(())
}

/// Every layer's output, input first. Hidden entries are post-ReLU.
fn activations<T: Scalar>(params: &ParameterSet<T>, batch: &Matrix<T>) -> Vec<Matrix<T>> {
    let layers = params.layers();
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(batch.clone());
    for (i, layer) in layers.iter().enumerate() {
        let last = i + 1 == layers.len();
        let next = affine(layer, &acts[i], !last);
        acts.push(next);
    }
    acts
}

/// Hidden layers apply ReLU, the final layer is affine.
pub fn forward<T: Scalar>(params: &ParameterSet<T>, batch: &Matrix<T>) -> Result<ForwardPass<T>> {
    check_input(params, batch)?;
    let mut acts = activations(params, batch);
    let logits = acts.pop().expect("at least one layer");
    let penultimate = acts.pop().expect("input activation");
    Ok(ForwardPass { logits, penultimate })
}

/// Logits only.
pub fn predict<T: Scalar>(params: &ParameterSet<T>, batch: &Matrix<T>) -> Result<Matrix<T>> {
    forward(params, batch).map(|f| f.logits)
}

/// Backpropagates `d loss / d logits` through the network.
fn backward<T: Scalar>(
    params: &ParameterSet<T>,
    acts: &[Matrix<T>],
    logit_grad: Matrix<T>,
) -> GradientSet<T> {
    let mut grads = params.zeros_like();
    let layers = params.layers();
    let mut delta = logit_grad;
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let input = &acts[l];
        let g = &mut grads.layers_mut()[l];
        for r in 0..delta.rows() {
            let d = delta.row(r);
            let x = input.row(r);
            for (o, &dout) in d.iter().enumerate() {
                g.bias[o] += dout;
                let gw = &mut g.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                for (gwi, xi) in gw.iter_mut().zip(x) {
                    *gwi += dout * *xi;
                }
            }
        }
        if l == 0 {
            break;
        }
        let mut prev = Matrix::zeros(delta.rows(), layer.fan_in);
        for r in 0..delta.rows() {
            let d = delta.row(r);
            let p = prev.row_mut(r);
            for (o, &dout) in d.iter().enumerate() {
                let w = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                for (pi, wi) in p.iter_mut().zip(w) {
                    *pi += dout * *wi;
                }
            }
            // ReLU mask from the stored post-activation.
            for (pi, ai) in p.iter_mut().zip(input.row(r)) {
                if *ai <= T::zero() {
                    *pi = T::zero();
                }
            }
        }
        delta = prev;
    }
    grads
}

/// Loss and reverse-mode gradient of `loss(forward(params, batch).logits)`.
///
/// Fails with [`Error::NonFinite`] naming the stage (`forward`, `loss`,
/// `backward`) that first produced a non-finite value.
pub fn grad_of_loss<T: Scalar, L: LogitLoss<T> + ?Sized>(
    params: &ParameterSet<T>,
    loss: &L,
    batch: &Matrix<T>,
) -> Result<(T, GradientSet<T>)> {
    check_input(params, batch)?;
    let acts = activations(params, batch);
    let logits = acts.last().expect("logits");
    if !logits.all_finite() {
        return Err(Error::non_finite("forward"));
    }
    let (value, logit_grad) = loss.value_and_grad(logits)?;
    if logit_grad.rows() != logits.rows() || logit_grad.cols() != logits.cols() {
        return Err(Error::shape(format!(
            "loss gradient is {}x{}, logits are {}x{}",
            logit_grad.rows(),
            logit_grad.cols(),
            logits.rows(),
            logits.cols()
        )));
    }
    if !value.is_finite() || !logit_grad.all_finite() {
        return Err(Error::non_finite("loss"));
    }
    let grads = backward(params, &acts, logit_grad);
    if !grads.all_finite() {
        return Err(Error::non_finite("backward"));
    }
    Ok((value, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradnet::init_params;

    fn sum_logits(logits: &Matrix<f64>) -> Result<(f64, Matrix<f64>)> {
        let v = logits.as_slice().iter().sum();
        let mut g = Matrix::zeros(logits.rows(), logits.cols());
        g.as_mut_slice().iter_mut().for_each(|x| *x = 1.0);
        Ok((v, g))
    }

    fn sample_batch() -> Matrix<f64> {
        Matrix::from_rows(&[[0.5, -1.0, 2.0], [1.5, 0.25, -0.75]]).unwrap()
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let p = ParameterSet::<f64>::zeros(&[3, 5, 4]).unwrap();
        let f = forward(&p, &sample_batch()).unwrap();
        assert!(f.logits.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!((f.logits.rows(), f.logits.cols()), (2, 4));
        assert_eq!((f.penultimate.rows(), f.penultimate.cols()), (2, 5));
    }

    #[test]
    fn single_layer_on_basis_vector_reads_weight_column() {
        let mut p = ParameterSet::<f64>::zeros(&[3, 2]).unwrap();
        let l = &mut p.layers_mut()[0];
        l.weights.copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        l.bias.copy_from_slice(&[0.5, -0.5]);
        let x = Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        let f = forward(&p, &x).unwrap();
        assert_eq!(f.logits.row(0), &[1.5, -0.5]);
    }

    #[test]
    fn forward_is_deterministic_and_hidden_is_nonnegative() {
        let p: ParameterSet<f64> = init_params(&[3, 16, 16, 4], 9).unwrap();
        let a = forward(&p, &sample_batch()).unwrap();
        let b = forward(&p, &sample_batch()).unwrap();
        assert_eq!(a, b);
        assert!(a.penultimate.as_slice().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p: ParameterSet<f64> = init_params(&[2, 4], 1).unwrap();
        assert!(matches!(forward(&p, &sample_batch()), Err(Error::Shape(_))));
    }

    #[test]
    fn sum_of_logits_linear_gradient_closed_form() {
        let p: ParameterSet<f64> = init_params(&[3, 2], 4).unwrap();
        let x = sample_batch();
        let (_, g) = grad_of_loss(&p, &sum_logits, &x).unwrap();
        let layer = &g.layers()[0];
        for o in 0..2 {
            for i in 0..3 {
                let col_sum: f64 = x.iter_rows().map(|r| r[i]).sum();
                assert!((layer.weight(o, i) - col_sum).abs() < 1e-14);
            }
            assert_eq!(layer.bias[o], 2.0);
        }
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let p: ParameterSet<f64> = init_params(&[3, 8, 2], 4).unwrap();
        let constant = |l: &Matrix<f64>| Ok((3.0, Matrix::zeros(l.rows(), l.cols())));
        let (v, g) = grad_of_loss(&p, &constant, &sample_batch()).unwrap();
        assert_eq!(v, 3.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn non_finite_loss_reports_stage() {
        let p: ParameterSet<f64> = init_params(&[3, 2], 4).unwrap();
        let bad = |l: &Matrix<f64>| Ok((f64::NAN, Matrix::zeros(l.rows(), l.cols())));
        match grad_of_loss(&p, &bad, &sample_batch()) {
            Err(Error::NonFinite { stage }) => assert_eq!(stage, "loss"),
            other => panic!("unexpected {other:?}"),
        }
        let mut q = p.clone();
        q.set(0, f64::INFINITY);
        match grad_of_loss(&q, &sum_logits, &sample_batch()) {
            Err(Error::NonFinite { stage }) => assert_eq!(stage, "forward"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
