use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One affine layer: `out = W x + b` with `W` stored row-major as `fan_out x fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weights: vec![T::zero(); fan_in * fan_out],
            bias: vec![T::zero(); fan_out],
        }
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> T {
        self.weights[out * self.fan_in + inp]
    }

    fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// All trainable weights and biases of a dense ReLU network.
///
/// Flat index order is layer by layer, weights (row-major) before bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<T> {
    layers: Vec<Layer<T>>,
}

/// Gradients share the parameter layout one-to-one.
pub type GradientSet<T> = ParameterSet<T>;

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 layer sizes (input and output), got {}",
            layer_sizes.len()
        )));
    }
    if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("layer size at position {pos} is zero")));
    }
    Ok(())
}

impl<T: Scalar> ParameterSet<T> {
    /// All-zero parameters for the given layer sizes.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(Self { layers })
    }

    /// Builds from explicit layers, checking that consecutive dimensions chain.
    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a network needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.fan_in == 0 || l.fan_out == 0 {
                return Err(Error::invalid(format!("layer {i} has a zero dimension")));
            }
            if l.weights.len() != l.fan_in * l.fan_out || l.bias.len() != l.fan_out {
                return Err(Error::shape(format!(
                    "layer {i} storage does not match {}x{}",
                    l.fan_out, l.fan_in
                )));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].fan_out != w[1].fan_in {
                return Err(Error::shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    w[0].fan_out,
                    i + 1,
                    w[1].fan_in
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Restores parameters from a flat vector in canonical order.
    pub fn from_flat(layer_sizes: &[usize], flat: &[T]) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes)?;
        if flat.len() != p.total_dim() {
            return Err(Error::shape(format!(
                "layer sizes {layer_sizes:?} need {} parameters, got {}",
                p.total_dim(),
                flat.len()
            )));
        }
        for (dst, &src) in p.iter_mut().zip(flat) {
            *dst = src;
        }
        Ok(p)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].fan_in];
        sizes.extend(self.layers.iter().map(|l| l.fan_out));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }

    pub fn total_dim(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.iter().copied().collect()
    }

    /// Flat-index read. Panics when out of range.
    pub fn get(&self, idx: usize) -> T {
        let (l, off) = self.locate(idx);
        let layer = &self.layers[l];
        if off < layer.weights.len() {
            layer.weights[off]
        } else {
            layer.bias[off - layer.weights.len()]
        }
    }

    /// Flat-index write. Panics when out of range.
    pub fn set(&mut self, idx: usize, v: T) {
        let (l, off) = self.locate(idx);
        let layer = &mut self.layers[l];
        if off < layer.weights.len() {
            layer.weights[off] = v;
        } else {
            let w = layer.weights.len();
            layer.bias[off - w] = v;
        }
    }

    fn locate(&self, mut idx: usize) -> (usize, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            if idx < layer.len() {
                return (l, idx);
            }
            idx -= layer.len();
        }
        panic!("parameter index out of range");
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.fan_in == b.fan_in && a.fan_out == b.fan_out)
    }

    /// Zero-filled set with the same shape.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.fan_in, l.fan_out))
                .collect(),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// He-normal initialization: weights ~ N(0, 2 / fan_in), biases zero.
///
/// Draws come from a ChaCha8 stream seeded with `seed`, so the result is
/// bit-identical across runs and platforms for the same arguments.
pub fn init_params<T: Scalar>(layer_sizes: &[usize], seed: u64) -> Result<ParameterSet<T>> {
    let mut params = ParameterSet::zeros(layer_sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in params.layers_mut() {
        let std = (2.0 / layer.fan_in as f64).sqrt();
        for w in &mut layer.weights {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = T::lit(z * std);
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_dim_matches_dimension_arithmetic() {
        let p: ParameterSet<f64> = init_params(&[4, 8, 3], 7).unwrap();
        assert_eq!(p.total_dim(), 4 * 8 + 8 + 8 * 3 + 3);
        assert_eq!(p.total_dim(), 67);
        assert_eq!(p.layer_sizes(), vec![4, 8, 3]);
        assert!(p.all_finite());
    }

    #[test]
    fn init_is_deterministic() {
        let a: ParameterSet<f64> = init_params(&[2, 2], 0).unwrap();
        let b: ParameterSet<f64> = init_params(&[2, 2], 0).unwrap();
        let bits = |p: &ParameterSet<f64>| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c: ParameterSet<f64> = init_params(&[2, 2], 1).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert!(init_params::<f64>(&[5], 3).is_err());
        assert!(init_params::<f64>(&[], 3).is_err());
        assert!(init_params::<f64>(&[3, 0, 2], 3).is_err());
    }

    #[test]
    fn biases_start_at_zero_and_weights_have_he_scale() {
        let p: ParameterSet<f64> = init_params(&[50, 400], 11).unwrap();
        let layer = &p.layers()[0];
        assert!(layer.bias.iter().all(|&b| b == 0.0));
        let n = layer.weights.len() as f64;
        let mean = layer.weights.iter().sum::<f64>() / n;
        let var = layer.weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 2.0 / 50.0).abs() < 0.004, "var {var}");
    }

    #[test]
    fn flat_roundtrip_and_indexing() {
        let p: ParameterSet<f64> = init_params(&[3, 4, 2], 5).unwrap();
        let flat = p.to_flat();
        let q = ParameterSet::from_flat(&[3, 4, 2], &flat).unwrap();
        assert_eq!(p, q);
        for (i, v) in flat.iter().enumerate() {
            assert_eq!(p.get(i), *v);
        }
        let mut r = q.clone();
        r.set(flat.len() - 1, 9.0);
        assert_eq!(r.layers()[1].bias[1], 9.0);
        assert!(ParameterSet::<f64>::from_flat(&[3, 4, 2], &flat[1..]).is_err());
    }

    #[test]
    fn from_layers_checks_chaining() {
        let bad = vec![Layer::<f64>::zeros(2, 3), Layer::zeros(4, 1)];
        assert!(ParameterSet::from_layers(bad).is_err());
        let ok = vec![Layer::<f64>::zeros(2, 3), Layer::zeros(3, 1)];
        assert_eq!(ParameterSet::from_layers(ok).unwrap().layer_sizes(), vec![2, 3, 1]);
    }
}
