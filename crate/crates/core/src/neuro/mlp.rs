use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Tanh,
    Identity,
}

/// Layer sizes of a fully connected network with tanh hidden units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub sizes: Vec<usize>,
    pub output: OutputActivation,
}

impl MlpSpec {
    pub fn new(sizes: Vec<usize>, output: OutputActivation) -> Result<Self> {
        if sizes.len() < 3 {
            return Err(Error::Config(format!(
                "a network needs input, output and at least one hidden layer, got sizes {sizes:?}"
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::Config(format!("layer sizes must be positive: {sizes:?}")));
        }
        Ok(Self { sizes, output })
    }

    /// Policy network: tanh output so actions live in `[-1, 1]`.
    pub fn policy(input: usize, hidden: &[usize], actions: usize) -> Result<Self> {
        let sizes = std::iter::once(input)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(actions))
            .collect();
        Self::new(sizes, OutputActivation::Tanh)
    }

    /// Scalar-valued critic with identity output.
    pub fn critic(input: usize, hidden: &[usize]) -> Result<Self> {
        let sizes = std::iter::once(input)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        Self::new(sizes, OutputActivation::Identity)
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated sizes")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// `(weight offset, bias offset, fan_in, fan_out)` per layer. Weights are
    /// stored as an `out x in` row-major block followed by the biases.
    fn layout(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut offset = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let entry = (offset, offset + fan_in * fan_out, fan_in, fan_out);
                offset += fan_in * fan_out + fan_out;
                entry
            })
            .collect()
    }
}

/// A network and its flat parameter vector. The flat vector is the genotype.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<f64>,
}

/// Layer activations kept for the backward pass; `activations[0]` is the input.
pub struct ForwardCache {
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("at least the input")
    }
}

impl Mlp {
    pub fn zeros(spec: MlpSpec) -> Self {
        let params = vec![0.0; spec.param_count()];
        Self { spec, params }
    }

    /// Uniform initialisation in `±1/sqrt(fan_in)` for weights and biases.
    pub fn random<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let mut params = vec![0.0; spec.param_count()];
        for (w_off, b_off, fan_in, fan_out) in spec.layout() {
            let limit = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[w_off..b_off + fan_out] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Self { spec, params }
    }

    /// Rebuilds a network from a flat genotype.
    pub fn from_genotype(spec: MlpSpec, genotype: &[f64]) -> Result<Self> {
        check_len(spec.param_count(), genotype.len())?;
        Ok(Self {
            spec,
            params: genotype.to_vec(),
        })
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.params.clone()
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(weights [out, in], bias [out])` views per layer.
    pub fn layers(&self) -> Vec<(ArrayView2<'_, f64>, ArrayView1<'_, f64>)> {
        self.spec
            .layout()
            .into_iter()
            .map(|(w_off, b_off, fan_in, fan_out)| {
                let w = ArrayView2::from_shape((fan_out, fan_in), &self.params[w_off..b_off]).expect("layout");
                let b = ArrayView1::from(&self.params[b_off..b_off + fan_out]);
                (w, b)
            })
            .collect()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Rows of `x` are independent inputs.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_len(self.spec.input_dim(), x.ncols())?;
        let layers = self.layers();
        let last = layers.len() - 1;
        let mut h = x.to_owned();
        for (l, (w, b)) in layers.iter().enumerate() {
            h = h.dot(&w.t()) + b;
            if l < last || self.spec.output == OutputActivation::Tanh {
                h.mapv_inplace(f64::tanh);
            }
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        check_len(self.spec.input_dim(), x.ncols())?;
        let layers = self.layers();
        let last = layers.len() - 1;
        let mut activations = Vec::with_capacity(layers.len() + 1);
        activations.push(x.to_owned());
        for (l, (w, b)) in layers.iter().enumerate() {
            let mut h = activations[l].dot(&w.t()) + b;
            if l < last || self.spec.output == OutputActivation::Tanh {
                h.mapv_inplace(f64::tanh);
            }
            activations.push(h);
        }
        Ok(ForwardCache { activations })
    }

    /// Backpropagates `grad_output` (d loss / d output, one row per input) and
    /// returns the flat parameter gradient and d loss / d input.
    pub fn backward(&self, cache: &ForwardCache, grad_output: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Array2<f64>)> {
        let out = cache.output();
        if grad_output.dim() != out.dim() {
            return Err(Error::Dimension {
                expected: out.len(),
                got: grad_output.len(),
            });
        }
        let layout = self.spec.layout();
        let layers = self.layers();
        let last = layers.len() - 1;
        let mut grads = vec![0.0; self.params.len()];
        let mut g = grad_output.to_owned();
        for l in (0..layers.len()).rev() {
            if l < last || self.spec.output == OutputActivation::Tanh {
                g.zip_mut_with(&cache.activations[l + 1], |gi, a| *gi *= 1.0 - a * a);
            }
            let (w_off, b_off, _, fan_out) = layout[l];
            let dw = g.t().dot(&cache.activations[l]);
            grads[w_off..b_off].iter_mut().zip(dw.iter()).for_each(|(d, v)| *d = *v);
            let db = g.sum_axis(Axis(0));
            grads[b_off..b_off + fan_out].iter_mut().zip(db.iter()).for_each(|(d, v)| *d = *v);
            g = g.dot(&layers[l].0);
        }
        Ok((grads, g))
    }
}
