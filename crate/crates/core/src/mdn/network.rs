use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::mixture::{to_mixture, MixtureParams, RawOutput};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// Positivity transform applied to the raw sigma outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaActivation {
    /// `softplus(r) + 1e-6`.
    #[default]
    Softplus,
    /// `exp(r) + 1e-6`, the classic formulation; overflows far more easily.
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub num_layers: usize,
    pub num_units: usize,
    pub m_c: usize,
    pub input_dim: usize,
    #[serde(default)]
    pub sigma_activation: SigmaActivation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            num_layers: 8,
            num_units: 256,
            m_c: 8,
            input_dim: 1,
            sigma_activation: SigmaActivation::Softplus,
        }
    }
}

impl Architecture {
    pub fn new(num_layers: usize, num_units: usize, m_c: usize) -> Self {
        Self {
            num_layers,
            num_units,
            m_c,
            ..Self::default()
        }
    }

    pub fn output_dim(&self) -> usize {
        3 * self.m_c
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.num_units == 0 || self.m_c == 0 {
            return Err(Error::Config(format!("layer, unit and component counts must be >= 1: {self:?}")));
        }
        if self.input_dim != 1 {
            return Err(Error::Config(format!("input_dim must be 1, got {}", self.input_dim)));
        }
        Ok(())
    }

    /// `(n_in, n_out)` of each dense layer, trunk first, head last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.num_layers + 1);
        let mut n_in = self.input_dim;
        for _ in 0..self.num_layers {
            shapes.push((n_in, self.num_units));
            n_in = self.num_units;
        }
        shapes.push((n_in, self.output_dim()));
        shapes
    }
}

/// Dense affine layer; `weights` is `n_out × n_in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    /// `out = W x + b`.
    pub(crate) fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.n_in).zip(&self.bias).map(|(row, b)| {
            row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi)
        }));
    }
}

/// Fixed affine map from the head's units to scaled power: component means
/// become `shift + scale·μ` and widths `scale·σ`. Not trained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputScale {
    pub shift: f64,
    pub scale: f64,
}

impl Default for OutputScale {
    fn default() -> Self {
        Self { shift: 0.0, scale: 1.0 }
    }
}

impl OutputScale {
    /// Mean and population std of `values`; identity scale when they are
    /// constant or fewer than two.
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.len() < 2 {
            return Self::default();
        }
        let n = v.len() as f64;
        let shift = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - shift).powi(2)).sum::<f64>() / n;
        let scale = if var.is_finite() && var > 0.0 { var.sqrt() } else { 1.0 };
        Self { shift, scale }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shift.is_finite() && self.scale.is_finite() && self.scale > 0.0 {
            Ok(())
        } else {
            Err(Error::NonFinite(format!(
                "output scale needs finite shift and positive scale, got {} / {}",
                self.shift, self.scale
            )))
        }
    }

    /// Head-unit value of scaled target `x`.
    pub(crate) fn to_unit(self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }
}

/// Parameters of the whole network. Gradients and Adam moments share this shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkWeights {
    pub arch: Architecture,
    pub layers: Vec<Dense>,
    #[serde(default)]
    pub output: OutputScale,
}

impl NetworkWeights {
    pub fn zeros(arch: Architecture) -> Self {
        let layers = arch.layer_shapes().into_iter().map(|(i, o)| Dense::zeros(i, o)).collect();
        Self {
            arch,
            layers,
            output: OutputScale::default(),
        }
    }

    pub fn with_output(mut self, output: OutputScale) -> Self {
        self.output = output;
        self
    }

    /// Same shape as `self`, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.arch)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.arch == other.arch
            && self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.n_in == b.n_in && a.n_out == b.n_out)
    }

    /// Checks that layer dimensions chain as the architecture declares and
    /// that every entry is finite.
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        let shapes = self.arch.layer_shapes();
        if shapes.len() != self.layers.len() {
            return Err(Error::Config(format!(
                "architecture declares {} dense layers, found {}",
                shapes.len(),
                self.layers.len()
            )));
        }
        for (k, ((n_in, n_out), layer)) in shapes.iter().zip(&self.layers).enumerate() {
            if layer.n_in != *n_in
                || layer.n_out != *n_out
                || layer.weights.len() != n_in * n_out
                || layer.bias.len() != *n_out
            {
                return Err(Error::Config(format!(
                    "layer {k}: expected {n_out}x{n_in}, found {}x{} with {} weights and {} biases",
                    layer.n_out,
                    layer.n_in,
                    layer.weights.len(),
                    layer.bias.len()
                )));
            }
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("network weights contain non-finite entries".into()));
        }
        self.output.validate()
    }

    /// Activations of every layer for input `x`: `acts[0] = [x]`, then each
    /// hidden layer's post-ReLU output; returns the raw head output.
    pub(crate) fn forward_cached(&self, x: f64, acts: &mut Vec<Vec<f64>>) -> Vec<f64> {
        acts.clear();
        acts.push(vec![x]);
        let (head, trunk) = self.layers.split_last().expect("at least one layer");
        for layer in trunk {
            let mut out = Vec::with_capacity(layer.n_out);
            layer.apply(acts.last().expect("input"), &mut out);
            out.iter_mut().for_each(|v| *v = v.max(0.0));
            acts.push(out);
        }
        let mut z = Vec::with_capacity(head.n_out);
        head.apply(acts.last().expect("input"), &mut z);
        z
    }
}

/// He-style fan-in initialization: trunk weights `N(0, 2/fan_in)`, head
/// weights the same scaled by 0.01, biases zero.
pub fn init_weights(arch: Architecture, seed: u64) -> Result<NetworkWeights> {
    arch.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut w = NetworkWeights::zeros(arch);
    let last = w.layers.len() - 1;
    for (k, layer) in w.layers.iter_mut().enumerate() {
        let mut std = (2.0 / layer.n_in as f64).sqrt();
        if k == last {
            std *= 0.01;
        }
        for v in &mut layer.weights {
            let z: f64 = rng.sample(StandardNormal);
            *v = std * z;
        }
    }
    Ok(w)
}

pub fn forward(w: &NetworkWeights, d_norm: f64) -> Result<RawOutput> {
    let mut acts = Vec::new();
    let z = w.forward_cached(d_norm, &mut acts);
    if !z.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(format!("forward pass at input {d_norm} is not finite")));
    }
    Ok(RawOutput::from_slice(&z, w.arch.m_c))
}

/// Mixture predicted at `d_norm`, in scaled units.
pub fn mixture_at(w: &NetworkWeights, d_norm: f64) -> Result<MixtureParams> {
    let mut mix = to_mixture(&forward(w, d_norm)?, w.arch.sigma_activation);
    let OutputScale { shift, scale } = w.output;
    mix.mus.iter_mut().for_each(|m| *m = shift + scale * *m);
    mix.sigmas.iter_mut().for_each(|s| *s *= scale);
    Ok(mix)
}
