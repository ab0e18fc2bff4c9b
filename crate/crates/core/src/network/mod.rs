//! The MLP `f(x; θ, z)`, its input-gradient ("dual") forward pass and
//! reverse-mode parameter gradients through that pass.
//!
//! Every hidden layer computes `y' = σ(W y + b)` with a softplus `σ`; the
//! final layer is affine. Alongside the values the forward pass propagates
//! the input Jacobian `∇ₓy' = diag(σ'(W y + b)) W ∇ₓy`, so a single pass
//! yields `(f, ∇ₓf)`. Skip layers see `[y, x ⊕ z] / √2`, which contributes an
//! identity block to the propagated Jacobian.

mod activation;
mod backward;
mod checkpoint;
mod forward;
mod init;

pub use activation::Softplus;
pub use backward::Upstream;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use forward::Tape;
pub use init::{CALIBRATION_SAMPLES, FINAL_WEIGHT_NOISE};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default sharpness of the softplus activation.
pub const DEFAULT_BETA: f64 = 100.0;

/// Shape of the MLP.
///
/// `hidden_dims[i]` is the output width of hidden layer `i`. A skip layer
/// `s` (1 ≤ s < hidden count) consumes `[y_{s-1}, x ⊕ z]`, so its input
/// width is `hidden_dims[s - 1] + input_dim + latent_dim`, which must equal
/// the nominal width `hidden_dims[s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub skip_layers: Vec<usize>,
    pub softplus_beta: f64,
}

impl NetworkSpec {
    /// `depth` hidden layers of `width` units with one skip into the middle
    /// layer; the layer feeding the skip is narrowed to keep widths uniform.
    pub fn uniform(input_dim: usize, latent_dim: usize, width: usize, depth: usize) -> Self {
        let mut hidden_dims = vec![width; depth];
        let mut skip_layers = Vec::new();
        let skip = depth / 2;
        if depth >= 2 && width > input_dim + latent_dim {
            hidden_dims[skip - 1] = width - input_dim - latent_dim;
            skip_layers.push(skip);
        }
        Self {
            input_dim,
            latent_dim,
            hidden_dims,
            skip_layers,
            softplus_beta: DEFAULT_BETA,
        }
    }

    /// 8 × 512, the full-size architecture.
    pub fn full(input_dim: usize, latent_dim: usize) -> Self {
        Self::uniform(input_dim, latent_dim, 512, 8)
    }

    /// 4 × 128, the desk-scale default.
    pub fn reduced(input_dim: usize, latent_dim: usize) -> Self {
        Self::uniform(input_dim, latent_dim, 128, 4)
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.softplus_beta = beta;
        self
    }

    /// Width of `x ⊕ z`.
    pub fn input_width(&self) -> usize {
        self.input_dim + self.latent_dim
    }

    pub fn is_skip(&self, layer: usize) -> bool {
        self.skip_layers.contains(&layer)
    }

    /// `(out, in)` for every affine layer, final layer included.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let n = self.hidden_dims.len();
        (0..=n)
            .map(|i| {
                let fan_in = if i == 0 {
                    self.input_width()
                } else {
                    self.hidden_dims[i - 1] + if self.is_skip(i) { self.input_width() } else { 0 }
                };
                let fan_out = if i < n { self.hidden_dims[i] } else { 1 };
                (fan_out, fan_in)
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(o, i)| o * (i + 1)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return invalid("input dimension must be positive");
        }
        if !(self.softplus_beta > 0.0 && self.softplus_beta.is_finite()) {
            return invalid(format!("softplus beta must be positive, got {}", self.softplus_beta));
        }
        if self.hidden_dims.contains(&0) {
            return invalid("hidden widths must be positive");
        }
        let n = self.hidden_dims.len();
        for &s in &self.skip_layers {
            if s == 0 || s >= n {
                return invalid(format!("skip layer {s} must lie in 1..{n}"));
            }
            if self.hidden_dims[s - 1] + self.input_width() != self.hidden_dims[s] {
                return invalid(format!(
                    "skip layer {s}: preceding width {} + input width {} != declared width {}",
                    self.hidden_dims[s - 1],
                    self.input_width(),
                    self.hidden_dims[s]
                ));
            }
        }
        Ok(())
    }
}

/// One affine map `W y + b`; `weight` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(fan_out: usize, fan_in: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Layer>,
}

/// `(f, ∇ₓf)` at one point, plus `∇_z f` for latent-conditioned networks.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEval {
    pub value: f64,
    pub input_gradient: Vec<f64>,
    pub latent_gradient: Option<Vec<f64>>,
}

impl Network {
    pub fn from_layers(spec: NetworkSpec, layers: Vec<Layer>) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.layer_shapes();
        if shapes.len() != layers.len() {
            return invalid(format!("expected {} layers, got {}", shapes.len(), layers.len()));
        }
        for (i, ((o, n), l)) in shapes.iter().zip(&layers).enumerate() {
            if l.weight.dim() != (*o, *n) || l.bias.len() != *o {
                return invalid(format!("layer {i} shape mismatch, expected {o}x{n}"));
            }
            if l.weight.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return invalid(format!("layer {i} has non-finite parameters"));
            }
        }
        Ok(Self { spec, layers })
    }

    /// All-zero parameters of the right shapes.
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(o, i)| Layer::zeros(o, i))
            .collect();
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn activation(&self) -> Softplus {
        Softplus::new(self.spec.softplus_beta)
    }

    pub(crate) fn check_inputs(&self, points: &[f64], latent: Option<&[f64]>) -> Result<usize> {
        let d = self.spec.input_dim;
        if points.is_empty() || !points.len().is_multiple_of(d) {
            return invalid(format!("points must be a non-empty multiple of dimension {d}"));
        }
        match (latent, self.spec.latent_dim) {
            (None, 0) => {}
            (Some(z), l) if l > 0 && z.len() == l => {}
            (z, l) => {
                return invalid(format!(
                    "latent vector of length {:?} given to a network with latent width {l}",
                    z.map(|z| z.len())
                ))
            }
        }
        Ok(points.len() / d)
    }

    /// Values of `f` at a batch of points (row-major, `input_dim` columns).
    pub fn eval(&self, points: &[f64], latent: Option<&[f64]>) -> Result<Vec<f64>> {
        Ok(self.forward(points, latent, false)?.values().to_vec())
    }

    /// `(f, ∇ₓf)` at a single point.
    pub fn forward_dual(&self, x: &[f64], latent: Option<&[f64]>) -> Result<DualEval> {
        if x.len() != self.spec.input_dim {
            return invalid(format!(
                "point has dimension {}, network expects {}",
                x.len(),
                self.spec.input_dim
            ));
        }
        let tape = self.forward(x, latent, true)?;
        let latent_gradient = if self.spec.latent_dim > 0 {
            let g = self.backward_tape(&tape, &Upstream::value_only(vec![1.0]))?;
            g.latent
        } else {
            None
        };
        Ok(DualEval {
            value: tape.values()[0],
            input_gradient: tape.gradient(0).to_vec(),
            latent_gradient,
        })
    }

    /// `∂/∂θ Σᵢ (w_f,i f(xᵢ) + w_g,i · ∇ₓf(xᵢ))`.
    pub fn backward(&self, points: &[f64], latent: Option<&[f64]>, upstream: &Upstream) -> Result<ParamGradient> {
        let tape = self.forward(points, latent, upstream.gradient.is_some())?;
        self.backward_tape(&tape, upstream)
    }
}

/// Parameter gradient mirroring a [`Network`]'s layer shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub layers: Vec<Layer>,
    pub latent: Option<Vec<f64>>,
}

impl ParamGradient {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.weight.nrows(), l.weight.ncols()))
                .collect(),
            latent: (net.spec.latent_dim > 0).then(|| vec![0.0; net.spec.latent_dim]),
        }
    }

    pub fn add_scaled(&mut self, other: &ParamGradient, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.scaled_add(scale, &b.weight);
            a.bias.scaled_add(scale, &b.bias);
        }
        if let (Some(a), Some(b)) = (self.latent.as_mut(), other.latent.as_ref()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += scale * y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weight *= s;
            l.bias *= s;
        }
        if let Some(z) = self.latent.as_mut() {
            z.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Network parameters in storage order (per layer: weight then bias).
    pub fn network_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.network_values()
            .chain(self.latent.iter().flatten().copied())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Name of the first tensor holding a non-finite entry.
    pub fn first_non_finite(&self) -> Option<String> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.weight.iter().any(|v| !v.is_finite()) {
                return Some(format!("layer {i} weight"));
            }
            if l.bias.iter().any(|v| !v.is_finite()) {
                return Some(format!("layer {i} bias"));
            }
        }
        match &self.latent {
            Some(z) if z.iter().any(|v| !v.is_finite()) => Some("latent".into()),
            _ => None,
        }
    }
}
