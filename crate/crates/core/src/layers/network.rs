use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::activation::{sigmoid_backward, sigmoid_forward};
use super::arp::{ArpDense, ArpHyper, RhoMode};
use super::dense::{ClassicDense, LayerCache, LayerGrads};
use super::loss::{argmax_rows, softmax_xent};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{glorot_uniform, SeededRng};

/// Largest input magnitude any layer sees: normalized pixels and sigmoid
/// outputs both live in `[0, 1]`, blob features in `[-1, 1]`.
pub const INPUT_BOUND: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Classic,
    Arp,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Classic => "classic",
            LayerKind::Arp => "arp",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "classic" => Ok(LayerKind::Classic),
            "arp" => Ok(LayerKind::Arp),
            other => Err(format!("unknown layer kind {other:?} (expected classic|arp)")),
        }
    }
}

/// Layer widths, input first and class count last, e.g. `784-50-10`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture(Vec<usize>);

impl Architecture {
    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn input_dim(&self) -> usize {
        self.0[0]
    }

    pub fn classes(&self) -> usize {
        *self.0.last().expect("at least two widths")
    }

    /// Number of weight layers (hidden + output).
    pub fn depth(&self) -> usize {
        self.0.len() - 1
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let arch_err = |reason: String| Error::Arch {
            arch: s.to_string(),
            reason,
        };
        let mut dims = Vec::new();
        for token in s.split('-') {
            let width: usize = token
                .trim()
                .parse()
                .map_err(|_| arch_err(format!("token {token:?} is not a positive integer")))?;
            if width == 0 {
                return Err(arch_err(format!("token {token:?} is not a positive integer")));
            }
            dims.push(width);
        }
        if dims.len() < 2 {
            return Err(arch_err("need at least an input and an output width".into()));
        }
        Ok(Architecture(dims))
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("-"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Classic(ClassicDense),
    Arp(ArpDense),
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Classic(_) => LayerKind::Classic,
            Layer::Arp(_) => LayerKind::Arp,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights().cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights().rows()
    }

    pub fn weights(&self) -> &Matrix {
        match self {
            Layer::Classic(l) => &l.weights,
            Layer::Arp(l) => &l.weights,
        }
    }

    pub fn bias(&self) -> &[f64] {
        match self {
            Layer::Classic(l) => &l.bias,
            Layer::Arp(l) => &l.bias,
        }
    }

    pub fn params_mut(&mut self) -> (&mut Matrix, &mut Vec<f64>) {
        match self {
            Layer::Classic(l) => (&mut l.weights, &mut l.bias),
            Layer::Arp(l) => (&mut l.weights, &mut l.bias),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, LayerCache)> {
        match self {
            Layer::Classic(l) => l.forward(x),
            Layer::Arp(l) => l.forward(x),
        }
    }

    pub fn backward(&self, cache: &LayerCache, dz: &Matrix) -> Result<LayerGrads> {
        match self {
            Layer::Classic(l) => l.backward(cache, dz),
            Layer::Arp(l) => l.backward(cache, dz),
        }
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub layers: Vec<LayerCache>,
    /// Sigmoid outputs of the hidden layers, in order.
    pub activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn logits(&self) -> &Matrix {
        &self.layers.last().expect("network has layers").z
    }

    /// Pre-activations of every layer, input side first.
    pub fn pre_activations(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().map(|c| &c.z)
    }
}

/// Result of one forward/backward pass over a labelled batch.
#[derive(Debug, Clone)]
pub struct BatchPass {
    pub loss: f64,
    pub correct: usize,
    pub cache: ForwardCache,
    pub grads: Vec<LayerGrads>,
}

/// Dense feed-forward classifier: sigmoid after every hidden layer and a
/// classic output layer feeding softmax cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    layers: Vec<Layer>,
}

impl NetworkModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::Config("a network needs at least one layer".into()));
        };
        if last.kind() != LayerKind::Classic {
            return Err(Error::Config("the output layer must be classic".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape {
                    op: "network_chain",
                    left: pair[0].weights().shape(),
                    right: pair[1].weights().shape(),
                });
            }
        }
        Ok(NetworkModel { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn classes(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Switches every ARP layer to the given ρ-gradient mode.
    pub fn set_rho_mode(&mut self, mode: RhoMode) {
        for layer in &mut self.layers {
            if let Layer::Arp(l) = layer {
                l.set_rho_mode(mode);
            }
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardCache> {
        let hidden = self.layers.len() - 1;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(hidden);
        let mut current = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (z, cache) = layer.forward(&current)?;
            caches.push(cache);
            if i < hidden {
                let a = sigmoid_forward(&z);
                activations.push(a.clone());
                current = a;
            }
        }
        Ok(ForwardCache {
            layers: caches,
            activations,
        })
    }

    /// Backpropagates `dLogits` through the network; one gradient set per
    /// layer, input side first.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Matrix) -> Result<Vec<LayerGrads>> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::Shape {
                op: "network_backward",
                left: (self.layers.len(), 0),
                right: (cache.layers.len(), 0),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = dlogits.clone();
        for i in (0..self.layers.len()).rev() {
            let g = self.layers[i].backward(&cache.layers[i], &upstream)?;
            if i > 0 {
                upstream = sigmoid_backward(&cache.activations[i - 1], &g.dx)?;
            }
            grads.push(g);
        }
        grads.reverse();
        Ok(grads)
    }

    /// Forward pass, loss and gradients for one labelled batch.
    pub fn batch_pass(&self, x: &Matrix, labels: &[u8]) -> Result<BatchPass> {
        let cache = self.forward(x)?;
        let (loss, dlogits) = softmax_xent(cache.logits(), labels)?;
        let correct = count_correct(cache.logits(), labels);
        let grads = self.backward(&cache, &dlogits)?;
        Ok(BatchPass {
            loss,
            correct,
            cache,
            grads,
        })
    }

    /// Mean cross-entropy of a batch.
    pub fn loss(&self, x: &Matrix, labels: &[u8]) -> Result<f64> {
        let cache = self.forward(x)?;
        Ok(softmax_xent(cache.logits(), labels)?.0)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(argmax_rows(self.forward(x)?.logits()))
    }

    /// Parameters as flat mutable slices: `[W₁, b₁, W₂, b₂, …]`.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for layer in &mut self.layers {
            let (w, b) = layer.params_mut();
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }

    /// Lengths of the slices returned by [`Self::param_slices_mut`].
    pub fn param_lengths(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights().len(), l.bias().len()])
            .collect()
    }
}

pub(crate) fn count_correct(logits: &Matrix, labels: &[u8]) -> usize {
    argmax_rows(logits)
        .into_iter()
        .zip(labels)
        .filter(|(p, &y)| *p == y as usize)
        .count()
}

/// Builds a network from an architecture string such as
/// `784-50-50-40-30-30-20-10`. Hidden layers use `kind`; the output layer is
/// always classic. Weights are Glorot-uniform and biases zero.
///
/// Initial parameters depend only on `arch` and the state of `rng`, not on
/// `kind`, so a classic and an ARP network built from equally seeded
/// generators start from identical weights.
pub fn build_network(
    arch: &str,
    kind: LayerKind,
    hyper: &ArpHyper,
    rng: &mut SeededRng,
) -> Result<NetworkModel> {
    let arch: Architecture = arch.parse()?;
    build_from_architecture(&arch, kind, hyper, rng)
}

pub fn build_from_architecture(
    arch: &Architecture,
    kind: LayerKind,
    hyper: &ArpHyper,
    rng: &mut SeededRng,
) -> Result<NetworkModel> {
    let dims = arch.dims();
    let depth = arch.depth();
    let mut layers = Vec::with_capacity(depth);
    for (i, pair) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let weights = glorot_uniform(rng, fan_in, fan_out);
        let bias = vec![0.0; fan_out];
        let is_output = i + 1 == depth;
        let layer = match kind {
            LayerKind::Arp if !is_output => {
                Layer::Arp(ArpDense::from_hyper(weights, bias, hyper, INPUT_BOUND)?)
            }
            _ => Layer::Classic(ClassicDense::new(weights, bias)?),
        };
        layers.push(layer);
    }
    NetworkModel::new(layers)
}
