//! Mean softmax cross-entropy of a network, evaluated in double-double
//! precision from the definitions of each layer.
//!
//! In `f64` the central difference of a loss of order 1 at `h = 1e-6` has an
//! absolute resolution near `1e-10`, which is coarser than many entries of a
//! deep sigmoid network's gradient. Evaluating the loss with ~32 digits
//! removes that floor. Perturbing one parameter only changes one neuron of
//! one layer, so the cached values of the layers below it are reused.

use super::dd::Dd;
use crate::layers::{Layer, NetworkModel};
use crate::matrix::Matrix;

struct Rotation {
    xq: Vec<f64>,
    l_cap: f64,
    eps: f64,
    /// Coefficients held constant (detached oracle).
    frozen: Option<Vec<f64>>,
}

struct RefLayer {
    weights: Matrix,
    bias: Vec<f64>,
    rotation: Option<Rotation>,
}

impl RefLayer {
    fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    fn rho(&self, j: usize, u: Dd) -> Dd {
        let r = self.rotation.as_ref().expect("auto-rotating layer");
        if let Some(f) = &r.frozen {
            return Dd::from(f[j]);
        }
        Dd::from(r.l_cap) / Dd::from(r.eps).max_of(u.abs())
    }

    /// `f = W x + b` for a batch stored row-major.
    fn affine(&self, input: &[Dd], batch: usize) -> Vec<Dd> {
        let (n_in, n_out) = (self.in_dim(), self.out_dim());
        let mut out = Vec::with_capacity(batch * n_out);
        for s in 0..batch {
            let x = &input[s * n_in..(s + 1) * n_in];
            for j in 0..n_out {
                let mut acc = Dd::from(self.bias[j]);
                for (w, xi) in self.weights.row(j).iter().zip(x) {
                    acc = acc + Dd::from(*w) * *xi;
                }
                out.push(acc);
            }
        }
        out
    }

    /// `u = W x_Q + b`, one value per neuron.
    fn probe_values(&self) -> Vec<Dd> {
        let Some(r) = &self.rotation else {
            return Vec::new();
        };
        (0..self.out_dim())
            .map(|j| {
                let mut acc = Dd::from(self.bias[j]);
                for (w, q) in self.weights.row(j).iter().zip(&r.xq) {
                    acc = acc + Dd::mul_f64(*w, *q);
                }
                acc
            })
            .collect()
    }

    /// Pre-activations from affine values and per-neuron coefficients.
    fn rotate(&self, affine: &[Dd], rho: &[Dd]) -> Vec<Dd> {
        if self.rotation.is_none() {
            return affine.to_vec();
        }
        let n_out = self.out_dim();
        affine
            .iter()
            .enumerate()
            .map(|(k, f)| rho[k % n_out] * *f)
            .collect()
    }
}

impl Dd {
    fn max_of(self, other: Dd) -> Dd {
        if other > self {
            other
        } else {
            self
        }
    }
}

fn sigmoid(z: Dd) -> Dd {
    if z.hi >= 0.0 {
        Dd::ONE / (Dd::ONE + (-z).exp())
    } else {
        let e = z.exp();
        e / (Dd::ONE + e)
    }
}

pub struct ReferenceLoss {
    layers: Vec<RefLayer>,
    labels: Vec<u8>,
    batch: usize,
    /// Input of every layer at the unperturbed parameters.
    inputs: Vec<Vec<Dd>>,
    affine: Vec<Vec<Dd>>,
    probe: Vec<Vec<Dd>>,
    rho: Vec<Vec<Dd>>,
}

impl ReferenceLoss {
    /// `freeze_rho` holds every ARP coefficient at its current value, which
    /// is the function whose gradient the detached mode computes.
    pub fn new(net: &NetworkModel, x: &Matrix, labels: &[u8], freeze_rho: bool) -> Self {
        let layers: Vec<RefLayer> = net
            .layers()
            .iter()
            .map(|layer| RefLayer {
                weights: layer.weights().clone(),
                bias: layer.bias().to_vec(),
                rotation: match layer {
                    Layer::Classic(_) => None,
                    Layer::Arp(l) => Some(Rotation {
                        xq: l.xq().to_vec(),
                        l_cap: l.l_cap(),
                        eps: l.eps(),
                        frozen: freeze_rho.then(|| l.rotation_coefficients().rho),
                    }),
                },
            })
            .collect();
        let batch = x.rows();
        let mut inputs = Vec::with_capacity(layers.len());
        let mut affine = Vec::with_capacity(layers.len());
        let mut probe = Vec::with_capacity(layers.len());
        let mut rho = Vec::with_capacity(layers.len());
        let mut current: Vec<Dd> = x.as_slice().iter().map(|&v| Dd::from(v)).collect();
        for layer in &layers {
            let f = layer.affine(&current, batch);
            let u = layer.probe_values();
            let r: Vec<Dd> = u.iter().enumerate().map(|(j, &uj)| layer.rho(j, uj)).collect();
            let z = layer.rotate(&f, &r);
            inputs.push(current);
            current = z.into_iter().map(sigmoid).collect();
            affine.push(f);
            probe.push(u);
            rho.push(r);
        }
        ReferenceLoss {
            layers,
            labels: labels.to_vec(),
            batch,
            inputs,
            affine,
            probe,
            rho,
        }
    }

    /// Loss with parameter `index` of tensor `tensor` (ordered
    /// `[W₁, b₁, W₂, b₂, …]`, weights row-major) shifted by `delta`.
    pub fn shifted_loss(&self, tensor: usize, index: usize, delta: Dd) -> Dd {
        let k = tensor / 2;
        let is_bias = tensor % 2 == 1;
        let layer = &self.layers[k];
        let (n_in, n_out) = (layer.in_dim(), layer.out_dim());
        let (j, i) = if is_bias { (index, 0) } else { (index / n_in, index % n_in) };

        let mut f = self.affine[k].clone();
        for s in 0..self.batch {
            let dx = if is_bias { delta } else { delta * self.inputs[k][s * n_in + i] };
            f[s * n_out + j] = f[s * n_out + j] + dx;
        }
        let mut rho = self.rho[k].clone();
        if let Some(r) = &layer.rotation {
            let du = if is_bias { delta } else { delta * Dd::from(r.xq[i]) };
            rho[j] = layer.rho(j, self.probe[k][j] + du);
        }
        let mut z = layer.rotate(&f, &rho);
        for (next, rho) in self.layers[k + 1..].iter().zip(&self.rho[k + 1..]) {
            let a: Vec<Dd> = z.into_iter().map(sigmoid).collect();
            z = next.rotate(&next.affine(&a, self.batch), rho);
        }
        self.cross_entropy(&z)
    }

    pub fn loss(&self) -> Dd {
        self.shifted_loss(0, 0, Dd::ZERO)
    }

    fn cross_entropy(&self, logits: &[Dd]) -> Dd {
        let classes = self.layers.last().expect("at least one layer").out_dim();
        let mut total = Dd::ZERO;
        for (s, &y) in self.labels.iter().enumerate() {
            let row = &logits[s * classes..(s + 1) * classes];
            let max = row.iter().copied().fold(row[0], Dd::max_of);
            let mut sum = Dd::ZERO;
            for &v in row {
                sum = sum + (v - max).exp();
            }
            total = total + sum.ln() - (row[y as usize] - max);
        }
        total / Dd::from(self.batch as f64)
    }
}
