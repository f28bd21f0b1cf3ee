//! Auto-rotating dense layer.
//!
//! A classic unit computes `f(x) = w·x + b`. The auto-rotating unit feeds
//! its activation with
//!
//! ```text
//! g(x) = ρ · (w·x + b),    ρ = L / |f(x_Q)|
//! ```
//!
//! where `x_Q` is a probe point lying outside the admissible input range and
//! `L` is the half-width of the activation's dynamic region. Multiplying the
//! weights and the bias by the same positive scalar rotates the graph of `f`
//! about its zero set, so the unit's decision boundary `{x : f(x) = 0}` and
//! the sign of its output are untouched while the pre-activation at the
//! probe point is pinned to `±L`.
//!
//! `ρ` depends only on the weights, never on the input, so it is computed
//! once per forward call.
//!
//! # Gradients
//!
//! With `u = w·x_Q + b` and `f = w·x + b`, differentiating through `ρ`
//! (the [`RhoMode::Coupled`] default) gives
//!
//! ```text
//! ∂g/∂w_i = ρ (x_i - (f/u) x_Q,i)
//! ∂g/∂b   = ρ (1 - f/u)
//! ∂g/∂x_i = ρ w_i
//! ```
//!
//! [`RhoMode::Detached`] treats `ρ` as a constant and keeps only the first
//! term of each weight/bias derivative. When `|u| < eps` the coefficient is
//! clamped to `L / eps`; the clamp is locally constant, so clamped units use
//! the detached formulas in either mode.

use serde::{Deserialize, Serialize};

use super::dense::{affine_backward, affine_forward, check_bias, check_upstream};
use super::dense::{LayerCache, LayerGrads, RotationCache};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Whether backpropagation follows ρ's dependence on the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoMode {
    #[default]
    Coupled,
    Detached,
}

impl RhoMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RhoMode::Coupled => "coupled",
            RhoMode::Detached => "detached",
        }
    }
}

impl std::str::FromStr for RhoMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "coupled" => Ok(RhoMode::Coupled),
            "detached" => Ok(RhoMode::Detached),
            other => Err(format!("unknown rho mode {other:?} (expected coupled|detached)")),
        }
    }
}

/// Hyperparameters shared by every ARP layer of a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArpHyper {
    /// Pre-activation magnitude pinned at the probe point.
    pub l_cap: f64,
    /// Value of every component of the probe point `x_Q`.
    pub xq_value: f64,
    /// Floor for `|f(x_Q)|`.
    pub eps: f64,
    pub rho_mode: RhoMode,
}

impl Default for ArpHyper {
    fn default() -> Self {
        ArpHyper {
            l_cap: 4.0,
            xq_value: 1.1,
            eps: 1e-7,
            rho_mode: RhoMode::Coupled,
        }
    }
}

/// Per-neuron rotation state derived from the current weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub clamped: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArpDense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    l_cap: f64,
    xq: Vec<f64>,
    eps: f64,
    rho_mode: RhoMode,
    input_bound: f64,
    frozen_rho: Option<Vec<f64>>,
}

impl ArpDense {
    /// Builds a layer, validating the hyperparameters.
    ///
    /// `input_bound` is the largest input magnitude the layer will accept;
    /// every component of `xq` must lie strictly beyond it.
    pub fn new(
        weights: Matrix,
        bias: Vec<f64>,
        xq: Vec<f64>,
        l_cap: f64,
        eps: f64,
        rho_mode: RhoMode,
        input_bound: f64,
    ) -> Result<Self> {
        check_bias(&weights, &bias)?;
        if xq.len() != weights.cols() {
            return Err(Error::Shape {
                op: "arp_probe_point",
                left: weights.shape(),
                right: (xq.len(), 1),
            });
        }
        if !(l_cap > 0.0 && l_cap.is_finite()) {
            return Err(Error::Config(format!("L must be positive, got {l_cap}")));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!("eps must be positive, got {eps}")));
        }
        if input_bound.is_nan() || input_bound < 0.0 {
            return Err(Error::Config(format!(
                "input bound must be non-negative, got {input_bound}"
            )));
        }
        if let Some(q) = xq.iter().find(|q| !(**q > input_bound && q.is_finite())) {
            return Err(Error::Config(format!(
                "probe point component {q} must exceed the input bound {input_bound}"
            )));
        }
        Ok(ArpDense {
            weights,
            bias,
            l_cap,
            xq,
            eps,
            rho_mode,
            input_bound,
            frozen_rho: None,
        })
    }

    /// Builds a layer whose probe point has every component equal to
    /// `hyper.xq_value`.
    pub fn from_hyper(
        weights: Matrix,
        bias: Vec<f64>,
        hyper: &ArpHyper,
        input_bound: f64,
    ) -> Result<Self> {
        let xq = vec![hyper.xq_value; weights.cols()];
        Self::new(
            weights,
            bias,
            xq,
            hyper.l_cap,
            hyper.eps,
            hyper.rho_mode,
            input_bound,
        )
    }

    /// Replaces the computed coefficients with fixed values. The layer then
    /// backpropagates as if ρ were a constant. Used by the finite-difference
    /// oracle for the detached mode and by the ρ≡1 reduction tests.
    #[doc(hidden)]
    pub fn with_frozen_rho(mut self, rho: Vec<f64>) -> Self {
        assert_eq!(rho.len(), self.out_dim(), "one coefficient per neuron");
        self.frozen_rho = Some(rho);
        self
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn l_cap(&self) -> f64 {
        self.l_cap
    }

    pub fn xq(&self) -> &[f64] {
        &self.xq
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn rho_mode(&self) -> RhoMode {
        self.rho_mode
    }

    pub fn set_rho_mode(&mut self, mode: RhoMode) {
        self.rho_mode = mode;
    }

    pub fn input_bound(&self) -> f64 {
        self.input_bound
    }

    /// `u_j = w_j·x_Q + b_j` and `ρ_j = L / max(|u_j|, eps)` for every neuron.
    pub fn rotation_coefficients(&self) -> Rotation {
        let n = self.out_dim();
        let mut rho = Vec::with_capacity(n);
        let mut u = Vec::with_capacity(n);
        let mut clamped = Vec::with_capacity(n);
        for j in 0..n {
            let uj = dot(self.weights.row(j), &self.xq) + self.bias[j];
            let is_clamped = uj.abs() < self.eps;
            rho.push(self.l_cap / uj.abs().max(self.eps));
            u.push(uj);
            clamped.push(is_clamped);
        }
        if let Some(frozen) = &self.frozen_rho {
            rho.clone_from(frozen);
        }
        Rotation { rho, u, clamped }
    }

    /// Rotated pre-activations `z_j = ρ_j (w_j·x + b_j)` for a batch.
    ///
    /// Inputs are expected within `input_bound`; this is not re-checked here
    /// (the probe point itself is a legal argument for diagnostics).
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, LayerCache)> {
        if x.cols() != self.in_dim() {
            return Err(Error::Shape {
                op: "arp_forward",
                left: x.shape(),
                right: self.weights.shape(),
            });
        }
        let Rotation { rho, u, clamped } = self.rotation_coefficients();
        let affine = affine_forward(x, &self.weights, &self.bias)?;
        let z = scale_columns(&affine, &rho);
        let cache = LayerCache {
            input: x.clone(),
            z: z.clone(),
            rotation: Some(RotationCache {
                rho,
                u,
                clamped,
                affine,
            }),
        };
        Ok((z, cache))
    }

    pub fn backward(&self, cache: &LayerCache, dz: &Matrix) -> Result<LayerGrads> {
        check_upstream(cache, dz, self.out_dim())?;
        let rot = cache.rotation.as_ref().ok_or(Error::Shape {
            op: "arp_backward (cache without rotation state)",
            left: cache.z.shape(),
            right: dz.shape(),
        })?;
        if rot.rho.len() != self.out_dim() || rot.affine.shape() != dz.shape() {
            return Err(Error::Shape {
                op: "arp_backward",
                left: rot.affine.shape(),
                right: dz.shape(),
            });
        }

        // Upstream gradient with respect to the unrotated affine value.
        let df = scale_columns(dz, &rot.rho);
        let mut grads = affine_backward(&cache.input, &self.weights, &df)?;

        if self.rho_mode == RhoMode::Coupled && self.frozen_rho.is_none() {
            // c_j = Σ_s dF_sj f_sj / u_j; ∂ρ/∂w contributes -c_j x_Q and -c_j.
            let mut coupling = vec![0.0; self.out_dim()];
            for s in 0..df.rows() {
                for ((c, g), f) in coupling.iter_mut().zip(df.row(s)).zip(rot.affine.row(s)) {
                    *c += g * f;
                }
            }
            for (j, c) in coupling.iter_mut().enumerate() {
                if rot.clamped[j] {
                    continue;
                }
                *c /= rot.u[j];
                for (w, q) in grads.dw.row_mut(j).iter_mut().zip(&self.xq) {
                    *w -= *c * q;
                }
                grads.db[j] -= *c;
            }
        }
        Ok(grads)
    }
}

fn scale_columns(m: &Matrix, scale: &[f64]) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        for (v, s) in out.row_mut(r).iter_mut().zip(scale) {
            *v *= s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::dense::ClassicDense;

    fn layer(w: Vec<f64>, b: f64, mode: RhoMode) -> ArpDense {
        let n = w.len();
        ArpDense::new(
            Matrix::from_vec(1, n, w).unwrap(),
            vec![b],
            vec![1.1; n],
            4.0,
            1e-7,
            mode,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn coefficient_from_defining_formula() {
        let r = layer(vec![1.0, 0.0], 0.0, RhoMode::Coupled).rotation_coefficients();
        assert!((r.u[0] - 1.1).abs() < 1e-15);
        assert!((r.rho[0] - 4.0 / 1.1).abs() < 1e-12);
        assert!((r.rho[0] - 3.636363).abs() < 1e-6);
        assert!(!r.clamped[0]);
    }

    #[test]
    fn degenerate_probe_value_is_clamped() {
        let r = layer(vec![1.0, -1.0], 0.0, RhoMode::Coupled).rotation_coefficients();
        assert_eq!(r.u[0], 0.0);
        assert!((r.rho[0] - 4e7).abs() < 1e-6);
        assert!(r.clamped[0]);
    }

    #[test]
    fn worked_forward_example() {
        let l = layer(vec![1.0, -1.0], 0.5, RhoMode::Coupled);
        let x = Matrix::from_rows(&[vec![0.5, 0.25]]).unwrap();
        let (z, cache) = l.forward(&x).unwrap();
        let rot = cache.rotation.unwrap();
        assert!((rot.u[0] - 0.5).abs() < 1e-15);
        assert!((rot.rho[0] - 8.0).abs() < 1e-12);
        assert!((rot.affine.get(0, 0) - 0.75).abs() < 1e-15);
        assert!((z.get(0, 0) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn probe_point_maps_to_l() {
        for (w, b) in [(vec![0.3, -0.7, 0.2], 0.1), (vec![-2.0, 0.5, 0.1], -0.3)] {
            let l = layer(w, b, RhoMode::Coupled);
            let xq = Matrix::from_vec(1, 3, l.xq().to_vec()).unwrap();
            let (z, _) = l.forward(&xq).unwrap();
            assert!((z.get(0, 0).abs() - 4.0).abs() < 1e-12, "{}", z.get(0, 0));
        }
    }

    #[test]
    fn coupled_gradient_worked_example() {
        let l = layer(vec![1.0, -1.0], 0.5, RhoMode::Coupled);
        let x = Matrix::from_rows(&[vec![0.5, 0.25]]).unwrap();
        let (_, cache) = l.forward(&x).unwrap();
        let g = l.backward(&cache, &Matrix::from_rows(&[vec![1.0]]).unwrap()).unwrap();
        assert!((g.dw.get(0, 0) + 9.2).abs() < 1e-12, "{}", g.dw.get(0, 0));

        // Central differences on w₁ with ρ recomputed.
        let h = 1e-6;
        let eval = |w1: f64| {
            let l = layer(vec![w1, -1.0], 0.5, RhoMode::Coupled);
            l.forward(&x).unwrap().0.get(0, 0)
        };
        let fd = (eval(1.0 + h) - eval(1.0 - h)) / (2.0 * h);
        assert!((fd + 9.2).abs() < 1e-6, "{fd}");
    }

    #[test]
    fn detached_gradient_worked_example() {
        let l = layer(vec![1.0, -1.0], 0.5, RhoMode::Detached);
        let x = Matrix::from_rows(&[vec![0.5, 0.25]]).unwrap();
        let (_, cache) = l.forward(&x).unwrap();
        let g = l.backward(&cache, &Matrix::from_rows(&[vec![1.0]]).unwrap()).unwrap();
        assert!((g.dw.get(0, 0) - 4.0).abs() < 1e-12);
        assert!((g.db[0] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn clamped_units_use_detached_formula() {
        let coupled = layer(vec![1.0, -1.0], 0.0, RhoMode::Coupled);
        let detached = layer(vec![1.0, -1.0], 0.0, RhoMode::Detached);
        let x = Matrix::from_rows(&[vec![0.5, 0.25], vec![-0.1, 0.9]]).unwrap();
        let dz = Matrix::from_rows(&[vec![0.3], vec![-1.2]]).unwrap();
        let (_, cc) = coupled.forward(&x).unwrap();
        let (_, cd) = detached.forward(&x).unwrap();
        let gc = coupled.backward(&cc, &dz).unwrap();
        let gd = detached.backward(&cd, &dz).unwrap();
        assert_eq!(gc.dw, gd.dw);
        assert_eq!(gc.db, gd.db);
        assert!(gc.dw.is_finite());
    }

    #[test]
    fn positive_rescaling_leaves_output_unchanged() {
        let x = Matrix::from_rows(&[vec![0.2, -0.9, 0.4], vec![1.0, 0.0, -1.0]]).unwrap();
        let base = layer(vec![0.3, -0.7, 0.2], 0.1, RhoMode::Coupled);
        let scaled = layer(vec![0.6, -1.4, 0.4], 0.2, RhoMode::Coupled);
        let (z0, _) = base.forward(&x).unwrap();
        let (z1, _) = scaled.forward(&x).unwrap();
        for (a, b) in z0.as_slice().iter().zip(z1.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn unit_rho_reduces_to_classic_bit_for_bit() {
        let w = Matrix::from_rows(&[vec![0.3, -0.7], vec![1.5, 0.25], vec![-0.2, 0.0]]).unwrap();
        let b = vec![0.1, -0.4, 0.05];
        let arp = ArpDense::new(w.clone(), b.clone(), vec![1.1; 2], 4.0, 1e-7, RhoMode::Coupled, 1.0)
            .unwrap()
            .with_frozen_rho(vec![1.0; 3]);
        let classic = ClassicDense::new(w, b).unwrap();
        let x = Matrix::from_rows(&[vec![0.5, 0.25], vec![-1.0, 0.75]]).unwrap();
        let dz = Matrix::from_rows(&[vec![0.1, -0.3, 2.0], vec![1.0, 0.5, -0.5]]).unwrap();
        let (za, ca) = arp.forward(&x).unwrap();
        let (zc, cc) = classic.forward(&x).unwrap();
        assert_eq!(za, zc);
        let ga = arp.backward(&ca, &dz).unwrap();
        let gc = classic.backward(&cc, &dz).unwrap();
        assert_eq!(ga.dw, gc.dw);
        assert_eq!(ga.db, gc.db);
        assert_eq!(ga.dx, gc.dx);
    }

    #[test]
    fn constructor_validates_hyperparameters() {
        let w = Matrix::zeros(1, 2);
        let mk = |xq: Vec<f64>, l: f64, eps: f64| {
            ArpDense::new(w.clone(), vec![0.0], xq, l, eps, RhoMode::Coupled, 1.0)
        };
        assert!(mk(vec![1.1, 1.1], 4.0, 1e-7).is_ok());
        assert!(mk(vec![1.0, 1.1], 4.0, 1e-7).is_err());
        assert!(mk(vec![1.1], 4.0, 1e-7).is_err());
        assert!(mk(vec![1.1, 1.1], 0.0, 1e-7).is_err());
        assert!(mk(vec![1.1, 1.1], 4.0, 0.0).is_err());
        assert!(mk(vec![1.1, f64::NAN], 4.0, 1e-7).is_err());
    }

    #[test]
    fn backward_needs_rotation_state() {
        let l = layer(vec![1.0, 0.0], 0.0, RhoMode::Coupled);
        let classic = ClassicDense::new(l.weights.clone(), l.bias.clone()).unwrap();
        let x = Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let (_, cache) = classic.forward(&x).unwrap();
        assert!(l.backward(&cache, &Matrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn rho_mode_parses() {
        assert_eq!("coupled".parse::<RhoMode>().unwrap(), RhoMode::Coupled);
        assert_eq!("detached".parse::<RhoMode>().unwrap(), RhoMode::Detached);
        assert!("both".parse::<RhoMode>().is_err());
    }
}
