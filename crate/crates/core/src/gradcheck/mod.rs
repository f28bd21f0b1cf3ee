//! Central finite-difference checks for every hand-derived backward pass.
//!
//! Each component is checked on randomly drawn instances: the analytic
//! gradient from the layer's `backward` is compared with
//! `(J(p + h) - J(p - h)) / 2h` where `J` is evaluated with forward passes
//! only. For the coupled ARP mode the forward pass recomputes ρ from the
//! perturbed weights, so the oracle sees ρ's weight dependence; for the
//! detached mode ρ is frozen at its unperturbed value.
//!
//! The composed-network check evaluates `J` in double-double arithmetic
//! (see [`reference`]): in `f64` the difference quotient of a loss near 2.3
//! cannot resolve gradient entries much below `1e-9`, and deep sigmoid
//! networks have many of those.
//!
//! The error of one coordinate is `|a - n| / max(|a|, |n|, ABS_FLOOR)`:
//! relative for gradients of ordinary size, absolute for near-zero ones.

pub mod dd;
pub mod reference;

use serde::Serialize;

use crate::error::Result;
use dd::Dd;
use reference::ReferenceLoss;
use crate::layers::{
    build_network, sigmoid_backward, sigmoid_forward, softmax_xent, ArpDense, ArpHyper,
    ClassicDense, LayerKind, NetworkModel, RhoMode,
};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

/// Pass threshold on the worst coordinate error.
pub const TOLERANCE: f64 = 1e-5;
/// Base step; the actual step is `STEP * max(1, |p|)`.
pub const STEP: f64 = 1e-6;
/// Denominator floor of the error measure.
pub const ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradcheckConfig {
    pub seed: u64,
    /// Random instances per component.
    pub instances: usize,
    /// ARP modes to check; classic, sigmoid and softmax are always checked.
    pub modes: Vec<RhoMode>,
    pub network_arch: String,
    pub network_batch: usize,
    /// Upper bound on checked coordinates per weight matrix of the network
    /// (sampled without replacement); biases are always checked in full.
    pub max_network_coords: usize,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            seed: 0,
            instances: 20,
            modes: vec![RhoMode::Coupled, RhoMode::Detached],
            network_arch: "784-20-20-10".into(),
            network_batch: 4,
            max_network_coords: 256,
            tolerance: TOLERANCE,
        }
    }
}

/// The coordinate with the largest error in a component.
#[derive(Debug, Clone, Serialize)]
pub struct WorstCoordinate {
    pub instance: usize,
    pub tensor: String,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentReport {
    pub component: String,
    pub instances: usize,
    pub coordinates: usize,
    pub worst: Option<WorstCoordinate>,
}

impl ComponentReport {
    fn new(component: impl Into<String>) -> Self {
        ComponentReport {
            component: component.into(),
            instances: 0,
            coordinates: 0,
            worst: None,
        }
    }

    pub fn worst_error(&self) -> f64 {
        self.worst.as_ref().map_or(0.0, |w| w.error)
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        instance: usize,
        tensor: &str,
        row: usize,
        col: usize,
        analytic: f64,
        numeric: f64,
    ) {
        let error = coordinate_error(analytic, numeric);
        self.coordinates += 1;
        // NaN errors must surface as failures.
        if self.worst.as_ref().is_none_or(|w| error.is_nan() || error > w.error) {
            self.worst = Some(WorstCoordinate {
                instance,
                tensor: tensor.to_string(),
                row,
                col,
                analytic,
                numeric,
                error,
            });
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub components: Vec<ComponentReport>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.worst_error() < self.tolerance)
    }

    pub fn worst_error(&self) -> f64 {
        self.components
            .iter()
            .map(ComponentReport::worst_error)
            .fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ComponentReport> {
        self.components
            .iter()
            .filter(|c| c.worst_error().is_nan() || c.worst_error() >= self.tolerance)
    }
}

pub fn coordinate_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

/// Central difference of `eval` around `p`.
pub fn central_difference(p: f64, mut eval: impl FnMut(f64) -> f64) -> f64 {
    let h = STEP * p.abs().max(1.0);
    (eval(p + h) - eval(p - h)) / (2.0 * h)
}

/// Runs every component check.
pub fn run(config: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut rng = SeededRng::new(config.seed);
    let mut components = vec![check_classic_dense(&mut rng, config.instances)?];
    for &mode in &config.modes {
        components.push(check_arp_dense(&mut rng, config.instances, mode)?);
    }
    components.push(check_sigmoid(&mut rng, config.instances)?);
    components.push(check_softmax_xent(&mut rng, config.instances)?);
    components.push(check_network(&mut rng, config, LayerKind::Classic, RhoMode::Coupled)?);
    for &mode in &config.modes {
        components.push(check_network(&mut rng, config, LayerKind::Arp, mode)?);
    }
    Ok(GradcheckReport {
        tolerance: config.tolerance,
        components,
    })
}

fn random_matrix(rng: &mut SeededRng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.uniform(lo, hi)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches")
}

fn random_dim(rng: &mut SeededRng, lo: usize, hi: usize) -> usize {
    lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize
}

/// `J = Σ R ⊙ Z`, whose gradient with respect to `Z` is `R`.
fn projection(z: &Matrix, r: &Matrix) -> f64 {
    z.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum()
}

/// Compares analytic `dW`, `db`, `dX` of a dense-like layer against
/// differences of `objective(W, b, X)`.
fn compare_dense(
    report: &mut ComponentReport,
    instance: usize,
    weights: &Matrix,
    bias: &[f64],
    x: &Matrix,
    grads: &crate::layers::LayerGrads,
    objective: &dyn Fn(&Matrix, &[f64], &Matrix) -> f64,
) {
    for r in 0..weights.rows() {
        for c in 0..weights.cols() {
            let numeric = central_difference(weights.get(r, c), |v| {
                let mut w = weights.clone();
                w.set(r, c, v);
                objective(&w, bias, x)
            });
            report.record(instance, "W", r, c, grads.dw.get(r, c), numeric);
        }
    }
    for j in 0..bias.len() {
        let numeric = central_difference(bias[j], |v| {
            let mut b = bias.to_vec();
            b[j] = v;
            objective(weights, &b, x)
        });
        report.record(instance, "b", j, 0, grads.db[j], numeric);
    }
    for r in 0..x.rows() {
        for c in 0..x.cols() {
            let numeric = central_difference(x.get(r, c), |v| {
                let mut xp = x.clone();
                xp.set(r, c, v);
                objective(weights, bias, &xp)
            });
            report.record(instance, "X", r, c, grads.dx.get(r, c), numeric);
        }
    }
}

pub fn check_classic_dense(rng: &mut SeededRng, instances: usize) -> Result<ComponentReport> {
    let mut report = ComponentReport::new("classic_dense");
    for instance in 0..instances {
        let (inp, out, batch) = (random_dim(rng, 1, 8), random_dim(rng, 1, 6), random_dim(rng, 1, 5));
        let w = random_matrix(rng, out, inp, -1.0, 1.0);
        let b: Vec<f64> = (0..out).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let x = random_matrix(rng, batch, inp, -1.0, 1.0);
        let r = random_matrix(rng, batch, out, -1.0, 1.0);

        let layer = ClassicDense::new(w.clone(), b.clone())?;
        let (_, cache) = layer.forward(&x)?;
        let grads = layer.backward(&cache, &r)?;
        let objective = |w: &Matrix, b: &[f64], x: &Matrix| {
            let l = ClassicDense::new(w.clone(), b.to_vec()).expect("valid shapes");
            projection(&l.forward(x).expect("valid shapes").0, &r)
        };
        compare_dense(&mut report, instance, &w, &b, &x, &grads, &objective);
        report.instances += 1;
    }
    Ok(report)
}

pub fn check_arp_dense(rng: &mut SeededRng, instances: usize, mode: RhoMode) -> Result<ComponentReport> {
    let mut report = ComponentReport::new(format!("arp_dense[{}]", mode.as_str()));
    let hyper = ArpHyper {
        rho_mode: mode,
        ..ArpHyper::default()
    };
    for instance in 0..instances {
        let (inp, out, batch) = (random_dim(rng, 1, 8), random_dim(rng, 1, 6), random_dim(rng, 1, 5));
        let w = random_matrix(rng, out, inp, -1.0, 1.0);
        let b: Vec<f64> = (0..out).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let x = random_matrix(rng, batch, inp, -1.0, 1.0);
        let r = random_matrix(rng, batch, out, -1.0, 1.0);

        let layer = ArpDense::from_hyper(w.clone(), b.clone(), &hyper, 1.0)?;
        let (_, cache) = layer.forward(&x)?;
        let grads = layer.backward(&cache, &r)?;
        let frozen = layer.rotation_coefficients().rho;
        let objective = |w: &Matrix, b: &[f64], x: &Matrix| {
            let mut l = ArpDense::from_hyper(w.clone(), b.to_vec(), &hyper, 1.0).expect("valid");
            if mode == RhoMode::Detached {
                l = l.with_frozen_rho(frozen.clone());
            }
            projection(&l.forward(x).expect("valid shapes").0, &r)
        };
        compare_dense(&mut report, instance, &w, &b, &x, &grads, &objective);
        report.instances += 1;
    }
    Ok(report)
}

pub fn check_sigmoid(rng: &mut SeededRng, instances: usize) -> Result<ComponentReport> {
    let mut report = ComponentReport::new("sigmoid");
    for instance in 0..instances {
        let (rows, cols) = (random_dim(rng, 1, 5), random_dim(rng, 1, 8));
        let z = random_matrix(rng, rows, cols, -6.0, 6.0);
        let r = random_matrix(rng, rows, cols, -1.0, 1.0);
        let a = sigmoid_forward(&z);
        let dz = sigmoid_backward(&a, &r)?;
        for i in 0..rows {
            for j in 0..cols {
                let numeric = central_difference(z.get(i, j), |v| {
                    let mut zp = z.clone();
                    zp.set(i, j, v);
                    projection(&sigmoid_forward(&zp), &r)
                });
                report.record(instance, "Z", i, j, dz.get(i, j), numeric);
            }
        }
        report.instances += 1;
    }
    Ok(report)
}

pub fn check_softmax_xent(rng: &mut SeededRng, instances: usize) -> Result<ComponentReport> {
    let mut report = ComponentReport::new("softmax_xent");
    for instance in 0..instances {
        let (rows, classes) = (random_dim(rng, 1, 5), random_dim(rng, 2, 10));
        let logits = random_matrix(rng, rows, classes, -3.0, 3.0);
        let labels: Vec<u8> = (0..rows)
            .map(|_| (rng.next_u64() % classes as u64) as u8)
            .collect();
        let (_, grad) = softmax_xent(&logits, &labels)?;
        for i in 0..rows {
            for j in 0..classes {
                let numeric = central_difference(logits.get(i, j), |v| {
                    let mut lp = logits.clone();
                    lp.set(i, j, v);
                    softmax_xent(&lp, &labels).expect("valid labels").0
                });
                report.record(instance, "logits", i, j, grad.get(i, j), numeric);
            }
        }
        report.instances += 1;
    }
    Ok(report)
}

/// Checks the composed network's loss gradient with respect to every
/// parameter tensor.
pub fn check_network(
    rng: &mut SeededRng,
    config: &GradcheckConfig,
    kind: LayerKind,
    mode: RhoMode,
) -> Result<ComponentReport> {
    let name = match kind {
        LayerKind::Classic => format!("network[{}]", config.network_arch),
        LayerKind::Arp => format!("network[{},arp,{}]", config.network_arch, mode.as_str()),
    };
    let mut report = ComponentReport::new(name);
    let hyper = ArpHyper {
        rho_mode: mode,
        ..ArpHyper::default()
    };
    for instance in 0..config.instances {
        let mut init_rng = SeededRng::new(rng.next_u64());
        let mut net = build_network(&config.network_arch, kind, &hyper, &mut init_rng)?;
        // Non-zero biases so the bias paths are exercised away from zero.
        for layer in net.layers_mut() {
            let (_, b) = layer.params_mut();
            for v in b.iter_mut() {
                *v = rng.uniform(-0.1, 0.1);
            }
        }
        let batch = config.network_batch;
        let x = random_matrix(rng, batch, net.input_dim(), 0.0, 1.0);
        let classes = net.classes() as u64;
        let labels: Vec<u8> = (0..batch).map(|_| (rng.next_u64() % classes) as u8).collect();

        let pass = net.batch_pass(&x, &labels)?;
        let oracle = ReferenceLoss::new(&net, &x, &labels, kind == LayerKind::Arp && mode == RhoMode::Detached);

        let lengths = net.param_lengths();
        for (t, &len) in lengths.iter().enumerate() {
            let layer_idx = t / 2;
            let is_bias = t % 2 == 1;
            let g = &pass.grads[layer_idx];
            let analytic: &[f64] = if is_bias { &g.db } else { g.dw.as_slice() };
            let cols = net.layers()[layer_idx].in_dim();
            let coords: Vec<usize> = if is_bias || len <= config.max_network_coords {
                (0..len).collect()
            } else {
                let mut all: Vec<usize> = (0..len).collect();
                rng.shuffle(&mut all);
                all.truncate(config.max_network_coords);
                all
            };
            let tensor = format!("layer{}.{}", layer_idx + 1, if is_bias { "b" } else { "W" });
            for i in coords {
                let h = Dd::from(STEP * param(&net, t, i).abs().max(1.0));
                let numeric = ((oracle.shifted_loss(t, i, h) - oracle.shifted_loss(t, i, -h))
                    / (h + h))
                    .to_f64();
                let (row, col) = if is_bias { (i, 0) } else { (i / cols, i % cols) };
                report.record(instance, &tensor, row, col, analytic[i], numeric);
            }
        }
        report.instances += 1;
    }
    Ok(report)
}

fn param(net: &NetworkModel, tensor: usize, index: usize) -> f64 {
    let layer = &net.layers()[tensor / 2];
    if tensor % 2 == 1 {
        layer.bias()[index]
    } else {
        layer.weights().as_slice()[index]
    }
}
