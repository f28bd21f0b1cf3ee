//! Algebraic invariants of the auto-rotating layer, as strategies plus
//! checks returning `Err(description)` on violation. Used by the property
//! tests in `arp-core` and by the acceptance suite.

#![allow(dead_code)]

use arp_core::layers::{build_network, ArpDense, ArpHyper, ClassicDense, Layer, LayerKind, RhoMode};
use arp_core::matrix::dot;
use arp_core::{Matrix, SeededRng};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestError, TestRng, TestRunner};

pub const L: f64 = 4.0;
pub const XQ: f64 = 1.1;
pub const EPS: f64 = 1e-7;
pub const SCALE_TOL: f64 = 1e-9;
pub const PIN_TOL: f64 = 1e-9;
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Cases per invariant when run through [`run_all`].
pub const CASES: u32 = 1000;

/// One neuron `(w, b)` and one admissible input `x ∈ [-1, 1]^d`.
#[derive(Debug, Clone)]
pub struct Neuron {
    pub w: Vec<f64>,
    pub b: f64,
    pub x: Vec<f64>,
}

pub fn neuron() -> impl Strategy<Value = Neuron> {
    (1usize..=16)
        .prop_flat_map(|d| {
            (
                prop::collection::vec(-3.0..3.0f64, d),
                -3.0..3.0f64,
                prop::collection::vec(-1.0..=1.0f64, d),
            )
        })
        .prop_map(|(w, b, x)| Neuron { w, b, x })
}

/// A scale factor with magnitude in `[1e-3, 1e3]`, log-uniformly.
pub fn scale(positive: bool) -> impl Strategy<Value = f64> {
    (-3.0..3.0f64).prop_map(move |e| {
        let c = 10f64.powf(e);
        if positive {
            c
        } else {
            -c
        }
    })
}

pub fn arp_unit(w: &[f64], b: f64) -> ArpDense {
    ArpDense::new(
        Matrix::from_vec(1, w.len(), w.to_vec()).unwrap(),
        vec![b],
        vec![XQ; w.len()],
        L,
        EPS,
        RhoMode::Coupled,
        1.0,
    )
    .unwrap()
}

fn classic_unit(w: &[f64], b: f64) -> ClassicDense {
    ClassicDense::new(Matrix::from_vec(1, w.len(), w.to_vec()).unwrap(), vec![b]).unwrap()
}

fn row(x: &[f64]) -> Matrix {
    Matrix::from_vec(1, x.len(), x.to_vec()).unwrap()
}

fn g(layer: &ArpDense, x: &[f64]) -> f64 {
    layer.forward(&row(x)).unwrap().0.get(0, 0)
}

fn f(layer: &ClassicDense, x: &[f64]) -> f64 {
    layer.forward(&row(x)).unwrap().0.get(0, 0)
}

/// `|a - b|` relative to `max(|a|, |b|, 1)`; pre-activations live on the
/// unit scale of the activation, so the floor only matters near zero.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Moves the bias so that `x` lies on the zero set, then requires
/// `|g(x)| ≤ 1e-9`. Also requires `g(x) ≠ 0` when `f(x) ≠ 0`.
pub fn check_boundary(n: &Neuron) -> Result<(), String> {
    let b = -dot(&n.w, &n.x);
    let layer = arp_unit(&n.w, b);
    let rot = layer.rotation_coefficients();
    if rot.u[0].abs() >= 1e-3 {
        let z = g(&layer, &n.x);
        if z.abs() > BOUNDARY_TOL {
            return Err(format!("x on the zero set but g(x) = {z:e} (u = {:e})", rot.u[0]));
        }
    }
    let fx = f(&classic_unit(&n.w, n.b), &n.x);
    let gx = g(&arp_unit(&n.w, n.b), &n.x);
    if (fx == 0.0) != (gx == 0.0) {
        return Err(format!("zero sets differ: f(x) = {fx:e}, g(x) = {gx:e}"));
    }
    Ok(())
}

pub fn check_sign(n: &Neuron) -> Result<(), String> {
    let fx = f(&classic_unit(&n.w, n.b), &n.x);
    let gx = g(&arp_unit(&n.w, n.b), &n.x);
    if fx.signum() != gx.signum() || (fx == 0.0) != (gx == 0.0) {
        return Err(format!("sign(f) != sign(g): f = {fx:e}, g = {gx:e}"));
    }
    Ok(())
}

/// Scaling `(w, b)` by `c > 0` leaves `g` unchanged; `c < 0` negates it.
pub fn check_scale(n: &Neuron, c: f64) -> Result<(), String> {
    let base = arp_unit(&n.w, n.b);
    if base.rotation_coefficients().clamped[0] {
        return Ok(());
    }
    let w: Vec<f64> = n.w.iter().map(|v| v * c).collect();
    let scaled = arp_unit(&w, n.b * c);
    let (g0, g1) = (g(&base, &n.x), g(&scaled, &n.x));
    let expected = if c > 0.0 { g0 } else { -g0 };
    let err = rel_err(g1, expected);
    if err > SCALE_TOL {
        return Err(format!("c = {c}: g = {g0:e}, scaled g = {g1:e}, rel err {err:e}"));
    }
    if c == -1.0 && g1 != -g0 {
        return Err(format!("c = -1 must negate exactly: {g0:e} vs {g1:e}"));
    }
    Ok(())
}

/// `|g(x_Q)| = L` for every neuron whose `|u|` clears the clamp.
pub fn check_pinning(n: &Neuron) -> Result<(), String> {
    let layer = arp_unit(&n.w, n.b);
    let rot = layer.rotation_coefficients();
    let zq = g(&layer, layer.xq());
    if rot.clamped[0] {
        if zq.abs() > L * (1.0 + PIN_TOL) {
            return Err(format!("clamped neuron exceeds L at x_Q: {zq:e}"));
        }
        return Ok(());
    }
    if (zq.abs() - L).abs() > PIN_TOL * L {
        return Err(format!("|g(x_Q)| = {} (u = {:e})", zq.abs(), rot.u[0]));
    }
    Ok(())
}

/// A whole layer with a batch, for the ρ ≡ 1 reduction.
#[derive(Debug, Clone)]
pub struct LayerCase {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub x: Matrix,
    pub dz: Matrix,
}

pub fn layer_case() -> impl Strategy<Value = LayerCase> {
    (1usize..=8, 1usize..=6, 1usize..=5)
        .prop_flat_map(|(d, out, batch)| {
            (
                prop::collection::vec(-3.0..3.0f64, out * d),
                prop::collection::vec(-3.0..3.0f64, out),
                prop::collection::vec(-1.0..=1.0f64, batch * d),
                prop::collection::vec(-2.0..2.0f64, batch * out),
                Just((d, out, batch)),
            )
        })
        .prop_map(|(w, b, x, dz, (d, out, batch))| LayerCase {
            w: Matrix::from_vec(out, d, w).unwrap(),
            b,
            x: Matrix::from_vec(batch, d, x).unwrap(),
            dz: Matrix::from_vec(batch, out, dz).unwrap(),
        })
}

/// With ρ frozen at 1 the auto-rotating layer is bit-identical to the
/// classic layer, forward and backward, in both modes.
pub fn check_unit_rho(c: &LayerCase) -> Result<(), String> {
    let classic = ClassicDense::new(c.w.clone(), c.b.clone()).unwrap();
    let (zc, cc) = classic.forward(&c.x).unwrap();
    let gc = classic.backward(&cc, &c.dz).unwrap();
    for mode in [RhoMode::Coupled, RhoMode::Detached] {
        let arp = ArpDense::new(c.w.clone(), c.b.clone(), vec![XQ; c.w.cols()], L, EPS, mode, 1.0)
            .unwrap()
            .with_frozen_rho(vec![1.0; c.w.rows()]);
        let (za, ca) = arp.forward(&c.x).unwrap();
        if za != zc {
            return Err(format!("{mode:?}: forward differs"));
        }
        let ga = arp.backward(&ca, &c.dz).unwrap();
        if ga.dw != gc.dw || ga.db != gc.db || ga.dx != gc.dx {
            return Err(format!("{mode:?}: backward differs"));
        }
    }
    Ok(())
}

/// A small ARP network, one hidden neuron to rescale and a batch of inputs.
#[derive(Debug, Clone)]
pub struct NetCase {
    pub seed: u64,
    pub layer: usize,
    pub neuron: usize,
    pub c: f64,
    pub x: Vec<f64>,
}

pub const NET_ARCH: &str = "6-5-4-3";
const NET_BATCH: usize = 8;

pub fn net_case() -> impl Strategy<Value = NetCase> {
    (
        any::<u64>(),
        0usize..2,
        0usize..4,
        scale(true),
        prop::collection::vec(-1.0..=1.0f64, NET_BATCH * 6),
    )
        .prop_map(|(seed, layer, neuron, c, x)| NetCase {
            seed,
            layer,
            neuron,
            c,
            x,
        })
}

/// Rescaling one hidden ARP neuron by `c > 0` leaves the logits, and so the
/// predicted class, unchanged.
pub fn check_argmax(case: &NetCase) -> Result<(), String> {
    let net = build_network(
        NET_ARCH,
        LayerKind::Arp,
        &ArpHyper::default(),
        &mut SeededRng::new(case.seed),
    )
    .unwrap();
    let mut scaled = net.clone();
    let Layer::Arp(layer) = &mut scaled.layers_mut()[case.layer] else {
        return Err("hidden layer is not auto-rotating".into());
    };
    let j = case.neuron.min(layer.out_dim() - 1);
    for w in layer.weights.row_mut(j) {
        *w *= case.c;
    }
    layer.bias[j] *= case.c;

    let x = Matrix::from_vec(NET_BATCH, 6, case.x.clone()).unwrap();
    let (a, b) = (net.forward(&x).unwrap(), scaled.forward(&x).unwrap());
    for (la, lb) in a.logits().as_slice().iter().zip(b.logits().as_slice()) {
        if rel_err(*la, *lb) > SCALE_TOL {
            return Err(format!("logits moved: {la:e} vs {lb:e}"));
        }
    }
    let (pa, pb) = (net.predict(&x).unwrap(), scaled.predict(&x).unwrap());
    if pa != pb {
        return Err(format!("argmax changed: {pa:?} vs {pb:?}"));
    }
    Ok(())
}

fn lift(r: Result<(), String>) -> Result<(), TestCaseError> {
    r.map_err(TestCaseError::fail)
}

fn runner() -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases: CASES,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn outcome<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// Runs every invariant for [`CASES`] cases each with a deterministic
/// runner. Returns `(invariant, cases, outcome)` per invariant.
pub fn run_all() -> Vec<(&'static str, u32, Result<(), String>)> {
    vec![
        ("boundary preservation", CASES, outcome(runner().run(&neuron(), |n| lift(check_boundary(&n))))),
        ("sign preservation", CASES, outcome(runner().run(&neuron(), |n| lift(check_sign(&n))))),
        (
            "positive-scale invariance",
            CASES,
            outcome(runner().run(&(neuron(), scale(true)), |(n, c)| lift(check_scale(&n, c)))),
        ),
        (
            "negative-scale negation",
            CASES,
            outcome(runner().run(&(neuron(), scale(false)), |(n, c)| lift(check_scale(&n, c)))),
        ),
        ("probe-point pinning", CASES, outcome(runner().run(&neuron(), |n| lift(check_pinning(&n))))),
        ("unit-rho reduction", CASES, outcome(runner().run(&layer_case(), |c| lift(check_unit_rho(&c))))),
        ("argmax invariance", CASES, outcome(runner().run(&net_case(), |c| lift(check_argmax(&c))))),
    ]
}
