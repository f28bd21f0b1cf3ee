//! Vanishing-gradient observables.

use serde::Serialize;

use super::config::{Arm, ExperimentConfig};
use crate::data::{batch_indices, Dataset};
use crate::error::{Error, Result};
use crate::layers::{build_network, LayerGrads, RhoMode};
use crate::matrix::Matrix;
use crate::rng::{SeededRng, STREAM_INIT, STREAM_SHUFFLE};

/// Fraction of entries with `|z| > l_cap`; 0 for an empty matrix.
pub fn saturation_fraction(z: &Matrix, l_cap: f64) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    let saturated = z.as_slice().iter().filter(|v| v.abs() > l_cap).count();
    saturated as f64 / z.len() as f64
}

/// Frobenius norm of each layer's weight gradient.
pub fn layer_grad_norms(grads: &[LayerGrads]) -> Vec<f64> {
    grads.iter().map(|g| g.dw.norm()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmProbe {
    pub grad_norms: Vec<f64>,
    pub sat_fracs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedProbe {
    pub seed: u64,
    pub classic: ArmProbe,
    pub arp: ArmProbe,
    /// Per-layer `‖dW‖` ratio ARP / classic.
    pub ratios: Vec<f64>,
    /// Classic first-layer norm below the last hidden layer's norm.
    pub classic_vanishing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub dataset: String,
    pub arch: String,
    pub l_cap: f64,
    pub xq_value: f64,
    pub rho_mode: RhoMode,
    pub batch_size: usize,
    pub seeds: Vec<SeedProbe>,
    /// Seeds whose classic arm shows the vanishing-gradient signature.
    pub classic_vanishing_count: usize,
}

/// One backward pass at initialization per seed and arm, on the first
/// minibatch of the seed's epoch-1 shuffle. Both arms share initial weights
/// and the batch, so the ratios isolate the effect of the rotation.
pub fn init_gradient_probe(config: &ExperimentConfig, train: &Dataset) -> Result<ProbeReport> {
    config.validate()?;
    let arch = config.architecture()?;
    if arch.depth() < 2 {
        return Err(Error::Config("the probe needs at least one hidden layer".into()));
    }
    if train.dim() != arch.input_dim() || train.is_empty() {
        return Err(Error::Config(format!(
            "dataset {} ({} samples of width {}) does not fit architecture {}",
            train.name,
            train.len(),
            train.dim(),
            config.arch
        )));
    }
    let rho_mode = config.single_mode()?;
    let last_hidden = arch.depth() - 2;
    let mut seeds = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let mut shuffle = SeededRng::with_stream(seed, STREAM_SHUFFLE);
        let first = batch_indices(train.len(), config.batch_size, &mut shuffle)
            .into_iter()
            .next()
            .expect("non-empty dataset");
        let (x, y) = train.gather(&first);

        let probe_arm = |arm: Arm| -> Result<ArmProbe> {
            let mut init = SeededRng::with_stream(seed, STREAM_INIT);
            let net = build_network(&config.arch, arm.kind, &config.hyper(arm.rho_mode), &mut init)?;
            let pass = net.batch_pass(&x, &y)?;
            Ok(ArmProbe {
                grad_norms: layer_grad_norms(&pass.grads),
                sat_fracs: pass
                    .cache
                    .pre_activations()
                    .map(|z| saturation_fraction(z, config.l_cap))
                    .collect(),
            })
        };
        let classic = probe_arm(Arm::classic())?;
        let arp = probe_arm(Arm::arp(rho_mode))?;
        let ratios = arp
            .grad_norms
            .iter()
            .zip(&classic.grad_norms)
            .map(|(a, c)| a / c)
            .collect();
        let classic_vanishing = classic.grad_norms[0] < classic.grad_norms[last_hidden];
        seeds.push(SeedProbe {
            seed,
            classic,
            arp,
            ratios,
            classic_vanishing,
        });
    }
    Ok(ProbeReport {
        dataset: train.name.clone(),
        arch: config.arch.clone(),
        l_cap: config.l_cap,
        xq_value: config.xq_value,
        rho_mode,
        batch_size: config.batch_size,
        classic_vanishing_count: seeds.iter().filter(|s| s.classic_vanishing).count(),
        seeds,
    })
}
