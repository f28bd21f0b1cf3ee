use std::time::Instant;

use super::config::{Arm, ExperimentConfig};
use super::diagnostics::{layer_grad_norms, saturation_fraction};
use super::metrics::MetricsRow;
use crate::data::{batch_indices, Dataset};
use crate::error::{Error, Result};
use crate::layers::{build_network, NetworkModel, INPUT_BOUND};
use crate::optim::Optimizer;
use crate::rng::{SeededRng, STREAM_INIT, STREAM_SHUFFLE};

/// Rows evaluated per forward pass during evaluation.
const EVAL_CHUNK: usize = 1000;

/// Per-minibatch diagnostics, for observers that want the full stream.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub epoch: usize,
    pub batch: usize,
    pub size: usize,
    pub loss: f64,
    pub grad_norms: Vec<f64>,
    pub sat_fracs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: NetworkModel,
    pub rows: Vec<MetricsRow>,
}

pub fn run_id(arm: &Arm, seed: u64) -> String {
    format!("{}-s{seed}", arm.label)
}

/// Classification accuracy of `model` on the whole dataset.
pub fn evaluate(model: &NetworkModel, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    let indices: Vec<usize> = (0..ds.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let (x, y) = ds.gather(chunk);
        let pred = model.predict(&x)?;
        correct += pred
            .iter()
            .zip(&y)
            .filter(|(p, &l)| **p == l as usize)
            .count();
    }
    Ok(correct as f64 / ds.len() as f64)
}

/// Checks that the datasets fit the configured network and respect the
/// probe-point contract `max |x| ≤ 1 < x_Q`.
pub fn check_datasets(config: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<()> {
    let arch = config.architecture()?;
    for ds in [train, test] {
        if ds.dim() != arch.input_dim() {
            return Err(Error::Config(format!(
                "architecture {} expects {} inputs but {} ({}) has {}",
                config.arch,
                arch.input_dim(),
                ds.name,
                ds.split.as_str(),
                ds.dim()
            )));
        }
        if let Some(&bad) = ds.labels.iter().find(|&&l| l as usize >= arch.classes()) {
            return Err(Error::Config(format!(
                "label {bad} in {} does not fit {} outputs",
                ds.name,
                arch.classes()
            )));
        }
        let max = ds.max_abs();
        if max > INPUT_BOUND {
            return Err(Error::Config(format!(
                "{} has inputs up to {max}, beyond the input bound {INPUT_BOUND}",
                ds.name
            )));
        }
    }
    if train.is_empty() {
        return Err(Error::Config(format!("{} training split is empty", train.name)));
    }
    Ok(())
}

/// Trains one arm from one seed and records a metrics row per epoch.
///
/// The seed fixes the initial weights (its init stream) and the batch order
/// (its shuffle stream); nothing else is random, so the result is a pure
/// function of `(config, arm, seed, data)`.
pub fn run_training(
    config: &ExperimentConfig,
    arm: &Arm,
    seed: u64,
    train: &Dataset,
    test: &Dataset,
) -> Result<TrainOutcome> {
    run_training_observed(config, arm, seed, train, test, &mut |_| {})
}

/// [`run_training`] with a callback invoked after every minibatch.
pub fn run_training_observed(
    config: &ExperimentConfig,
    arm: &Arm,
    seed: u64,
    train: &Dataset,
    test: &Dataset,
    observer: &mut dyn FnMut(&BatchStats),
) -> Result<TrainOutcome> {
    config.validate()?;
    check_datasets(config, train, test)?;

    let mut init = SeededRng::with_stream(seed, STREAM_INIT);
    let mut model = build_network(&config.arch, arm.kind, &config.hyper(arm.rho_mode), &mut init)?;
    let mut shuffle = SeededRng::with_stream(seed, STREAM_SHUFFLE);
    let mut optimizer = Optimizer::new(config.optimizer, config.lr, &model.param_lengths());
    let depth = model.depth();
    let id = run_id(arm, seed);
    let started = Instant::now();
    let mut rows = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut grad_sums = vec![0.0; depth];
        let mut sat_sums = vec![0.0; depth];
        let blocks = batch_indices(train.len(), config.batch_size, &mut shuffle);
        let n_batches = blocks.len();

        for (b, idx) in blocks.iter().enumerate() {
            let (x, y) = train.gather(idx);
            let pass = model.batch_pass(&x, &y)?;
            let norms = layer_grad_norms(&pass.grads);
            let sats: Vec<f64> = pass
                .cache
                .pre_activations()
                .map(|z| saturation_fraction(z, config.l_cap))
                .collect();
            loss_sum += pass.loss * y.len() as f64;
            correct += pass.correct;
            for (acc, v) in grad_sums.iter_mut().zip(&norms) {
                *acc += v;
            }
            for (acc, v) in sat_sums.iter_mut().zip(&sats) {
                *acc += v;
            }
            observer(&BatchStats {
                epoch,
                batch: b,
                size: y.len(),
                loss: pass.loss,
                grad_norms: norms,
                sat_fracs: sats,
            });

            let grads: Vec<&[f64]> = pass
                .grads
                .iter()
                .flat_map(|g| [g.dw.as_slice(), g.db.as_slice()])
                .collect();
            optimizer.step(&mut model.param_slices_mut(), &grads)?;
        }

        if !model.layers().iter().all(|l| l.weights().is_finite()) {
            return Err(Error::Numeric(format!(
                "{id}: parameters became non-finite in epoch {epoch}"
            )));
        }
        let n = train.len() as f64;
        let nb = n_batches as f64;
        rows.push(MetricsRow {
            run_id: id.clone(),
            layer_kind: arm.label.clone(),
            seed,
            epoch,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            test_acc: evaluate(&model, test)?,
            grad_norms: grad_sums.iter().map(|s| s / nb).collect(),
            sat_fracs: sat_sums.iter().map(|s| s / nb).collect(),
            wall_s: if config.timing {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
    }
    Ok(TrainOutcome { model, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{blobs_split, DatasetId, Split};
    use crate::layers::LayerKind;

    fn blobs_config(epochs: usize) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetId::Blobs,
            arch: "2-8-2".into(),
            epochs,
            seeds: vec![0],
            ..Default::default()
        }
    }

    #[test]
    fn rows_are_well_formed() {
        let cfg = blobs_config(3);
        let (train, test) = (blobs_split(Split::Train, 0), blobs_split(Split::Test, 0));
        let out = run_training(&cfg, &Arm::arp(Default::default()), 5, &train, &test).unwrap();
        assert_eq!(out.rows.len(), 3);
        for (i, r) in out.rows.iter().enumerate() {
            assert_eq!(r.epoch, i + 1);
            assert_eq!(r.run_id, "arp-s5");
            assert!((0.0..=1.0).contains(&r.train_acc));
            assert!((0.0..=1.0).contains(&r.test_acc));
            assert_eq!(r.grad_norms.len(), 2);
            assert!(r.grad_norms.iter().all(|&g| g >= 0.0));
            assert!(r.sat_fracs.iter().all(|&s| (0.0..=1.0).contains(&s)));
            assert_eq!(r.wall_s, 0.0);
        }
    }

    #[test]
    fn mismatched_architecture_fails_before_training() {
        let cfg = ExperimentConfig {
            arch: "3-8-2".into(),
            ..blobs_config(1)
        };
        let ds = blobs_split(Split::Train, 0);
        let err = run_training(&cfg, &Arm::classic(), 0, &ds, &ds).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn same_seed_same_rows() {
        let cfg = blobs_config(4);
        let (train, test) = (blobs_split(Split::Train, 0), blobs_split(Split::Test, 0));
        let a = run_training(&cfg, &Arm::classic(), 9, &train, &test).unwrap();
        let b = run_training(&cfg, &Arm::classic(), 9, &train, &test).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.model, b.model);
        assert_eq!(a.model.layers()[0].kind(), LayerKind::Classic);
    }

    #[test]
    fn observer_sees_every_batch() {
        let cfg = ExperimentConfig {
            batch_size: 64,
            ..blobs_config(2)
        };
        let (train, test) = (blobs_split(Split::Train, 0), blobs_split(Split::Test, 0));
        let mut seen = Vec::new();
        run_training_observed(&cfg, &Arm::classic(), 0, &train, &test, &mut |s| {
            seen.push((s.epoch, s.size))
        })
        .unwrap();
        // 200 samples in blocks of 64: 64, 64, 64, 8 per epoch.
        assert_eq!(seen.len(), 8);
        assert_eq!(seen[3], (1, 8));
    }
}
