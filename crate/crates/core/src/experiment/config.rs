use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DatasetId;
use crate::error::{Error, Result};
use crate::layers::{Architecture, ArpHyper, LayerKind, RhoMode};
use crate::optim::OptimizerKind;

pub const DEFAULT_ARCH_MNIST: &str = "784-50-50-40-30-30-20-10";
pub const DEFAULT_ARCH_CIFAR: &str = "3072-50-50-40-30-30-20-10";

/// Which ρ-gradient variants the ARP side of a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    #[default]
    Coupled,
    Detached,
    /// Compare runs get one ARP arm per mode.
    Both,
}

impl std::str::FromStr for ModeSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "coupled" => Ok(ModeSelection::Coupled),
            "detached" => Ok(ModeSelection::Detached),
            "both" => Ok(ModeSelection::Both),
            other => Err(format!(
                "unknown mode {other:?} (expected coupled|detached|both)"
            )),
        }
    }
}

/// One side of a comparison: a layer kind plus, for ARP, its ρ mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Arm {
    pub label: String,
    pub kind: LayerKind,
    pub rho_mode: RhoMode,
}

impl Arm {
    pub fn classic() -> Self {
        Arm {
            label: "classic".into(),
            kind: LayerKind::Classic,
            rho_mode: RhoMode::Coupled,
        }
    }

    pub fn arp(rho_mode: RhoMode) -> Self {
        Arm {
            label: "arp".into(),
            kind: LayerKind::Arp,
            rho_mode,
        }
    }
}

/// Declarative description of a training or comparison run.
///
/// Defaults reproduce the reference protocol at reduced scale: sigmoid MLP
/// `784-50-50-40-30-30-20-10`, `L = 4`, `x_Q = 1.1`, Adam with
/// `lr = 0.003`, batch 64, 5 seeds × 10 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetId,
    pub data_dir: Option<PathBuf>,
    pub arch: String,
    /// Layer kind of a single `train` run.
    pub layer_kind: LayerKind,
    pub l_cap: f64,
    pub xq_value: f64,
    pub eps: f64,
    pub rho_mode: ModeSelection,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub seeds: Vec<u64>,
    pub metrics_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
    /// Record wall-clock seconds in the metrics. Off by default so that
    /// metrics files are byte-reproducible.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let hyper = ArpHyper::default();
        ExperimentConfig {
            dataset: DatasetId::Mnist,
            data_dir: None,
            arch: DEFAULT_ARCH_MNIST.into(),
            layer_kind: LayerKind::Arp,
            l_cap: hyper.l_cap,
            xq_value: hyper.xq_value,
            eps: hyper.eps,
            rho_mode: ModeSelection::Coupled,
            epochs: 10,
            batch_size: 64,
            lr: 0.003,
            optimizer: OptimizerKind::Adam,
            seeds: (0..5).collect(),
            metrics_path: None,
            summary_path: None,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn architecture(&self) -> Result<Architecture> {
        self.arch.parse()
    }

    /// ARP hyperparameters for one ρ mode.
    pub fn hyper(&self, rho_mode: RhoMode) -> ArpHyper {
        ArpHyper {
            l_cap: self.l_cap,
            xq_value: self.xq_value,
            eps: self.eps,
            rho_mode,
        }
    }

    /// The single ρ mode of a `train` run.
    pub fn single_mode(&self) -> Result<RhoMode> {
        match self.rho_mode {
            ModeSelection::Coupled => Ok(RhoMode::Coupled),
            ModeSelection::Detached => Ok(RhoMode::Detached),
            ModeSelection::Both => Err(Error::Config(
                "mode \"both\" only applies to comparisons".into(),
            )),
        }
    }

    /// The arm trained by `train`.
    pub fn train_arm(&self) -> Result<Arm> {
        Ok(match self.layer_kind {
            LayerKind::Classic => Arm::classic(),
            LayerKind::Arp => Arm::arp(self.single_mode()?),
        })
    }

    /// Arms of a paired comparison, in output order.
    pub fn compare_arms(&self) -> Vec<Arm> {
        match self.rho_mode {
            ModeSelection::Coupled => vec![Arm::classic(), Arm::arp(RhoMode::Coupled)],
            ModeSelection::Detached => vec![Arm::classic(), Arm::arp(RhoMode::Detached)],
            ModeSelection::Both => vec![
                Arm::classic(),
                Arm::arp(RhoMode::Coupled),
                Arm {
                    label: "arp_detached".into(),
                    ..Arm::arp(RhoMode::Detached)
                },
            ],
        }
    }

    /// Checks every invariant that does not need the dataset.
    pub fn validate(&self) -> Result<()> {
        let arch = self.architecture()?;
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.l_cap > 0.0 && self.l_cap.is_finite()) {
            return Err(Error::Config(format!("L must be positive, got {}", self.l_cap)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.xq_value > crate::layers::INPUT_BOUND && self.xq_value.is_finite()) {
            return Err(Error::Config(format!(
                "x_Q components must exceed the input bound {}, got {}",
                crate::layers::INPUT_BOUND,
                self.xq_value
            )));
        }
        if arch.input_dim() != self.dataset.input_dim() {
            return Err(Error::Config(format!(
                "architecture {} expects {} inputs but {} has {}",
                self.arch,
                arch.input_dim(),
                self.dataset,
                self.dataset.input_dim()
            )));
        }
        if arch.classes() < self.dataset.classes() {
            return Err(Error::Config(format!(
                "architecture {} has {} outputs but {} has {} classes",
                self.arch,
                arch.classes(),
                self.dataset,
                self.dataset.classes()
            )));
        }
        Ok(())
    }
}
