//! Training loop, paired classic/ARP comparisons, diagnostics and metrics
//! persistence.

pub mod compare;
pub mod config;
pub mod diagnostics;
pub mod metrics;
pub mod train;

pub use compare::{mean_sd, paired_compare, summarize, ArmSummary, CompareOutcome, LayerDiagnostics, Summary};
pub use config::{Arm, ExperimentConfig, ModeSelection, DEFAULT_ARCH_CIFAR, DEFAULT_ARCH_MNIST};
pub use diagnostics::{init_gradient_probe, layer_grad_norms, saturation_fraction, ProbeReport};
pub use metrics::{read_metrics, write_json, write_metrics, MetricsRow};
pub use train::{evaluate, run_training, run_training_observed, BatchStats, TrainOutcome};
