//! Auto-rotating perceptron (ARP) layers inside a small dense-network
//! training engine.
//!
//! An ARP unit rescales its weights and bias by `ρ = L / |f(x_Q)|` before the
//! activation, so the pre-activation at a probe point `x_Q` outside the data
//! range is always `±L` while the unit's zero set is unchanged. The crate
//! provides:
//!
//! - [`matrix`] and [`rng`]: the `f64` matrix type and seeded randomness;
//! - [`layers`]: classic and auto-rotating dense layers with hand-derived
//!   backward passes, sigmoid, softmax cross-entropy, network assembly;
//! - [`gradcheck`]: the central finite-difference suite for those layers;
//! - [`optim`]: Adam and SGD;
//! - [`data`]: MNIST/Fashion-MNIST (IDX) and CIFAR-10 (binary) loaders and
//!   synthetic blobs;
//! - [`experiment`]: the seeded training loop, paired classic/ARP
//!   comparisons, vanishing-gradient diagnostics and metrics files.

pub mod data;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod layers;
pub mod matrix;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::SeededRng;
