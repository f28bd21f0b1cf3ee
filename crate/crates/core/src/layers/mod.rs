//! Dense layers, the sigmoid activation, the softmax cross-entropy head and
//! network assembly.

pub mod activation;
pub mod arp;
pub mod dense;
pub mod loss;
pub mod network;

pub use activation::{sigmoid, sigmoid_backward, sigmoid_forward};
pub use arp::{ArpDense, ArpHyper, RhoMode, Rotation};
pub use dense::{ClassicDense, LayerCache, LayerGrads, RotationCache};
pub use loss::{argmax_rows, softmax, softmax_xent};
pub use network::{
    build_from_architecture, build_network, Architecture, BatchPass, ForwardCache, Layer,
    LayerKind, NetworkModel, INPUT_BOUND,
};
