//! Dataset loading, normalization and batching.

pub mod cifar;
pub mod dataset;
pub mod idx;

pub use cifar::{load_cifar10, CifarRecords};
pub use dataset::{
    batch_indices, batches, blobs_split, load_dataset, normalize, normalize_pixels,
    synthetic_blobs, Dataset, DatasetId, Split,
};
pub use idx::{load_idx_images, load_idx_labels, IdxImages};
