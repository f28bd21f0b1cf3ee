use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cifar::{self, load_cifar10, PIXELS_PER_IMAGE};
use super::idx::{load_idx_images, load_idx_labels};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{shuffle_indices, SeededRng, STREAM_DATA};

/// Standard deviation of each synthetic blob along both axes.
pub const BLOB_SD: f64 = 0.05;
/// Samples per class for the `blobs` dataset id.
pub const BLOB_TRAIN_PER_CLASS: usize = 100;
pub const BLOB_TEST_PER_CLASS: usize = 50;
pub const BLOB_SEPARATION: f64 = 0.5;
const STREAM_DATA_TEST: u64 = STREAM_DATA + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train|test)")),
        }
    }
}

/// Datasets the tools know how to locate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetId {
    Mnist,
    Fashion,
    Cifar10,
    Blobs,
}

impl DatasetId {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::Mnist => "mnist",
            DatasetId::Fashion => "fashion",
            DatasetId::Cifar10 => "cifar10",
            DatasetId::Blobs => "blobs",
        }
    }

    /// Flattened input width.
    pub fn input_dim(self) -> usize {
        match self {
            DatasetId::Mnist | DatasetId::Fashion => 28 * 28,
            DatasetId::Cifar10 => PIXELS_PER_IMAGE,
            DatasetId::Blobs => 2,
        }
    }

    pub fn classes(self) -> usize {
        match self {
            DatasetId::Blobs => 2,
            _ => 10,
        }
    }

    /// Sub-directory of the data directory holding this dataset's files.
    pub fn subdir(self) -> Option<&'static str> {
        match self {
            DatasetId::Mnist => Some("mnist"),
            DatasetId::Fashion => Some("fashion-mnist"),
            DatasetId::Cifar10 => Some("cifar-10-batches-bin"),
            DatasetId::Blobs => None,
        }
    }

    pub fn needs_files(self) -> bool {
        self.subdir().is_some()
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mnist" => Ok(DatasetId::Mnist),
            "fashion" | "fashion-mnist" => Ok(DatasetId::Fashion),
            "cifar10" | "cifar-10" => Ok(DatasetId::Cifar10),
            "blobs" => Ok(DatasetId::Blobs),
            other => Err(format!(
                "unknown dataset {other:?} (expected mnist|fashion|cifar10|blobs)"
            )),
        }
    }
}

/// Normalized images (one flattened image per row, values in `[0, 1]` for
/// pixel data) with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    pub images: Matrix,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, split: Split, images: Matrix, labels: Vec<u8>) -> Result<Self> {
        if images.rows() != labels.len() {
            return Err(Error::Shape {
                op: "dataset",
                left: images.shape(),
                right: (labels.len(), 1),
            });
        }
        Ok(Dataset {
            name: name.into(),
            split,
            images,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.images.cols()
    }

    /// Count of samples per label value, indexed by label.
    pub fn label_histogram(&self) -> Vec<usize> {
        let top = self.labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut hist = vec![0; top];
        for &l in &self.labels {
            hist[l as usize] += 1;
        }
        hist
    }

    /// Smallest and largest feature value (`(0, 0)` when empty).
    pub fn value_range(&self) -> (f64, f64) {
        let s = self.images.as_slice();
        if s.is_empty() {
            return (0.0, 0.0);
        }
        s.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn max_abs(&self) -> f64 {
        self.images.max_abs()
    }

    /// Rows `indices` as a batch.
    pub fn gather(&self, indices: &[usize]) -> (Matrix, Vec<u8>) {
        let x = self.images.select_rows(indices);
        let y = indices.iter().map(|&i| self.labels[i]).collect();
        (x, y)
    }
}

/// Maps bytes `0..=255` onto `[0, 1]` by dividing by 255.
pub fn normalize_pixels(raw: &[u8]) -> Vec<f64> {
    raw.iter().map(|&b| f64::from(b) / 255.0).collect()
}

/// Builds a dataset from raw pixel bytes laid out one image after another.
pub fn normalize(
    name: impl Into<String>,
    split: Split,
    pixels: &[u8],
    dim: usize,
    labels: Vec<u8>,
) -> Result<Dataset> {
    let images = Matrix::from_vec(labels.len(), dim, normalize_pixels(pixels))?;
    Dataset::new(name, split, images, labels)
}

/// Expected file names for an IDX dataset split.
pub fn idx_paths(dir: &Path, split: Split) -> (PathBuf, PathBuf) {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    (
        dir.join(format!("{prefix}-images-idx3-ubyte")),
        dir.join(format!("{prefix}-labels-idx1-ubyte")),
    )
}

/// Loads one split of a file-backed dataset from `data_dir`.
///
/// Layout under `data_dir`:
///
/// ```text
/// mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte
/// fashion-mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte
/// cifar-10-batches-bin/{data_batch_1..5,test_batch}.bin
/// ```
///
/// The `blobs` id is generated instead (see [`blobs_split`]).
pub fn load_dataset(id: DatasetId, data_dir: &Path, split: Split) -> Result<Dataset> {
    let Some(sub) = id.subdir() else {
        return Ok(blobs_split(split, 0));
    };
    let dir = data_dir.join(sub);
    if !dir.is_dir() {
        return Err(Error::io(
            &dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    match id {
        DatasetId::Mnist | DatasetId::Fashion => {
            let (img_path, lbl_path) = idx_paths(&dir, split);
            let images = load_idx_images(&img_path)?;
            let labels = load_idx_labels(&lbl_path)?;
            if images.count != labels.len() {
                return Err(Error::format(
                    &lbl_path,
                    4,
                    format!(
                        "label count {} does not match image count {} in {}",
                        labels.len(),
                        images.count,
                        img_path.display()
                    ),
                ));
            }
            normalize(id.as_str(), split, &images.pixels, images.image_len(), labels)
        }
        DatasetId::Cifar10 => {
            let files: Vec<PathBuf> = match split {
                Split::Train => cifar::TRAIN_FILES.iter().map(|f| dir.join(f)).collect(),
                Split::Test => vec![dir.join(cifar::TEST_FILE)],
            };
            let records = load_cifar10(&files)?;
            normalize(id.as_str(), split, &records.pixels, PIXELS_PER_IMAGE, records.labels)
        }
        DatasetId::Blobs => unreachable!("handled above"),
    }
}

/// Two Gaussian blobs in the plane: class 0 centred at `(-s, -s)`, class 1
/// at `(+s, +s)` with `s = separation`, standard deviation [`BLOB_SD`],
/// clipped to `[-1, 1]²`. Samples are ordered by class.
pub fn synthetic_blobs(rng: &mut SeededRng, n_per_class: usize, separation: f64) -> Dataset {
    let mut data = Vec::with_capacity(4 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for (label, centre) in [(0u8, -separation), (1u8, separation)] {
        for _ in 0..n_per_class {
            for _ in 0..2 {
                data.push(rng.normal(centre, BLOB_SD).clamp(-1.0, 1.0));
            }
            labels.push(label);
        }
    }
    let images = Matrix::from_vec(labels.len(), 2, data).expect("two features per sample");
    Dataset::new("blobs", Split::Train, images, labels).expect("rows match labels")
}

/// The `blobs` dataset id: fixed-size train/test splits drawn from
/// independent streams of `data_seed`.
pub fn blobs_split(split: Split, data_seed: u64) -> Dataset {
    let (stream, n) = match split {
        Split::Train => (STREAM_DATA, BLOB_TRAIN_PER_CLASS),
        Split::Test => (STREAM_DATA_TEST, BLOB_TEST_PER_CLASS),
    };
    let mut rng = SeededRng::with_stream(data_seed, stream);
    let mut ds = synthetic_blobs(&mut rng, n, BLOB_SEPARATION);
    ds.split = split;
    ds
}

/// Index blocks for one epoch: a seeded permutation cut into runs of
/// `batch_size` (the last one may be shorter).
pub fn batch_indices(n: usize, batch_size: usize, rng: &mut SeededRng) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    shuffle_indices(rng, n)
        .chunks(batch_size)
        .map(<[usize]>::to_vec)
        .collect()
}

/// Shuffled minibatches for one epoch.
pub fn batches<'a>(
    ds: &'a Dataset,
    batch_size: usize,
    rng: &mut SeededRng,
) -> impl Iterator<Item = (Matrix, Vec<u8>)> + 'a {
    batch_indices(ds.len(), batch_size, rng)
        .into_iter()
        .map(move |idx| ds.gather(&idx))
}
