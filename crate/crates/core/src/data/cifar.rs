//! CIFAR-10 binary batches: fixed 3073-byte records, one label byte
//! followed by 1024 red, 1024 green and 1024 blue bytes (row-major 32×32
//! planes).

use std::path::Path;

use crate::error::{Error, Result};

pub const PIXELS_PER_IMAGE: usize = 32 * 32 * 3;
pub const RECORD_LEN: usize = 1 + PIXELS_PER_IMAGE;

pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

/// Records from one or more batch files, concatenated in argument order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CifarRecords {
    pub labels: Vec<u8>,
    /// `labels.len() × 3072` bytes.
    pub pixels: Vec<u8>,
}

impl CifarRecords {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn load_cifar10<P: AsRef<Path>>(paths: &[P]) -> Result<CifarRecords> {
    let mut out = CifarRecords::default();
    for path in paths {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        parse_cifar_batch(&bytes, path, &mut out)?;
    }
    Ok(out)
}

/// Appends the records of one in-memory batch file to `out`.
pub fn parse_cifar_batch(bytes: &[u8], path: &Path, out: &mut CifarRecords) -> Result<()> {
    if !bytes.len().is_multiple_of(RECORD_LEN) {
        let whole = bytes.len() / RECORD_LEN * RECORD_LEN;
        return Err(Error::format(
            path,
            whole as u64,
            format!(
                "file length {} is not a multiple of the {RECORD_LEN}-byte record size",
                bytes.len()
            ),
        ));
    }
    out.labels.reserve(bytes.len() / RECORD_LEN);
    out.pixels.reserve(bytes.len() / RECORD_LEN * PIXELS_PER_IMAGE);
    for (i, record) in bytes.chunks_exact(RECORD_LEN).enumerate() {
        if record[0] > 9 {
            return Err(Error::format(
                path,
                (i * RECORD_LEN) as u64,
                format!("label {} out of range 0..=9", record[0]),
            ));
        }
        out.labels.push(record[0]);
        out.pixels.extend_from_slice(&record[1..]);
    }
    Ok(())
}
