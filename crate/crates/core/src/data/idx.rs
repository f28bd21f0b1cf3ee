//! IDX container used by the MNIST and Fashion-MNIST distributions.
//!
//! Layout (all header fields big-endian `u32`):
//!
//! ```text
//! images: 0x00000803, count, rows, cols, count*rows*cols pixel bytes
//! labels: 0x00000801, count, count label bytes
//! ```

use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Highest label value accepted from a label file.
pub const MAX_LABEL: u8 = 9;

/// Raw image tensor, `count × rows × cols` bytes in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image_len(&self) -> usize {
        self.rows * self.cols
    }
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx_images(&bytes, path)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx_labels(&bytes, path)
}

/// Parses an in-memory image file. `path` is only used in error messages.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    let header = read_header::<4>(bytes, IMAGE_MAGIC, "image", path)?;
    let (count, rows, cols) = (header[1] as usize, header[2] as usize, header[3] as usize);
    let payload_len = count
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .ok_or_else(|| Error::format(path, 4, "header dimensions overflow"))?;
    let payload = expect_payload(bytes, 16, payload_len, path)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: payload.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let header = read_header::<2>(bytes, LABEL_MAGIC, "label", path)?;
    let payload = expect_payload(bytes, 8, header[1] as usize, path)?;
    if let Some(i) = payload.iter().position(|&l| l > MAX_LABEL) {
        return Err(Error::format(
            path,
            8 + i as u64,
            format!("label {} out of range 0..={MAX_LABEL}", payload[i]),
        ));
    }
    Ok(payload.to_vec())
}

fn read_header<const N: usize>(
    bytes: &[u8],
    magic: u32,
    kind: &str,
    path: &Path,
) -> Result<[u32; N]> {
    if let Some(first) = bytes.get(..4) {
        let found = u32::from_be_bytes(first.try_into().expect("4-byte slice"));
        if found != magic {
            return Err(Error::format(
                path,
                0,
                format!("not an IDX {kind} file (magic 0x{found:08x})"),
            ));
        }
    }
    let need = 4 * N;
    if bytes.len() < need {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            format!(
                "truncated file: expected at least {need} header bytes, got {}",
                bytes.len()
            ),
        ));
    }
    let mut out = [0u32; N];
    for (i, field) in out.iter_mut().enumerate() {
        let chunk: [u8; 4] = bytes[4 * i..4 * i + 4].try_into().expect("4-byte slice");
        *field = u32::from_be_bytes(chunk);
    }
    Ok(out)
}

fn expect_payload<'a>(
    bytes: &'a [u8],
    header_len: usize,
    payload_len: usize,
    path: &Path,
) -> Result<&'a [u8]> {
    let expected = header_len + payload_len;
    if bytes.len() < expected {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            format!(
                "truncated file: expected {expected} bytes, got {}",
                bytes.len()
            ),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(
            path,
            expected as u64,
            format!(
                "trailing data: expected {expected} bytes, got {}",
                bytes.len()
            ),
        ));
    }
    Ok(&bytes[header_len..])
}

/// Serializes images in IDX format. Used to author fixtures.
pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for field in [
        IMAGE_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&field.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

/// Serializes labels in IDX format. Used to author fixtures.
pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
