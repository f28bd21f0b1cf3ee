//! Helpers shared by the command-line test targets.

#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use arp_core::data::idx::{encode_idx_images, encode_idx_labels, IdxImages};

/// Runs the `arp` binary in `cwd` with `ARP_DATA_DIR` cleared.
pub fn arp(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arp"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ARP_DATA_DIR")
        .output()
        .expect("spawn arp")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A small, valid MNIST-layout split: `count` 28×28 images whose first
/// pixel is 255 and whose labels cycle through 0..10.
pub fn write_mnist_split(dir: &Path, prefix: &str, count: usize) {
    fs::create_dir_all(dir).unwrap();
    let mut pixels = vec![0u8; count * 784];
    for (k, p) in pixels.iter_mut().enumerate() {
        *p = (k * 37 % 256) as u8;
    }
    for i in 0..count {
        pixels[i * 784] = 255;
    }
    let images = IdxImages {
        count,
        rows: 28,
        cols: 28,
        pixels,
    };
    let labels: Vec<u8> = (0..count).map(|i| (i % 10) as u8).collect();
    fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), encode_idx_images(&images)).unwrap();
    fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), encode_idx_labels(&labels)).unwrap();
}

/// `root/mnist` with train and test splits.
pub fn write_mnist(root: &Path, count: usize) {
    let dir = root.join("mnist");
    write_mnist_split(&dir, "train", count);
    write_mnist_split(&dir, "t10k", count);
}

/// Valid train split except that the image file's magic number is wrong.
pub fn write_corrupt_magic(root: &Path) {
    write_mnist(root, 8);
    let path = root.join("mnist/train-images-idx3-ubyte");
    let mut bytes = fs::read(&path).unwrap();
    bytes[2] = 0x0c;
    fs::write(path, bytes).unwrap();
}

/// Valid train split except that the image file stops mid-image.
pub fn write_truncated(root: &Path) {
    write_mnist(root, 8);
    let path = root.join("mnist/train-images-idx3-ubyte");
    let bytes = fs::read(&path).unwrap();
    fs::write(path, &bytes[..bytes.len() - 100]).unwrap();
}
