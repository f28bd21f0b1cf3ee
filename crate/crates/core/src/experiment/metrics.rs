//! Metrics CSV and JSON summaries.
//!
//! CSV columns, in order:
//!
//! ```text
//! run_id, layer_kind, seed, epoch, train_loss, train_acc, test_acc,
//! grad_norm_l1..grad_norm_lN, sat_frac_l1..sat_frac_lN, wall_s
//! ```
//!
//! where `N` is the number of weight layers. Reals are written with nine
//! significant digits. Files are written to a temporary sibling and renamed
//! into place, so a failed run never leaves a partial file behind.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    /// Arm label (`classic`, `arp`, …).
    pub layer_kind: String,
    pub seed: u64,
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Epoch mean of each layer's `‖dW‖_F`, input side first.
    pub grad_norms: Vec<f64>,
    /// Epoch mean of each layer's fraction of pre-activations with `|z| > L`.
    pub sat_fracs: Vec<f64>,
    pub wall_s: f64,
}

/// Formats a real with nine significant digits, `%.9g` style.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn metrics_header(depth: usize) -> Vec<String> {
    let mut cols: Vec<String> = [
        "run_id",
        "layer_kind",
        "seed",
        "epoch",
        "train_loss",
        "train_acc",
        "test_acc",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((1..=depth).map(|l| format!("grad_norm_l{l}")));
    cols.extend((1..=depth).map(|l| format!("sat_frac_l{l}")));
    cols.push("wall_s".into());
    cols
}

/// Renders rows as CSV text. Every row must carry `depth` layer values.
pub fn metrics_csv(depth: usize, rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(metrics_header(depth))
        .map_err(|e| Error::Serialize(e.to_string()))?;
    for row in rows {
        if row.grad_norms.len() != depth || row.sat_fracs.len() != depth {
            return Err(Error::Serialize(format!(
                "row {} has {} / {} layer values, expected {depth}",
                row.run_id,
                row.grad_norms.len(),
                row.sat_fracs.len()
            )));
        }
        let mut rec = vec![
            row.run_id.clone(),
            row.layer_kind.clone(),
            row.seed.to_string(),
            row.epoch.to_string(),
            format_sig9(row.train_loss),
            format_sig9(row.train_acc),
            format_sig9(row.test_acc),
        ];
        rec.extend(row.grad_norms.iter().map(|&v| format_sig9(v)));
        rec.extend(row.sat_fracs.iter().map(|&v| format_sig9(v)));
        rec.push(format_sig9(row.wall_s));
        w.write_record(&rec)
            .map_err(|e| Error::Serialize(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn write_metrics(path: &Path, depth: usize, rows: &[MetricsRow]) -> Result<()> {
    write_atomic(path, metrics_csv(depth, rows)?.as_bytes())
}

/// Parses a metrics file written by [`write_metrics`].
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text).map_err(|msg| Error::format(path, 0, msg))
}

pub fn parse_metrics(text: &str) -> std::result::Result<Vec<MetricsRow>, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?.clone();
    let width = header.len();
    if width < 8 || (width - 8) % 2 != 0 {
        return Err(format!("unexpected metrics header with {width} columns"));
    }
    let depth = (width - 8) / 2;
    if header.iter().collect::<Vec<_>>() != metrics_header(depth) {
        return Err("metrics header does not match the schema".into());
    }
    let real = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let reals = |range: std::ops::Range<usize>| -> std::result::Result<Vec<f64>, String> {
            range.map(|i| real(&rec[i])).collect()
        };
        rows.push(MetricsRow {
            run_id: rec[0].to_string(),
            layer_kind: rec[1].to_string(),
            seed: rec[2].parse().map_err(|e| format!("seed: {e}"))?,
            epoch: rec[3].parse().map_err(|e| format!("epoch: {e}"))?,
            train_loss: real(&rec[4])?,
            train_acc: real(&rec[5])?,
            test_acc: real(&rec[6])?,
            grad_norms: reals(7..7 + depth)?,
            sat_fracs: reals(7 + depth..7 + 2 * depth)?,
            wall_s: real(&rec[7 + 2 * depth])?,
        });
    }
    Ok(rows)
}

/// Serializes `value` as pretty JSON and writes it atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let out_err = |source| Error::Output {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(out_err)?;
    tmp.write_all(bytes).map_err(out_err)?;
    tmp.flush().map_err(out_err)?;
    tmp.persist(path).map_err(|e| out_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, epoch: usize) -> MetricsRow {
        MetricsRow {
            run_id: format!("arp-s{seed}"),
            layer_kind: "arp".into(),
            seed,
            epoch,
            train_loss: std::f64::consts::LN_10,
            train_acc: 0.1234,
            test_acc: 1.0 / 3.0,
            grad_norms: vec![1.5e-7, 0.0],
            sat_fracs: vec![0.25, 1.0],
            wall_s: 0.0,
        }
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(std::f64::consts::LN_10), "2.30258509");
        assert_eq!(format_sig9(1.5e-7), "1.5e-7");
        assert_eq!(format_sig9(-123456789012.0), "-1.23456789e11");
        assert_eq!(format_sig9(0.0001), "0.0001");
        assert_eq!(format_sig9(99999.99999), "100000");
    }

    #[test]
    fn empty_rows_give_header_only() {
        let text = metrics_csv(7, &[]).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("run_id,layer_kind,seed,epoch,train_loss,train_acc,test_acc,grad_norm_l1,"));
        assert!(text.trim_end().ends_with("sat_frac_l7,wall_s"));
    }

    #[test]
    fn round_trip_through_text() {
        let rows = vec![row(0, 1), row(0, 2), row(3, 1)];
        let text = metrics_csv(2, &rows).unwrap();
        let parsed = parse_metrics(&text).unwrap();
        assert_eq!(parsed.len(), 3);
        for (a, b) in rows.iter().zip(&parsed) {
            assert_eq!(a.run_id, b.run_id);
            assert_eq!(a.epoch, b.epoch);
            assert!((a.train_loss - b.train_loss).abs() <= 5e-9 * a.train_loss.abs());
            assert_eq!(a.sat_fracs, b.sat_fracs);
        }
        // Values already at 9 significant digits survive exactly.
        assert_eq!(metrics_csv(2, &parsed).unwrap(), text);
    }

    #[test]
    fn inconsistent_depth_is_rejected() {
        assert!(metrics_csv(3, &[row(0, 1)]).is_err());
    }

    #[test]
    fn write_failure_names_the_path() {
        let err = write_metrics(Path::new("/nonexistent/dir/m.csv"), 2, &[]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/m.csv"), "{err}");
        assert!(!err.is_data());
    }
}
