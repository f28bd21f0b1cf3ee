use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Arm, ExperimentConfig};
use super::metrics::{metrics_csv, parse_metrics, MetricsRow};
use super::train::run_training;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Final-epoch test accuracy statistics of one arm across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub mean_test_acc: f64,
    /// Population standard deviation (divides by the number of seeds).
    pub sd_test_acc: f64,
    pub seeds: Vec<u64>,
    pub final_test_acc: Vec<f64>,
}

/// Per-layer diagnostics of one arm averaged over every (seed, epoch) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDiagnostics {
    pub mean_grad_norm: Vec<f64>,
    pub mean_sat_frac: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub sd_convention: String,
    pub arms: BTreeMap<String, ArmSummary>,
    pub per_layer_diagnostics: BTreeMap<String, LayerDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    /// Metrics rows ordered by seed, then arm, then epoch.
    pub rows: Vec<MetricsRow>,
    pub summary: Summary,
}

/// Mean and population standard deviation. Both are 0 for an empty slice.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains every arm from every seed. For a given seed all arms start from
/// the same initial weights and see the same batch order; the ARP arms add
/// only `L` and `x_Q`, which are not learned.
///
/// Runs execute in parallel; results are merged in (seed, arm) order so the
/// output does not depend on scheduling.
pub fn paired_compare(config: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<CompareOutcome> {
    config.validate()?;
    let arms = config.compare_arms();
    let jobs: Vec<(u64, &Arm)> = config
        .seeds
        .iter()
        .flat_map(|&s| arms.iter().map(move |a| (s, a)))
        .collect();
    let results: Vec<Result<Vec<MetricsRow>>> = jobs
        .par_iter()
        .map(|&(seed, arm)| run_training(config, arm, seed, train, test).map(|o| o.rows))
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    // Summaries are computed from the values exactly as the CSV stores them,
    // so they can be recomputed from the file without rounding drift.
    let depth = rows.first().map_or(0, |r| r.grad_norms.len());
    let rows = parse_metrics(&metrics_csv(depth, &rows)?).map_err(Error::Serialize)?;
    let summary = summarize(config, &arms, &rows)?;
    Ok(CompareOutcome { rows, summary })
}

/// Aggregates metrics rows into a [`Summary`]: for each arm and seed the
/// row with the highest epoch is the final one.
pub fn summarize(config: &ExperimentConfig, arms: &[Arm], rows: &[MetricsRow]) -> Result<Summary> {
    let mut summary = Summary {
        config: config.clone(),
        sd_convention: "population".into(),
        arms: BTreeMap::new(),
        per_layer_diagnostics: BTreeMap::new(),
    };
    for arm in arms {
        let arm_rows: Vec<&MetricsRow> = rows.iter().filter(|r| r.layer_kind == arm.label).collect();
        let mut finals: BTreeMap<u64, &MetricsRow> = BTreeMap::new();
        for r in &arm_rows {
            let e = finals.entry(r.seed).or_insert(r);
            if r.epoch > e.epoch {
                *e = r;
            }
        }
        if finals.is_empty() {
            return Err(Error::Config(format!("no metrics rows for arm {}", arm.label)));
        }
        let seeds: Vec<u64> = finals.keys().copied().collect();
        let final_test_acc: Vec<f64> = finals.values().map(|r| r.test_acc).collect();
        let (mean, sd) = mean_sd(&final_test_acc);
        summary.arms.insert(
            arm.label.clone(),
            ArmSummary {
                mean_test_acc: mean,
                sd_test_acc: sd,
                seeds,
                final_test_acc,
            },
        );

        let depth = arm_rows[0].grad_norms.len();
        let n = arm_rows.len() as f64;
        let layer_mean = |pick: &dyn Fn(&MetricsRow) -> &[f64]| -> Vec<f64> {
            (0..depth)
                .map(|l| arm_rows.iter().map(|r| pick(r)[l]).sum::<f64>() / n)
                .collect()
        };
        summary.per_layer_diagnostics.insert(
            arm.label.clone(),
            LayerDiagnostics {
                mean_grad_norm: layer_mean(&|r| &r.grad_norms),
                mean_sat_frac: layer_mean(&|r| &r.sat_fracs),
            },
        );
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{blobs_split, DatasetId, Split};

    #[test]
    fn mean_sd_cases() {
        assert_eq!(mean_sd(&[0.9]), (0.9, 0.0));
        let (m, s) = mean_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn single_seed_has_zero_sd() {
        let cfg = ExperimentConfig {
            dataset: DatasetId::Blobs,
            arch: "2-4-2".into(),
            epochs: 2,
            seeds: vec![3],
            ..Default::default()
        };
        let (train, test) = (blobs_split(Split::Train, 0), blobs_split(Split::Test, 0));
        let out = paired_compare(&cfg, &train, &test).unwrap();
        assert_eq!(out.rows.len(), 4);
        for arm in ["classic", "arp"] {
            assert_eq!(out.summary.arms[arm].sd_test_acc, 0.0);
            assert_eq!(out.summary.arms[arm].seeds, vec![3]);
        }
        let order: Vec<(&str, usize)> = out
            .rows
            .iter()
            .map(|r| (r.layer_kind.as_str(), r.epoch))
            .collect();
        assert_eq!(order, vec![("classic", 1), ("classic", 2), ("arp", 1), ("arp", 2)]);
    }
}
