use arp_core::data::{blobs_split, DatasetId, Split};
use arp_core::experiment::{
    paired_compare, run_training, write_json, write_metrics, read_metrics, Arm, ExperimentConfig,
    ModeSelection, Summary,
};
use arp_core::layers::{build_network, LayerKind, RhoMode};
use arp_core::rng::{SeededRng, STREAM_INIT};

fn blobs(arch: &str, epochs: usize, seeds: Vec<u64>) -> ExperimentConfig {
    ExperimentConfig {
        dataset: DatasetId::Blobs,
        arch: arch.into(),
        epochs,
        seeds,
        ..Default::default()
    }
}

#[test]
fn both_kinds_learn_blobs() {
    let cfg = blobs("2-8-2", 500, vec![0]);
    let (train, test) = (blobs_split(Split::Train, 0), blobs_split(Split::Test, 0));
    for arm in [Arm::classic(), Arm::arp(RhoMode::Coupled), Arm::arp(RhoMode::Detached)] {
        let out = run_training(&cfg, &arm, 0, &train, &test).unwrap();
        let first = out.rows.iter().find(|r| r.train_acc >= 0.95);
        assert!(first.is_some(), "{} never reached 95%", arm.label);
    }
}

#[test]
fn arms_share_initial_parameters() {
    let cfg = ExperimentConfig::default();
    for seed in [0u64, 1, 77] {
        let build = |kind| {
            build_network(&cfg.arch, kind, &cfg.hyper(RhoMode::Coupled), &mut SeededRng::with_stream(seed, STREAM_INIT))
                .unwrap()
        };
        let (c, a) = (build(LayerKind::Classic), build(LayerKind::Arp));
        for (lc, la) in c.layers().iter().zip(a.layers()) {
            assert_eq!(lc.weights(), la.weights());
            assert_eq!(lc.bias(), la.bias());
        }
    }
}

#[test]
fn repeated_runs_write_identical_files() {
    let cfg = blobs("2-6-2", 5, vec![4]);
    let (train, test) = (blobs_split(Split::Train, 0), blobs_split(Split::Test, 0));
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = run_training(&cfg, &Arm::arp(RhoMode::Coupled), 4, &train, &test).unwrap();
        let path = dir.path().join(name);
        write_metrics(&path, 2, &out.rows).unwrap();
        texts.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

/// Welford's running mean and population variance, kept apart from the
/// two-pass formula used by the library.
fn welford(xs: &[f64]) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    (mean, (m2 / xs.len() as f64).sqrt())
}

#[test]
fn summary_matches_recomputation_from_csv() {
    let cfg = ExperimentConfig {
        rho_mode: ModeSelection::Both,
        ..blobs("2-4-2", 3, vec![0, 1, 2, 5])
    };
    let (train, test) = (blobs_split(Split::Train, 0), blobs_split(Split::Test, 0));
    let out = paired_compare(&cfg, &train, &test).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = (dir.path().join("m.csv"), dir.path().join("s.json"));
    write_metrics(&csv, 2, &out.rows).unwrap();
    write_json(&json, &out.summary).unwrap();

    let rows = read_metrics(&csv).unwrap();
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(summary.sd_convention, "population");
    assert_eq!(summary.arms.len(), 3);
    for (label, arm) in &summary.arms {
        let finals: Vec<f64> = rows
            .iter()
            .filter(|r| &r.layer_kind == label && r.epoch == 3)
            .map(|r| r.test_acc)
            .collect();
        assert_eq!(finals.len(), 4);
        let (m, sd) = welford(&finals);
        assert!((arm.mean_test_acc - m).abs() <= 1e-12, "{label}");
        assert!((arm.sd_test_acc - sd).abs() <= 1e-12, "{label}");
        assert!(arm.sd_test_acc >= 0.0);
    }
}

#[test]
fn metrics_rows_respect_bounds() {
    let cfg = blobs("2-5-3-2", 4, vec![8]);
    let (train, test) = (blobs_split(Split::Train, 0), blobs_split(Split::Test, 0));
    let out = paired_compare(&cfg, &train, &test).unwrap();
    assert_eq!(out.rows.len(), 8);
    for r in &out.rows {
        assert!((0.0..=1.0).contains(&r.train_acc) && (0.0..=1.0).contains(&r.test_acc));
        assert!(r.grad_norms.iter().all(|&g| g >= 0.0 && g.is_finite()));
        assert!(r.sat_fracs.iter().all(|&s| (0.0..=1.0).contains(&s)));
        // Test accuracy is a count over exactly the 100 blob test samples.
        let hits = r.test_acc * 100.0;
        assert!((hits - hits.round()).abs() < 1e-6);
    }
}
