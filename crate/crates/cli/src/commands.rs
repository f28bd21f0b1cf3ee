use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arp_core::data::{blobs_split, load_dataset, Dataset, DatasetId, Split};
use arp_core::experiment::{
    init_gradient_probe, paired_compare, run_training_observed, write_json, write_metrics,
    ExperimentConfig, ModeSelection, DEFAULT_ARCH_CIFAR, DEFAULT_ARCH_MNIST,
};
use arp_core::gradcheck::{self, GradcheckConfig};
use arp_core::layers::RhoMode;
use arp_core::{Error, Result};

use crate::{CompareArgs, GradcheckArgs, InspectArgs, ProbeArgs, RunArgs, TrainArgs};

/// Data directory used when neither the flag, the environment nor the
/// config file names one.
const DEFAULT_DATA_DIR: &str = "data";

pub fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        2
    } else if e.is_data() {
        3
    } else {
        1
    }
}

fn default_arch(id: DatasetId) -> &'static str {
    match id {
        DatasetId::Mnist | DatasetId::Fashion => DEFAULT_ARCH_MNIST,
        DatasetId::Cifar10 => DEFAULT_ARCH_CIFAR,
        DatasetId::Blobs => "2-8-2",
    }
}

/// Merges the config file (or the defaults) with the flags and validates
/// the result. `seed_count` replaces the seed list with
/// `seed..seed + seed_count`.
fn resolve(run: &RunArgs, seed_count: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = match &run.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = run.dataset {
        cfg.dataset = d;
    }
    match &run.arch {
        Some(a) => cfg.arch = a.clone(),
        // An untouched default follows the dataset.
        None if cfg.arch == DEFAULT_ARCH_MNIST => cfg.arch = default_arch(cfg.dataset).into(),
        None => {}
    }
    if let Some(dir) = &run.data_dir {
        cfg.data_dir = Some(dir.clone());
    }
    if let Some(v) = run.l_cap {
        cfg.l_cap = v;
    }
    if let Some(v) = run.xq {
        cfg.xq_value = v;
    }
    if let Some(v) = run.eps {
        cfg.eps = v;
    }
    if let Some(v) = run.mode {
        cfg.rho_mode = v;
    }
    if let Some(v) = run.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = run.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = run.lr {
        cfg.lr = v;
    }
    if let Some(v) = run.optimizer {
        cfg.optimizer = v;
    }
    if run.seed.is_some() || seed_count.is_some() {
        let base = run.seed.or(cfg.seeds.first().copied()).unwrap_or(0);
        let n = seed_count.unwrap_or(cfg.seeds.len()) as u64;
        cfg.seeds = (base..base.saturating_add(n)).collect();
    }
    cfg.timing |= run.timing;
    cfg.validate()?;
    Ok(cfg)
}

fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.data_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
}

fn load_split(id: DatasetId, dir: &Path, split: Split) -> Result<Dataset> {
    match id {
        DatasetId::Blobs => Ok(blobs_split(split, 0)),
        _ => load_dataset(id, dir, split),
    }
}

fn load_pair(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let dir = data_dir(cfg);
    Ok((
        load_split(cfg.dataset, &dir, Split::Train)?,
        load_split(cfg.dataset, &dir, Split::Test)?,
    ))
}

fn echo_config(cfg: &ExperimentConfig) {
    let seeds = match cfg.seeds.as_slice() {
        [one] => one.to_string(),
        [first, .., last] if (last - first) as usize + 1 == cfg.seeds.len() => format!("{first}..={last}"),
        all => format!("{all:?}"),
    };
    println!(
        "dataset={} arch={} L={} xq={} eps={:e} mode={} optimizer={} lr={} batch={} epochs={} seeds={seeds}",
        cfg.dataset,
        cfg.arch,
        cfg.l_cap,
        cfg.xq_value,
        cfg.eps,
        match cfg.rho_mode {
            ModeSelection::Coupled => "coupled",
            ModeSelection::Detached => "detached",
            ModeSelection::Both => "both",
        },
        match cfg.optimizer {
            arp_core::optim::OptimizerKind::Adam => "adam",
            arp_core::optim::OptimizerKind::Sgd => "sgd",
        },
        cfg.lr,
        cfg.batch_size,
        cfg.epochs,
    );
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    parts.join(" ")
}

pub fn train(args: TrainArgs) -> Result<ExitCode> {
    let mut cfg = resolve(&args.run, args.run.seed.map(|_| 1))?;
    if let Some(kind) = args.layer {
        cfg.layer_kind = kind;
    }
    let arm = cfg.train_arm()?;
    let seed = cfg.seeds[0];
    let out = args
        .out
        .or_else(|| cfg.metrics_path.clone())
        .unwrap_or_else(|| PathBuf::from("metrics.csv"));
    let (train, test) = load_pair(&cfg)?;

    let verbose = args.verbose;
    let outcome = run_training_observed(&cfg, &arm, seed, &train, &test, &mut |s| {
        if verbose {
            eprintln!(
                "epoch {} batch {} size {} loss {:.6} grad_norms {} sat_fracs {}",
                s.epoch,
                s.batch,
                s.size,
                s.loss,
                fmt_list(&s.grad_norms),
                fmt_list(&s.sat_fracs)
            );
        }
    })?;
    write_metrics(&out, outcome.model.depth(), &outcome.rows)?;
    let last = outcome.rows.last().expect("at least one epoch");
    println!(
        "final test accuracy {:.4} ({}, seed {seed}, {} epochs) -> {}",
        last.test_acc,
        arm.label,
        cfg.epochs,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn compare(args: CompareArgs) -> Result<ExitCode> {
    let cfg = resolve(&args.run, args.seeds)?;
    let out = args
        .out
        .or_else(|| cfg.metrics_path.clone())
        .unwrap_or_else(|| PathBuf::from("compare_metrics.csv"));
    let summary_path = args
        .summary
        .or_else(|| cfg.summary_path.clone())
        .unwrap_or_else(|| PathBuf::from("summary.json"));
    echo_config(&cfg);
    let (train, test) = load_pair(&cfg)?;
    let result = paired_compare(&cfg, &train, &test)?;
    write_metrics(&out, cfg.architecture()?.depth(), &result.rows)?;
    write_json(&summary_path, &result.summary)?;

    println!("{:<14} {:>13} {:>11} {:>6}", "arm", "mean_test_acc", "sd_test_acc", "seeds");
    for arm in cfg.compare_arms() {
        let s = &result.summary.arms[&arm.label];
        println!(
            "{:<14} {:>13.4} {:>11.4} {:>6}",
            arm.label,
            s.mean_test_acc,
            s.sd_test_acc,
            s.seeds.len()
        );
    }
    println!("metrics -> {}, summary -> {}", out.display(), summary_path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn probe(args: ProbeArgs) -> Result<ExitCode> {
    let cfg = resolve(&args.run, args.seeds)?;
    cfg.single_mode()?;
    let train = load_split(cfg.dataset, &data_dir(&cfg), Split::Train)?;
    let report = init_gradient_probe(&cfg, &train)?;
    write_json(&args.out, &report)?;
    for s in &report.seeds {
        println!("seed {}", s.seed);
        println!("  classic ‖dW‖  {}", fmt_list(&s.classic.grad_norms));
        println!("  arp     ‖dW‖  {}", fmt_list(&s.arp.grad_norms));
        println!("  arp/classic   {}", fmt_list(&s.ratios));
    }
    println!(
        "classic layer-1 norm below last hidden layer on {}/{} seeds -> {}",
        report.classic_vanishing_count,
        report.seeds.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn gradcheck(args: GradcheckArgs) -> Result<ExitCode> {
    if args.instances == 0 || args.batch == 0 || args.max_coords == 0 {
        return Err(Error::Config(
            "--instances, --batch and --max-coords must be positive".into(),
        ));
    }
    let modes = match args.mode {
        ModeSelection::Coupled => vec![RhoMode::Coupled],
        ModeSelection::Detached => vec![RhoMode::Detached],
        ModeSelection::Both => vec![RhoMode::Coupled, RhoMode::Detached],
    };
    let config = GradcheckConfig {
        seed: args.seed,
        instances: args.instances,
        modes,
        network_arch: args.arch,
        network_batch: args.batch,
        max_network_coords: args.max_coords,
        ..Default::default()
    };
    let report = gradcheck::run(&config)?;
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    println!("{:<28} {:>8} {:>12} {:>14}", "component", "coords", "instances", "worst_rel_err");
    for c in &report.components {
        println!(
            "{:<28} {:>8} {:>12} {:>14.3e}",
            c.component,
            c.coordinates,
            c.instances,
            c.worst_error()
        );
    }
    if report.passed() {
        println!(
            "PASS, worst rel err {:.3e} < {:e}",
            report.worst_error(),
            report.tolerance
        );
        return Ok(ExitCode::SUCCESS);
    }
    for c in report.failures() {
        if let Some(w) = &c.worst {
            println!(
                "FAIL {}: instance {} {}[{}, {}] analytic {:e} numeric {:e} rel err {:e}",
                c.component, w.instance, w.tensor, w.row, w.col, w.analytic, w.numeric, w.error
            );
        }
    }
    Ok(ExitCode::from(1))
}

pub fn inspect(args: InspectArgs) -> Result<ExitCode> {
    let dir = args.data_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
    let ds = load_split(args.dataset, &dir, args.split)?;
    let shape = match args.dataset {
        DatasetId::Mnist | DatasetId::Fashion => "28x28",
        DatasetId::Cifar10 => "32x32x3",
        DatasetId::Blobs => "2",
    };
    let (lo, hi) = ds.value_range();
    let hist: Vec<String> = ds
        .label_histogram()
        .iter()
        .enumerate()
        .map(|(l, n)| format!("{l}:{n}"))
        .collect();
    println!("dataset  {} ({})", ds.name, args.split.as_str());
    println!("samples  {}", ds.len());
    println!("shape    {shape} ({} features)", ds.dim());
    println!("labels   {}", hist.join(" "));
    println!("range    [{lo}, {hi}]");
    Ok(ExitCode::SUCCESS)
}
