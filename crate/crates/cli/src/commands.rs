use std::fs;
use std::path::{Path, PathBuf};

use spdsl::config::{BetaMode, RunConfig};
use spdsl::descriptors::{cov_descriptor_with, synth_dataset, DescriptorOptions, SynthConfig};
use spdsl::io::{self, ManifestEntry};
use spdsl::pipeline::{self, GradCheckConfig, ProtocolReport};
use spdsl::spd::MetricKind;
use spdsl::Error;

use crate::args::{DescribeArgs, EvalArgs, GradcheckArgs, RunArgs, SynthArgs, TrainArgs};

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_GRADCHECK: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    fn prefixed(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_VALIDATION },
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn resolve_run(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &args.dataset {
        cfg.dataset = Some(d.clone());
    }
    if let Some(m) = args.metric {
        cfg.metric = m;
    }
    if let Some(m) = args.target_dim {
        cfg.target_dim = Some(m);
    }
    if let Some(v) = args.vw {
        cfg.v_w = Some(v);
    }
    if let Some(v) = args.vb {
        cfg.v_b = v;
    }
    if let Some(b) = &args.beta {
        cfg.beta = BetaMode::parse(b)?;
    }
    if let Some(it) = args.max_iters {
        cfg.optimizer.max_iters = it;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dataset_path(cfg: &RunConfig) -> Result<&Path, Failure> {
    cfg.dataset
        .as_deref()
        .ok_or_else(|| Failure::validation("dataset: required (set it in the config or with --dataset)"))
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::validation(format!("{}: {e}", dir.display())))
}

/// Runs the finite-difference check on `instances` seeds; returns the worst error.
fn worst_gradient_error(metric: MetricKind, base: &GradCheckConfig, instances: u64) -> Result<f64, Failure> {
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let cfg = GradCheckConfig {
            seed: base.seed.wrapping_add(i),
            ..*base
        };
        let report = pipeline::gradient_check(metric, &cfg)?;
        worst = worst.max(report.relative_error);
    }
    Ok(worst)
}

pub fn train(args: &TrainArgs) -> CmdResult {
    let cfg = resolve_run(&args.run)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Failure::validation("out: required (set output_dir in the config or pass --out)"))?;
    let loaded = io::load_dataset(dataset_path(&cfg)?)?;
    let train_cfg = cfg.train_config(loaded.data.dim())?;

    if args.strict {
        let check = GradCheckConfig {
            tolerance: 1e-4,
            seed: cfg.seed,
            ..Default::default()
        };
        let worst = worst_gradient_error(train_cfg.metric, &check, 1)?;
        if worst > check.tolerance {
            return Err(Failure {
                code: EXIT_GRADCHECK,
                message: format!(
                    "gradient check failed for {}: relative error {worst:.3e} > {:.0e}; refusing to train",
                    train_cfg.metric, check.tolerance
                ),
            });
        }
        log::info!("gradient check passed ({worst:.3e})");
    }

    create_dir(&out)?;
    let outcome = pipeline::train_with(&loaded.data, &train_cfg, |r| {
        log::info!("iter {:>3}  J {:.10}  |grad| {:.3e}  step {:.3e}", r.iter, r.value, r.grad_norm, r.step);
    })?;
    let w_path = out.join("transform.txt");
    let trace_path = out.join("trace.txt");
    io::write_transform(&w_path, &outcome.result.transform)?;
    io::write_trace(&trace_path, &outcome.result.trace)?;

    println!("metric: {}", train_cfg.metric);
    println!("samples: {}", loaded.data.len());
    println!("classes: {}", loaded.data.n_classes());
    println!("dims: {} -> {}", loaded.data.dim(), train_cfg.target_dim);
    println!("vw: {}", outcome.v_w);
    println!("vb: {}", train_cfg.v_b);
    println!("beta: {:.6e}", outcome.beta);
    println!("iterations: {}", outcome.result.iterations_used);
    println!("stop_reason: {}", outcome.result.stop_reason);
    println!("initial_J: {:.10}", outcome.result.trace[0].value);
    println!("final_J: {:.10}", outcome.result.final_value());
    println!("upper_bound: {:.10}", outcome.upper_bound);
    println!("transform: {}", w_path.display());
    println!("trace: {}", trace_path.display());
    Ok(())
}

fn print_protocol(report: &ProtocolReport, source: &str, fraction: f64, k: usize) {
    println!("metric: {}", report.metric);
    println!("splits: {}", report.baseline.len());
    println!("train_fraction: {fraction}");
    println!("k: {k}");
    println!("transform: {source}");
    for (r, (b, l)) in report.baseline.iter().zip(&report.learned).enumerate() {
        println!("split {r}: baseline {b:.4} learned {l:.4}");
    }
    let (bm, bs) = report.baseline_mean_std();
    let (lm, ls) = report.learned_mean_std();
    println!("baseline_accuracy: {:.2} ± {:.2}", 100.0 * bm, 100.0 * bs);
    println!("learned_accuracy: {:.2} ± {:.2}", 100.0 * lm, 100.0 * ls);
    println!("gain: {:+.2}", 100.0 * report.gain());
}

pub fn eval(args: &EvalArgs) -> CmdResult {
    let mut cfg = resolve_run(&args.run)?;
    if let Some(r) = args.repeats {
        cfg.eval.repeats = r;
    }
    if let Some(f) = args.train_fraction {
        cfg.eval.train_fraction = f;
    }
    if let Some(k) = args.k {
        cfg.eval.k = k;
    }
    cfg.validate()?;
    let loaded = io::load_dataset(dataset_path(&cfg)?)?;
    let settings = &cfg.eval;

    let (report, source) = match &args.transform {
        Some(path) => {
            let w = io::read_transform(path)?;
            let report = pipeline::evaluate_fixed_transform(
                &loaded.data,
                cfg.metric,
                &w,
                settings.repeats,
                settings.train_fraction,
                settings.k,
                cfg.seed,
            )?;
            (report, path.display().to_string())
        }
        None => {
            let train_cfg = cfg.train_config(loaded.data.dim())?;
            let report = pipeline::evaluate_protocol(
                &loaded.data,
                &train_cfg,
                settings.repeats,
                settings.train_fraction,
                settings.k,
                cfg.seed,
            )?;
            (report, "learned per split".to_string())
        }
    };
    print_protocol(&report, &source, settings.train_fraction, settings.k);
    Ok(())
}

pub fn gradcheck(args: &GradcheckArgs) -> CmdResult {
    let metrics: Vec<MetricKind> = match args.metric {
        Some(m) => vec![m],
        None => MetricKind::ALL.to_vec(),
    };
    if args.instances == 0 {
        return Err(Failure::validation("instances: must be at least 1"));
    }
    if args.m == 0 || args.m >= args.n {
        return Err(Failure::validation(format!("m: must satisfy 1 <= m < n = {}, got {}", args.n, args.m)));
    }
    let base = GradCheckConfig {
        n: args.n,
        m: args.m,
        samples: args.samples,
        classes: args.classes,
        tolerance: args.tolerance,
        seed: args.seed,
        ..Default::default()
    };
    let mut failed = Vec::new();
    for metric in metrics {
        let worst = worst_gradient_error(metric, &base, args.instances)?;
        let ok = worst <= args.tolerance;
        println!(
            "{metric}: max_relative_error {worst:.3e} over {} instances: {}",
            args.instances,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failed.push(metric.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_GRADCHECK,
            message: format!("gradient check failed for {}", failed.join(", ")),
        })
    }
}

pub fn synth(args: &SynthArgs) -> CmdResult {
    let cfg = SynthConfig {
        n: args.n,
        classes: args.classes,
        per_class: args.per_class,
        noise: args.noise,
        seed: args.seed,
        informative_dim: args.informative_dim,
    };
    let data = synth_dataset(&cfg)?;
    create_dir(&args.out)?;
    let manifest = io::write_dataset(&args.out, &data)?;
    println!("samples: {}", data.len());
    println!("manifest: {}", manifest.display());
    Ok(())
}

pub fn describe(args: &DescribeArgs) -> CmdResult {
    let manifest = io::read_manifest(&args.features)?;
    let opts = DescriptorOptions {
        augment_mean: args.augment_mean,
        ridge_floor: if args.strict { None } else { DescriptorOptions::default().ridge_floor },
        ..Default::default()
    };
    let samples_dir = args.out.join("samples");
    create_dir(&samples_dir)?;
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let path = manifest.resolve(entry);
        let fs = io::read_feature_set(&path)?;
        let x = cov_descriptor_with(&fs, &opts).map_err(|e| Failure::from(e).prefixed(&path))?;
        let rel = PathBuf::from("samples").join(format!("{}.mat", entry.id));
        io::write_matrix(&args.out.join(&rel), x.matrix())?;
        entries.push(ManifestEntry {
            id: entry.id.clone(),
            label: entry.label.clone(),
            path: rel,
        });
    }
    let out_manifest = args.out.join("manifest.txt");
    io::write_manifest(&out_manifest, &entries)?;
    println!("samples: {}", entries.len());
    println!("manifest: {}", out_manifest.display());
    Ok(())
}
