//! End-to-end training, finite-difference gradient checking and the
//! repeated-split evaluation protocol.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentObjective;
use crate::descriptors::{synth_dataset, SynthConfig};
use crate::error::{Error, Result};
use crate::evalkit::{knn_classify, mean_std, split};
use crate::manifold::random_orthonormal;
use crate::optimizer::{rcg_maximize_with, IterationRecord, OptimizerConfig, TrainResult};
use crate::pairgraph::{build_graphs, LabeledDataset, PairGraphs};
use crate::spd::{auto_beta, MetricKind, Transform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub metric: MetricKind,
    pub target_dim: usize,
    /// Within-class neighbors; defaults to the smallest class size.
    pub v_w: Option<usize>,
    pub v_b: usize,
    /// Kernel bandwidth; defaults to `1/σ²` with `σ` the mean pairwise distance.
    pub beta: Option<f64>,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            metric: MetricKind::Aim,
            target_dim: 2,
            v_w: None,
            v_b: 1,
            beta: None,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate_for(&self, data: &LabeledDataset) -> Result<()> {
        let n = data.dim();
        if self.target_dim == 0 || self.target_dim >= n {
            return Err(Error::InvalidConfig(format!(
                "target_dim must satisfy 1 <= m < n = {n}, got {}",
                self.target_dim
            )));
        }
        if self.v_b == 0 {
            return Err(Error::InvalidConfig("vb must be at least 1".into()));
        }
        if self.v_w == Some(0) {
            return Err(Error::InvalidConfig("vw must be at least 1".into()));
        }
        if let Some(beta) = self.beta {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
            }
        }
        self.optimizer.validate()
    }

    pub fn resolved_v_w(&self, data: &LabeledDataset) -> usize {
        self.v_w
            .unwrap_or_else(|| data.class_sizes().into_iter().min().unwrap_or(1))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub result: TrainResult,
    pub initial: Transform,
    pub beta: f64,
    pub v_w: usize,
    pub graphs: PairGraphs,
    pub upper_bound: f64,
}

/// Random orthonormal starting point drawn from `seed`.
pub fn initial_transform(n: usize, m: usize, seed: u64) -> Result<Transform> {
    random_orthonormal(n, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn train(data: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(data, cfg, |_| {})
}

/// [`train`] with a per-iteration callback.
pub fn train_with<F: FnMut(&IterationRecord)>(
    data: &LabeledDataset,
    cfg: &TrainConfig,
    observe: F,
) -> Result<TrainOutcome> {
    cfg.validate_for(data)?;
    let v_w = cfg.resolved_v_w(data);
    let graphs = build_graphs(data, cfg.metric, v_w, cfg.v_b)?;
    let beta = match cfg.beta {
        Some(b) => b,
        None => auto_beta(cfg.metric, data.samples())?,
    };
    log::info!(
        "training {} on {} samples: n={} m={} vw={} vb={} beta={:.6e}",
        cfg.metric,
        data.len(),
        data.dim(),
        cfg.target_dim,
        v_w,
        cfg.v_b,
        beta
    );
    let objective = AlignmentObjective::new(data, &graphs, cfg.metric, beta)?;
    let initial = initial_transform(data.dim(), cfg.target_dim, cfg.optimizer.seed)?;
    let result = rcg_maximize_with(&objective, &initial, &cfg.optimizer, observe)?;
    let upper_bound = objective.upper_bound();
    Ok(TrainOutcome {
        result,
        initial,
        beta,
        v_w,
        graphs,
        upper_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    pub classes: usize,
    pub v_w: usize,
    pub v_b: usize,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            n: 10,
            m: 4,
            samples: 12,
            classes: 3,
            v_w: 2,
            v_b: 2,
            step: 1e-5,
            tolerance: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub metric: MetricKind,
    /// `‖analytic − fd‖_F / ‖fd‖_F`.
    pub relative_error: f64,
    pub analytic_norm: f64,
    pub passed: bool,
}

/// Compares the analytic Euclidean gradient of the alignment objective with
/// an entry-wise central difference at a random full-rank `W`.
pub fn gradient_check(metric: MetricKind, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if cfg.samples < 2 * cfg.classes || cfg.classes < 2 {
        return Err(Error::InvalidConfig(format!(
            "gradcheck needs at least 2 classes with 2 samples each (samples={}, classes={})",
            cfg.samples, cfg.classes
        )));
    }
    if !(cfg.step > 0.0) {
        return Err(Error::InvalidConfig(format!("gradcheck step must be positive, got {}", cfg.step)));
    }
    let per_class = cfg.samples / cfg.classes;
    let data = synth_dataset(&SynthConfig {
        n: cfg.n,
        classes: cfg.classes,
        per_class,
        noise: 0.5,
        seed: cfg.seed,
        informative_dim: None,
    })?;
    let graphs = build_graphs(&data, metric, cfg.v_w, cfg.v_b)?;
    let beta = auto_beta(metric, data.samples())?;
    let objective = AlignmentObjective::new(&data, &graphs, metric, beta)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let w = Transform::new(DMatrix::from_fn(cfg.n, cfg.m, |_, _| {
        rng.sample::<f64, _>(StandardNormal)
    }))?;
    let analytic = objective.gradient(&objective.evaluate(&w)?)?;
    let mut fd = DMatrix::zeros(cfg.n, cfg.m);
    for c in 0..cfg.m {
        for r in 0..cfg.n {
            let mut plus = w.matrix().clone();
            plus[(r, c)] += cfg.step;
            let mut minus = w.matrix().clone();
            minus[(r, c)] -= cfg.step;
            let jp = objective.value(&Transform::new(plus)?)?;
            let jm = objective.value(&Transform::new(minus)?)?;
            fd[(r, c)] = (jp - jm) / (2.0 * cfg.step);
        }
    }
    let relative_error = (&analytic - &fd).norm() / fd.norm().max(f64::MIN_POSITIVE);
    Ok(GradCheckReport {
        metric,
        relative_error,
        analytic_norm: analytic.norm(),
        passed: relative_error < cfg.tolerance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport {
    pub metric: MetricKind,
    pub baseline: Vec<f64>,
    pub learned: Vec<f64>,
}

impl ProtocolReport {
    pub fn baseline_mean_std(&self) -> (f64, f64) {
        mean_std(&self.baseline)
    }

    pub fn learned_mean_std(&self) -> (f64, f64) {
        mean_std(&self.learned)
    }

    pub fn gain(&self) -> f64 {
        self.learned_mean_std().0 - self.baseline_mean_std().0
    }
}

/// Repeats `split → train → 1-NN` with and without the learned transform.
/// Split `r` uses seed `seed + r`; training reuses the same seed.
pub fn evaluate_protocol(
    data: &LabeledDataset,
    cfg: &TrainConfig,
    repeats: usize,
    train_fraction: f64,
    k: usize,
    seed: u64,
) -> Result<ProtocolReport> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    let mut baseline = Vec::with_capacity(repeats);
    let mut learned = Vec::with_capacity(repeats);
    for r in 0..repeats as u64 {
        let split_seed = seed.wrapping_add(r);
        let (train_set, test_set) = split(data, train_fraction, split_seed)?;
        let mut run_cfg = cfg.clone();
        run_cfg.optimizer.seed = split_seed;
        let outcome = train(&train_set, &run_cfg)?;
        let base = knn_classify(&train_set, &test_set, cfg.metric, None, k)?;
        let with_w = knn_classify(&train_set, &test_set, cfg.metric, Some(&outcome.result.transform), k)?;
        log::info!(
            "split {r}: baseline {:.4} learned {:.4} ({} iterations, {})",
            base.accuracy,
            with_w.accuracy,
            outcome.result.iterations_used,
            outcome.result.stop_reason
        );
        baseline.push(base.accuracy);
        learned.push(with_w.accuracy);
    }
    Ok(ProtocolReport {
        metric: cfg.metric,
        baseline,
        learned,
    })
}

/// Repeated `split → 1-NN` with and without a fixed, already learned transform.
/// Split `r` uses seed `seed + r`.
pub fn evaluate_fixed_transform(
    data: &LabeledDataset,
    metric: MetricKind,
    w: &Transform,
    repeats: usize,
    train_fraction: f64,
    k: usize,
    seed: u64,
) -> Result<ProtocolReport> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    if w.source_dim() != data.dim() {
        return Err(Error::dims(data.dim(), w.source_dim()));
    }
    let mut baseline = Vec::with_capacity(repeats);
    let mut learned = Vec::with_capacity(repeats);
    for r in 0..repeats as u64 {
        let (train_set, test_set) = split(data, train_fraction, seed.wrapping_add(r))?;
        baseline.push(knn_classify(&train_set, &test_set, metric, None, k)?.accuracy);
        learned.push(knn_classify(&train_set, &test_set, metric, Some(w), k)?.accuracy);
    }
    Ok(ProtocolReport {
        metric,
        baseline,
        learned,
    })
}
