//! k-NN classification under the SPD metrics and stratified splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pairgraph::LabeledDataset;
use crate::spd::{dist2, map_down, MetricKind, SpdMatrix, Transform};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `NaN` for classes without test samples.
    pub per_class_accuracy: Vec<f64>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub distances_computed: usize,
    pub metric: MetricKind,
    pub used_transform: bool,
}

fn mapped(data: &LabeledDataset, w: Option<&Transform>) -> Result<Vec<SpdMatrix>> {
    match w {
        None => Ok(data.samples().to_vec()),
        Some(w) => {
            if w.source_dim() != data.dim() {
                return Err(Error::dims(data.dim(), w.source_dim()));
            }
            data.samples().par_iter().map(|x| map_down(x, w)).collect()
        }
    }
}

/// Majority vote among the `k` nearest training samples.
///
/// Distance ties go to the lower training index; vote ties go to the lowest
/// class label.
pub fn knn_classify(
    train: &LabeledDataset,
    test: &LabeledDataset,
    metric: MetricKind,
    w: Option<&Transform>,
    k: usize,
) -> Result<EvalReport> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if train.dim() != test.dim() {
        return Err(Error::dims(train.dim(), test.dim()));
    }
    let train_x = mapped(train, w)?;
    let test_x = mapped(test, w)?;
    let classes = train.n_classes().max(test.n_classes());

    let predictions: Vec<usize> = test_x
        .par_iter()
        .map(|x| {
            let mut dists = train_x
                .iter()
                .map(|t| dist2(metric, x, t))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .enumerate()
                .collect::<Vec<_>>();
            dists.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let mut votes = vec![0usize; classes];
            for &(idx, _) in dists.iter().take(k) {
                votes[train.label(idx)] += 1;
            }
            let best = votes.iter().copied().max().unwrap_or(0);
            Ok(votes.iter().position(|&v| v == best).unwrap_or(0))
        })
        .collect::<Result<_>>()?;

    let mut confusion = vec![vec![0usize; classes]; classes];
    for (i, &p) in predictions.iter().enumerate() {
        confusion[test.label(i)][p] += 1;
    }
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                f64::NAN
            } else {
                row[c] as f64 / total as f64
            }
        })
        .collect();
    Ok(EvalReport {
        accuracy: correct as f64 / test.len() as f64,
        per_class_accuracy,
        confusion,
        distances_computed: train.len() * test.len(),
        metric,
        used_transform: w.is_some(),
    })
}

/// Stratified train/test index split.
///
/// Each class of size `s` contributes `round(fraction·s)` training samples,
/// clamped to `[1, s − 1]` so both sides see every class.
pub fn split_indices(data: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..data.n_classes() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.label(i) == class).collect();
        let size = members.len();
        if size < 2 {
            return Err(Error::InsufficientClassSize { class, size });
        }
        members.shuffle(&mut rng);
        let take = ((train_fraction * size as f64).round() as usize).clamp(1, size - 1);
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(data: &LabeledDataset, train_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(data, train_fraction, seed)?;
    Ok((data.subset(&train)?, data.subset(&test)?))
}

/// Mean and sample standard deviation (`0` for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
