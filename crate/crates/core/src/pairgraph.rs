//! Labeled datasets and supervised pair selection.
//!
//! Within-class and between-class neighbor graphs pick the sample pairs whose
//! similarities enter the alignment objective. Neighbors are ranked by the
//! training metric on the original manifold; equal distances go to the lower
//! sample index.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spd::{dist2, MetricKind, SpdMatrix};

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    samples: Vec<SpdMatrix>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledDataset {
    /// Class count is inferred as `max(label) + 1`.
    pub fn new(samples: Vec<SpdMatrix>, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        Self::with_classes(samples, labels, n_classes)
    }

    pub fn with_classes(samples: Vec<SpdMatrix>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidDataset("need at least two samples".into()));
        }
        let dim = samples[0].dim();
        if let Some(bad) = samples.iter().position(|s| s.dim() != dim) {
            return Err(Error::InvalidDataset(format!(
                "sample {bad} has dimension {}, expected {dim}",
                samples[bad].dim()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        let data = LabeledDataset {
            samples,
            labels,
            n_classes,
        };
        if let Some(empty) = data.class_sizes().iter().position(|&s| s == 0) {
            return Err(Error::InvalidDataset(format!("class {empty} has no samples")));
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn samples(&self) -> &[SpdMatrix] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> &SpdMatrix {
        &self.samples[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_classes];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Samples at `indices`, keeping the class count.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::with_classes(
            indices.iter().map(|&i| self.samples[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.n_classes,
        )
    }
}

/// Binary within-class (`Gw`) and between-class (`Gb`) masks.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGraphs {
    n: usize,
    within: Vec<bool>,
    between: Vec<bool>,
    pairs: Vec<(usize, usize)>,
}

impl PairGraphs {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn within(&self, i: usize, j: usize) -> bool {
        self.within[i * self.n + j]
    }

    pub fn between(&self, i: usize, j: usize) -> bool {
        self.between[i * self.n + j]
    }

    /// `G = Gw + Gb`; the two graphs are disjoint so this is their union.
    pub fn selected(&self, i: usize, j: usize) -> bool {
        self.within(i, j) || self.between(i, j)
    }

    /// Selected unordered pairs `(i, j)` with `i < j`, in lexicographic order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn within_degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.within(i, j)).count()
    }

    pub fn between_degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.between(i, j)).count()
    }

    pub fn within_mask(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| f64::from(u8::from(self.within(i, j))))
    }

    pub fn between_mask(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| f64::from(u8::from(self.between(i, j))))
    }

    pub fn selection_mask(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| f64::from(u8::from(self.selected(i, j))))
    }
}

/// All pairwise squared distances on the original manifold.
pub fn distance_matrix(data: &LabeledDataset, metric: MetricKind) -> Result<DMatrix<f64>> {
    let n = data.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| dist2(metric, data.sample(i), data.sample(j)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut d = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    Ok(d)
}

pub fn build_graphs(
    data: &LabeledDataset,
    metric: MetricKind,
    v_w: usize,
    v_b: usize,
) -> Result<PairGraphs> {
    check_class_sizes(data)?;
    let d = distance_matrix(data, metric)?;
    build_graphs_from_distances(data.labels(), &d, v_w, v_b)
}

fn check_class_sizes(data: &LabeledDataset) -> Result<()> {
    match data.class_sizes().iter().enumerate().find(|(_, &s)| s < 2) {
        Some((class, &size)) => Err(Error::InsufficientClassSize { class, size }),
        None => Ok(()),
    }
}

/// Graph construction from a precomputed symmetric distance matrix.
///
/// Each sample takes its `v_w` nearest same-class and `v_b` nearest
/// different-class neighbors (fewer if not available); an edge exists when
/// either endpoint selected the other.
pub fn build_graphs_from_distances(
    labels: &[usize],
    dist: &DMatrix<f64>,
    v_w: usize,
    v_b: usize,
) -> Result<PairGraphs> {
    let n = labels.len();
    if dist.shape() != (n, n) {
        return Err(Error::dims(format!("{n}x{n}"), format!("{}x{}", dist.nrows(), dist.ncols())));
    }
    if v_w == 0 || v_b == 0 {
        return Err(Error::InvalidConfig("v_w and v_b must be at least 1".into()));
    }
    let mut within = vec![false; n * n];
    let mut between = vec![false; n * n];
    for i in 0..n {
        let mut same: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        let mut other: Vec<usize> = (0..n).filter(|&j| labels[j] != labels[i]).collect();
        let by_distance = |&a: &usize, &b: &usize| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b));
        same.sort_by(by_distance);
        other.sort_by(by_distance);
        for &j in same.iter().take(v_w) {
            within[i * n + j] = true;
            within[j * n + i] = true;
        }
        for &j in other.iter().take(v_b) {
            between[i * n + j] = true;
            between[j * n + i] = true;
        }
    }
    let pairs = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| within[i * n + j] || between[i * n + j])
        .collect();
    Ok(PairGraphs {
        n,
        within,
        between,
        pairs,
    })
}

/// `U = I − 11ᵀ/N`.
pub fn centering_matrix(n: usize) -> DMatrix<f64> {
    let inv = if n == 0 { 0.0 } else { 1.0 / n as f64 };
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - inv } else { -inv })
}

/// `U M U` computed by removing row, column and grand means.
pub fn center(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = m.row_iter().map(|r| r.sum() / nf).collect();
    let col_means: Vec<f64> = m.column_iter().map(|c| c.sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| m[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Raw label Gram matrix `YYᵀ`: 1 where two samples share a class.
pub fn label_gram(labels: &[usize]) -> DMatrix<f64> {
    let n = labels.len();
    DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(labels[i] == labels[j])))
}

/// Centered label similarity `U (YYᵀ) U`.
pub fn label_similarity(data: &LabeledDataset) -> DMatrix<f64> {
    center(&label_gram(data.labels()))
}
