#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spdsl::pairgraph::LabeledDataset;
use spdsl::spd::{SpdMatrix, Transform};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `AAᵀ/n + 0.5·I` with Gaussian `A`: well conditioned, spectrum of order one.
pub fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> SpdMatrix {
    let a = gaussian(n, n, rng);
    SpdMatrix::new(&a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5).unwrap()
}

pub fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = gaussian(n, n, rng);
    (&a + a.transpose()) * 0.5
}

pub fn random_transform(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Transform {
    Transform::new(gaussian(n, m, rng)).unwrap()
}

pub fn random_orthogonal(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    gaussian(m, m, rng).qr().q()
}

pub fn skew(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = gaussian(m, m, rng);
    &a - a.transpose()
}

/// `classes` classes of `per_class` random SPD matrices.
pub fn random_dataset(n: usize, classes: usize, per_class: usize, rng: &mut ChaCha8Rng) -> LabeledDataset {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for c in 0..classes {
        for _ in 0..per_class {
            samples.push(random_spd(n, rng));
            labels.push(c);
        }
    }
    LabeledDataset::new(samples, labels).unwrap()
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
