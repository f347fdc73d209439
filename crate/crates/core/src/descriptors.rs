//! SPD descriptors from raw feature sets, and a synthetic labeled SPD generator.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::random_orthogonal;
use crate::matfun::{self, symmetrize};
use crate::pairgraph::LabeledDataset;
use crate::spd::SpdMatrix;

/// Ordered frames of `d`-dimensional features (one video, one image region set, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    frames: DMatrix<f64>,
}

impl FeatureSet {
    pub fn new(frames: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::DegenerateInput("feature set has no frames".into()));
        };
        let d = first.len();
        if d == 0 {
            return Err(Error::DegenerateInput("feature dimension is zero".into()));
        }
        if let Some(bad) = frames.iter().position(|f| f.len() != d) {
            return Err(Error::DegenerateInput(format!(
                "frame {bad} has {} values, expected {d}",
                frames[bad].len()
            )));
        }
        if frames.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("feature set contains non-finite values".into()));
        }
        let rows = frames.len();
        Ok(FeatureSet {
            frames: DMatrix::from_fn(rows, d, |r, c| frames[r][c]),
        })
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn mean(&self) -> DVector<f64> {
        self.frames.row_mean().transpose()
    }

    /// Unbiased sample covariance (denominator `frames − 1`).
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let count = self.len();
        if count < 2 {
            return Err(Error::DegenerateInput(format!(
                "covariance needs at least 2 frames, got {count}"
            )));
        }
        let mean = self.frames.row_mean();
        let mut centered = self.frames.clone();
        for mut row in centered.row_iter_mut() {
            row -= &mean;
        }
        Ok(symmetrize(&(centered.transpose() * &centered / (count - 1) as f64)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorOptions {
    /// Append the mean as in `[[Σ + μμᵀ, μ], [μᵀ, 1]]`.
    pub augment_mean: bool,
    /// Ridge `δ = ridge_scale · tr(Σ)`.
    pub ridge_scale: f64,
    /// Ridge used when `tr(Σ) = 0`; `None` turns that case into an error.
    pub ridge_floor: Option<f64>,
}

impl Default for DescriptorOptions {
    fn default() -> Self {
        DescriptorOptions {
            augment_mean: false,
            ridge_scale: 1e-3,
            ridge_floor: Some(1e-8),
        }
    }
}

/// Ridge-regularized covariance descriptor, optionally mean-augmented.
pub fn cov_descriptor(fs: &FeatureSet, augment_mean: bool) -> Result<SpdMatrix> {
    cov_descriptor_with(
        fs,
        &DescriptorOptions {
            augment_mean,
            ..Default::default()
        },
    )
}

pub fn cov_descriptor_with(fs: &FeatureSet, opts: &DescriptorOptions) -> Result<SpdMatrix> {
    let mut sigma = fs.covariance()?;
    let trace = sigma.trace();
    let ridge = if trace > 0.0 {
        opts.ridge_scale * trace
    } else {
        match opts.ridge_floor {
            Some(floor) => {
                log::warn!("feature set has zero covariance; using ridge floor {floor:e}");
                floor
            }
            None => {
                return Err(Error::DegenerateInput(
                    "covariance trace is zero (all frames identical)".into(),
                ))
            }
        }
    };
    for i in 0..sigma.nrows() {
        sigma[(i, i)] += ridge;
    }
    if !opts.augment_mean {
        return SpdMatrix::new(sigma);
    }

    let d = fs.dim();
    let mu = fs.mean();
    let mut block = DMatrix::zeros(d + 1, d + 1);
    block
        .view_mut((0, 0), (d, d))
        .copy_from(&(&sigma + &mu * mu.transpose()));
    block.view_mut((0, d), (d, 1)).copy_from(&mu);
    block.view_mut((d, 0), (1, d)).copy_from(&mu.transpose());
    block[(d, d)] = 1.0;
    SpdMatrix::new(block)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Ambient SPD dimension.
    pub n: usize,
    pub classes: usize,
    pub per_class: usize,
    /// Scale of the symmetric perturbation in the matrix exponent.
    pub noise: f64,
    pub seed: u64,
    /// Dimension of the subspace in which class prototypes differ; `None`
    /// means every prototype gets an independent full rotation.
    #[serde(default)]
    pub informative_dim: Option<usize>,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.classes < 2 || self.per_class < 2 {
            return Err(Error::InvalidConfig(format!(
                "synth: need n >= 2, classes >= 2, per_class >= 2 (got {}, {}, {})",
                self.n, self.classes, self.per_class
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidConfig(format!("synth.noise must be >= 0, got {}", self.noise)));
        }
        if let Some(r) = self.informative_dim {
            if r == 0 || r > self.n {
                return Err(Error::InvalidConfig(format!(
                    "synth.informative_dim must lie in 1..={}, got {r}",
                    self.n
                )));
            }
        }
        Ok(())
    }
}

/// `exp(linspace(−1, 1, k))`.
fn log_spaced(k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    (0..k)
        .map(|i| (-1.0 + 2.0 * i as f64 / (k - 1) as f64).exp())
        .collect()
}

/// Class prototypes `P_k = Q_k D Q_kᵀ` and per-sample perturbations
/// `P_k^{1/2} exp(noise·S) P_k^{1/2}` with a random symmetric `S`.
///
/// With `informative_dim = r`, `Q_k = Q₀ · blockdiag(R_k, I)` for a shared
/// random rotation `Q₀` and class-specific `r × r` rotations `R_k`, so the
/// classes differ only inside an `r`-dimensional subspace.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<LabeledDataset> {
    cfg.validate()?;
    let n = cfg.n;
    let r = cfg.informative_dim.unwrap_or(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut spectrum = log_spaced(r);
    spectrum.extend(log_spaced(n - r).into_iter().take(n - r));
    let d = DMatrix::from_diagonal(&DVector::from_vec(spectrum));
    let shared = random_orthogonal(n, &mut rng);

    let mut samples = Vec::with_capacity(cfg.classes * cfg.per_class);
    let mut labels = Vec::with_capacity(cfg.classes * cfg.per_class);
    for class in 0..cfg.classes {
        let mut q = DMatrix::identity(n, n);
        q.view_mut((0, 0), (r, r)).copy_from(&random_orthogonal(r, &mut rng));
        let q = &shared * q;
        let proto = symmetrize(&(&q * &d * q.transpose()));
        let half = matfun::spd_sqrt(&proto)?;
        for _ in 0..cfg.per_class {
            let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let s = symmetrize(&a) * (cfg.noise / (n as f64).sqrt());
            let x = symmetrize(&(&half * matfun::spd_exp(&s)? * &half));
            samples.push(SpdMatrix::new(x)?);
            labels.push(class);
        }
    }
    LabeledDataset::with_classes(samples, labels, cfg.classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_frames_covariance() {
        let d = 4;
        let frames: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        let fs = FeatureSet::new(frames).unwrap();
        // unbiased: Σ = (I − 11ᵀ/d) / (d − 1)
        let sigma = DMatrix::from_fn(d, d, |i, j| {
            (f64::from(u8::from(i == j)) - 1.0 / d as f64) / (d - 1) as f64
        });
        assert!((fs.covariance().unwrap() - &sigma).amax() < 1e-15);
        let ridge = 1e-3 * sigma.trace();
        let got = cov_descriptor(&fs, false).unwrap();
        let want = sigma + DMatrix::identity(d, d) * ridge;
        assert!((got.matrix() - want).amax() < 1e-15);
    }

    #[test]
    fn augmentation_with_zero_mean_identity_covariance() {
        let frames = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let fs = FeatureSet::new(frames).unwrap();
        let opts = DescriptorOptions {
            augment_mean: true,
            ridge_scale: 0.0,
            ridge_floor: None,
        };
        let got = cov_descriptor_with(&fs, &opts).unwrap();
        // Σ = (2/3) I, μ = 0
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0 / 3.0, 2.0 / 3.0, 1.0]));
        assert!((got.matrix() - want).amax() < 1e-15);
    }

    #[test]
    fn augmented_block_layout() {
        let frames = vec![vec![1.0, 2.0], vec![3.0, 1.0], vec![2.0, 6.0]];
        let fs = FeatureSet::new(frames).unwrap();
        let got = cov_descriptor(&fs, true).unwrap();
        let plain = cov_descriptor(&fs, false).unwrap();
        let mu = fs.mean();
        assert_eq!(got.dim(), 3);
        assert_eq!(got.matrix()[(2, 2)], 1.0);
        assert!((got.matrix()[(0, 2)] - mu[0]).abs() < 1e-15);
        let top = got.matrix().view((0, 0), (2, 2)).into_owned();
        assert!((top - plain.matrix() - &mu * mu.transpose()).amax() < 1e-14);
    }

    #[test]
    fn ridge_bounds_smallest_eigenvalue() {
        // rank-deficient covariance: frames on a line
        let frames: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)]).collect();
        let fs = FeatureSet::new(frames).unwrap();
        let delta = 1e-3 * fs.covariance().unwrap().trace();
        let x = cov_descriptor(&fs, false).unwrap();
        let lmin = matfun::sym_eig(x.matrix()).unwrap().min_eigenvalue();
        assert!(lmin >= delta * (1.0 - 1e-9));
    }

    #[test]
    fn identical_frames_use_floor_or_fail() {
        let fs = FeatureSet::new(vec![vec![1.0, 2.0]; 3]).unwrap();
        let x = cov_descriptor(&fs, false).unwrap();
        assert!((x.matrix() - DMatrix::identity(2, 2) * 1e-8).amax() < 1e-20);
        let strict = DescriptorOptions {
            ridge_floor: None,
            ..Default::default()
        };
        assert!(matches!(cov_descriptor_with(&fs, &strict), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn feature_set_validation() {
        assert!(FeatureSet::new(vec![]).is_err());
        assert!(FeatureSet::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(FeatureSet::new(vec![vec![f64::NAN]]).is_err());
        let one = FeatureSet::new(vec![vec![1.0, 2.0]]).unwrap();
        assert!(cov_descriptor(&one, false).is_err());
    }

    fn cfg(noise: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            n: 6,
            classes: 3,
            per_class: 4,
            noise,
            seed,
            informative_dim: Some(3),
        }
    }

    #[test]
    fn synth_is_deterministic_and_spd() {
        let a = synth_dataset(&cfg(0.5, 9)).unwrap();
        let b = synth_dataset(&cfg(0.5, 9)).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_eq!(a.labels(), b.labels());
        assert_eq!(a.class_sizes(), vec![4, 4, 4]);
        for s in a.samples() {
            assert!(matfun::sym_eig(s.matrix()).unwrap().min_eigenvalue() > 0.0);
        }
        let c = synth_dataset(&cfg(0.5, 10)).unwrap();
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn zero_noise_collapses_classes() {
        let data = synth_dataset(&cfg(0.0, 3)).unwrap();
        for i in 0..data.len() {
            for j in 0..data.len() {
                if data.label(i) == data.label(j) {
                    assert!((data.sample(i).matrix() - data.sample(j).matrix()).amax() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn synth_config_validation() {
        let mut c = cfg(0.1, 0);
        c.per_class = 1;
        assert!(synth_dataset(&c).is_err());
        let mut c = cfg(0.1, 0);
        c.informative_dim = Some(7);
        assert!(synth_dataset(&c).is_err());
    }
}
