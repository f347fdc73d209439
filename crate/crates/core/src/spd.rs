//! SPD samples, the manifold-to-manifold map `f(X, W) = WᵀXW`, and the three
//! supported squared distances with their Gaussian-form similarity.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matfun::{self, check_symmetric, spd_eig, symmetrize};

/// Squared distances below this are treated as exact coincidence.
pub const DIST2_ZERO: f64 = 1e-14;

/// Singular-value ratio under which a transform counts as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// A real symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Validates symmetry and positive definiteness; stores the symmetrized input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&m)?;
        let m = symmetrize(&m);
        spd_eig(&m)?;
        Ok(SpdMatrix(m))
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// `M X Mᵀ` for an invertible `M`.
    pub fn congruence(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.dim() {
            return Err(Error::dims(self.dim(), m.ncols()));
        }
        Self::new(symmetrize(&(m * &self.0 * m.transpose())))
    }
}

impl AsRef<DMatrix<f64>> for SpdMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// A column full-rank `n × m` matrix `W` with `m < n`.
///
/// `W` stands for its class `[W] = {WO : O orthogonal}`, equivalently the rank-`m`
/// PSD matrix `WWᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform(DMatrix<f64>);

impl Transform {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        let (n, m) = w.shape();
        if m == 0 || m >= n {
            return Err(Error::InvalidShape { rows: n, cols: m });
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::RankDeficient { ratio: f64::NAN });
        }
        let ratio = singular_value_ratio(&w);
        if !(ratio > RANK_TOL) {
            return Err(Error::RankDeficient { ratio });
        }
        Ok(Transform(w))
    }

    /// The first `m` columns of the `n × n` identity.
    pub fn leading_columns(n: usize, m: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, m))
    }

    pub fn source_dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn target_dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// `W·O` for an `m × m` matrix `O` (typically orthogonal).
    pub fn right_mul(&self, o: &DMatrix<f64>) -> Result<Self> {
        Self::new(&self.0 * o)
    }
}

fn singular_value_ratio(w: &DMatrix<f64>) -> f64 {
    let sv = w.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        0.0
    } else {
        sv.min() / max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Affine-invariant Riemannian metric.
    Aim,
    /// Stein (Jensen–Bregman log-det) divergence.
    Stein,
    /// Log-Euclidean metric.
    Lem,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Aim, MetricKind::Stein, MetricKind::Lem];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Aim => "aim",
            MetricKind::Stein => "stein",
            MetricKind::Lem => "lem",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aim" => Ok(MetricKind::Aim),
            "stein" => Ok(MetricKind::Stein),
            "lem" => Ok(MetricKind::Lem),
            other => Err(Error::InvalidConfig(format!(
                "unknown metric '{other}' (expected aim, stein or lem)"
            ))),
        }
    }
}

/// `f(X, W) = WᵀXW`.
pub fn map_down(x: &SpdMatrix, w: &Transform) -> Result<SpdMatrix> {
    if x.dim() != w.source_dim() {
        return Err(Error::dims(w.source_dim(), x.dim()));
    }
    let wm = w.matrix();
    SpdMatrix::new(symmetrize(&(wm.transpose() * x.matrix() * wm)))
}

/// Log-determinant of an SPD matrix from its Cholesky factor.
pub fn log_det(x: &DMatrix<f64>) -> Result<f64> {
    let chol: Cholesky<f64, Dyn> = Cholesky::new(x.clone()).ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: f64::NAN,
        floor: 0.0,
    })?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Squared distance `δ²(X1, X2)` under the chosen metric.
pub fn dist2(metric: MetricKind, x1: &SpdMatrix, x2: &SpdMatrix) -> Result<f64> {
    if x1.dim() != x2.dim() {
        return Err(Error::dims(x1.dim(), x2.dim()));
    }
    // identical inputs give exactly zero instead of O(ε²) rounding residue
    if x1.matrix() == x2.matrix() {
        return Ok(0.0);
    }
    let d = match metric {
        MetricKind::Aim => {
            let s = matfun::spd_inv_sqrt(x1.matrix())?;
            let inner = symmetrize(&(&s * x2.matrix() * &s));
            spd_eig(&inner)?
                .eigenvalues
                .iter()
                .map(|l| l.ln().powi(2))
                .sum()
        }
        MetricKind::Stein => {
            let mid = (x1.matrix() + x2.matrix()) * 0.5;
            log_det(&mid)? - 0.5 * (log_det(x1.matrix())? + log_det(x2.matrix())?)
        }
        MetricKind::Lem => {
            (matfun::spd_log(x1.matrix())? - matfun::spd_log(x2.matrix())?).norm_squared()
        }
    };
    Ok(d.max(0.0))
}

/// `δ²(WᵀX_iW, WᵀX_jW)`.
pub fn transformed_dist2(
    metric: MetricKind,
    xi: &SpdMatrix,
    xj: &SpdMatrix,
    w: &Transform,
) -> Result<f64> {
    dist2(metric, &map_down(xi, w)?, &map_down(xj, w)?)
}

/// `exp(−β·δ²)`, with `δ² < 1e-14` clamped to zero.
pub fn similarity_from_dist2(d2: f64, beta: f64) -> f64 {
    let d2 = if d2 < DIST2_ZERO { 0.0 } else { d2 };
    (-beta * d2).exp()
}

/// Gaussian-form similarity of two samples after the transform.
pub fn kernel_sim(
    metric: MetricKind,
    xi: &SpdMatrix,
    xj: &SpdMatrix,
    w: &Transform,
    beta: f64,
) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
    }
    Ok(similarity_from_dist2(transformed_dist2(metric, xi, xj, w)?, beta))
}

/// `β = 1/σ²` with σ the mean distance (square root of `dist2`) over all
/// unordered pairs of the given samples.
pub fn auto_beta(metric: MetricKind, samples: &[SpdMatrix]) -> Result<f64> {
    use rayon::prelude::*;

    if samples.len() < 2 {
        return Err(Error::InvalidDataset("need at least two samples to set beta".into()));
    }
    let rows: Vec<f64> = (0..samples.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in (i + 1)..samples.len() {
                acc += dist2(metric, &samples[i], &samples[j])?.sqrt();
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let pairs = samples.len() * (samples.len() - 1) / 2;
    let sigma = rows.iter().sum::<f64>() / pairs as f64;
    if !(sigma > 0.0) {
        return Err(Error::DegenerateInput("all samples coincide; sigma is zero".into()));
    }
    Ok(1.0 / (sigma * sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> SpdMatrix {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SpdMatrix::new(&a * a.transpose() + DMatrix::identity(n, n) * 0.3).unwrap()
    }

    fn random_orthogonal(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        a.qr().q()
    }

    #[test]
    fn map_down_orthonormal_identity() {
        let w = Transform::leading_columns(4, 2).unwrap();
        let y = map_down(&SpdMatrix::identity(4), &w).unwrap();
        assert_eq!(y.matrix(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn map_down_selects_coordinate() {
        let x = SpdMatrix::from_diagonal(&[2.0, 3.0]).unwrap();
        let w = Transform::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert_eq!(map_down(&x, &w).unwrap().matrix()[(0, 0)], 2.0);
    }

    #[test]
    fn map_down_random_is_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_spd(6, &mut rng);
        let w = Transform::new(DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let y = map_down(&x, &w).unwrap();
        assert!(matfun::sym_eig(y.matrix()).unwrap().min_eigenvalue() > 0.0);
    }

    #[test]
    fn transform_rejects_bad_shapes_and_rank() {
        assert!(matches!(
            Transform::new(DMatrix::identity(3, 3)),
            Err(Error::InvalidShape { .. })
        ));
        let w = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(Transform::new(w), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn distances_vanish_at_coincidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_spd(4, &mut rng);
        for metric in MetricKind::ALL {
            assert!(dist2(metric, &x, &x).unwrap().abs() < 1e-14, "{metric}");
        }
    }

    #[test]
    fn aim_and_lem_diagonal_analytic() {
        let e = std::f64::consts::E;
        let x = SpdMatrix::from_diagonal(&[e, e]).unwrap();
        let id = SpdMatrix::identity(2);
        for metric in [MetricKind::Aim, MetricKind::Lem] {
            assert!((dist2(metric, &id, &x).unwrap() - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stein_scalar_value() {
        let a = SpdMatrix::from_diagonal(&[1.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[3.0]).unwrap();
        // ln((1+3)/2) − ½ ln(1·3)
        let expected = 2f64.ln() - 0.5 * 3f64.ln();
        assert!((dist2(MetricKind::Stein, &a, &b).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.143841).abs() < 1e-6);
    }

    #[test]
    fn stein_and_lem_are_exactly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_spd(5, &mut rng);
        let b = random_spd(5, &mut rng);
        for metric in [MetricKind::Stein, MetricKind::Lem] {
            assert_eq!(dist2(metric, &a, &b).unwrap(), dist2(metric, &b, &a).unwrap());
        }
        let ab = dist2(MetricKind::Aim, &a, &b).unwrap();
        let ba = dist2(MetricKind::Aim, &b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-10 * ab);
    }

    #[test]
    fn transformed_distance_on_coordinate_slice() {
        let xi = SpdMatrix::from_diagonal(&[1.0, 2.0, 5.0]).unwrap();
        let xj = SpdMatrix::from_diagonal(&[4.0, 3.0, 7.0]).unwrap();
        let w = Transform::leading_columns(3, 2).unwrap();
        let bi = SpdMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let bj = SpdMatrix::from_diagonal(&[4.0, 3.0]).unwrap();
        for metric in MetricKind::ALL {
            let got = transformed_dist2(metric, &xi, &xj, &w).unwrap();
            let want = dist2(metric, &bi, &bj).unwrap();
            assert!((got - want).abs() < 1e-14);
        }
        // direct: (ln 4)² + (ln 1.5)²
        let lem = transformed_dist2(MetricKind::Lem, &xi, &xj, &w).unwrap();
        assert!((lem - (4f64.ln().powi(2) + 1.5f64.ln().powi(2))).abs() < 1e-14);
    }

    #[test]
    fn transformed_distance_is_fiber_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let xi = random_spd(6, &mut rng);
        let xj = random_spd(6, &mut rng);
        let w = Transform::new(DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let wo = w.right_mul(&random_orthogonal(3, &mut rng)).unwrap();
        for metric in MetricKind::ALL {
            let a = transformed_dist2(metric, &xi, &xj, &w).unwrap();
            let b = transformed_dist2(metric, &xi, &xj, &wo).unwrap();
            assert!((a - b).abs() < 1e-10 * a.max(1.0), "{metric}: {a} vs {b}");
        }
    }

    #[test]
    fn similarity_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_spd(4, &mut rng);
        let w = Transform::leading_columns(4, 2).unwrap();
        assert_eq!(kernel_sim(MetricKind::Aim, &x, &x, &w, 1.0).unwrap(), 1.0);
        assert!((similarity_from_dist2(2.0, 1.0) - 0.1353352832366127).abs() < 1e-15);
        assert!(similarity_from_dist2(3.0, 1.0) < similarity_from_dist2(2.0, 1.0));
        assert_eq!(similarity_from_dist2(5e-15, 1.0), 1.0);
        assert!(kernel_sim(MetricKind::Aim, &x, &x, &w, 0.0).is_err());
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("AIM".parse::<MetricKind>().unwrap(), MetricKind::Aim);
        assert_eq!("stein".parse::<MetricKind>().unwrap(), MetricKind::Stein);
        assert!("cholesky".parse::<MetricKind>().is_err());
    }

    #[test]
    fn auto_beta_from_mean_distance() {
        let e = std::f64::consts::E;
        let samples = vec![
            SpdMatrix::identity(2),
            SpdMatrix::from_diagonal(&[e, e]).unwrap(),
        ];
        // single pair at distance √2
        let beta = auto_beta(MetricKind::Lem, &samples).unwrap();
        assert!((beta - 0.5).abs() < 1e-14);
    }
}
