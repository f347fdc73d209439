//! Matrix functions of symmetric matrices and the Fréchet derivative of the
//! matrix logarithm.
//!
//! Spectral functions (`log`, `exp`, `sqrt`, inverse square root) go through a
//! symmetric eigendecomposition. The derivative `D log(X)[H]` is read off the
//! upper-right block of `log([[X, H], [0, X]])`; that block matrix is not
//! symmetric, so its logarithm is taken with a general dense inverse
//! scaling-and-squaring algorithm (Denman–Beavers square roots followed by a
//! Gauss–Legendre evaluation of the diagonal Padé approximant to `log(I + A)`).
//!
//! Every symmetric output is symmetrized before it is returned.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative symmetry tolerance for inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Largest eigenvalue ratio accepted by [`dlog`].
pub const MAX_CONDITION: f64 = 1e12;

const PADE_DEGREE: usize = 8;
const SQRT_THRESHOLD: f64 = 0.25;
const MAX_SQRTS: usize = 64;
const MAX_DB_ITERS: usize = 100;

/// Eigendecomposition `A = Q diag(λ) Qᵀ` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Q diag(f(λ)) Qᵀ`, symmetrized.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (mut col, &lambda) in scaled.column_iter_mut().zip(self.eigenvalues.iter()) {
            col *= f(lambda);
        }
        symmetrize(&(scaled * q.transpose()))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.map(|l| l)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest absolute entry of `A − Aᵀ`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn check_square(a: &DMatrix<f64>) -> Result<usize> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::dims("non-empty square matrix", format!("{}x{}", a.nrows(), a.ncols())));
    }
    Ok(a.nrows())
}

pub fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    check_square(a)?;
    let scale = a.amax().max(1.0);
    let asym = asymmetry(a);
    if !(asym <= SYMMETRY_TOL * scale) {
        return Err(Error::NonSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// Positive-definiteness floor `1e-12 · max(1, tr(X)/n)`.
pub fn pd_floor(x: &DMatrix<f64>) -> f64 {
    1e-12 * (x.trace() / x.nrows() as f64).max(1.0)
}

pub fn sym_eig(a: &DMatrix<f64>) -> Result<EigDecomp> {
    check_symmetric(a)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence("symmetric eigensolver (non-finite input)"));
    }
    let n = a.nrows();
    let eig = SymmetricEigen::try_new(symmetrize(a), f64::EPSILON, 1000 * n.max(1))
        .ok_or(Error::NoConvergence("symmetric eigensolver"))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigDecomp {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigendecomposition of a matrix that must be positive definite.
pub fn spd_eig(x: &DMatrix<f64>) -> Result<EigDecomp> {
    let eig = sym_eig(x)?;
    let floor = pd_floor(x);
    if !(eig.min_eigenvalue() > floor) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: eig.min_eigenvalue(),
            floor,
        });
    }
    Ok(eig)
}

/// Principal logarithm of an SPD matrix.
pub fn spd_log(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(spd_eig(x)?.map(f64::ln))
}

/// Exponential of a symmetric matrix.
pub fn spd_exp(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(sym_eig(h)?.map(f64::exp))
}

pub fn spd_sqrt(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(spd_eig(x)?.map(f64::sqrt))
}

pub fn spd_inv_sqrt(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(spd_eig(x)?.map(|l| 1.0 / l.sqrt()))
}

pub fn spd_inv(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(spd_eig(x)?.map(|l| 1.0 / l))
}

/// Fréchet derivative `D log(X)[H]` of the principal logarithm at SPD `X`.
///
/// Computed as the (1,2) block of `log([[X, H], [0, X]])`. The derivative is
/// linear in `H`, so `H` is normalized before the block logarithm and the
/// result rescaled. Scaling `X` by `c` shifts `log` by `ln(c)·I` on the
/// diagonal blocks only, so the block matrix is also rescaled to put the
/// spectrum of `X` around 1.
pub fn dlog(x: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_square(x)?;
    if h.shape() != (n, n) {
        return Err(Error::dims(format!("{n}x{n}"), format!("{}x{}", h.nrows(), h.ncols())));
    }
    check_symmetric(h)?;
    let eig = spd_eig(x)?;
    let condition = eig.max_eigenvalue() / eig.min_eigenvalue();
    if condition > MAX_CONDITION {
        return Err(Error::IllConditioned { condition });
    }

    let h_norm = norm1(h);
    if h_norm == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let c = 1.0 / (eig.min_eigenvalue() * eig.max_eigenvalue()).sqrt();

    let mut block = DMatrix::zeros(2 * n, 2 * n);
    let xs = x * c;
    block.view_mut((0, 0), (n, n)).copy_from(&xs);
    block.view_mut((n, n), (n, n)).copy_from(&xs);
    block.view_mut((0, n), (n, n)).copy_from(&(h * (c / h_norm)));

    let log_block = logm(&block)?;
    let d = log_block.view((0, n), (n, n)).into_owned() * h_norm;
    Ok(symmetrize(&d))
}

/// Matrix 1-norm (max absolute column sum).
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Principal logarithm of a general real matrix whose eigenvalues lie off the
/// closed negative real axis, by inverse scaling and squaring.
pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_square(a)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence("matrix logarithm (non-finite input)"));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut current = a.clone();
    let mut squarings = 0;
    while norm1(&(&current - &id)) > SQRT_THRESHOLD {
        if squarings == MAX_SQRTS {
            return Err(Error::NoConvergence("matrix logarithm square-root phase"));
        }
        current = sqrtm(&current)?;
        squarings += 1;
    }

    let x = current - &id;
    let mut acc = DMatrix::zeros(n, n);
    for &(node, weight) in gauss_legendre_unit().iter() {
        let shifted = &id + &x * node;
        let lu = shifted.lu();
        let term = lu
            .solve(&x)
            .ok_or(Error::NoConvergence("matrix logarithm Padé solve"))?;
        acc += term * weight;
    }
    Ok(acc * 2f64.powi(squarings as i32))
}

/// Principal square root by the product form of the Denman–Beavers iteration.
pub fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_square(a)?;
    let id = DMatrix::<f64>::identity(n, n);
    let tol = 10.0 * n as f64 * f64::EPSILON;
    let mut m = a.clone();
    let mut y = a.clone();
    for _ in 0..MAX_DB_ITERS {
        let m_inv = m
            .clone()
            .try_inverse()
            .ok_or(Error::NoConvergence("Denman–Beavers square root (singular iterate)"))?;
        y = &y * (&id + &m_inv) * 0.5;
        m = (&id * 2.0 + &m + &m_inv) * 0.25;
        if norm1(&(&m - &id)) <= tol {
            return Ok(y);
        }
    }
    Err(Error::NoConvergence("Denman–Beavers square root"))
}

/// Gauss–Legendre nodes and weights on [0, 1], via the Golub–Welsch eigenproblem.
fn gauss_legendre_unit() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let k = PADE_DEGREE;
        let jacobi = DMatrix::from_fn(k, k, |i, j| {
            if i + 1 == j || j + 1 == i {
                let m = i.max(j) as f64;
                m / (4.0 * m * m - 1.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut rule: Vec<(f64, f64)> = (0..k)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                ((eig.eigenvalues[i] + 1.0) / 2.0, v0 * v0)
            })
            .collect();
        rule.sort_by(|a, b| a.0.total_cmp(&b.0));
        rule
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        symmetrize(&a)
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn eig_of_identity_and_diagonal() {
        let e = sym_eig(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);
        let qtq = e.eigenvectors.transpose() * &e.eigenvectors;
        assert!((qtq - DMatrix::identity(3, 3)).norm() < 1e-14);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = sym_eig(&d).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn eig_reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_sym(8, &mut rng);
        let e = sym_eig(&a).unwrap();
        assert!((e.reconstruct() - &a).norm() < 1e-12);
        assert!(e.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
        let qtq = e.eigenvectors.transpose() * &e.eigenvectors;
        assert!((qtq - DMatrix::identity(8, 8)).norm() < 1e-10 * 8.0);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(sym_eig(&a), Err(Error::NonSymmetric { .. })));
    }

    #[test]
    fn log_exp_sqrt_analytic_cases() {
        let n = 3;
        assert!(spd_log(&DMatrix::identity(n, n)).unwrap().norm() == 0.0);
        let e = std::f64::consts::E;
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![e, e * e]));
        let l = spd_log(&x).unwrap();
        assert!((l - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]))).norm() < 1e-15);

        assert_eq!(spd_exp(&DMatrix::zeros(3, 3)).unwrap(), DMatrix::identity(3, 3));
        let s = spd_sqrt(&DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]))).unwrap();
        assert!((s - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).norm() < 1e-15);
    }

    #[test]
    fn log_exp_round_trip_and_inverse_sqrt_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_spd(6, &mut rng);
        let back = spd_exp(&spd_log(&x).unwrap()).unwrap();
        assert!(rel(&back, &x) < 1e-9);

        let s = spd_sqrt(&x).unwrap();
        assert!(rel(&(&s * &s), &x) < 1e-9);
        let is = spd_inv_sqrt(&x).unwrap();
        assert!((&is * &x * &is - DMatrix::identity(6, 6)).norm() < 1e-9);
        assert!((&is * &s - DMatrix::identity(6, 6)).norm() < 1e-9);
    }

    #[test]
    fn rejects_non_positive_definite() {
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        assert!(matches!(spd_log(&x), Err(Error::NotPositiveDefinite { .. })));
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0]));
        assert!(matches!(spd_sqrt(&x), Err(Error::NotPositiveDefinite { .. })));
        // scale-aware floor: 1e-13 is below 1e-12 · (1e6 / 2)
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![1e6, 1e-7]));
        assert!(spd_log(&x).is_err());
    }

    #[test]
    fn general_logm_agrees_with_spectral_log_on_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_spd(5, &mut rng);
        assert!(rel(&logm(&x).unwrap(), &spd_log(&x).unwrap()) < 1e-12);
    }

    #[test]
    fn general_logm_of_rotation_block() {
        // log of a 2x2 rotation by θ is the skew generator θ·[[0,-1],[1,0]]
        let theta: f64 = 0.7;
        let r = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let l = logm(&(r * 2.0)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2f64.ln(), -theta, theta, 2f64.ln()]);
        assert!((l - expected).norm() < 1e-13);
    }

    #[test]
    fn dlog_analytic_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_spd(5, &mut rng);
        let d = dlog(&x, &x).unwrap();
        assert!((d - DMatrix::identity(5, 5)).amax() < 1e-10);

        let h = random_sym(5, &mut rng);
        let d = dlog(&DMatrix::identity(5, 5), &h).unwrap();
        assert!((d - &h).amax() < 1e-12);

        assert_eq!(dlog(&x, &DMatrix::zeros(5, 5)).unwrap(), DMatrix::zeros(5, 5));
    }

    #[test]
    fn dlog_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_spd(5, &mut rng);
        let dir = random_sym(5, &mut rng);
        let step = 1e-5;
        let fd = (spd_log(&(&x + &dir * step)).unwrap() - spd_log(&(&x - &dir * step)).unwrap())
            / (2.0 * step);
        assert!(rel(&dlog(&x, &dir).unwrap(), &fd) < 1e-6);
    }

    #[test]
    fn dlog_trace_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_spd(4, &mut rng);
        let dir = random_sym(4, &mut rng);
        let lhs = dlog(&x, &dir).unwrap().trace();
        let rhs = (spd_inv(&x).unwrap() * &dir).trace();
        assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn dlog_rejects_ill_conditioned() {
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![1.5e12, 1.0]));
        let h = DMatrix::identity(2, 2);
        assert!(matches!(dlog(&x, &h), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre_unit();
        let total: f64 = rule.iter().map(|&(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
        // exact up to degree 2k-1 = 15
        let int: f64 = rule.iter().map(|&(t, w)| w * t.powi(15)).sum();
        assert!((int - 1.0 / 16.0).abs() < 1e-14);
    }
}
