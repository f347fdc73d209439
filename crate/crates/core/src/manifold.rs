//! Geometry of rank-`m` PSD matrices as the quotient `ℝⁿˣᵐ* / O(m)`.
//!
//! A point is represented by any full-rank `W`; the tangent space at `W`
//! splits into the vertical space `{WΩ : Ωᵀ = −Ω}` (directions that only move
//! within the class `[W]`) and the horizontal space `{H : HᵀW = WᵀH}`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matfun::sym_eig;
use crate::spd::Transform;

/// An `n × m` tangent direction attached to a base transform.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: Transform,
    entries: DMatrix<f64>,
}

impl TangentVector {
    pub fn new(base: Transform, entries: DMatrix<f64>) -> Result<Self> {
        if entries.shape() != base.matrix().shape() {
            return Err(Error::dims(
                format!("{}x{}", base.source_dim(), base.target_dim()),
                format!("{}x{}", entries.nrows(), entries.ncols()),
            ));
        }
        Ok(TangentVector { base, entries })
    }

    pub fn base(&self) -> &Transform {
        &self.base
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Frobenius inner product with another matrix of the same shape.
    pub fn inner(&self, other: &DMatrix<f64>) -> f64 {
        self.entries.dot(other)
    }

    /// `‖HᵀW − WᵀH‖_F`.
    pub fn horizontal_residual(&self) -> f64 {
        let wth = self.base.matrix().transpose() * &self.entries;
        (&wth - wth.transpose()).norm()
    }

    /// `‖HᵀW − WᵀH‖_F ≤ tol · ‖H‖_F · ‖W‖_F`.
    pub fn is_horizontal(&self, tol: f64) -> bool {
        self.horizontal_residual() <= tol * self.norm() * self.base.matrix().norm()
    }
}

/// Removes the vertical component `WΩ` of `H`, where the skew `Ω` solves
/// `(WᵀW)Ω + Ω(WᵀW) = WᵀH − HᵀW`.
pub fn horizontal_project(w: &Transform, h: &DMatrix<f64>) -> Result<TangentVector> {
    let wm = w.matrix();
    if h.shape() != wm.shape() {
        return Err(Error::dims(
            format!("{}x{}", wm.nrows(), wm.ncols()),
            format!("{}x{}", h.nrows(), h.ncols()),
        ));
    }
    let gram = wm.transpose() * wm;
    let wth = wm.transpose() * h;
    let rhs = &wth - wth.transpose();

    let eig = sym_eig(&gram).map_err(|e| Error::Sylvester(e.to_string()))?;
    if !(eig.min_eigenvalue() > 0.0) {
        return Err(Error::Sylvester(format!(
            "WᵀW is singular (smallest eigenvalue {:e})",
            eig.min_eigenvalue()
        )));
    }
    let v = &eig.eigenvectors;
    let lambda = &eig.eigenvalues;
    let mut rotated = v.transpose() * rhs * v;
    for c in 0..rotated.ncols() {
        for r in 0..rotated.nrows() {
            rotated[(r, c)] /= lambda[r] + lambda[c];
        }
    }
    let omega = v * rotated * v.transpose();
    let omega = (&omega - omega.transpose()) * 0.5;
    TangentVector::new(w.clone(), h - wm * omega)
}

/// `∇J = D_WJ − WWᵀ D_WJ`, followed by horizontal projection.
pub fn riemannian_grad(w: &Transform, egrad: &DMatrix<f64>) -> Result<TangentVector> {
    let wm = w.matrix();
    if egrad.shape() != wm.shape() {
        return Err(Error::dims(
            format!("{}x{}", wm.nrows(), wm.ncols()),
            format!("{}x{}", egrad.nrows(), egrad.ncols()),
        ));
    }
    let g = egrad - wm * (wm.transpose() * egrad);
    horizontal_project(w, &g)
}

/// First-order retraction `W + tH`, rejected if the result loses rank.
pub fn retract(w: &Transform, h: &DMatrix<f64>, t: f64) -> Result<Transform> {
    if h.shape() != w.matrix().shape() {
        return Err(Error::dims(
            format!("{}x{}", w.source_dim(), w.target_dim()),
            format!("{}x{}", h.nrows(), h.ncols()),
        ));
    }
    if t == 0.0 {
        return Ok(w.clone());
    }
    Transform::new(w.matrix() + h * t)
}

/// Projection-based vector transport: the same array re-attached at `w_new`
/// and projected onto its horizontal space.
pub fn transport(h: &TangentVector, w_new: &Transform) -> Result<TangentVector> {
    horizontal_project(w_new, h.entries())
}

/// Haar-distributed `m × m` orthogonal matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..m {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

/// Gaussian `n × m` matrix with orthonormalized columns.
pub fn random_orthonormal<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Transform> {
    if m == 0 || m >= n {
        return Err(Error::InvalidShape { rows: n, cols: m });
    }
    let a = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..m {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    Transform::new(q)
}
