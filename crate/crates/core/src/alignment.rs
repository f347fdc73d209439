//! Centered kernel-target alignment over selected pairs, and its Euclidean
//! gradient with respect to the transform `W`.
//!
//! With `K` the pairwise similarities `k_ij = exp(−β δ²(WᵀX_iW, WᵀX_jW))`,
//! `G` the pair-selection mask and `T = G∘(YYᵀ)` the selected label Gram
//! matrix, the objective is
//!
//! ```text
//! J(W) = ⟨L, T⟩ / ‖L‖,   L = U (G∘K) U
//! ```
//!
//! and its gradient is `Σ_{i≠j} C_ij ∇k_ij` with the coefficient matrix
//! `C = G∘(UTU/‖L‖ − J·L/‖L‖²)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matfun::{self, spd_eig};
use crate::pairgraph::{center, label_gram, LabeledDataset, PairGraphs};
use crate::spd::{log_det, similarity_from_dist2, MetricKind, Transform};

/// Minimum `‖L‖_F` for the alignment to be defined.
pub const MIN_L_NORM: f64 = 1e-14;

/// Per-sample quantities at the current `W`.
#[derive(Debug, Clone)]
struct SampleCache {
    /// `B_i = X_i W`
    b: DMatrix<f64>,
    /// `X̂_i = WᵀX_iW`
    xhat: DMatrix<f64>,
    xhat_inv: DMatrix<f64>,
    log_det: f64,
    /// `X̂^{1/2}` and `X̂^{-1/2}` (AIM only).
    sqrt: Option<(DMatrix<f64>, DMatrix<f64>)>,
    /// `log X̂` (LEM only).
    log: Option<DMatrix<f64>>,
}

/// Cached per-sample terms for one transform, shared by the objective value
/// and its gradient.
#[derive(Debug, Clone)]
pub struct MetricGradCtx {
    metric: MetricKind,
    cache: Vec<SampleCache>,
}

impl MetricGradCtx {
    pub fn new(data: &LabeledDataset, w: &Transform, metric: MetricKind) -> Result<Self> {
        if data.dim() != w.source_dim() {
            return Err(Error::dims(w.source_dim(), data.dim()));
        }
        let wm = w.matrix();
        let cache = data
            .samples()
            .par_iter()
            .map(|x| {
                let b = x.matrix() * wm;
                let xhat = matfun::symmetrize(&(wm.transpose() * &b));
                let eig = spd_eig(&xhat)?;
                let xhat_inv = eig.map(|l| 1.0 / l);
                let log_det = eig.eigenvalues.iter().map(|l| l.ln()).sum();
                let sqrt = (metric == MetricKind::Aim)
                    .then(|| (eig.map(f64::sqrt), eig.map(|l| 1.0 / l.sqrt())));
                let log = (metric == MetricKind::Lem).then(|| eig.map(f64::ln));
                Ok(SampleCache {
                    b,
                    xhat,
                    xhat_inv,
                    log_det,
                    sqrt,
                    log,
                })
            })
            .collect::<Result<_>>()?;
        Ok(MetricGradCtx { metric, cache })
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    /// `WᵀX_iW`.
    pub fn mapped(&self, i: usize) -> &DMatrix<f64> {
        &self.cache[i].xhat
    }

    fn aim_inner(&self, i: usize, j: usize) -> DMatrix<f64> {
        let (_, inv_sqrt_j) = self.cache[j].sqrt.as_ref().expect("AIM cache");
        matfun::symmetrize(&(inv_sqrt_j * &self.cache[i].xhat * inv_sqrt_j))
    }

    /// `δ²(X̂_i, X̂_j)` from the cached terms.
    pub fn dist2(&self, i: usize, j: usize) -> Result<f64> {
        let (ci, cj) = (&self.cache[i], &self.cache[j]);
        let d = match self.metric {
            MetricKind::Aim => spd_eig(&self.aim_inner(i, j))?
                .eigenvalues
                .iter()
                .map(|l| l.ln().powi(2))
                .sum(),
            MetricKind::Stein => {
                let mid = (&ci.xhat + &cj.xhat) * 0.5;
                log_det(&mid)? - 0.5 * (ci.log_det + cj.log_det)
            }
            MetricKind::Lem => {
                let (li, lj) = (ci.log.as_ref().expect("LEM cache"), cj.log.as_ref().expect("LEM cache"));
                (li - lj).norm_squared()
            }
        };
        Ok(d.max(0.0))
    }

    /// Euclidean gradient of `δ²(WᵀX_iW, WᵀX_jW)` with respect to `W`.
    pub fn dist2_grad(&self, i: usize, j: usize) -> Result<DMatrix<f64>> {
        let (ci, cj) = (&self.cache[i], &self.cache[j]);
        match self.metric {
            MetricKind::Aim => {
                // 4 (B_i X̂_i⁻¹ − B_j X̂_j⁻¹) log(X̂_i X̂_j⁻¹), where the non-symmetric
                // log(X̂_i X̂_j⁻¹) = X̂_j^{1/2} log(X̂_j^{-1/2} X̂_i X̂_j^{-1/2}) X̂_j^{-1/2}.
                let (sqrt_j, inv_sqrt_j) = cj.sqrt.as_ref().expect("AIM cache");
                let inner_log = matfun::spd_log(&self.aim_inner(i, j))?;
                let log_ratio = sqrt_j * inner_log * inv_sqrt_j;
                let lhs = &ci.b * &ci.xhat_inv - &cj.b * &cj.xhat_inv;
                Ok(lhs * log_ratio * 4.0)
            }
            MetricKind::Stein => {
                let mid = (&ci.xhat + &cj.xhat) * 0.5;
                let mid_inv = matfun::spd_inv(&mid)?;
                Ok((&ci.b + &cj.b) * mid_inv - &ci.b * &ci.xhat_inv - &cj.b * &cj.xhat_inv)
            }
            MetricKind::Lem => {
                let (li, lj) = (ci.log.as_ref().expect("LEM cache"), cj.log.as_ref().expect("LEM cache"));
                let delta = li - lj;
                let di = matfun::dlog(&ci.xhat, &delta)?;
                let dj = matfun::dlog(&cj.xhat, &delta)?;
                Ok((&ci.b * di - &cj.b * dj) * 4.0)
            }
        }
    }
}

/// `D_W k_ij = −β k_ij ∇δ²_ij`.
pub fn kernel_grad_entry(
    ctx: &MetricGradCtx,
    i: usize,
    j: usize,
    beta: f64,
    k_ij: f64,
) -> Result<DMatrix<f64>> {
    Ok(ctx.dist2_grad(i, j)? * (-beta * k_ij))
}

/// Objective value at one `W` with everything the gradient needs.
#[derive(Debug, Clone)]
pub struct AlignmentState {
    pub transform: Transform,
    pub ctx: MetricGradCtx,
    /// Similarities on the selected pairs, in [`PairGraphs::pairs`] order.
    pub similarities: Vec<f64>,
    /// `U (G∘K) U`.
    pub centered: DMatrix<f64>,
    pub centered_norm: f64,
    pub value: f64,
    /// `G∘(UTU/‖L‖ − J L/‖L‖²)`, symmetrized.
    pub coeff: DMatrix<f64>,
}

/// The alignment objective bound to a dataset, its graphs, a metric and `β`.
#[derive(Debug, Clone)]
pub struct AlignmentObjective<'a> {
    data: &'a LabeledDataset,
    graphs: &'a PairGraphs,
    metric: MetricKind,
    beta: f64,
    target: DMatrix<f64>,
    centered_target: DMatrix<f64>,
}

impl<'a> AlignmentObjective<'a> {
    pub fn new(
        data: &'a LabeledDataset,
        graphs: &'a PairGraphs,
        metric: MetricKind,
        beta: f64,
    ) -> Result<Self> {
        if graphs.len() != data.len() {
            return Err(Error::dims(data.len(), graphs.len()));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
        }
        let target = label_gram(data.labels()).component_mul(&graphs.selection_mask());
        let centered_target = center(&target);
        Ok(AlignmentObjective {
            data,
            graphs,
            metric,
            beta,
            target,
            centered_target,
        })
    }

    pub fn data(&self) -> &LabeledDataset {
        self.data
    }

    pub fn graphs(&self) -> &PairGraphs {
        self.graphs
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `G∘(YYᵀ)`.
    pub fn target(&self) -> &DMatrix<f64> {
        &self.target
    }

    /// `‖G∘(YYᵀ)‖_F`, an upper bound on `J` by Cauchy–Schwarz.
    pub fn upper_bound(&self) -> f64 {
        self.target.norm()
    }

    pub fn evaluate(&self, w: &Transform) -> Result<AlignmentState> {
        let ctx = MetricGradCtx::new(self.data, w, self.metric)?;
        let pairs = self.graphs.pairs();
        let similarities: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| Ok(similarity_from_dist2(ctx.dist2(i, j)?, self.beta)))
            .collect::<Result<_>>()?;

        let n = self.data.len();
        let mut masked = DMatrix::zeros(n, n);
        for (&(i, j), &k) in pairs.iter().zip(&similarities) {
            masked[(i, j)] = k;
            masked[(j, i)] = k;
        }
        let centered = center(&masked);
        let centered_norm = centered.norm();
        if !(centered_norm >= MIN_L_NORM) {
            return Err(Error::DegenerateAlignment { norm: centered_norm });
        }
        let value = centered.dot(&self.target) / centered_norm;

        let raw = &self.centered_target / centered_norm
            - &centered * (value / (centered_norm * centered_norm));
        let raw = matfun::symmetrize(&raw);
        let coeff = raw.component_mul(&self.graphs.selection_mask());

        Ok(AlignmentState {
            transform: w.clone(),
            ctx,
            similarities,
            centered,
            centered_norm,
            value,
            coeff,
        })
    }

    pub fn value(&self, w: &Transform) -> Result<f64> {
        Ok(self.evaluate(w)?.value)
    }

    /// Euclidean gradient `D_W J` at the transform `state` was evaluated at.
    pub fn gradient(&self, state: &AlignmentState) -> Result<DMatrix<f64>> {
        let pairs = self.graphs.pairs();
        let terms: Vec<DMatrix<f64>> = pairs
            .par_iter()
            .zip(state.similarities.par_iter())
            .map(|(&(i, j), &k)| {
                let c = state.coeff[(i, j)];
                if c == 0.0 {
                    return Ok(None);
                }
                // each unordered pair appears twice in the double sum
                Ok(Some(kernel_grad_entry(&state.ctx, i, j, self.beta, k)? * (2.0 * c)))
            })
            .filter_map(|r: Result<Option<DMatrix<f64>>>| r.transpose())
            .collect::<Result<_>>()?;
        let w = state.transform.matrix();
        let mut grad = DMatrix::zeros(w.nrows(), w.ncols());
        for t in &terms {
            grad += t;
        }
        Ok(grad)
    }
}

/// `J(W)` together with the cached state.
pub fn eval_j(
    data: &LabeledDataset,
    graphs: &PairGraphs,
    w: &Transform,
    metric: MetricKind,
    beta: f64,
) -> Result<(f64, AlignmentState)> {
    let state = AlignmentObjective::new(data, graphs, metric, beta)?.evaluate(w)?;
    Ok((state.value, state))
}

pub fn euclidean_grad_j(
    data: &LabeledDataset,
    graphs: &PairGraphs,
    metric: MetricKind,
    beta: f64,
    state: &AlignmentState,
) -> Result<DMatrix<f64>> {
    AlignmentObjective::new(data, graphs, metric, beta)?.gradient(state)
}
