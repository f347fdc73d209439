//! Riemannian conjugate gradient ascent on the PSD quotient manifold.
//!
//! Each iteration backtracks along the current direction with the additive
//! retraction until the Armijo condition holds (expanding the step instead
//! while the first trial keeps improving), then forms the next direction
//! from the new Riemannian gradient and the transported previous direction
//! using the Polak–Ribière+ coefficient.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::alignment::{AlignmentObjective, AlignmentState};
use crate::error::{Error, Result};
use crate::manifold::{horizontal_project, retract, riemannian_grad, transport, TangentVector};
use crate::spd::Transform;

/// Backtracking steps allowed before the line search gives up.
pub const MAX_SHRINKS: usize = 30;

/// Step doublings tried after an immediately accepted trial step.
pub const MAX_EXPANSIONS: usize = 10;

/// A smooth function of `W` to be maximized.
pub trait SmoothObjective {
    type State;

    fn evaluate(&self, w: &Transform) -> Result<Self::State>;

    fn value(&self, state: &Self::State) -> f64;

    /// Euclidean gradient at the point `state` was evaluated at.
    fn gradient(&self, state: &Self::State) -> Result<DMatrix<f64>>;
}

impl SmoothObjective for AlignmentObjective<'_> {
    type State = AlignmentState;

    fn evaluate(&self, w: &Transform) -> Result<AlignmentState> {
        AlignmentObjective::evaluate(self, w)
    }

    fn value(&self, state: &AlignmentState) -> f64 {
        state.value
    }

    fn gradient(&self, state: &AlignmentState) -> Result<DMatrix<f64>> {
        AlignmentObjective::gradient(self, state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub rel_obj_tol: f64,
    pub ls_shrink: f64,
    pub ls_slope: f64,
    /// Growth of the first trial step after a search that needed no
    /// backtracking; `1.0` restarts every search from `1/(1 + ‖grad‖)`.
    pub ls_expand: f64,
    /// Restart period for the conjugate direction; `None` means `n·m`.
    pub cg_restart_every: Option<usize>,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 50,
            grad_tol: 1e-6,
            rel_obj_tol: 1e-8,
            ls_shrink: 0.5,
            ls_slope: 1e-4,
            ls_expand: 2.0,
            cg_restart_every: None,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::InvalidConfig(format!("optimizer.{field}: {why}")));
        if self.max_iters == 0 {
            return bad("max_iters", "must be at least 1");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol", "must be positive");
        }
        if !(self.rel_obj_tol > 0.0) {
            return bad("rel_obj_tol", "must be positive");
        }
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return bad("ls_shrink", "must lie in (0, 1)");
        }
        if !(self.ls_slope > 0.0 && self.ls_slope < 1.0) {
            return bad("ls_slope", "must lie in (0, 1)");
        }
        if !(self.ls_expand >= 1.0 && self.ls_expand.is_finite()) {
            return bad("ls_expand", "must be at least 1");
        }
        if self.cg_restart_every == Some(0) {
            return bad("cg_restart_every", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    GradTol,
    ObjTol,
    MaxIters,
    LineSearchFail,
}

impl StopReason {
    pub fn converged(self) -> bool {
        matches!(self, StopReason::GradTol | StopReason::ObjTol)
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::GradTol => "grad_tol",
            StopReason::ObjTol => "obj_tol",
            StopReason::MaxIters => "max_iters",
            StopReason::LineSearchFail => "line_search_fail",
        })
    }
}

/// One line of the iteration trace. Iteration 0 is the starting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub transform: Transform,
    pub trace: Vec<IterationRecord>,
    pub iterations_used: usize,
    pub stop_reason: StopReason,
}

impl TrainResult {
    pub fn j_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.value).collect()
    }

    pub fn grad_norm_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.grad_norm).collect()
    }

    pub fn final_value(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.value)
    }
}

pub fn rcg_maximize<O: SmoothObjective>(
    objective: &O,
    w0: &Transform,
    cfg: &OptimizerConfig,
) -> Result<TrainResult> {
    rcg_maximize_with(objective, w0, cfg, |_| {})
}

/// [`rcg_maximize`] with a callback invoked on every trace record.
pub fn rcg_maximize_with<O, F>(
    objective: &O,
    w0: &Transform,
    cfg: &OptimizerConfig,
    mut observe: F,
) -> Result<TrainResult>
where
    O: SmoothObjective,
    F: FnMut(&IterationRecord),
{
    cfg.validate()?;
    let restart_every = cfg
        .cg_restart_every
        .unwrap_or(w0.source_dim() * w0.target_dim())
        .max(1);

    let mut w = w0.clone();
    let state = objective.evaluate(&w)?;
    let mut value = objective.value(&state);
    let mut egrad = objective.gradient(&state)?;
    let mut grad = riemannian_grad(&w, &egrad)?;
    let grad_tol = cfg.grad_tol * grad.norm().max(1.0);

    let mut trace = Vec::with_capacity(cfg.max_iters + 1);
    let mut record = |trace: &mut Vec<IterationRecord>, r: IterationRecord| {
        observe(&r);
        trace.push(r);
    };
    record(
        &mut trace,
        IterationRecord {
            iter: 0,
            value,
            grad_norm: grad.norm(),
            step: 0.0,
        },
    );
    let finish = |w: Transform, trace: Vec<IterationRecord>, stop_reason: StopReason| TrainResult {
        iterations_used: trace.len() - 1,
        transform: w,
        trace,
        stop_reason,
    };
    if grad.norm() < grad_tol {
        return Ok(finish(w, trace, StopReason::GradTol));
    }

    let mut direction = grad.clone();
    let mut since_restart = 0;
    let mut carried_step: Option<f64> = None;

    for iter in 1..=cfg.max_iters {
        let (dir, slope) = ascent_direction(&w, &egrad, &grad, direction)?;
        direction = dir;
        if !(slope > 0.0) {
            return Ok(finish(w, trace, StopReason::GradTol));
        }

        let first_trial = match carried_step {
            Some(t) if cfg.ls_expand > 1.0 => t,
            _ => 1.0 / (1.0 + grad.norm()),
        };
        let Some((step, shrinks, w_new, state_new)) =
            line_search(objective, &w, &direction, value, slope, first_trial, cfg)
        else {
            return Ok(finish(w, trace, StopReason::LineSearchFail));
        };
        let _ = shrinks;
        carried_step = Some(step);

        let value_new = objective.value(&state_new);
        let egrad_new = objective.gradient(&state_new)?;
        let grad_new = riemannian_grad(&w_new, &egrad_new)?;
        record(
            &mut trace,
            IterationRecord {
                iter,
                value: value_new,
                grad_norm: grad_new.norm(),
                step,
            },
        );

        let obj_converged = (value_new - value).abs() < cfg.rel_obj_tol * value.abs().max(f64::MIN_POSITIVE);
        let grad_converged = grad_new.norm() < grad_tol;

        // Polak–Ribière+ with projection transport
        let moved_grad = transport(&grad, &w_new)?;
        let moved_dir = transport(&direction, &w_new)?;
        let prev_sq = grad.norm().powi(2);
        let eta = if prev_sq > 0.0 {
            (grad_new.inner(&(grad_new.entries() - moved_grad.entries())) / prev_sq).max(0.0)
        } else {
            0.0
        };
        since_restart += 1;
        direction = if eta == 0.0 || since_restart >= restart_every {
            since_restart = 0;
            grad_new.clone()
        } else {
            TangentVector::new(w_new.clone(), grad_new.entries() + moved_dir.entries() * eta)?
        };

        w = w_new;
        value = value_new;
        egrad = egrad_new;
        grad = grad_new;

        if grad_converged {
            return Ok(finish(w, trace, StopReason::GradTol));
        }
        if obj_converged {
            return Ok(finish(w, trace, StopReason::ObjTol));
        }
    }
    Ok(finish(w, trace, StopReason::MaxIters))
}

/// Falls back to the gradient, then to the horizontal Euclidean gradient,
/// when the conjugate direction is not an ascent direction.
fn ascent_direction(
    w: &Transform,
    egrad: &DMatrix<f64>,
    grad: &TangentVector,
    direction: TangentVector,
) -> Result<(TangentVector, f64)> {
    let slope = direction.inner(egrad);
    if slope > 0.0 {
        return Ok((direction, slope));
    }
    let slope = grad.inner(egrad);
    if slope > 0.0 {
        return Ok((grad.clone(), slope));
    }
    let fallback = horizontal_project(w, egrad)?;
    let slope = fallback.inner(egrad);
    Ok((fallback, slope))
}

#[allow(clippy::type_complexity)]
fn line_search<O: SmoothObjective>(
    objective: &O,
    w: &Transform,
    direction: &TangentVector,
    value: f64,
    slope: f64,
    first_trial: f64,
    cfg: &OptimizerConfig,
) -> Option<(f64, usize, Transform, O::State)> {
    let attempt = |t: f64| -> Option<(f64, Transform, O::State)> {
        let w_try = retract(w, direction.entries(), t).ok()?;
        let state = objective.evaluate(&w_try).ok()?;
        let v = objective.value(&state);
        (v >= value + cfg.ls_slope * t * slope).then_some((v, w_try, state))
    };
    let mut t = first_trial;
    for shrinks in 0..=MAX_SHRINKS {
        if let Some((mut best_v, mut best_w, mut best_state)) = attempt(t) {
            if shrinks == 0 && cfg.ls_expand > 1.0 {
                for _ in 0..MAX_EXPANSIONS {
                    let t_next = t * cfg.ls_expand;
                    match attempt(t_next) {
                        Some((v, w_next, state)) if v > best_v => {
                            t = t_next;
                            best_v = v;
                            best_w = w_next;
                            best_state = state;
                        }
                        _ => break,
                    }
                }
            }
            return Some((t, shrinks, best_w, best_state));
        }
        t *= cfg.ls_shrink;
    }
    None
}
