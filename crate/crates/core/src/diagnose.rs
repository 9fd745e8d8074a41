//! Convergence, bias and Lyapunov diagnostics over run traces.
//!
//! All window statistics look at the trailing `ceil(window_fraction * n)`
//! samples. The numeric thresholds are this toolkit's own convention for
//! turning "the error converges" into a yes/no answer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapt::{EstimatorKind, Gains};
use crate::scalar::Scalar;
use crate::trace::RunTrace;

pub const DEFAULT_WINDOW_FRACTION: f64 = 0.25;
pub const DEFAULT_REL_TOL: f64 = 0.05;
/// Lower bound on denominators in relative drift and output range.
pub const SCALE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnoseError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("window fraction must lie in (0, 0.5], got {0}")]
    InvalidWindow(f64),
    #[error("window length must lie in 1..={len}, got {got}")]
    InvalidWindowLength { got: usize, len: usize },
    #[error("relative tolerance must be > 0, got {0}")]
    InvalidTolerance(f64),
    #[error("trace carries no true plant parameters (dataset runs cannot be checked)")]
    MissingTrueParams,
    #[error("trace carries no estimator internals")]
    MissingInternals,
}

/// Summary of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict<T> {
    pub converged: bool,
    pub steady_bias: T,
    pub rms_error: T,
    pub final_params: [T; 3],
    pub window_len: usize,
    pub window_fraction: T,
    pub rel_tol: T,
}

/// Samples in the trailing window.
pub fn window_len(n: usize, window_fraction: f64) -> Result<usize, DiagnoseError> {
    if n == 0 {
        return Err(DiagnoseError::EmptyTrace);
    }
    if !(window_fraction > 0.0 && window_fraction <= 0.5) {
        return Err(DiagnoseError::InvalidWindow(window_fraction));
    }
    Ok(((window_fraction * n as f64).ceil() as usize).clamp(1, n))
}

fn tail<T>(v: &[T], len: usize) -> &[T] {
    &v[v.len() - len..]
}

fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, &x| s + x) / T::from_usize(v.len()).unwrap()
}

fn check_len<T>(trace: &RunTrace<T>, len: usize) -> Result<(), DiagnoseError> {
    if trace.t.is_empty() {
        return Err(DiagnoseError::EmptyTrace);
    }
    if len == 0 || len > trace.t.len() {
        return Err(DiagnoseError::InvalidWindowLength {
            got: len,
            len: trace.t.len(),
        });
    }
    Ok(())
}

/// Mean of `e` over the last `len` samples.
pub fn steady_bias_over<T: Scalar>(trace: &RunTrace<T>, len: usize) -> Result<T, DiagnoseError> {
    check_len(trace, len)?;
    Ok(mean(tail(&trace.e, len)))
}

pub fn steady_bias<T: Scalar>(trace: &RunTrace<T>, window_fraction: f64) -> Result<T, DiagnoseError> {
    steady_bias_over(trace, window_len(trace.len(), window_fraction)?)
}

/// Root-mean-square of `e` over the last `len` samples.
pub fn rms_over<T: Scalar>(trace: &RunTrace<T>, len: usize) -> Result<T, DiagnoseError> {
    check_len(trace, len)?;
    let w = tail(&trace.e, len);
    let sq: Vec<T> = w.iter().map(|&e| e * e).collect();
    Ok(mean(&sq).sqrt())
}

pub fn rms<T: Scalar>(trace: &RunTrace<T>, window_fraction: f64) -> Result<T, DiagnoseError> {
    rms_over(trace, window_len(trace.len(), window_fraction)?)
}

/// Relative spread `(max - min) / max(|mean|, floor)` of a window.
fn relative_drift<T: Scalar>(w: &[T]) -> T {
    let (lo, hi) = w
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    (hi - lo) / mean(w).abs().max(T::lit(SCALE_FLOOR))
}

/// True when every parameter is flat over the window and the error has
/// settled around its steady bias.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn converged<T: Scalar>(trace: &RunTrace<T>, rel_tol: f64, window_fraction: f64) -> Result<bool, DiagnoseError> {
    if !(rel_tol > 0.0) {
        return Err(DiagnoseError::InvalidTolerance(rel_tol));
    }
    let len = window_len(trace.len(), window_fraction)?;
    let tol = T::lit(rel_tol);
    for p in [&trace.a_hat, &trace.b_hat, &trace.c_hat] {
        if !(relative_drift(tail(p, len)) < tol) {
            return Ok(false);
        }
    }
    let w = tail(&trace.e, len);
    let bias = mean(w);
    let dev: Vec<T> = w.iter().map(|&e| (e - bias) * (e - bias)).collect();
    let dev_rms = mean(&dev).sqrt();
    let (lo, hi) = trace
        .y
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = (hi - lo).max(T::lit(SCALE_FLOOR));
    Ok(dev_rms < tol * range)
}

/// Lyapunov function along the trace.
///
/// The state-error part depends on the estimator:
/// `½e²` (first-order kinds), `½(b e1² + e2²)` (`so`, with the true `b`),
/// `½ eᵀPe` (`so-filtered`, `P` from [`crate::adapt::FilteredConfig::lyapunov_matrix`]).
/// Each adapted parameter with a positive gain adds `½(p̂ - p)²/γ`.
pub fn lyapunov_samples<T: Scalar>(trace: &RunTrace<T>, gains: &Gains<T>) -> Result<Vec<T>, DiagnoseError> {
    if trace.is_empty() {
        return Err(DiagnoseError::EmptyTrace);
    }
    let truth = trace.true_params.ok_or(DiagnoseError::MissingTrueParams)?;
    let inner = trace.internals.as_ref().ok_or(DiagnoseError::MissingInternals)?;
    let half = T::lit(0.5);
    let p = trace.filtered.lyapunov_matrix();
    let param_term = |est: T, truth: T, gain: T| {
        if gain > T::zero() {
            half * (est - truth) * (est - truth) / gain
        } else {
            T::zero()
        }
    };
    let v = (0..trace.len())
        .map(|k| {
            let e1 = inner.xhat1[k] - inner.x1[k];
            let e2 = inner.xhat2[k] - inner.x2[k];
            let state = match trace.kind {
                EstimatorKind::FirstOrder | EstimatorKind::FirstOrderDeriv => half * e1 * e1,
                EstimatorKind::SecondOrder => half * (truth.b * e1 * e1 + e2 * e2),
                EstimatorKind::FilteredSecondOrder => {
                    half * (p[0][0] * e1 * e1 + T::lit(2.0) * p[0][1] * e1 * e2 + p[1][1] * e2 * e2)
                }
            };
            let mut v = state
                + param_term(trace.a_hat[k], truth.a, gains.a)
                + param_term(trace.b_hat[k], truth.b, gains.b);
            if trace.kind.adapts_c() {
                v += param_term(trace.c_hat[k], truth.c, gains.c);
            }
            v
        })
        .collect();
    Ok(v)
}

/// Full verdict for a trace.
pub fn evaluate<T: Scalar>(trace: &RunTrace<T>, rel_tol: f64, window_fraction: f64) -> Result<Verdict<T>, DiagnoseError> {
    let len = window_len(trace.len(), window_fraction)?;
    let (a, b, c) = trace.final_params().ok_or(DiagnoseError::EmptyTrace)?;
    Ok(Verdict {
        converged: converged(trace, rel_tol, window_fraction)?,
        steady_bias: steady_bias_over(trace, len)?,
        rms_error: rms_over(trace, len)?,
        final_params: [a, b, c],
        window_len: len,
        window_fraction: T::lit(window_fraction),
        rel_tol: T::lit(rel_tol),
    })
}
