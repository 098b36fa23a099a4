//! Backward Rauch-Tung-Striebel pass over a forward filter trajectory.
//!
//! The pass starts from the last forward posterior and walks back to the
//! first sample, pulling every estimate toward what later samples imply.
//! That removes the lag a causal filter puts on pulses.

use crate::error::{Error, Result};
use crate::kalman::kf_filter;
use crate::model::{FilterParams, FilterTrajectory, Trace};

/// Smoothed states and their covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

/// Fixed-interval smoother.
///
/// ```text
/// xs[N-1] = x+[N-1]
/// C_k     = P+[k] f / P-[k+1]
/// xs[k]   = x+[k] + C_k (xs[k+1] - x-[k+1])
/// Ps[k]   = P+[k] + C_k^2 (Ps[k+1] - P-[k+1])
/// ```
pub fn rts_smooth(traj: &FilterTrajectory, params: &FilterParams) -> Result<Smoothed> {
    params.validate()?;
    traj.check_consistent()?;
    let n = traj.len();
    let mut x = vec![0.0; n];
    let mut p = vec![0.0; n];
    x[n - 1] = traj.x_post[n - 1];
    p[n - 1] = traj.p_post[n - 1];
    for k in (0..n - 1).rev() {
        let p_pred = traj.p_prior[k + 1];
        if p_pred == 0.0 {
            return Err(Error::DegenerateCovariance { index: k + 1 });
        }
        let c = traj.p_post[k] * params.f / p_pred;
        x[k] = traj.x_post[k] + c * (x[k + 1] - traj.x_prior[k + 1]);
        // clamp: rounding can push a vanishing covariance a hair below zero
        p[k] = (traj.p_post[k] + c * c * (p[k + 1] - p_pred)).max(0.0);
    }
    Ok(Smoothed { x, p })
}

/// Random-walk model used by the pipeline: the first sample seeds the state,
/// with the uncertainty of one measurement.
pub fn pipeline_params(trace: &Trace, q: f64, r: f64) -> FilterParams {
    FilterParams::random_walk(q, r, trace.samples()[0], r)
}

fn check_qr(q: f64, r: f64) -> Result<()> {
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::InvalidParams(format!(
            "q={q} must be finite and > 0"
        )));
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "r={r} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// Forward filter followed by the backward smoother.
///
/// `r = 0` is accepted and degenerates to the identity (every measurement is
/// trusted completely).
pub fn denoise_trace(trace: &Trace, q: f64, r: f64) -> Result<Trace> {
    check_qr(q, r)?;
    let params = pipeline_params(trace, q, r);
    let traj = kf_filter(trace, &params)?;
    let smoothed = rts_smooth(&traj, &params)?;
    trace.with_samples(smoothed.x)
}

/// Forward pass only, kept for lag comparisons against the smoothed output.
pub fn forward_filter_trace(trace: &Trace, q: f64, r: f64) -> Result<Trace> {
    check_qr(q, r)?;
    let traj = kf_filter(trace, &pipeline_params(trace, q, r))?;
    trace.with_samples(traj.x_post)
}
