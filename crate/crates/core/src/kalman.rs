//! Forward scalar Kalman filter, run point by point over one trace.

use crate::error::{Error, Result};
use crate::model::{FilterParams, FilterTrajectory, Trace};

/// Quantities produced by one predict/update cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KfStep {
    pub x_prior: f64,
    pub p_prior: f64,
    pub gain: f64,
    pub x_post: f64,
    pub p_post: f64,
}

/// One predict/update cycle from the previous posterior `(x_prev_post,
/// p_prev_post)` and measurement `y`.
///
/// ```text
/// P-  = f P+ f + q
/// K   = P- h / (h P- h + r)
/// x-  = f x+ + gu
/// x+  = x- + K (y - h x-)
/// P+  = (1 - K h) P-
/// ```
///
/// The posterior covariance is evaluated as `P- r / (h P- h + r)`, which is
/// the same quantity without the cancellation in `1 - K h` when `r` is small.
pub fn kf_step(
    x_prev_post: f64,
    p_prev_post: f64,
    y: f64,
    params: &FilterParams,
) -> Result<KfStep> {
    params.validate()?;
    if !x_prev_post.is_finite() || !p_prev_post.is_finite() || p_prev_post < 0.0 {
        return Err(Error::InvalidParams(format!(
            "previous posterior ({x_prev_post}, {p_prev_post}) must be finite with p >= 0"
        )));
    }
    if !y.is_finite() {
        return Err(Error::NonFiniteSample { index: 0 });
    }
    step(x_prev_post, p_prev_post, y, params)
}

#[inline]
fn step(x_prev: f64, p_prev: f64, y: f64, p: &FilterParams) -> Result<KfStep> {
    let p_prior = p.f * p_prev * p.f + p.q;
    let denom = p.h * p_prior * p.h + p.r;
    if denom == 0.0 {
        return Err(Error::DegenerateGain);
    }
    let gain = p_prior * p.h / denom;
    let x_prior = p.f * x_prev + p.gu;
    let x_post = x_prior + gain * (y - p.h * x_prior);
    let p_post = p_prior * p.r / denom;
    Ok(KfStep {
        x_prior,
        p_prior,
        gain,
        x_post,
        p_post,
    })
}

/// Filters the whole trace, starting from `(params.x0, params.p0)` as the
/// posterior before the first sample.
pub fn kf_filter(trace: &Trace, params: &FilterParams) -> Result<FilterTrajectory> {
    params.validate()?;
    let mut traj = FilterTrajectory::with_capacity(trace.len());
    let (mut x, mut p) = (params.x0, params.p0);
    for (k, &y) in trace.samples().iter().enumerate() {
        let s = step(x, p, y, params).map_err(|e| e.at_sample(k))?;
        traj.x_prior.push(s.x_prior);
        traj.p_prior.push(s.p_prior);
        traj.gain.push(s.gain);
        traj.x_post.push(s.x_post);
        traj.p_post.push(s.p_post);
        x = s.x_post;
        p = s.p_post;
    }
    Ok(traj)
}
