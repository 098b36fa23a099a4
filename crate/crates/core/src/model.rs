//! Shared domain types: traces, volumes, filter parameters and the records
//! produced by the filtering, selection and reconstruction stages.
//!
//! Every type checks its invariants at construction and is immutable
//! afterwards, so values can be shared freely between worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDt(dt))
    }
}

/// One A-scan: a non-empty run of finite samples and its sampling interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    samples: Vec<f64>,
    dt: f64,
}

impl Trace {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        if samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if let Some(index) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Trace { samples, dt })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// A new trace on the same time axis.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Trace> {
        if samples.len() != self.samples.len() {
            return Err(Error::TraceMismatch(format!(
                "expected {} samples, got {}",
                self.samples.len(),
                samples.len()
            )));
        }
        Trace::new(samples, self.dt)
    }

    pub fn scaled(&self, alpha: f64) -> Result<Trace> {
        Trace::new(self.samples.iter().map(|s| alpha * s).collect(), self.dt)
    }
}

/// Unvalidated volume fields, as read from disk or assembled by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVolume {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub dt: f64,
    pub data: Vec<f64>,
}

/// A 3-D block of traces on an `nx` x `ny` scan grid sharing one time axis.
///
/// Memory order is x-major, then y, with t fastest, so each trace is a
/// contiguous slice of `nt` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    nx: usize,
    ny: usize,
    nt: usize,
    dt: f64,
    data: Vec<f64>,
}

/// Checks every `Volume` invariant and returns the validated volume.
pub fn validate_volume(raw: RawVolume) -> Result<Volume> {
    let RawVolume {
        nx,
        ny,
        nt,
        dt,
        data,
    } = raw;
    if nx == 0 || ny == 0 || nt == 0 {
        return Err(Error::InvalidDimensions { nx, ny, nt });
    }
    let expected = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nt))
        .ok_or(Error::InvalidDimensions { nx, ny, nt })?;
    if data.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: data.len(),
        });
    }
    check_dt(dt)?;
    if let Some(i) = data.iter().position(|s| !s.is_finite()) {
        let t = i % nt;
        let xy = i / nt;
        return Err(Error::NonFiniteVolumeSample {
            x: xy / ny,
            y: xy % ny,
            t,
        });
    }
    Ok(Volume {
        nx,
        ny,
        nt,
        dt,
        data,
    })
}

impl Volume {
    pub fn new(nx: usize, ny: usize, nt: usize, dt: f64, data: Vec<f64>) -> Result<Self> {
        validate_volume(RawVolume {
            nx,
            ny,
            nt,
            dt,
            data,
        })
    }

    pub fn zeros(nx: usize, ny: usize, nt: usize, dt: f64) -> Result<Self> {
        Volume::new(nx, ny, nt, dt, vec![0.0; nx * ny * nt])
    }

    /// Builds a volume from traces listed in x-major, y-minor order.
    pub fn from_traces(nx: usize, ny: usize, dt: f64, traces: &[Trace]) -> Result<Self> {
        if traces.len() != nx * ny {
            return Err(Error::LengthMismatch {
                expected: nx * ny,
                actual: traces.len(),
            });
        }
        let nt = traces.first().map_or(0, Trace::len);
        let mut data = Vec::with_capacity(nx * ny * nt);
        for (i, tr) in traces.iter().enumerate() {
            if tr.len() != nt || tr.dt() != dt {
                return Err(Error::TraceMismatch(format!(
                    "trace {} has length {} and dt {}, expected {} and {}",
                    i,
                    tr.len(),
                    tr.dt(),
                    nt,
                    dt
                )));
            }
            data.extend_from_slice(tr.samples());
        }
        Volume::new(nx, ny, nt, dt, data)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nt)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn trace_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Linear trace index of grid point (x, y).
    pub fn index(&self, x: usize, y: usize) -> usize {
        assert!(x < self.nx && y < self.ny, "({x}, {y}) outside grid");
        x * self.ny + y
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.ny, index % self.ny)
    }

    /// The `nt` samples stored at (x, y), in time order.
    pub fn trace_slice(&self, x: usize, y: usize) -> &[f64] {
        let start = self.index(x, y) * self.nt;
        &self.data[start..start + self.nt]
    }

    pub fn trace(&self, x: usize, y: usize) -> Trace {
        Trace {
            samples: self.trace_slice(x, y).to_vec(),
            dt: self.dt,
        }
    }

    pub fn traces(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.nt)
    }

    /// Applies `f` to every trace in parallel and reassembles a volume of the
    /// same shape. Errors carry the (x, y) location of the failing trace; the
    /// first failure in trace order is reported.
    pub fn map_traces<F>(&self, f: F) -> Result<Volume>
    where
        F: Fn(usize, usize, Trace) -> Result<Trace> + Sync,
    {
        let out: Vec<Result<Trace>> = (0..self.trace_count())
            .into_par_iter()
            .map(|i| {
                let (x, y) = self.coords(i);
                f(x, y, self.trace(x, y)).map_err(|e| e.at_trace(x, y))
            })
            .collect();
        let mut data = Vec::with_capacity(self.data.len());
        for r in out {
            let tr = r?;
            if tr.len() != self.nt {
                return Err(Error::TraceMismatch(format!(
                    "mapped trace has length {}, expected {}",
                    tr.len(),
                    self.nt
                )));
            }
            data.extend_from_slice(tr.samples());
        }
        Volume::new(self.nx, self.ny, self.nt, self.dt, data)
    }

    pub fn same_shape(&self, other: &Volume) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        if self.dt != other.dt {
            return Err(Error::TraceMismatch(format!(
                "dt differs: {} vs {}",
                self.dt, other.dt
            )));
        }
        Ok(())
    }
}

/// Scalar state-space model of the forward filter.
///
/// `gu` is the control contribution G*u, zero for every pipeline use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub f: f64,
    pub h: f64,
    pub gu: f64,
    pub q: f64,
    pub r: f64,
    pub x0: f64,
    pub p0: f64,
}

impl FilterParams {
    /// Random-walk model (f = h = 1, no control input).
    pub fn random_walk(q: f64, r: f64, x0: f64, p0: f64) -> Self {
        FilterParams {
            f: 1.0,
            h: 1.0,
            gu: 0.0,
            q,
            r,
            x0,
            p0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("f", self.f),
            ("h", self.h),
            ("gu", self.gu),
            ("q", self.q),
            ("r", self.r),
            ("x0", self.x0),
            ("p0", self.p0),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name}={v} is not finite")));
        }
        for (name, v) in [("q", self.q), ("r", self.r), ("p0", self.p0)] {
            if v < 0.0 {
                return Err(Error::InvalidParams(format!("{name}={v} is negative")));
            }
        }
        if self.q + self.r <= 0.0 {
            return Err(Error::InvalidParams(
                "q + r must be positive (noiseless model)".into(),
            ));
        }
        Ok(())
    }
}

/// Full forward-filter record for one trace: priors, posteriors and gains.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterTrajectory {
    pub x_prior: Vec<f64>,
    pub p_prior: Vec<f64>,
    pub x_post: Vec<f64>,
    pub p_post: Vec<f64>,
    pub gain: Vec<f64>,
}

impl FilterTrajectory {
    pub fn with_capacity(n: usize) -> Self {
        FilterTrajectory {
            x_prior: Vec::with_capacity(n),
            p_prior: Vec::with_capacity(n),
            x_post: Vec::with_capacity(n),
            p_post: Vec::with_capacity(n),
            gain: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.x_post.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_post.is_empty()
    }

    pub(crate) fn check_consistent(&self) -> Result<()> {
        let n = self.x_post.len();
        let lens = [
            self.x_prior.len(),
            self.p_prior.len(),
            self.p_post.len(),
            self.gain.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::InconsistentTrajectory(format!(
                "sequence lengths differ: x_post={n}, others={lens:?}"
            )));
        }
        if n == 0 {
            return Err(Error::InconsistentTrajectory("empty trajectory".into()));
        }
        Ok(())
    }
}

/// Time-axis region of interest `[t_lo, t_hi)` in sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoiSpec {
    t_lo: usize,
    t_hi: usize,
}

impl RoiSpec {
    pub fn new(t_lo: usize, t_hi: usize) -> Result<Self> {
        if t_lo >= t_hi {
            return Err(Error::InvalidRoi {
                t_lo,
                t_hi,
                nt: usize::MAX,
            });
        }
        Ok(RoiSpec { t_lo, t_hi })
    }

    pub fn t_lo(&self) -> usize {
        self.t_lo
    }

    pub fn t_hi(&self) -> usize {
        self.t_hi
    }

    pub fn len(&self) -> usize {
        self.t_hi - self.t_lo
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Checks the ROI fits a trace of `nt` samples.
    pub fn check(&self, nt: usize) -> Result<()> {
        if self.t_hi > nt {
            return Err(Error::InvalidRoi {
                t_lo: self.t_lo,
                t_hi: self.t_hi,
                nt,
            });
        }
        Ok(())
    }

    /// True when the ROI reaches into the outer 10% of the time axis, where
    /// analytic-signal edge transients live.
    pub fn touches_edges(&self, nt: usize) -> bool {
        let margin = nt / 10;
        self.t_lo < margin || self.t_hi > nt - margin
    }
}

impl std::fmt::Display for RoiSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.t_lo, self.t_hi)
    }
}

impl std::str::FromStr for RoiSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| format!("ROI '{s}' must look like t_lo:t_hi"))?;
        let lo: usize = lo.trim().parse().map_err(|e| format!("ROI t_lo: {e}"))?;
        let hi: usize = hi.trim().parse().map_err(|e| format!("ROI t_hi: {e}"))?;
        RoiSpec::new(lo, hi).map_err(|e| e.to_string())
    }
}

/// Outcome of the shared-Q filter-bank selection.
#[derive(Debug, Clone, PartialEq)]
pub struct QSelectionReport {
    pub grid: Vec<f64>,
    pub sampled_trace_ids: Vec<(usize, usize)>,
    /// Per-trace measurement noise used while scoring.
    pub r_per_trace: Vec<f64>,
    pub best_q_per_trace: Vec<f64>,
    /// Score achieved at each trace's best Q; `None` marks an infinite PSNR.
    pub best_psnr_db: Vec<Option<f64>>,
    pub q_final: f64,
}

/// Per-trace maximum envelope amplitude, stored x-major like `Volume`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeImage {
    nx: usize,
    ny: usize,
    pixels: Vec<f64>,
}

impl EnvelopeImage {
    pub fn new(nx: usize, ny: usize, pixels: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidImage(format!("empty {nx}x{ny} image")));
        }
        if pixels.len() != nx * ny {
            return Err(Error::LengthMismatch {
                expected: nx * ny,
                actual: pixels.len(),
            });
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidImage(format!(
                "pixel ({}, {}) = {} is negative or non-finite",
                i / ny,
                i % ny,
                pixels[i]
            )));
        }
        Ok(EnvelopeImage { nx, ny, pixels })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[x * self.ny + y]
    }
}
