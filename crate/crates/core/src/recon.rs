//! Envelope detection, maximum-amplitude image formation and the peak
//! signal-to-noise metric.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::model::{EnvelopeImage, RoiSpec, Trace, Volume};

/// Analytic-signal envelope detector for one fixed trace length.
///
/// Builds the analytic signal in the frequency domain: positive-frequency bins
/// are doubled, negative ones zeroed, DC (and Nyquist, for even lengths) kept
/// as is. The envelope is the magnitude of the inverse transform.
#[derive(Clone)]
pub struct EnvelopeDetector {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for EnvelopeDetector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnvelopeDetector")
            .field("len", &self.len)
            .finish()
    }
}

impl EnvelopeDetector {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::TraceTooShort { len, min: 2 });
        }
        let mut planner = FftPlanner::new();
        Ok(EnvelopeDetector {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn analytic(&self, samples: &[f64]) -> Vec<Complex64> {
        assert_eq!(samples.len(), self.len, "detector built for another length");
        let n = self.len;
        let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        self.forward.process(&mut buf);
        // bins 1..ceil(n/2) are strictly positive frequencies
        let positive_end = n.div_ceil(2);
        for b in &mut buf[1..positive_end] {
            *b *= 2.0;
        }
        let negative_start = n / 2 + 1;
        for b in &mut buf[negative_start..] {
            *b = Complex64::new(0.0, 0.0);
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        for b in &mut buf {
            *b *= scale;
        }
        buf
    }

    pub fn envelope(&self, samples: &[f64]) -> Vec<f64> {
        self.analytic(samples).iter().map(|c| c.norm()).collect()
    }
}

/// Magnitude of the discrete analytic signal of `trace`.
pub fn envelope(trace: &Trace) -> Result<Trace> {
    let det = EnvelopeDetector::new(trace.len())?;
    trace.with_samples(det.envelope(trace.samples()))
}

/// Pixel (x, y) is the largest envelope value of the trace at (x, y).
pub fn reconstruct(volume: &Volume) -> Result<EnvelopeImage> {
    let det = EnvelopeDetector::new(volume.nt())?;
    let pixels: Vec<f64> = volume
        .traces()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|tr| det.envelope(tr).into_iter().fold(0.0, f64::max))
        .collect();
    EnvelopeImage::new(volume.nx(), volume.ny(), pixels)
}

/// Peak signal-to-noise ratio. Zero noise power outside the ROI is a
/// distinct outcome rather than a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Db(f64),
    Infinite,
}

impl Psnr {
    /// Decibels, with `Infinite` mapped to `f64::INFINITY`.
    pub fn as_f64(self) -> f64 {
        match self {
            Psnr::Db(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }

    pub fn db(self) -> Option<f64> {
        match self {
            Psnr::Db(v) => Some(v),
            Psnr::Infinite => None,
        }
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Db(v) => write!(f, "{v}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

/// `10 log10(max(env in ROI)^2 / mean(env^2 outside ROI))`, computed on an
/// envelope that has already been extracted.
pub fn psnr_of_envelope(env: &[f64], roi: RoiSpec) -> Result<Psnr> {
    roi.check(env.len())?;
    let (lo, hi) = (roi.t_lo(), roi.t_hi());
    let outside = env.len() - roi.len();
    if outside == 0 {
        return Err(Error::EmptyNoiseRegion { t_lo: lo, t_hi: hi });
    }
    let peak = env[lo..hi].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let noise_power = env[..lo]
        .iter()
        .chain(&env[hi..])
        .map(|v| v * v)
        .sum::<f64>()
        / outside as f64;
    if noise_power == 0.0 {
        return Ok(Psnr::Infinite);
    }
    Ok(Psnr::Db(10.0 * (peak * peak / noise_power).log10()))
}

/// PSNR of `trace` evaluated on its envelope.
pub fn psnr(trace: &Trace, roi: RoiSpec) -> Result<Psnr> {
    roi.check(trace.len())?;
    let env = envelope(trace)?;
    psnr_of_envelope(env.samples(), roi)
}

/// `psnr(after) - psnr(before)`; fails with `InfinitePsnr` if either side is
/// infinite.
pub fn psnr_gain(before: &Trace, after: &Trace, roi: RoiSpec) -> Result<f64> {
    if before.len() != after.len() {
        return Err(Error::TraceMismatch(format!(
            "lengths differ: {} vs {}",
            before.len(),
            after.len()
        )));
    }
    match (psnr(before, roi)?, psnr(after, roi)?) {
        (Psnr::Db(b), Psnr::Db(a)) => Ok(a - b),
        _ => Err(Error::InfinitePsnr),
    }
}
