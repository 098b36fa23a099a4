//! Background subtraction, the zero-phase low-pass comparison filter, and
//! the volume-level drivers for both processing arms.

use std::f64::consts::PI;

use crate::adapt::estimate_r;
use crate::error::{Error, Result};
use crate::model::{Trace, Volume};
use crate::rts::denoise_trace;

/// Center frequency of the modeled transducer.
pub const TRANSDUCER_CENTER_HZ: f64 = 2.5e6;
/// Default low-pass cutoff: twice the transducer center frequency.
pub const DEFAULT_LP_CUTOFF_HZ: f64 = 2.0 * TRANSDUCER_CENTER_HZ;
/// FIR length of the comparison low-pass.
pub const LP_TAPS: usize = 101;

/// Pointwise `signal - background`.
pub fn differential_subtract(signal: &Trace, background: &Trace) -> Result<Trace> {
    if signal.len() != background.len() {
        return Err(Error::TraceMismatch(format!(
            "signal has {} samples, background {}",
            signal.len(),
            background.len()
        )));
    }
    if signal.dt() != background.dt() {
        return Err(Error::TraceMismatch(format!(
            "signal dt {} differs from background dt {}",
            signal.dt(),
            background.dt()
        )));
    }
    signal.with_samples(
        signal
            .samples()
            .iter()
            .zip(background.samples())
            .map(|(s, b)| s - b)
            .collect(),
    )
}

/// Hamming-windowed sinc low-pass FIR, normalized to unit DC gain.
#[derive(Debug, Clone, PartialEq)]
pub struct FirLowpass {
    taps: Vec<f64>,
}

impl FirLowpass {
    pub fn new(cutoff_hz: f64, dt: f64) -> Result<Self> {
        let nyquist_hz = 0.5 / dt;
        if !(cutoff_hz.is_finite() && cutoff_hz > 0.0 && cutoff_hz < nyquist_hz) {
            return Err(Error::InvalidCutoff {
                cutoff_hz,
                nyquist_hz,
            });
        }
        let fc = cutoff_hz * dt; // cycles per sample
        let m = (LP_TAPS - 1) as f64;
        let mut taps: Vec<f64> = (0..LP_TAPS)
            .map(|i| {
                let n = i as f64 - m / 2.0;
                let sinc = if n == 0.0 {
                    2.0 * fc
                } else {
                    (2.0 * PI * fc * n).sin() / (PI * n)
                };
                let window = 0.54 - 0.46 * (2.0 * PI * i as f64 / m).cos();
                sinc * window
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        Ok(FirLowpass { taps })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Causal convolution; samples before the start are held at `x[0]`.
    fn run_causal(&self, x: &[f64]) -> Vec<f64> {
        let first = x[0];
        (0..x.len())
            .map(|n| {
                self.taps
                    .iter()
                    .enumerate()
                    .map(|(j, h)| h * if j <= n { x[n - j] } else { first })
                    .sum()
            })
            .collect()
    }

    /// Forward then backward application, so the net response has zero phase.
    ///
    /// Both ends are extended by odd reflection about the end sample (up to
    /// three filter lengths) before filtering, and the extension is trimmed.
    pub fn apply_zero_phase(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * (LP_TAPS - 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let mut y = self.run_causal(&ext);
        y.reverse();
        let mut y = self.run_causal(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Zero-phase low-pass of one trace.
pub fn lowpass(trace: &Trace, cutoff_hz: f64) -> Result<Trace> {
    let fir = FirLowpass::new(cutoff_hz, trace.dt())?;
    trace.with_samples(fir.apply_zero_phase(trace.samples()))
}

/// Kalman/RTS arm: every trace is denoised with the shared `q` and its own R.
/// With a background, both volumes are processed the same way and the
/// background is subtracted trace by trace.
pub fn pipeline_denoise(
    volume: &Volume,
    background: Option<&Volume>,
    q: f64,
    noise_window: usize,
) -> Result<Volume> {
    if let Some(bg) = background {
        volume.same_shape(bg)?;
    }
    let denoise = |tr: &Trace| -> Result<Trace> {
        let r = estimate_r(tr, noise_window)?;
        denoise_trace(tr, q, r)
    };
    volume.map_traces(|x, y, tr| {
        let sig = denoise(&tr)?;
        match background {
            Some(bg) => differential_subtract(&sig, &denoise(&bg.trace(x, y))?),
            None => Ok(sig),
        }
    })
}

/// Comparison arm: zero-phase low-pass, then the same background subtraction.
pub fn baseline_denoise(
    volume: &Volume,
    background: Option<&Volume>,
    cutoff_hz: f64,
) -> Result<Volume> {
    if let Some(bg) = background {
        volume.same_shape(bg)?;
    }
    let fir = FirLowpass::new(cutoff_hz, volume.dt())?;
    volume.map_traces(|x, y, tr| {
        let sig = tr.with_samples(fir.apply_zero_phase(tr.samples()))?;
        match background {
            Some(bg) => {
                let b = bg.trace(x, y);
                differential_subtract(&sig, &b.with_samples(fir.apply_zero_phase(b.samples()))?)
            }
            None => Ok(sig),
        }
    })
}
