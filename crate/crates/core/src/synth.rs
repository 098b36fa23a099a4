//! Synthetic A-scans and scan volumes with stored ground truth.
//!
//! Each trace is the exact sum of three stored components:
//!
//! * `clean`: a Gaussian-modulated sinusoid at the pulse arrival time plus
//!   any reflection pulses,
//! * `noise`: white Gaussian noise,
//! * `artifacts`: sparse single-sample impulses of random sign.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64(seed)`; independent sub-streams are selected with
//! `set_stream`, so a trace's content depends only on `(seed, stream)` and
//! parallel generation matches serial generation.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Trace, Volume};

/// Fractional -6 dB bandwidth of the modeled transducer pulse.
pub const PULSE_FRACTIONAL_BANDWIDTH: f64 = 0.6;
/// Pulses are truncated to zero beyond this many envelope widths.
pub const PULSE_SUPPORT_WIDTHS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    pub time_s: f64,
    pub amp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub nt: usize,
    pub dt: f64,
    pub pulse_center_hz: f64,
    pub pulse_time_s: f64,
    pub pulse_amp: f64,
    pub noise_sigma: f64,
    /// Expected number of impulses per trace (Poisson mean).
    pub impulse_rate: f64,
    pub impulse_amp: f64,
    pub reflections: Vec<Reflection>,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// 2048 samples at 100 MHz (20.48 us) with a 2.5 MHz pulse at 15 us.
    fn default() -> Self {
        SynthSpec {
            nt: 2048,
            dt: 1e-8,
            pulse_center_hz: 2.5e6,
            pulse_time_s: 1.5e-5,
            pulse_amp: 1.0,
            noise_sigma: 0.1,
            impulse_rate: 0.0,
            impulse_amp: 0.0,
            reflections: Vec::new(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSynthSpec(m));
        if self.nt == 0 {
            return bad("nt must be positive".into());
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt={} must be finite and > 0", self.dt));
        }
        if !(self.pulse_center_hz.is_finite() && self.pulse_center_hz > 0.0) {
            return bad(format!(
                "pulse_center_hz={} must be > 0",
                self.pulse_center_hz
            ));
        }
        let span = self.nt as f64 * self.dt;
        let in_span = |t: f64| t.is_finite() && (0.0..span).contains(&t);
        if !in_span(self.pulse_time_s) {
            return bad(format!(
                "pulse_time_s={} outside [0, {span})",
                self.pulse_time_s
            ));
        }
        for r in &self.reflections {
            if !in_span(r.time_s) {
                return bad(format!("reflection time {} outside [0, {span})", r.time_s));
            }
            if !(r.amp.is_finite() && r.amp >= 0.0) {
                return bad(format!("reflection amplitude {} must be >= 0", r.amp));
            }
        }
        for (name, v) in [
            ("pulse_amp", self.pulse_amp),
            ("noise_sigma", self.noise_sigma),
            ("impulse_rate", self.impulse_rate),
            ("impulse_amp", self.impulse_amp),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name}={v} must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Standard deviation (seconds) of the Gaussian pulse envelope, from the
    /// -6 dB fractional bandwidth.
    pub fn pulse_sigma_s(&self) -> f64 {
        let reference = 10f64.powf(-6.0 / 20.0);
        let a = (PI * self.pulse_center_hz * PULSE_FRACTIONAL_BANDWIDTH).powi(2)
            / (-4.0 * reference.ln());
        (1.0 / (2.0 * a)).sqrt()
    }

    /// Pulse width used for support and noise-prefix bounds: the envelope
    /// standard deviation.
    pub fn pulse_width_s(&self) -> f64 {
        self.pulse_sigma_s()
    }

    /// Sample index of the main pulse's arrival.
    pub fn pulse_index(&self) -> usize {
        (self.pulse_time_s / self.dt).round() as usize
    }

    /// First sample that may carry clean-signal energy.
    pub fn clean_onset_index(&self) -> usize {
        let support = PULSE_SUPPORT_WIDTHS * self.pulse_width_s();
        let mut t = if self.pulse_amp > 0.0 {
            self.pulse_time_s
        } else {
            f64::INFINITY
        };
        for r in &self.reflections {
            if r.amp > 0.0 {
                t = t.min(r.time_s);
            }
        }
        if t.is_infinite() {
            return self.nt;
        }
        (((t - support) / self.dt).floor().max(0.0) as usize).min(self.nt)
    }
}

/// Truncated Gaussian-modulated cosine centered at `t0`.
pub fn gaussian_pulse(
    nt: usize,
    dt: f64,
    center_hz: f64,
    t0: f64,
    amp: f64,
    sigma_s: f64,
) -> Vec<f64> {
    let support = PULSE_SUPPORT_WIDTHS * sigma_s;
    (0..nt)
        .map(|k| {
            let t = k as f64 * dt - t0;
            if t.abs() > support || amp == 0.0 {
                0.0
            } else {
                amp * (-t * t / (2.0 * sigma_s * sigma_s)).exp() * (2.0 * PI * center_hz * t).cos()
            }
        })
        .collect()
}

/// A synthetic trace and its stored components.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTrace {
    pub trace: Trace,
    pub clean: Trace,
    pub noise: Trace,
    pub artifacts: Trace,
}

fn clean_component(spec: &SynthSpec) -> Vec<f64> {
    let sigma = spec.pulse_sigma_s();
    let mut clean = gaussian_pulse(
        spec.nt,
        spec.dt,
        spec.pulse_center_hz,
        spec.pulse_time_s,
        spec.pulse_amp,
        sigma,
    );
    for r in &spec.reflections {
        let refl = gaussian_pulse(
            spec.nt,
            spec.dt,
            spec.pulse_center_hz,
            r.time_s,
            r.amp,
            sigma,
        );
        clean.iter_mut().zip(refl).for_each(|(c, v)| *c += v);
    }
    clean
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Noise and artifacts for one trace. Stream `2*id` feeds the noise,
/// `2*id + 1` the impulses.
fn random_components(spec: &SynthSpec, id: u64) -> (Vec<f64>, Vec<f64>) {
    let mut noise_rng = stream_rng(spec.seed, 2 * id);
    let noise: Vec<f64> = (0..spec.nt)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            spec.noise_sigma * z
        })
        .collect();

    let mut artifacts = vec![0.0; spec.nt];
    if spec.impulse_rate > 0.0 && spec.impulse_amp > 0.0 {
        let mut rng = stream_rng(spec.seed, 2 * id + 1);
        let count = Poisson::new(spec.impulse_rate)
            .expect("rate checked positive")
            .sample(&mut rng) as usize;
        for _ in 0..count {
            let at = rng.random_range(0..spec.nt);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            artifacts[at] += sign * spec.impulse_amp;
        }
    }
    (noise, artifacts)
}

fn assemble(spec: &SynthSpec, clean: Vec<f64>, id: u64) -> Result<SynthTrace> {
    let (noise, artifacts) = random_components(spec, id);
    let trace: Vec<f64> = clean
        .iter()
        .zip(&noise)
        .zip(&artifacts)
        .map(|((c, n), a)| c + n + a)
        .collect();
    Ok(SynthTrace {
        trace: Trace::new(trace, spec.dt)?,
        clean: Trace::new(clean, spec.dt)?,
        noise: Trace::new(noise, spec.dt)?,
        artifacts: Trace::new(artifacts, spec.dt)?,
    })
}

/// One synthetic trace on stream 0 of `spec.seed`.
pub fn synth_trace(spec: &SynthSpec) -> Result<SynthTrace> {
    spec.validate()?;
    assemble(spec, clean_component(spec), 0)
}

/// A synthetic scan and its paired background acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthVolume {
    pub volume: Volume,
    pub background: Volume,
    /// Clean component of `volume` (pulses and reflections only).
    pub clean: Volume,
    pub truth_mask: BTreeSet<(usize, usize)>,
}

/// Builds an `nx` x `ny` scan: masked points carry the pulse, all points carry
/// the reflections, noise and impulses. The background is the same scan with
/// no pulse and independent noise and impulse draws.
pub fn synth_volume(
    base: &SynthSpec,
    nx: usize,
    ny: usize,
    mask: &BTreeSet<(usize, usize)>,
) -> Result<SynthVolume> {
    base.validate()?;
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidDimensions {
            nx,
            ny,
            nt: base.nt,
        });
    }
    if let Some(&(x, y)) = mask.iter().find(|&&(x, y)| x >= nx || y >= ny) {
        return Err(Error::MaskOutOfBounds { x, y, nx, ny });
    }
    let with_pulse = clean_component(base);
    let without_pulse = clean_component(&SynthSpec {
        pulse_amp: 0.0,
        ..base.clone()
    });

    // stream ids: 2*i for the scan, 2*i + 1 for its background
    let pairs: Vec<Result<(SynthTrace, SynthTrace)>> = (0..nx * ny)
        .into_par_iter()
        .map(|i| {
            let xy = (i / ny, i % ny);
            let clean = if mask.contains(&xy) {
                with_pulse.clone()
            } else {
                without_pulse.clone()
            };
            let id = i as u64;
            Ok((
                assemble(base, clean, 2 * id)?,
                assemble(base, without_pulse.clone(), 2 * id + 1)?,
            ))
        })
        .collect();

    let mut data = Vec::with_capacity(nx * ny * base.nt);
    let mut bg = Vec::with_capacity(nx * ny * base.nt);
    let mut clean = Vec::with_capacity(nx * ny * base.nt);
    for p in pairs {
        let (s, b) = p?;
        data.extend_from_slice(s.trace.samples());
        clean.extend_from_slice(s.clean.samples());
        bg.extend_from_slice(b.trace.samples());
    }
    Ok(SynthVolume {
        volume: Volume::new(nx, ny, base.nt, base.dt, data)?,
        background: Volume::new(nx, ny, base.nt, base.dt, bg)?,
        clean: Volume::new(nx, ny, base.nt, base.dt, clean)?,
        truth_mask: mask.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> SynthSpec {
        SynthSpec {
            nt: 512,
            pulse_time_s: 2.56e-6,
            noise_sigma: 0.0,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn pulse_width_matches_bandwidth() {
        // -6 dB bandwidth 1.5 MHz around 2.5 MHz -> envelope sigma ~ 0.25 us
        let s = SynthSpec::default().pulse_sigma_s();
        assert!((s - 2.495e-7).abs() < 1e-9, "{s}");
    }

    #[test]
    fn noiseless_trace_is_clean() {
        let out = synth_trace(&quiet()).unwrap();
        assert_eq!(out.trace, out.clean);
        let peak = out.clean.samples().iter().fold(0.0_f64, |m, v| m.max(*v));
        assert!((peak - 1.0).abs() < 1e-12);
        assert_eq!(out.clean.samples()[256], 1.0);
    }

    #[test]
    fn pulseless_trace_is_noise() {
        let spec = SynthSpec {
            pulse_amp: 0.0,
            noise_sigma: 0.3,
            ..quiet()
        };
        let out = synth_trace(&spec).unwrap();
        assert_eq!(out.trace, out.noise);
    }

    #[test]
    fn components_sum_exactly() {
        let spec = SynthSpec {
            noise_sigma: 0.2,
            impulse_rate: 5.0,
            impulse_amp: 3.0,
            reflections: vec![Reflection {
                time_s: 4.2e-6,
                amp: 0.4,
            }],
            ..quiet()
        };
        let out = synth_trace(&spec).unwrap();
        for k in 0..spec.nt {
            let c = out.clean.samples()[k];
            let n = out.noise.samples()[k];
            let a = out.artifacts.samples()[k];
            assert_eq!(out.trace.samples()[k], c + n + a);
            let resid = out.trace.samples()[k] - c - n - a;
            assert!(resid.abs() <= 4.0 * f64::EPSILON * (c.abs() + n.abs() + a.abs()));
        }
        assert!(out.artifacts.samples().iter().any(|&a| a != 0.0));
    }

    #[test]
    fn seeded_output_is_reproducible() {
        let spec = SynthSpec {
            noise_sigma: 0.2,
            impulse_rate: 3.0,
            impulse_amp: 2.0,
            seed: 42,
            ..quiet()
        };
        let a = synth_trace(&spec).unwrap();
        let b = synth_trace(&spec).unwrap();
        let bits = |t: &Trace| t.samples().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.trace), bits(&b.trace));
        let c = synth_trace(&SynthSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(bits(&a.trace), bits(&c.trace));
    }

    #[test]
    fn noise_prefix_has_no_clean_energy() {
        let spec = SynthSpec {
            reflections: vec![Reflection {
                time_s: 4.2e-6,
                amp: 0.4,
            }],
            ..quiet()
        };
        let onset = spec.clean_onset_index();
        let out = synth_trace(&spec).unwrap();
        assert!(onset > 100);
        assert!(out.clean.samples()[..onset].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_specs() {
        assert!(synth_trace(&SynthSpec {
            pulse_time_s: 1.0,
            ..quiet()
        })
        .is_err());
        assert!(synth_trace(&SynthSpec {
            noise_sigma: -1.0,
            ..quiet()
        })
        .is_err());
        assert!(synth_trace(&SynthSpec {
            reflections: vec![Reflection {
                time_s: -1.0,
                amp: 1.0
            }],
            ..quiet()
        })
        .is_err());
    }

    #[test]
    fn volume_mask_layout() {
        let mask: BTreeSet<_> = [(0, 0), (0, 1), (0, 2), (1, 2)].into_iter().collect();
        let sv = synth_volume(&quiet(), 3, 3, &mask).unwrap();
        assert_eq!(sv.truth_mask, mask);
        for x in 0..3 {
            for y in 0..3 {
                let peak = sv
                    .volume
                    .trace_slice(x, y)
                    .iter()
                    .fold(0.0_f64, |m, v| m.max(v.abs()));
                assert_eq!(peak > 0.5, mask.contains(&(x, y)), "({x},{y})");
            }
        }
        assert!(sv.background.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn background_draws_are_independent() {
        let spec = SynthSpec {
            noise_sigma: 0.1,
            ..quiet()
        };
        let sv = synth_volume(&spec, 2, 2, &BTreeSet::new()).unwrap();
        assert_ne!(sv.volume.trace_slice(0, 0), sv.background.trace_slice(0, 0));
        assert_ne!(sv.volume.trace_slice(0, 0), sv.volume.trace_slice(0, 1));
    }

    #[test]
    fn mask_out_of_bounds() {
        let mask: BTreeSet<_> = [(3, 0)].into_iter().collect();
        assert!(matches!(
            synth_volume(&quiet(), 3, 3, &mask),
            Err(Error::MaskOutOfBounds { x: 3, y: 0, .. })
        ));
    }
}
