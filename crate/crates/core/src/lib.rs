//! Photoacoustic A-scan denoising with a scalar Kalman filter and a
//! Rauch-Tung-Striebel smoother.
//!
//! Pipeline per trace: estimate the measurement noise R from the leading
//! noise samples, run the forward filter with a shared process noise Q
//! (picked by scoring a grid of candidates on sampled traces), smooth the
//! result backwards, and optionally subtract an identically processed
//! background acquisition. Images are formed from the maximum of each
//! trace's analytic-signal envelope.

pub mod adapt;
pub mod baseline;
pub mod bench;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod kalman;
pub mod model;
pub mod recon;
pub mod rts;
pub mod synth;

pub use adapt::{estimate_r, select_q, select_q_auto};
pub use baseline::{
    baseline_denoise, differential_subtract, lowpass, pipeline_denoise, FirLowpass,
};
pub use config::PipelineConfig;
pub use error::{Error, ErrorClass, Result};
pub use kalman::{kf_filter, kf_step, KfStep};
pub use model::{
    EnvelopeImage, FilterParams, FilterTrajectory, QSelectionReport, RoiSpec, Trace, Volume,
};
pub use recon::{envelope, psnr, psnr_gain, reconstruct, Psnr};
pub use rts::{denoise_trace, rts_smooth, Smoothed};
pub use synth::{synth_trace, synth_volume, SynthSpec, SynthTrace, SynthVolume};
