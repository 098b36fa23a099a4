//! Volume-level drivers shared by the command line and the benchmark suite:
//! Q resolution, per-trace metric tables and the two-arm comparison.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::adapt::{select_q, select_q_auto};
use crate::baseline::{baseline_denoise, pipeline_denoise};
use crate::config::{PipelineConfig, QSetting};
use crate::error::{Error, Result};
use crate::model::{EnvelopeImage, QSelectionReport, RoiSpec, Volume};
use crate::recon::{psnr, reconstruct, Psnr};

/// Runs Q selection for a config, honoring an explicit grid if one is set.
pub fn run_q_selection(
    volume: &Volume,
    cfg: &PipelineConfig,
    roi: RoiSpec,
) -> Result<QSelectionReport> {
    let n_sample = cfg.n_sample.min(volume.trace_count());
    let window = cfg.noise_window_for(volume.nt());
    match &cfg.q_grid {
        Some(grid) => select_q(volume, grid, n_sample, cfg.seed, window, roi),
        None => select_q_auto(volume, n_sample, cfg.seed, window, roi),
    }
}

/// The Q to denoise with, plus the selection report when it was chosen
/// automatically.
pub fn resolve_q(volume: &Volume, cfg: &PipelineConfig) -> Result<(f64, Option<QSelectionReport>)> {
    match cfg.q {
        QSetting::Fixed(q) => Ok((q, None)),
        QSetting::Auto => {
            let roi = cfg
                .roi
                .ok_or_else(|| Error::InvalidParams("automatic Q selection needs an ROI".into()))?;
            let report = run_q_selection(volume, cfg, roi)?;
            Ok((report.q_final, Some(report)))
        }
    }
}

/// PSNR of every trace, in x-major order.
pub fn psnr_table(volume: &Volume, roi: RoiSpec) -> Result<Vec<(usize, usize, Psnr)>> {
    roi.check(volume.nt())?;
    (0..volume.trace_count())
        .into_par_iter()
        .map(|i| {
            let (x, y) = volume.coords(i);
            psnr(&volume.trace(x, y), roi)
                .map(|p| (x, y, p))
                .map_err(|e| e.at_trace(x, y))
        })
        .collect()
}

pub fn render_psnr_table(rows: &[(usize, usize, Psnr)]) -> String {
    let mut s = String::from("x,y,psnr_db\n");
    for (x, y, p) in rows {
        let _ = writeln!(s, "{x},{y},{p}");
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceComparison {
    pub x: usize,
    pub y: usize,
    pub raw: Psnr,
    pub baseline: Psnr,
    pub pipeline: Psnr,
}

impl TraceComparison {
    /// Pipeline PSNR minus baseline PSNR, when both are finite.
    pub fn gain(&self) -> Option<f64> {
        Some(self.pipeline.db()? - self.baseline.db()?)
    }
}

/// Both processing arms run on one raw input.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub q: f64,
    pub q_report: Option<QSelectionReport>,
    pub noise_window: usize,
    pub lp_cutoff_hz: f64,
    pub roi: RoiSpec,
    pub rows: Vec<TraceComparison>,
    pub pipeline: Volume,
    pub baseline: Volume,
    pub raw_image: EnvelopeImage,
    pub baseline_image: EnvelopeImage,
    pub pipeline_image: EnvelopeImage,
}

/// Runs the Kalman/RTS pipeline and the low-pass baseline (each followed by
/// background subtraction when a background is given) on the same input.
pub fn compare(
    volume: &Volume,
    background: Option<&Volume>,
    cfg: &PipelineConfig,
) -> Result<Comparison> {
    let roi = cfg
        .roi
        .ok_or_else(|| Error::InvalidParams("comparison needs an ROI".into()))?;
    roi.check(volume.nt())?;
    let (q, q_report) = resolve_q(volume, cfg)?;
    let noise_window = cfg.noise_window_for(volume.nt());
    let pipeline = pipeline_denoise(volume, background, q, noise_window)?;
    let baseline = baseline_denoise(volume, background, cfg.lp_cutoff_hz)?;

    let raw_t = psnr_table(volume, roi)?;
    let base_t = psnr_table(&baseline, roi)?;
    let pipe_t = psnr_table(&pipeline, roi)?;
    let rows = raw_t
        .iter()
        .zip(&base_t)
        .zip(&pipe_t)
        .map(|((r, b), p)| TraceComparison {
            x: r.0,
            y: r.1,
            raw: r.2,
            baseline: b.2,
            pipeline: p.2,
        })
        .collect();

    Ok(Comparison {
        q,
        q_report,
        noise_window,
        lp_cutoff_hz: cfg.lp_cutoff_hz,
        roi,
        rows,
        raw_image: reconstruct(volume)?,
        baseline_image: reconstruct(&baseline)?,
        pipeline_image: reconstruct(&pipeline)?,
        pipeline,
        baseline,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl Comparison {
    /// Mean finite gain over all traces, or over `mask` when given.
    pub fn mean_gain(&self, mask: Option<&BTreeSet<(usize, usize)>>) -> Option<f64> {
        mean(
            self.rows
                .iter()
                .filter(|r| mask.is_none_or(|m| m.contains(&(r.x, r.y))))
                .filter_map(TraceComparison::gain),
        )
    }

    pub fn render_table(&self) -> String {
        let mut s = String::from("x,y,psnr_raw_db,psnr_baseline_db,psnr_pipeline_db,gain_db\n");
        for r in &self.rows {
            let gain = r.gain().map_or_else(String::new, |g| g.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.x, r.y, r.raw, r.baseline, r.pipeline, gain
            );
        }
        s
    }

    pub fn render_summary(&self, mask: Option<&BTreeSet<(usize, usize)>>) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| v.to_string());
        let mut s = String::new();
        let _ = writeln!(s, "q = {}", self.q);
        let _ = writeln!(
            s,
            "q_source = {}",
            if self.q_report.is_some() {
                "auto"
            } else {
                "fixed"
            }
        );
        let _ = writeln!(s, "noise_window = {}", self.noise_window);
        let _ = writeln!(s, "lp_cutoff_hz = {}", self.lp_cutoff_hz);
        let _ = writeln!(s, "roi = {}", self.roi);
        let _ = writeln!(s, "traces = {}", self.rows.len());
        let _ = writeln!(s, "mean_gain_db = {}", fmt(self.mean_gain(None)));
        if let Some(m) = mask {
            let _ = writeln!(s, "masked_traces = {}", m.len());
            let _ = writeln!(s, "mean_gain_masked_db = {}", fmt(self.mean_gain(Some(m))));
        }
        s
    }
}
