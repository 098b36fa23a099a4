//! The versioned benchmark corpus: synthetic scans with known ground truth,
//! the configuration each is processed with, and frozen outcome statistics.
//!
//! Entries never change under a given [`CORPUS_VERSION`]; any edit to a spec,
//! mask or expected statistic requires bumping the version string.

use std::collections::BTreeSet;
use std::path::Path;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::experiment::{compare, Comparison};
use crate::io::KeyValues;
use crate::model::RoiSpec;
use crate::synth::{synth_volume, Reflection, SynthSpec, SynthVolume};

pub const CORPUS_VERSION: &str = "bench-v1";

/// Outcome statistics of one entry, stored with the tolerance they are
/// re-verified against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedStats {
    pub q_final: f64,
    /// Mean pipeline-over-baseline PSNR gain across all traces.
    pub mean_gain_db: f64,
    /// Mean gain across the masked (pulse-carrying) traces.
    pub mean_gain_masked_db: Option<f64>,
    pub tolerance_db: f64,
}

impl ExpectedStats {
    /// Statistics measured from a comparison run.
    pub fn measure(
        cmp: &Comparison,
        mask: &BTreeSet<(usize, usize)>,
        tolerance_db: f64,
    ) -> Result<Self> {
        let nan_free = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| Error::InvalidParams(format!("{what}: no finite PSNR gains")))
        };
        Ok(ExpectedStats {
            q_final: cmp.q,
            mean_gain_db: nan_free(cmp.mean_gain(None), "mean gain")?,
            mean_gain_masked_db: if mask.is_empty() {
                None
            } else {
                Some(nan_free(cmp.mean_gain(Some(mask)), "masked mean gain")?)
            },
            tolerance_db,
        })
    }

    /// Human-readable differences beyond tolerance; empty when `measured`
    /// agrees with `self`.
    pub fn differences(&self, measured: &ExpectedStats) -> Vec<String> {
        let mut out = Vec::new();
        let rel_q =
            (measured.q_final - self.q_final).abs() / self.q_final.abs().max(f64::MIN_POSITIVE);
        if rel_q > 1e-6 {
            out.push(format!(
                "q_final {} != frozen {}",
                measured.q_final, self.q_final
            ));
        }
        if (measured.mean_gain_db - self.mean_gain_db).abs() > self.tolerance_db {
            out.push(format!(
                "mean_gain_db {:.4} outside {:.4} +/- {}",
                measured.mean_gain_db, self.mean_gain_db, self.tolerance_db
            ));
        }
        match (self.mean_gain_masked_db, measured.mean_gain_masked_db) {
            (Some(a), Some(b)) if (a - b).abs() <= self.tolerance_db => {}
            (None, None) => {}
            (a, b) => out.push(format!(
                "mean_gain_masked_db {b:?} outside {a:?} +/- {}",
                self.tolerance_db
            )),
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchEntry {
    pub name: &'static str,
    pub spec: SynthSpec,
    pub nx: usize,
    pub ny: usize,
    pub mask: BTreeSet<(usize, usize)>,
    pub config: PipelineConfig,
    pub expected: ExpectedStats,
}

pub const BENCH_NX: usize = 16;
pub const BENCH_NY: usize = 8;
pub const BENCH_NT: usize = 512;
pub const BENCH_ROI: (usize, usize) = (176, 336);
pub const FROZEN_TOLERANCE_DB: f64 = 0.5;

fn base_spec(seed: u64, impulse_rate: f64, impulse_amp: f64) -> SynthSpec {
    SynthSpec {
        nt: BENCH_NT,
        dt: 1e-8,
        pulse_center_hz: 2.5e6,
        pulse_time_s: 2.56e-6,
        pulse_amp: 1.0,
        noise_sigma: 0.03,
        impulse_rate,
        impulse_amp,
        reflections: vec![Reflection {
            time_s: 4.2e-6,
            amp: 0.4,
        }],
        seed,
    }
}

fn config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        roi: Some(RoiSpec::new(BENCH_ROI.0, BENCH_ROI.1).expect("static ROI")),
        seed,
        ..PipelineConfig::default()
    }
}

/// An L: a bar along x at y = 2 and a foot along y at x = 12.
pub fn l_mask() -> BTreeSet<(usize, usize)> {
    (3..=12)
        .map(|x| (x, 2))
        .chain((2..=5).map(|y| (12, y)))
        .collect()
}

/// Two parallel bars along x at y = 2 and y = 5.
pub fn two_stick_mask() -> BTreeSet<(usize, usize)> {
    (2..=13).flat_map(|x| [(x, 2), (x, 5)]).collect()
}

fn entry(
    name: &'static str,
    seed: u64,
    impulse_rate: f64,
    impulse_amp: f64,
    mask: BTreeSet<(usize, usize)>,
    expected: (f64, f64, Option<f64>),
) -> BenchEntry {
    BenchEntry {
        name,
        spec: base_spec(seed, impulse_rate, impulse_amp),
        nx: BENCH_NX,
        ny: BENCH_NY,
        mask,
        config: config(seed),
        expected: ExpectedStats {
            q_final: expected.0,
            mean_gain_db: expected.1,
            mean_gain_masked_db: expected.2,
            tolerance_db: FROZEN_TOLERANCE_DB,
        },
    }
}

/// The corpus, in a fixed order. Expected statistics are `(q_final,
/// mean_gain_db, mean_gain_masked_db)` from the first recorded run.
pub fn bench_corpus() -> Vec<BenchEntry> {
    vec![
        entry(
            "phantom-L",
            3,
            2.0,
            2.0,
            l_mask(),
            (
                3.9067956276922744e-5,
                0.17887206926431906,
                Some(-4.636306704414334),
            ),
        ),
        entry(
            "two-stick",
            3,
            2.0,
            2.0,
            two_stick_mask(),
            (
                3.970171305430631e-5,
                -0.010786756958050703,
                Some(-3.458138042600307),
            ),
        ),
        entry(
            "noise-only",
            5,
            2.0,
            2.0,
            BTreeSet::new(),
            (1.972909124866519e-5, -0.8216553087650935, None),
        ),
        entry(
            "impulse-heavy",
            13,
            8.0,
            5.0,
            l_mask(),
            (
                8.219143731275294e-5,
                1.984629478573848,
                Some(-0.7216881394214585),
            ),
        ),
    ]
}

pub fn bench_entry(name: &str) -> Option<BenchEntry> {
    bench_corpus().into_iter().find(|e| e.name == name)
}

impl BenchEntry {
    pub fn generate(&self) -> Result<SynthVolume> {
        synth_volume(&self.spec, self.nx, self.ny, &self.mask)
    }

    /// Generates the entry and runs both processing arms on it, with the
    /// paired background.
    pub fn run(&self) -> Result<(SynthVolume, Comparison)> {
        let sv = self.generate()?;
        let cmp = compare(&sv.volume, Some(&sv.background), &self.config)?;
        Ok((sv, cmp))
    }

    pub fn measure(&self) -> Result<ExpectedStats> {
        let (_, cmp) = self.run()?;
        ExpectedStats::measure(&cmp, &self.mask, self.expected.tolerance_db)
    }

    /// Manifest text: the pipeline configuration keys followed by the
    /// generator spec, the mask and the frozen statistics.
    pub fn manifest(&self) -> String {
        let mut kv = KeyValues::new();
        kv.push("corpus_version", CORPUS_VERSION);
        kv.push("name", self.name);
        let cfg = self.config.to_key_values();
        for key in cfg.keys() {
            kv.push(key, cfg.get(key).expect("listed key"));
        }
        let s = &self.spec;
        kv.push("nx", self.nx);
        kv.push("ny", self.ny);
        kv.push("nt", s.nt);
        kv.push("dt", s.dt);
        kv.push("pulse_center_hz", s.pulse_center_hz);
        kv.push("pulse_time_s", s.pulse_time_s);
        kv.push("pulse_amp", s.pulse_amp);
        kv.push("noise_sigma", s.noise_sigma);
        kv.push("impulse_rate", s.impulse_rate);
        kv.push("impulse_amp", s.impulse_amp);
        kv.push(
            "reflections",
            s.reflections
                .iter()
                .map(|r| format!("{}@{}", r.amp, r.time_s))
                .collect::<Vec<_>>()
                .join(" "),
        );
        kv.push("synth_seed", s.seed);
        kv.push(
            "mask",
            self.mask
                .iter()
                .map(|(x, y)| format!("{x}:{y}"))
                .collect::<Vec<_>>()
                .join(" "),
        );
        let e = &self.expected;
        kv.push("expected_q_final", e.q_final);
        kv.push("expected_mean_gain_db", e.mean_gain_db);
        kv.push(
            "expected_mean_gain_masked_db",
            e.mean_gain_masked_db
                .map_or_else(|| "none".to_string(), |v| v.to_string()),
        );
        kv.push("tolerance_db", e.tolerance_db);
        kv.render()
    }
}

/// Reads the mask list of a manifest file.
pub fn manifest_mask(kv: &KeyValues, origin: &Path) -> Result<BTreeSet<(usize, usize)>> {
    kv.require("mask", origin)?
        .split_whitespace()
        .map(|p| {
            let bad = || Error::format(origin, format!("bad mask coordinate '{p}'"));
            let (x, y) = p.split_once(':').ok_or_else(bad)?;
            Ok((x.parse().map_err(|_| bad())?, y.parse().map_err(|_| bad())?))
        })
        .collect()
}
