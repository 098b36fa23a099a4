//! The `mkf` command-line driver for the Kalman/RTS de-noising pipeline.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data or format
//! errors, 3 when the model degenerates numerically.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use mkf_core::baseline::{baseline_denoise, pipeline_denoise};
use mkf_core::bench::{bench_corpus, bench_entry};
use mkf_core::config::PipelineConfig;
use mkf_core::error::{Error, ErrorClass};
use mkf_core::experiment::{compare, psnr_table, render_psnr_table, resolve_q, run_q_selection};
use mkf_core::io::{
    read_mask, read_volume, render_mask, render_q_report, write_atomic, write_image, write_volume,
    Dtype,
};
use mkf_core::model::{RoiSpec, Volume};
use mkf_core::recon::reconstruct;

#[derive(Debug, Parser)]
#[command(
    name = "mkf",
    version,
    about = "Kalman/RTS de-noising of photoacoustic A-scan volumes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic volume, its background, clean component and truth mask.
    Synth(SynthArgs),
    /// Pick the shared process noise Q and write the selection report.
    Qselect(Common),
    /// Run the Kalman/RTS pipeline (with background subtraction if given).
    Denoise(Common),
    /// Run the low-pass comparison arm (with background subtraction if given).
    Baseline(Common),
    /// Form the maximum-envelope image of a volume.
    Reconstruct(Common),
    /// Per-trace PSNR table.
    Metrics(Common),
    /// Run both arms on one input and write the report, summary and images.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input volume header.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Background volume header.
    #[arg(long)]
    background: Option<PathBuf>,
    /// Output path (volume header, report, image or directory).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Process noise: a positive number or "auto".
    #[arg(long)]
    q: Option<String>,
    /// Comma-separated candidate Q values, or "auto".
    #[arg(long = "q-grid")]
    q_grid: Option<String>,
    #[arg(long = "n-sample")]
    n_sample: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Leading samples used to estimate R: a positive count or "auto".
    #[arg(long = "noise-window")]
    noise_window: Option<String>,
    /// Signal window `t_lo:t_hi` (samples, end exclusive).
    #[arg(long)]
    roi: Option<String>,
    #[arg(long = "lp-cutoff-hz")]
    lp_cutoff_hz: Option<String>,
    /// Sample encoding of written volumes: f32le or f64le (default).
    #[arg(long)]
    dtype: Option<String>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Benchmark corpus entry to generate.
    #[arg(long, default_value = "phantom-L")]
    entry: String,
    /// Overrides the entry's generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output volume header; siblings are written next to it.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "f64le")]
    dtype: String,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Truth mask (`x,y` CSV); adds the masked mean gain to the summary.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Loads the config file (if any), then applies flag overrides.
fn load_config(c: &Common) -> CliResult<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::read(p)?,
        None => PipelineConfig::default(),
    };
    let flags = [
        ("q", &c.q),
        ("q_grid", &c.q_grid),
        ("n_sample", &c.n_sample),
        ("seed", &c.seed),
        ("noise_window", &c.noise_window),
        ("roi", &c.roi),
        ("lp_cutoff_hz", &c.lp_cutoff_hz),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)
                .map_err(|m| usage(format!("--{}: {m}", key.replace('_', "-"))))?;
        }
    }
    if let Some(bg) = &c.background {
        cfg.background_path = Some(bg.clone());
    }
    Ok(cfg)
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| usage(format!("missing required flag --{flag}")))
}

fn require_roi(cfg: &PipelineConfig) -> CliResult<RoiSpec> {
    cfg.roi
        .ok_or_else(|| usage("an ROI is required (--roi t_lo:t_hi or roi in the config)"))
}

fn read_input(path: &Path) -> CliResult<Volume> {
    Ok(read_volume(path)?)
}

fn read_background(cfg: &PipelineConfig, input: &Volume) -> CliResult<Option<Volume>> {
    let Some(p) = &cfg.background_path else {
        return Ok(None);
    };
    let bg = read_input(p)?;
    input.same_shape(&bg).map_err(|e| Error::Format {
        path: p.clone(),
        message: format!("background does not match the input: {e}"),
    })?;
    Ok(Some(bg))
}

fn output_dtype(flag: &Option<String>) -> CliResult<Dtype> {
    match flag {
        Some(s) => s
            .parse()
            .map_err(|e: String| usage(format!("--dtype: {e}"))),
        None => Ok(Dtype::F64Le),
    }
}

fn warn_roi(roi: RoiSpec, nt: usize) {
    if roi.touches_edges(nt) {
        warn!("ROI {roi} reaches the outer 10% of {nt} samples; envelope edge transients may bias PSNR");
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(write_atomic(path, text.as_bytes())?)
}

fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn provenance(cmd: &str, input: &Path) -> String {
    format!("mkf {cmd} of {}", input.display())
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let mut entry = bench_entry(&a.entry).ok_or_else(|| {
        let names: Vec<_> = bench_corpus().iter().map(|e| e.name).collect();
        usage(format!(
            "unknown entry '{}' (known: {})",
            a.entry,
            names.join(", ")
        ))
    })?;
    if let Some(seed) = a.seed {
        entry.spec.seed = seed;
    }
    let dtype: Dtype = a
        .dtype
        .parse()
        .map_err(|e: String| usage(format!("--dtype: {e}")))?;
    let sv = entry.generate()?;
    let prov = format!("mkf synth entry={} seed={}", entry.name, entry.spec.seed);
    write_volume(&sv.volume, &a.output, dtype, Some(&prov))?;
    write_volume(
        &sv.background,
        &sibling(&a.output, "_background", "hdr"),
        dtype,
        Some(&prov),
    )?;
    write_volume(
        &sv.clean,
        &sibling(&a.output, "_clean", "hdr"),
        dtype,
        Some(&prov),
    )?;
    write_text(
        &sibling(&a.output, "_mask", "csv"),
        &render_mask(&sv.truth_mask),
    )?;
    write_text(&sibling(&a.output, "_manifest", "txt"), &entry.manifest())?;
    info!(
        "wrote {} ({}x{}x{})",
        a.output.display(),
        entry.nx,
        entry.ny,
        entry.spec.nt
    );
    Ok(())
}

fn cmd_qselect(c: &Common) -> CliResult<()> {
    let cfg = load_config(c)?;
    let input = require(&c.input, "input")?;
    let output = require(&c.output, "output")?;
    let roi = require_roi(&cfg)?;
    let vol = read_input(input)?;
    warn_roi(roi, vol.nt());
    let report = run_q_selection(&vol, &cfg, roi)?;
    info!("q_final = {}", report.q_final);
    write_text(output, &render_q_report(&report))
}

fn resolve_q_logged(vol: &Volume, cfg: &PipelineConfig) -> CliResult<f64> {
    if let Some(roi) = cfg.roi {
        warn_roi(roi, vol.nt());
    }
    let (q, report) = resolve_q(vol, cfg).map_err(|e| match e {
        Error::InvalidParams(m) if cfg.roi.is_none() => usage(m),
        e => CliError::Run(e),
    })?;
    if report.is_some() {
        info!("q_final = {q}");
    }
    Ok(q)
}

fn cmd_denoise(c: &Common) -> CliResult<()> {
    let cfg = load_config(c)?;
    let input = require(&c.input, "input")?;
    let output = require(&c.output, "output")?;
    let vol = read_input(input)?;
    let dtype = output_dtype(&c.dtype)?;
    let bg = read_background(&cfg, &vol)?;
    let q = resolve_q_logged(&vol, &cfg)?;
    let out = pipeline_denoise(&vol, bg.as_ref(), q, cfg.noise_window_for(vol.nt()))?;
    write_volume(&out, output, dtype, Some(&provenance("denoise", input)))?;
    Ok(())
}

fn cmd_baseline(c: &Common) -> CliResult<()> {
    let cfg = load_config(c)?;
    let input = require(&c.input, "input")?;
    let output = require(&c.output, "output")?;
    let vol = read_input(input)?;
    let dtype = output_dtype(&c.dtype)?;
    let bg = read_background(&cfg, &vol)?;
    let out = baseline_denoise(&vol, bg.as_ref(), cfg.lp_cutoff_hz)?;
    write_volume(&out, output, dtype, Some(&provenance("baseline", input)))?;
    Ok(())
}

fn cmd_reconstruct(c: &Common) -> CliResult<()> {
    let input = require(&c.input, "input")?;
    let output = require(&c.output, "output")?;
    let vol = read_input(input)?;
    let meta = write_image(&reconstruct(&vol)?, output)?;
    if meta.degenerate {
        warn!("image is uniform ({}); written as mid-gray", meta.min);
    }
    Ok(())
}

fn cmd_metrics(c: &Common) -> CliResult<()> {
    let cfg = load_config(c)?;
    let input = require(&c.input, "input")?;
    let roi = require_roi(&cfg)?;
    let vol = read_input(input)?;
    warn_roi(roi, vol.nt());
    let table = render_psnr_table(&psnr_table(&vol, roi)?);
    match &c.output {
        Some(p) => write_text(p, &table),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn cmd_compare(a: &CompareArgs) -> CliResult<()> {
    let c = &a.common;
    let cfg = load_config(c)?;
    let input = require(&c.input, "input")?;
    let out_dir = require(&c.output, "output")?;
    let roi = require_roi(&cfg)?;
    let vol = read_input(input)?;
    warn_roi(roi, vol.nt());
    let bg = read_background(&cfg, &vol)?;
    let mask: Option<BTreeSet<(usize, usize)>> = match &a.truth {
        Some(p) => Some(read_mask(p)?),
        None => None,
    };
    let cmp = compare(&vol, bg.as_ref(), &cfg)?;
    if cmp.q_report.is_some() {
        info!("q_final = {}", cmp.q);
    }
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    write_text(&out_dir.join("report.csv"), &cmp.render_table())?;
    write_text(
        &out_dir.join("summary.txt"),
        &cmp.render_summary(mask.as_ref()),
    )?;
    if let Some(report) = &cmp.q_report {
        write_text(&out_dir.join("qselect.csv"), &render_q_report(report))?;
    }
    write_image(&cmp.raw_image, &out_dir.join("raw.pgm"))?;
    write_image(&cmp.baseline_image, &out_dir.join("baseline.pgm"))?;
    write_image(&cmp.pipeline_image, &out_dir.join("pipeline.pgm"))?;
    match cmp.mean_gain(mask.as_ref()) {
        Some(g) => info!("mean PSNR gain of pipeline over baseline: {g:.3} dB"),
        None => warn!("no finite PSNR gains to average"),
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Qselect(c) => cmd_qselect(c),
        Command::Denoise(c) => cmd_denoise(c),
        Command::Baseline(c) => cmd_baseline(c),
        Command::Reconstruct(c) => cmd_reconstruct(c),
        Command::Metrics(c) => cmd_metrics(c),
        Command::Compare(a) => cmd_compare(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status. Diagnostics go to stderr.
pub fn run_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("mkf: usage error: {m}");
            1
        }
        Err(CliError::Run(e)) => {
            let (label, code) = match e.class() {
                ErrorClass::Data => ("data error", 2),
                ErrorClass::Numerical => ("numerical error", 3),
            };
            eprintln!("mkf: {label}: {e}");
            code
        }
    }
}
