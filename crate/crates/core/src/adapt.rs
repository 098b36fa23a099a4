//! Adaptive noise parameters: one shared process noise Q picked by a filter
//! bank, and a per-trace measurement noise R taken from leading noise points.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{QSelectionReport, RoiSpec, Trace, Volume};
use crate::recon::{psnr, Psnr};
use crate::rts::denoise_trace;

/// Traces scored per selection run unless configured otherwise.
pub const DEFAULT_N_SAMPLE: usize = 32;
/// Points in the default log-spaced Q grid.
pub const DEFAULT_GRID_POINTS: usize = 15;
/// Default grid spans `[1e-6, 1e-1]` times the median noise power.
pub const DEFAULT_GRID_SPAN: (f64, f64) = (1e-6, 1e-1);

/// Mean square of the first `noise_window` samples.
pub fn estimate_r(trace: &Trace, noise_window: usize) -> Result<f64> {
    if noise_window == 0 || noise_window > trace.len() {
        return Err(Error::NoiseWindow {
            window: noise_window,
            len: trace.len(),
        });
    }
    let prefix = &trace.samples()[..noise_window];
    Ok(prefix.iter().map(|s| s * s).sum::<f64>() / noise_window as f64)
}

/// 5% of the trace (rounded up), at least 16 samples, never past the end.
pub fn default_noise_window(nt: usize) -> usize {
    (nt * 5).div_ceil(100).max(16).min(nt)
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Default grid anchored to a measured noise power.
pub fn default_q_grid(noise_power: f64) -> Result<Vec<f64>> {
    if !(noise_power.is_finite() && noise_power > 0.0) {
        return Err(Error::ZeroNoisePower);
    }
    let (lo, hi) = DEFAULT_GRID_SPAN;
    Ok(log_grid(
        lo * noise_power,
        hi * noise_power,
        DEFAULT_GRID_POINTS,
    ))
}

/// Draws `n_sample` distinct trace coordinates uniformly at random.
///
/// The generator is ChaCha8 seeded from `seed` via `seed_from_u64`, and the
/// draw uses `rand::seq::index::sample`; both are fixed algorithms, so the
/// selection is identical on every platform.
pub fn sample_trace_ids(
    volume: &Volume,
    n_sample: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    let available = volume.trace_count();
    if n_sample == 0 || n_sample > available {
        return Err(Error::SampleCount {
            requested: n_sample,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, available, n_sample)
        .into_iter()
        .map(|i| volume.coords(i))
        .collect())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some(&bad) = grid.iter().find(|q| !(q.is_finite() && **q > 0.0)) {
        return Err(Error::InvalidGridValue(bad));
    }
    Ok(())
}

/// Scores every grid value on one trace: denoise, then envelope PSNR.
pub fn score_grid(trace: &Trace, r: f64, grid: &[f64], roi: RoiSpec) -> Result<Vec<Psnr>> {
    grid.iter()
        .map(|&q| psnr(&denoise_trace(trace, q, r)?, roi))
        .collect()
}

/// Index of the best score; the earliest grid point wins ties.
fn best_index(scores: &[Psnr]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.as_f64() > scores[best].as_f64() {
            best = i;
        }
    }
    best
}

/// Filter-bank selection of the shared Q.
///
/// Each sampled trace is denoised at every grid value with its own R, the
/// value with the highest PSNR is kept, and the final Q is the mean of the
/// per-trace winners.
pub fn select_q(
    volume: &Volume,
    grid: &[f64],
    n_sample: usize,
    seed: u64,
    noise_window: usize,
    roi: RoiSpec,
) -> Result<QSelectionReport> {
    check_grid(grid)?;
    roi.check(volume.nt())?;
    let ids = sample_trace_ids(volume, n_sample, seed)?;
    select_q_for(volume, grid, ids, noise_window, roi)
}

/// Same as [`select_q`] with the default grid, anchored on the median R of
/// the sampled traces.
pub fn select_q_auto(
    volume: &Volume,
    n_sample: usize,
    seed: u64,
    noise_window: usize,
    roi: RoiSpec,
) -> Result<QSelectionReport> {
    roi.check(volume.nt())?;
    let ids = sample_trace_ids(volume, n_sample, seed)?;
    let mut rs = ids
        .iter()
        .map(|&(x, y)| estimate_r(&volume.trace(x, y), noise_window).map_err(|e| e.at_trace(x, y)))
        .collect::<Result<Vec<f64>>>()?;
    rs.sort_by(f64::total_cmp);
    let mid = rs.len() / 2;
    let median = if rs.len() % 2 == 1 {
        rs[mid]
    } else {
        0.5 * (rs[mid - 1] + rs[mid])
    };
    let grid = default_q_grid(median)?;
    select_q_for(volume, &grid, ids, noise_window, roi)
}

fn select_q_for(
    volume: &Volume,
    grid: &[f64],
    ids: Vec<(usize, usize)>,
    noise_window: usize,
    roi: RoiSpec,
) -> Result<QSelectionReport> {
    let per_trace: Vec<Result<(f64, usize, Psnr)>> = ids
        .par_iter()
        .map(|&(x, y)| {
            let tr = volume.trace(x, y);
            let run = || -> Result<(f64, usize, Psnr)> {
                let r = estimate_r(&tr, noise_window)?;
                let scores = score_grid(&tr, r, grid, roi)?;
                let best = best_index(&scores);
                Ok((r, best, scores[best]))
            };
            run().map_err(|e| e.at_trace(x, y))
        })
        .collect();

    let mut r_per_trace = Vec::with_capacity(ids.len());
    let mut best_q_per_trace = Vec::with_capacity(ids.len());
    let mut best_psnr_db = Vec::with_capacity(ids.len());
    for res in per_trace {
        let (r, best, score) = res?;
        r_per_trace.push(r);
        best_q_per_trace.push(grid[best]);
        best_psnr_db.push(score.db());
    }
    let q_final = best_q_per_trace.iter().sum::<f64>() / best_q_per_trace.len() as f64;
    Ok(QSelectionReport {
        grid: grid.to_vec(),
        sampled_trace_ids: ids,
        r_per_trace,
        best_q_per_trace,
        best_psnr_db,
        q_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(v: Vec<f64>) -> Trace {
        Trace::new(v, 1e-8).unwrap()
    }

    #[test]
    fn r_of_zero_prefix() {
        let t = tr(vec![0.0, 0.0, 0.0, 0.0, 5.0, 6.0]);
        assert_eq!(estimate_r(&t, 4).unwrap(), 0.0);
    }

    #[test]
    fn r_of_unit_alternation() {
        let t = tr(vec![1.0, -1.0, 1.0, -1.0, 9.0]);
        assert_eq!(estimate_r(&t, 4).unwrap(), 1.0);
    }

    #[test]
    fn r_window_bounds() {
        let t = tr(vec![1.0; 4]);
        assert!(estimate_r(&t, 0).is_err());
        assert!(estimate_r(&t, 5).is_err());
        assert!(estimate_r(&t, 4).is_ok());
    }

    #[test]
    fn r_scales_quadratically_for_binary_scales() {
        let t = tr((0..50).map(|k| (k as f64 * 0.37).sin()).collect());
        let base = estimate_r(&t, 50).unwrap();
        for a in [2.0, 0.25, -8.0] {
            assert_eq!(estimate_r(&t.scaled(a).unwrap(), 50).unwrap(), a * a * base);
        }
    }

    #[test]
    fn noise_window_defaults() {
        assert_eq!(default_noise_window(2048), 103);
        assert_eq!(default_noise_window(512), 26);
        assert_eq!(default_noise_window(100), 16);
        assert_eq!(default_noise_window(10), 10);
    }

    #[test]
    fn grid_endpoints() {
        let g = default_q_grid(2.0).unwrap();
        assert_eq!(g.len(), 15);
        assert!((g[0] - 2e-6).abs() < 1e-20);
        assert_eq!(g[14], 0.2);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(default_q_grid(0.0).is_err());
    }

    #[test]
    fn sampling_is_distinct_and_seeded() {
        let v = Volume::zeros(5, 7, 4, 1.0).unwrap();
        let a = sample_trace_ids(&v, 20, 9).unwrap();
        let b = sample_trace_ids(&v, 20, 9).unwrap();
        assert_eq!(a, b);
        let mut s = a.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 20);
        assert!(sample_trace_ids(&v, 36, 9).is_err());
        assert!(sample_trace_ids(&v, 0, 9).is_err());
    }

    #[test]
    fn grid_errors() {
        let v = Volume::zeros(2, 2, 64, 1.0).unwrap();
        let roi = RoiSpec::new(20, 40).unwrap();
        assert!(matches!(
            select_q(&v, &[], 1, 0, 16, roi),
            Err(Error::EmptyGrid)
        ));
        assert!(matches!(
            select_q(&v, &[1.0, -1.0], 1, 0, 16, roi),
            Err(Error::InvalidGridValue(_))
        ));
    }
}
